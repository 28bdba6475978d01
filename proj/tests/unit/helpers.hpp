#pragma once

#include <preftrade/common.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace testutil {

// Scratch directory wiped on destruction; every test writes under its own.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(std::string_view tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        path = base / ("preftrade_" + std::string(tag) + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(std::string_view name) const { return (path / name).string(); }
};

inline std::string write(const TempDir& dir, std::string_view name, std::string_view content) {
    std::string p = dir.file(name);
    preftrade::atomic_write_file(p, content, "test");
    return p;
}

inline std::string fixture(std::string_view rel) {
    return std::string(PREFTRADE_FIXTURES_DIR) + "/" + std::string(rel);
}

}  // namespace testutil
