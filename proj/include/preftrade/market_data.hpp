#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/common.hpp"
#include "preftrade/csv.hpp"

namespace preftrade {

inline constexpr const char* kMarketDataModule = "market-data";

// ---------------------------------------------------------------------------
// Domain types

struct Candle {
    Asset asset{};
    Day date{};
    double open = 0, high = 0, low = 0, close = 0;
    double volume = 0;
    double market_cap = 0;

    bool operator==(const Candle&) const = default;
};

struct OnChainDaily {
    Asset asset{};
    Day date{};
    std::int64_t tx_count = 0;
    std::int64_t active_wallets = 0;
    double value_transferred_usd = 0;
    double gas_price_mean_gwei = 0;
    double gas_price_median_gwei = 0;
    double gas_consumed = 0;

    bool operator==(const OnChainDaily&) const = default;
};

struct NewsArticle {
    std::string id;
    Instant timestamp = 0;
    std::string publisher;
    std::string url;
    std::string headline;
    std::string body;
    std::uint64_t simhash = 0;

    bool operator==(const NewsArticle&) const = default;
};

struct SentimentSnapshot {
    Day date{};
    std::vector<double> vector;

    bool operator==(const SentimentSnapshot&) const = default;
};

enum class RegimeLabel { Bull, Sideways, Bear };

inline const char* to_string(RegimeLabel l) {
    switch (l) {
        case RegimeLabel::Bull: return "bull";
        case RegimeLabel::Sideways: return "sideways";
        case RegimeLabel::Bear: return "bear";
    }
    return "?";
}

inline std::optional<RegimeLabel> parse_regime_label(std::string_view s) {
    if (s == "bull") return RegimeLabel::Bull;
    if (s == "sideways") return RegimeLabel::Sideways;
    if (s == "bear") return RegimeLabel::Bear;
    return std::nullopt;
}

struct RegimeWindow {
    Asset asset{};
    RegimeLabel label{};
    Day start{};
    Day end{};
    double open_price = 0;
    double close_price = 0;

    double trend_pct() const;
    bool operator==(const RegimeWindow&) const = default;
};

struct PromptContext {
    Day date{};
    PerAsset<Candle> candles{};
    PerAsset<OnChainDaily> onchain{};
    std::vector<std::string> news_digest;  // deduplicated article ids, (ts, id) order
    SentimentSnapshot sentiment;
};

// Percentage move from a window's open to its close.
inline double regime_trend(double open_price, double close_price) {
    if (!(open_price > 0)) fail(kMarketDataModule, "regime_trend: non-positive open price");
    return 100.0 * (close_price / open_price - 1.0);
}

inline double RegimeWindow::trend_pct() const { return regime_trend(open_price, close_price); }

// ---------------------------------------------------------------------------
// SimHash

// Features are 2-shingles over lowercase alphanumeric word runs. Texts with
// fewer than two words produce no features; the >= 0 tie rule then sets every
// bit, so such texts share the all-ones fingerprint.
inline std::vector<std::string> word_shingles(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur.push_back(char(c));
        } else {
            flush();
        }
    }
    flush();
    std::vector<std::string> shingles;
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        shingles.push_back(words[i] + " " + words[i + 1]);
    }
    return shingles;
}

// Charikar sign-fingerprint: accumulate +1/-1 per feature bit, set bit when
// the sum is >= 0. Per-feature hash is FNV-1a 64 (fixed offset basis as the
// pinned seed).
inline std::uint64_t simhash64(std::string_view text) {
    std::array<std::int64_t, 64> weight{};
    for (const std::string& f : word_shingles(text)) {
        std::uint64_t h = fnv1a64(f);
        for (int b = 0; b < 64; ++b) {
            weight[std::size_t(b)] += (h >> b) & 1u ? 1 : -1;
        }
    }
    std::uint64_t out = 0;
    for (int b = 0; b < 64; ++b) {
        if (weight[std::size_t(b)] >= 0) out |= std::uint64_t(1) << b;
    }
    return out;
}

inline int hamming64(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

// Keep one article per near-duplicate cluster (connected components of the
// Hamming <= max_hamming relation). The earliest timestamp in a cluster
// survives, earlier input position breaking ties; output keeps input order.
inline std::vector<NewsArticle> dedup_news(const std::vector<NewsArticle>& articles,
                                           int max_hamming) {
    if (max_hamming < 0 || max_hamming > 64)
        fail(kMarketDataModule, "dedup_news: max_hamming must lie in [0, 64]");
    const std::size_t n = articles.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (hamming64(articles[i].simhash, articles[j].simhash) <= max_hamming) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<std::size_t> best(n, std::size_t(-1));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = find(i);
        if (best[r] == std::size_t(-1) || articles[i].timestamp < articles[best[r]].timestamp) {
            best[r] = i;
        }
    }
    std::vector<NewsArticle> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (best[find(i)] == i) out.push_back(articles[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixture loaders

inline std::vector<Candle> load_candles(const std::string& path) {
    const std::string mod = kMarketDataModule;
    csv::Table table(read_file(path, mod), mod, path,
                     {"asset", "date", "open", "high", "low", "close", "volume", "market_cap"});
    std::vector<std::pair<Candle, int>> recs;
    for (const auto& row : table.rows()) {
        Candle c;
        c.asset = csv::need_asset(row, 0, mod, path);
        c.date = csv::need_day(row, 1, mod, path);
        c.open = csv::need_double(row, 2, mod, path);
        c.high = csv::need_double(row, 3, mod, path);
        c.low = csv::need_double(row, 4, mod, path);
        c.close = csv::need_double(row, 5, mod, path);
        c.volume = csv::need_double(row, 6, mod, path);
        c.market_cap = csv::need_double(row, 7, mod, path);
        auto where = path + ":" + std::to_string(row.line_no);
        if (!(c.open > 0 && c.high > 0 && c.low > 0 && c.close > 0))
            fail(mod, where + ": prices must be positive");
        if (c.low > std::min(c.open, c.close))
            fail(mod, where + ": low above min(open, close)");
        if (c.high < std::max(c.open, c.close))
            fail(mod, where + ": high below max(open, close)");
        if (c.volume < 0 || c.market_cap < 0)
            fail(mod, where + ": volume and market_cap must be non-negative");
        recs.emplace_back(c, row.line_no);
    }
    std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
        return std::pair(int(a.first.asset), a.first.date.value) <
               std::pair(int(b.first.asset), b.first.date.value);
    });
    for (std::size_t i = 1; i < recs.size(); ++i) {
        if (recs[i].first.asset == recs[i - 1].first.asset &&
            recs[i].first.date == recs[i - 1].first.date) {
            fail(mod, path + ":" + std::to_string(recs[i].second) + ": duplicate (" +
                          to_string(recs[i].first.asset) + ", " + format_day(recs[i].first.date) +
                          ")");
        }
    }
    std::vector<Candle> out;
    out.reserve(recs.size());
    for (auto& [c, line] : recs) out.push_back(c);
    return out;
}

inline std::vector<OnChainDaily> load_onchain(const std::string& path) {
    const std::string mod = kMarketDataModule;
    csv::Table table(read_file(path, mod), mod, path,
                     {"asset", "date", "tx_count", "active_wallets", "value_usd", "gas_mean_gwei",
                      "gas_median_gwei", "gas_used"});
    std::vector<std::pair<OnChainDaily, int>> recs;
    for (const auto& row : table.rows()) {
        OnChainDaily r;
        r.asset = csv::need_asset(row, 0, mod, path);
        r.date = csv::need_day(row, 1, mod, path);
        r.tx_count = csv::need_int(row, 2, mod, path);
        r.active_wallets = csv::need_int(row, 3, mod, path);
        r.value_transferred_usd = csv::need_double(row, 4, mod, path);
        r.gas_price_mean_gwei = csv::need_double(row, 5, mod, path);
        r.gas_price_median_gwei = csv::need_double(row, 6, mod, path);
        r.gas_consumed = csv::need_double(row, 7, mod, path);
        auto where = path + ":" + std::to_string(row.line_no);
        if (r.tx_count < 0 || r.active_wallets < 0 || r.value_transferred_usd < 0 ||
            r.gas_price_mean_gwei < 0 || r.gas_price_median_gwei < 0 || r.gas_consumed < 0) {
            fail(mod, where + ": fields must be non-negative");
        }
        recs.emplace_back(r, row.line_no);
    }
    std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
        return std::pair(int(a.first.asset), a.first.date.value) <
               std::pair(int(b.first.asset), b.first.date.value);
    });
    for (std::size_t i = 1; i < recs.size(); ++i) {
        if (recs[i].first.asset == recs[i - 1].first.asset &&
            recs[i].first.date == recs[i - 1].first.date) {
            fail(mod, path + ":" + std::to_string(recs[i].second) + ": duplicate (" +
                          to_string(recs[i].first.asset) + ", " + format_day(recs[i].first.date) +
                          ")");
        }
    }
    std::vector<OnChainDaily> out;
    out.reserve(recs.size());
    for (auto& [r, line] : recs) out.push_back(r);
    return out;
}

// news.jsonl: one object per line, keys id, ts, publisher, url, headline,
// body. Fingerprints are computed here, never loaded.
inline std::vector<NewsArticle> load_news(const std::string& path) {
    const std::string mod = kMarketDataModule;
    std::string text = read_file(path, mod);
    std::vector<NewsArticle> out;
    std::string_view rest(text);
    int line_no = 0;
    while (!rest.empty()) {
        std::size_t pos = rest.find('\n');
        std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
        rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto where = path + ":" + std::to_string(line_no);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail(mod, where + ": invalid JSON object");
        NewsArticle a;
        try {
            a.id = j.at("id").get<std::string>();
            std::string ts = j.at("ts").get<std::string>();
            auto t = parse_instant(ts);
            if (!t) fail(mod, where + ": bad timestamp '" + ts + "'");
            a.timestamp = *t;
            a.publisher = j.at("publisher").get<std::string>();
            a.url = j.at("url").get<std::string>();
            a.headline = j.at("headline").get<std::string>();
            a.body = j.at("body").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(mod, where + ": " + e.what());
        }
        if (a.headline.empty()) fail(mod, where + ": empty headline");
        a.simhash = simhash64(a.headline + " " + a.body);
        out.push_back(std::move(a));
    }
    return out;
}

inline std::vector<SentimentSnapshot> load_sentiment(const std::string& path) {
    const std::string mod = kMarketDataModule;
    std::string text = read_file(path, mod);
    std::string_view rest(text);
    std::vector<SentimentSnapshot> out;
    int line_no = 0;
    std::size_t dim = 0;
    bool saw_header = false;
    while (!rest.empty()) {
        std::size_t pos = rest.find('\n');
        std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
        rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fields = csv::split(line);
        auto where = path + ":" + std::to_string(line_no);
        if (!saw_header) {
            saw_header = true;
            if (fields.size() < 2 || fields[0] != "date")
                fail(mod, where + ": header must be date,v0,...");
            dim = fields.size() - 1;
            for (std::size_t i = 1; i < fields.size(); ++i) {
                std::string expect = "v" + std::to_string(i - 1);
                if (fields[i] != expect)
                    fail(mod, where + ": expected header field '" + expect + "'");
            }
            continue;
        }
        if (fields.size() != dim + 1)
            fail(mod, where + ": expected " + std::to_string(dim + 1) + " fields");
        SentimentSnapshot s;
        auto d = parse_day(fields[0]);
        if (!d) fail(mod, where + ": bad date '" + std::string(fields[0]) + "'");
        s.date = *d;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            auto v = parse_double(fields[i]);
            if (!v || !std::isfinite(*v))
                fail(mod, where + ": bad value '" + std::string(fields[i]) + "'");
            s.vector.push_back(*v);
        }
        out.push_back(std::move(s));
    }
    if (!saw_header) fail(mod, path + ": empty file, header row required");
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].date == out[i - 1].date)
            fail(mod, path + ": duplicate sentiment date " + format_day(out[i].date));
    }
    return out;
}

inline std::vector<RegimeWindow> load_regimes(const std::string& path) {
    const std::string mod = kMarketDataModule;
    csv::Table table(read_file(path, mod), mod, path,
                     {"asset", "label", "start", "end", "open", "close"});
    std::vector<RegimeWindow> out;
    for (const auto& row : table.rows()) {
        RegimeWindow w;
        w.asset = csv::need_asset(row, 0, mod, path);
        auto where = path + ":" + std::to_string(row.line_no);
        auto label = parse_regime_label(row.fields[1]);
        if (!label) fail(mod, where + ": unknown label '" + std::string(row.fields[1]) + "'");
        w.label = *label;
        w.start = csv::need_day(row, 2, mod, path);
        w.end = csv::need_day(row, 3, mod, path);
        w.open_price = csv::need_double(row, 4, mod, path);
        w.close_price = csv::need_double(row, 5, mod, path);
        if (!(w.start < w.end)) fail(mod, where + ": start must precede end");
        if (!(w.open_price > 0 && w.close_price > 0))
            fail(mod, where + ": prices must be positive");
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serializers (inverse of the loaders; loaders(serializers(x)) == x)

inline std::string serialize_candles(const std::vector<Candle>& candles) {
    std::string out = "asset,date,open,high,low,close,volume,market_cap\n";
    for (const auto& c : candles) {
        out += std::string(to_string(c.asset)) + "," + format_day(c.date) + "," +
               fmt_double(c.open) + "," + fmt_double(c.high) + "," + fmt_double(c.low) + "," +
               fmt_double(c.close) + "," + fmt_double(c.volume) + "," + fmt_double(c.market_cap) +
               "\n";
    }
    return out;
}

inline std::string serialize_onchain(const std::vector<OnChainDaily>& recs) {
    std::string out = "asset,date,tx_count,active_wallets,value_usd,gas_mean_gwei,gas_median_gwei,gas_used\n";
    for (const auto& r : recs) {
        out += std::string(to_string(r.asset)) + "," + format_day(r.date) + "," +
               std::to_string(r.tx_count) + "," + std::to_string(r.active_wallets) + "," +
               fmt_double(r.value_transferred_usd) + "," + fmt_double(r.gas_price_mean_gwei) +
               "," + fmt_double(r.gas_price_median_gwei) + "," + fmt_double(r.gas_consumed) + "\n";
    }
    return out;
}

inline std::string serialize_news(const std::vector<NewsArticle>& articles) {
    std::string out;
    for (const auto& a : articles) {
        nlohmann::json j{{"id", a.id},           {"ts", format_instant(a.timestamp)},
                         {"publisher", a.publisher}, {"url", a.url},
                         {"headline", a.headline},   {"body", a.body}};
        out += j.dump() + "\n";
    }
    return out;
}

inline std::string serialize_sentiment(const std::vector<SentimentSnapshot>& snaps) {
    std::size_t dim = snaps.empty() ? 0 : snaps.front().vector.size();
    std::string out = "date";
    for (std::size_t i = 0; i < dim; ++i) out += ",v" + std::to_string(i);
    out += "\n";
    for (const auto& s : snaps) {
        out += format_day(s.date);
        for (double v : s.vector) out += "," + fmt_double(v);
        out += "\n";
    }
    return out;
}

inline std::string serialize_regimes(const std::vector<RegimeWindow>& windows) {
    std::string out = "asset,label,start,end,open,close\n";
    for (const auto& w : windows) {
        out += std::string(to_string(w.asset)) + "," + to_string(w.label) + "," +
               format_day(w.start) + "," + format_day(w.end) + "," + fmt_double(w.open_price) +
               "," + fmt_double(w.close_price) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus

// Immutable after load; concurrent reads are safe.
class MarketCorpus {
public:
    MarketCorpus() = default;

    MarketCorpus(std::vector<Candle> candles, std::vector<OnChainDaily> onchain,
                 std::vector<NewsArticle> news, std::vector<SentimentSnapshot> sentiment,
                 int max_hamming = 3) {
        for (const auto& c : candles) candles_[{int(c.asset), c.date.value}] = c;
        for (const auto& r : onchain) onchain_[{int(r.asset), r.date.value}] = r;
        for (const auto& s : sentiment) {
            if (!sentiment_.empty() && s.vector.size() != dim_) {
                fail(kMarketDataModule, "sentiment dimension changes at " + format_day(s.date));
            }
            dim_ = s.vector.size();
            sentiment_[s.date.value] = s;
        }
        news_raw_count_ = news.size();
        news_ = dedup_news(news, max_hamming);
        std::stable_sort(news_.begin(), news_.end(), [](const auto& a, const auto& b) {
            return std::pair(a.timestamp, a.id) < std::pair(b.timestamp, b.id);
        });
    }

    static MarketCorpus load(const std::string& candles_path, const std::string& onchain_path,
                             const std::string& news_path, const std::string& sentiment_path,
                             int max_hamming = 3) {
        return MarketCorpus(load_candles(candles_path), load_onchain(onchain_path),
                            load_news(news_path), load_sentiment(sentiment_path), max_hamming);
    }

    const Candle* candle(Asset a, Day d) const {
        auto it = candles_.find({int(a), d.value});
        return it == candles_.end() ? nullptr : &it->second;
    }

    const OnChainDaily* onchain(Asset a, Day d) const {
        auto it = onchain_.find({int(a), d.value});
        return it == onchain_.end() ? nullptr : &it->second;
    }

    const SentimentSnapshot* sentiment(Day d) const {
        auto it = sentiment_.find(d.value);
        return it == sentiment_.end() ? nullptr : &it->second;
    }

    const std::vector<NewsArticle>& news() const { return news_; }
    std::size_t news_raw_count() const { return news_raw_count_; }
    std::size_t sentiment_dim() const { return dim_; }

    // Days for which all three assets have candles.
    std::vector<Day> complete_days() const {
        std::map<std::int32_t, int> count;
        for (const auto& [key, c] : candles_) count[key.second]++;
        std::vector<Day> days;
        for (const auto& [d, n] : count) {
            if (n == kNumAssets) days.push_back(Day{d});
        }
        return days;
    }

    PromptContext context(Day date) const {
        PromptContext ctx;
        ctx.date = date;
        for (Asset a : kAssets) {
            const Candle* c = candle(a, date);
            if (!c) {
                fail(kMarketDataModule, "missing candle for (" + std::string(to_string(a)) +
                                            ", " + format_day(date) + ")");
            }
            const OnChainDaily* o = onchain(a, date);
            if (!o) {
                fail(kMarketDataModule, "missing on-chain record for (" +
                                            std::string(to_string(a)) + ", " + format_day(date) +
                                            ")");
            }
            at(ctx.candles, a) = *c;
            at(ctx.onchain, a) = *o;
        }
        const SentimentSnapshot* s = sentiment(date);
        if (!s) fail(kMarketDataModule, "missing sentiment for " + format_day(date));
        ctx.sentiment = *s;
        Instant cutoff = end_of_day(date);
        for (const auto& a : news_) {
            if (a.timestamp <= cutoff) ctx.news_digest.push_back(a.id);
        }
        return ctx;
    }

private:
    std::map<std::pair<int, std::int32_t>, Candle> candles_;
    std::map<std::pair<int, std::int32_t>, OnChainDaily> onchain_;
    std::map<std::int32_t, SentimentSnapshot> sentiment_;
    std::vector<NewsArticle> news_;  // deduplicated, (ts, id) order
    std::size_t news_raw_count_ = 0;
    std::size_t dim_ = 0;
};

// Everything the corpus offers for one day, with the look-ahead guard.
inline PromptContext build_prompt_context(Day date, const MarketCorpus& corpus) {
    return corpus.context(date);
}

}  // namespace preftrade
