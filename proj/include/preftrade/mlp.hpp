#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/common.hpp"

namespace preftrade {

// One-hidden-layer perceptron, tanh hidden activation, linear output:
//   out = w2 . tanh(w1 x + b1) + b2
// Used for the reward aggregator (5 -> H -> 1), the pairwise scorer core
// (1 -> H -> 1) and the actor scorer (feature_dim -> H -> 1). Parameters
// flatten to a single vector laid out [w1 row-major, b1, w2, b2] so loss
// gradients and finite-difference checks share one indexing scheme.
struct Mlp {
    int in_dim = 0;
    int hidden = 0;
    std::vector<double> w1;  // hidden x in_dim, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;

    static Mlp zeros(int in_dim, int hidden) {
        Mlp m;
        m.in_dim = in_dim;
        m.hidden = hidden;
        m.w1.assign(std::size_t(hidden) * in_dim, 0.0);
        m.b1.assign(hidden, 0.0);
        m.w2.assign(hidden, 0.0);
        m.b2 = 0.0;
        return m;
    }

    static Mlp random_init(int in_dim, int hidden, RngStream& rng, double scale = 0.1) {
        Mlp m = zeros(in_dim, hidden);
        for (auto& v : m.w1) v = scale * rng.gauss();
        for (auto& v : m.b1) v = scale * rng.gauss();
        for (auto& v : m.w2) v = scale * rng.gauss();
        m.b2 = scale * rng.gauss();
        return m;
    }

    // All hidden units share the same averaging weights, so the net computes
    // tanh(mean(x)). Handy as a sign-correct starting point for score
    // aggregation.
    static Mlp mean_init(int in_dim, int hidden) {
        Mlp m = zeros(in_dim, hidden);
        for (auto& v : m.w1) v = 1.0 / in_dim;
        for (auto& v : m.w2) v = 1.0 / hidden;
        return m;
    }

    std::size_t n_params() const {
        return w1.size() + b1.size() + w2.size() + 1;
    }

    double forward(const double* x) const {
        double out = b2;
        for (int j = 0; j < hidden; ++j) {
            double pre = b1[std::size_t(j)];
            const double* row = w1.data() + std::size_t(j) * in_dim;
            for (int i = 0; i < in_dim; ++i) pre += row[i] * x[i];
            out += w2[std::size_t(j)] * std::tanh(pre);
        }
        return out;
    }

    double forward(const std::vector<double>& x) const {
        if (int(x.size()) != in_dim) fail("mlp", "input dimension mismatch");
        return forward(x.data());
    }

    // Forward pass that also accumulates d(out)/d(params) scaled by `dout`
    // into `gparams` (length n_params, layout as in params()). Returns out.
    double forward_accumulate_grad(const double* x, double dout, double* gparams) const {
        const std::size_t off_b1 = w1.size();
        const std::size_t off_w2 = off_b1 + b1.size();
        const std::size_t off_b2 = off_w2 + w2.size();
        double out = b2;
        for (int j = 0; j < hidden; ++j) {
            double pre = b1[std::size_t(j)];
            const double* row = w1.data() + std::size_t(j) * in_dim;
            for (int i = 0; i < in_dim; ++i) pre += row[i] * x[i];
            double h = std::tanh(pre);
            out += w2[std::size_t(j)] * h;
            double dpre = dout * w2[std::size_t(j)] * (1.0 - h * h);
            for (int i = 0; i < in_dim; ++i) gparams[std::size_t(j) * in_dim + i] += dpre * x[i];
            gparams[off_b1 + j] += dpre;
            gparams[off_w2 + j] += dout * h;
        }
        gparams[off_b2] += dout;
        return out;
    }

    std::vector<double> params() const {
        std::vector<double> p;
        p.reserve(n_params());
        p.insert(p.end(), w1.begin(), w1.end());
        p.insert(p.end(), b1.begin(), b1.end());
        p.insert(p.end(), w2.begin(), w2.end());
        p.push_back(b2);
        return p;
    }

    void set_params(const std::vector<double>& p) {
        if (p.size() != n_params()) fail("mlp", "parameter vector size mismatch");
        std::size_t k = 0;
        for (auto& v : w1) v = p[k++];
        for (auto& v : b1) v = p[k++];
        for (auto& v : w2) v = p[k++];
        b2 = p[k++];
    }

    void apply_gradient_step(const double* g, double lr) {
        std::size_t k = 0;
        for (auto& v : w1) v -= lr * g[k++];
        for (auto& v : b1) v -= lr * g[k++];
        for (auto& v : w2) v -= lr * g[k++];
        b2 -= lr * g[k++];
    }

    bool finite() const {
        for (double v : w1)
            if (!std::isfinite(v)) return false;
        for (double v : b1)
            if (!std::isfinite(v)) return false;
        for (double v : w2)
            if (!std::isfinite(v)) return false;
        return std::isfinite(b2);
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"in_dim", in_dim}, {"hidden", hidden}, {"w1", w1},
                              {"b1", b1},         {"w2", w2},         {"b2", std::vector<double>{b2}}};
    }

    static Mlp from_json(const nlohmann::json& j, const std::string& module = "mlp") {
        Mlp m;
        try {
            m.in_dim = j.at("in_dim").get<int>();
            m.hidden = j.at("hidden").get<int>();
            m.w1 = j.at("w1").get<std::vector<double>>();
            m.b1 = j.at("b1").get<std::vector<double>>();
            m.w2 = j.at("w2").get<std::vector<double>>();
            auto b2v = j.at("b2").get<std::vector<double>>();
            if (b2v.size() != 1) fail(module, "b2 must hold exactly one value");
            m.b2 = b2v[0];
        } catch (const nlohmann::json::exception& e) {
            fail(module, std::string("bad model file: ") + e.what());
        }
        if (m.in_dim <= 0 || m.hidden <= 0 ||
            m.w1.size() != std::size_t(m.hidden) * m.in_dim ||
            m.b1.size() != std::size_t(m.hidden) || m.w2.size() != std::size_t(m.hidden)) {
            fail(module, "model file shape mismatch");
        }
        if (!m.finite()) fail(module, "model file holds non-finite parameters");
        return m;
    }
};

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double logistic(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace preftrade
