#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/common.hpp"
#include "preftrade/mlp.hpp"

namespace preftrade {

inline constexpr const char* kRewardsModule = "rewards";

// Five per-day reward channels, each squashed to [-1, 1].
struct RewardVector {
    double r_return = 0;
    double r_sharpe = 0;
    double r_dd = 0;
    double r_liq = 0;
    double r_sent = 0;

    std::array<double, 5> as_array() const { return {r_return, r_sharpe, r_dd, r_liq, r_sent}; }
    bool operator==(const RewardVector&) const = default;
};

struct RewardConfig {
    double fee_bps = 10.0;
    int ew_halflife_days = 10;
    double slippage_threshold_bps = 5.0;
    double impact_coeff = 0.1;
    double gas_scale = 1000.0;
    double scale_return = 0.02;
    double scale_sharpe = 0.5;
    double scale_drawdown = 0.05;
    double scale_liquidity_bps = 10.0;

    void validate() const {
        if (!(fee_bps >= 0)) fail(kRewardsModule, "fee_bps must be non-negative");
        if (ew_halflife_days <= 0) fail(kRewardsModule, "ew_halflife_days must be positive");
        if (!(slippage_threshold_bps > 0 && impact_coeff > 0 && gas_scale > 0 &&
              scale_return > 0 && scale_sharpe > 0 && scale_drawdown > 0 &&
              scale_liquidity_bps > 0)) {
            fail(kRewardsModule, "reward parameters must be positive");
        }
    }
};

// Odd, strictly monotone squash onto (-1, 1):
// s(x) = (e^{x/scale} - e^{-x/scale}) / (e^{x/scale} + e^{-x/scale}).
inline double squash(double x, double scale) {
    if (!(scale > 0)) fail(kRewardsModule, "squash scale must be positive");
    return std::tanh(x / scale);
}

// Net percentage gain after fees on the day's move, squashed.
inline double reward_return(double alpha, double close_prev, double close_t, double fee_bps,
                            double scale = 0.02) {
    if (!(close_prev > 0 && close_t > 0)) fail(kRewardsModule, "reward_return: non-positive price");
    double fee = fee_bps / 10000.0;
    return squash(alpha * (close_t / close_prev - 1.0) - std::abs(alpha) * fee, scale);
}

// Exponentially weighted mean/stdev Sharpe over the window; weight on entry i
// of a length-T window is lambda^(T-1-i) with lambda = 2^(-1/halflife), so
// today carries weight 1.
struct EwStats {
    double mean = 0;
    double var = 0;
};

inline EwStats ew_stats(const std::vector<double>& window, int halflife) {
    double lambda = std::pow(2.0, -1.0 / halflife);
    double wsum = 0, mean = 0;
    double w = 1.0;
    for (auto it = window.rbegin(); it != window.rend(); ++it) {
        wsum += w;
        mean += w * *it;
        w *= lambda;
    }
    mean /= wsum;
    double var = 0;
    w = 1.0;
    for (auto it = window.rbegin(); it != window.rend(); ++it) {
        var += w * (*it - mean) * (*it - mean);
        w *= lambda;
    }
    var /= wsum;
    return {mean, var};
}

inline double ew_sharpe(const std::vector<double>& window, int halflife) {
    EwStats s = ew_stats(window, halflife);
    if (!(s.var > 0)) fail(kRewardsModule, "reward_sharpe: degenerate window (zero variance)");
    return s.mean / std::sqrt(s.var);
}

// Leave-one-out incremental Sharpe: today's contribution is the full-window
// EW Sharpe minus the EW Sharpe without today. A zero-variance full window is
// a degenerate-window error; a zero-variance (or single-entry) baseline
// contributes a baseline Sharpe of 0, so the increment is the full value.
inline double reward_sharpe(const std::vector<double>& returns_window, int halflife,
                            double scale = 0.5) {
    if (returns_window.size() < 2)
        fail(kRewardsModule, "reward_sharpe: window needs at least 2 returns");
    if (halflife <= 0) fail(kRewardsModule, "reward_sharpe: halflife must be positive");
    double full = ew_sharpe(returns_window, halflife);
    std::vector<double> base(returns_window.begin(), returns_window.end() - 1);
    double baseline = 0.0;
    if (base.size() >= 2) {
        EwStats s = ew_stats(base, halflife);
        if (s.var > 0) baseline = s.mean / std::sqrt(s.var);
    }
    return squash(full - baseline, scale);
}

// Largest peak-to-trough decline along the path, as a fraction of the peak.
inline double max_drawdown_path(const std::vector<double>& path) {
    if (path.empty()) fail(kRewardsModule, "max_drawdown: empty path");
    double peak = path.front();
    double worst = 0;
    for (double p : path) {
        if (!(p > 0)) fail(kRewardsModule, "max_drawdown: non-positive value");
        if (p > peak) peak = p;
        worst = std::max(worst, (peak - p) / peak);
    }
    return worst;
}

// Exposure-scaled drawdown penalty; never positive. The caller supplies the
// within-day path: with OHLC bars only, use [open, high, low, close] for long
// exposure and [open, low, high, close] for short.
inline double reward_drawdown(const std::vector<double>& intraday_path, double alpha,
                              double scale = 0.05) {
    double dd = max_drawdown_path(intraday_path);
    return -squash(std::abs(alpha) * dd, scale);
}

// Linear-impact slippage estimate in bps plus a gas term; the channel pays a
// bonus when the estimate sits below the threshold and a penalty above it.
inline double reward_liquidity(double order_notional, double day_volume,
                               double gas_price_mean_gwei, double threshold_bps,
                               double impact_coeff = 0.1, double gas_scale = 1000.0,
                               double scale_bps = 10.0) {
    if (!(day_volume > 0)) fail(kRewardsModule, "reward_liquidity: zero volume");
    if (order_notional < 0) fail(kRewardsModule, "reward_liquidity: negative notional");
    double slip_bps =
        impact_coeff * (order_notional / day_volume) * 1e4 + gas_price_mean_gwei / gas_scale;
    return squash(threshold_bps - slip_bps, scale_bps);
}

// Cosine similarity between the actor's rationale embedding and the day's
// sentiment vector.
inline double reward_sentiment(const std::vector<double>& rationale_vec,
                               const std::vector<double>& sentiment_vec) {
    if (rationale_vec.size() != sentiment_vec.size())
        fail(kRewardsModule, "reward_sentiment: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < rationale_vec.size(); ++i) {
        dot += rationale_vec[i] * sentiment_vec[i];
        na += rationale_vec[i] * rationale_vec[i];
        nb += sentiment_vec[i] * sentiment_vec[i];
    }
    if (!(na > 0) || !(nb > 0)) fail(kRewardsModule, "reward_sentiment: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// Learnable aggregator: 5 -> H -> 1 perceptron collapsing a RewardVector to
// the scalar the judging stack consumes.

struct AggregatorParams {
    Mlp net;

    static AggregatorParams mean_init(int hidden = 8) {
        return {Mlp::mean_init(5, hidden)};
    }
    static AggregatorParams random_init(int hidden, RngStream& rng, double scale = 0.1) {
        return {Mlp::random_init(5, hidden, rng, scale)};
    }
};

inline double aggregate(const AggregatorParams& params, const RewardVector& r) {
    if (!params.net.finite()) fail(kRewardsModule, "aggregate: non-finite parameters");
    auto x = r.as_array();
    return params.net.forward(x.data());
}

// Forward value plus d(out)/d(params), layout as Mlp::params().
inline double aggregate_with_grad(const AggregatorParams& params, const RewardVector& r,
                                  std::vector<double>& grad) {
    if (!params.net.finite()) fail(kRewardsModule, "aggregate: non-finite parameters");
    auto x = r.as_array();
    grad.assign(params.net.n_params(), 0.0);
    return params.net.forward_accumulate_grad(x.data(), 1.0, grad.data());
}

// ---------------------------------------------------------------------------
// Serialization: RewardConfig as flat key = value lines, AggregatorParams as
// a JSON parameter file.

inline std::string serialize_reward_config(const RewardConfig& c) {
    std::string out;
    out += "rewards.fee_bps = " + fmt_double(c.fee_bps) + "\n";
    out += "rewards.ew_halflife_days = " + std::to_string(c.ew_halflife_days) + "\n";
    out += "rewards.slippage_threshold_bps = " + fmt_double(c.slippage_threshold_bps) + "\n";
    out += "rewards.impact_coeff = " + fmt_double(c.impact_coeff) + "\n";
    out += "rewards.gas_scale = " + fmt_double(c.gas_scale) + "\n";
    out += "rewards.scale_return = " + fmt_double(c.scale_return) + "\n";
    out += "rewards.scale_sharpe = " + fmt_double(c.scale_sharpe) + "\n";
    out += "rewards.scale_drawdown = " + fmt_double(c.scale_drawdown) + "\n";
    out += "rewards.scale_liquidity_bps = " + fmt_double(c.scale_liquidity_bps) + "\n";
    return out;
}

inline nlohmann::json aggregator_to_json(const AggregatorParams& p) { return p.net.to_json(); }

inline AggregatorParams aggregator_from_json(const nlohmann::json& j) {
    AggregatorParams p{Mlp::from_json(j, kRewardsModule)};
    if (p.net.in_dim != 5) fail(kRewardsModule, "aggregator must take 5 inputs");
    return p;
}

}  // namespace preftrade
