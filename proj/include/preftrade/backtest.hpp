#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/common.hpp"
#include "preftrade/market_data.hpp"

namespace preftrade {

inline constexpr const char* kBacktestModule = "backtest";

struct BacktestConfig {
    double initial_capital = 1'000'000.0;
    double cash_fraction = 0.5;
    double fee_bps = 10.0;
    PerAsset<double> slippage_sd{0.0005, 0.0005, 0.0012};  // BTC, ETH, SOL
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(initial_capital > 0)) fail(kBacktestModule, "initial_capital must be positive");
        if (!(cash_fraction >= 0 && cash_fraction <= 1))
            fail(kBacktestModule, "cash_fraction must lie in [0, 1]");
        if (!(fee_bps >= 0)) fail(kBacktestModule, "fee_bps must be non-negative");
        for (double sd : slippage_sd)
            if (!(sd >= 0)) fail(kBacktestModule, "slippage_sd must be non-negative");
    }
};

struct PortfolioState {
    double cash = 0;                                  // USD, never negative
    PerAsset<double> holdings{0.0, 0.0, 0.0};         // units, never negative
    std::vector<std::pair<Day, double>> wealth_series;

    double mark_to_market(const PerAsset<double>& closes) const {
        double w = cash;
        for (Asset a : kAssets) w += at(holdings, a) * at(closes, a);
        return w;
    }
};

struct TradeFill {
    Day date{};
    Asset asset{};
    bool is_buy = false;
    double notional = 0;          // USD gross: cash spent on buys, proceeds before fee on sells
    double executed_price = 0;    // close * (1 + slippage_applied)
    double fee_paid = 0;          // fee_bps/1e4 * notional
    double slippage_applied = 0;  // signed fraction, >= 0 for buys, <= 0 for sells
};

struct MetricsReport {
    double total_return = 0;
    double daily_return_mean = 0;
    std::optional<double> sharpe;  // absent when the return series is degenerate
    double max_drawdown = 0;
    int n_days = 0;
};

// ---------------------------------------------------------------------------
// Metric primitives

inline double total_return(double w_start, double w_end) {
    if (!(w_start > 0)) fail(kBacktestModule, "total_return: non-positive starting wealth");
    return (w_end - w_start) / w_start;
}

inline double daily_mean(const std::vector<double>& log_returns) {
    if (log_returns.empty()) fail(kBacktestModule, "daily_mean: empty return series");
    double s = 0;
    for (double r : log_returns) s += r;
    return s / double(log_returns.size());
}

// Mean over sample (n-1) standard deviation, risk-free rate 0.
inline double sharpe(const std::vector<double>& log_returns) {
    if (log_returns.size() < 2) fail(kBacktestModule, "sharpe: need at least 2 returns");
    double mean = daily_mean(log_returns);
    double ss = 0;
    for (double r : log_returns) ss += (r - mean) * (r - mean);
    double var = ss / double(log_returns.size() - 1);
    if (!(var > 0)) fail(kBacktestModule, "sharpe: degenerate (zero variance) return series");
    return mean / std::sqrt(var);
}

inline double max_drawdown(const std::vector<double>& wealth) {
    if (wealth.empty()) fail(kBacktestModule, "max_drawdown: empty series");
    double peak = wealth.front();
    double worst = 0;
    for (double w : wealth) {
        if (!(w > 0)) fail(kBacktestModule, "max_drawdown: non-positive wealth");
        peak = std::max(peak, w);
        worst = std::max(worst, (peak - w) / peak);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Ledger mechanics

// Initial endowment: cash_fraction of capital stays in cash, the rest splits
// equally across the three assets at first-day close. Not a trade: no fee.
inline PortfolioState init_portfolio(const BacktestConfig& config,
                                     const PerAsset<double>& first_day_closes) {
    config.validate();
    for (Asset a : kAssets) {
        if (!(at(first_day_closes, a) > 0))
            fail(kBacktestModule, std::string("init_portfolio: non-positive price for ") +
                                      to_string(a));
    }
    PortfolioState s;
    s.cash = config.initial_capital * config.cash_fraction;
    double per_asset = config.initial_capital * (1.0 - config.cash_fraction) / kNumAssets;
    for (Asset a : kAssets) at(s.holdings, a) = per_asset / at(first_day_closes, a);
    return s;
}

// One daily rebalance at the given closes. alpha > 0 spends alpha*cash split
// equally across assets (fee carved out of each notional); alpha < 0 sells
// |alpha| of every position with the fee taken from proceeds. Slippage is one
// absolute normal draw per fill and always worsens the execution price.
// Assets fill in fixed BTC, ETH, SOL order so draws are reproducible.
inline std::vector<TradeFill> rebalance(PortfolioState& state, double alpha,
                                        const PerAsset<double>& closes, Day date,
                                        const BacktestConfig& config, RngStream& rng) {
    for (Asset a : kAssets) {
        if (!(at(closes, a) > 0))
            fail(kBacktestModule, std::string("rebalance: non-positive price for ") + to_string(a));
    }
    std::vector<TradeFill> fills;
    double fee_rate = config.fee_bps / 10000.0;
    if (alpha > 0) {
        double spend = alpha * state.cash;
        double notional = spend / kNumAssets;
        if (notional > 0) {
            for (Asset a : kAssets) {
                double slip = std::min(std::abs(rng.gauss(0.0, at(config.slippage_sd, a))), 0.99);
                double exec = at(closes, a) * (1.0 + slip);
                double fee = fee_rate * notional;
                at(state.holdings, a) += (notional - fee) / exec;
                fills.push_back({date, a, true, notional, exec, fee, slip});
            }
            state.cash -= spend;
            if (state.cash < 0) state.cash = 0;  // guards rounding residue only
        }
    } else if (alpha < 0) {
        for (Asset a : kAssets) {
            double units = -alpha * at(state.holdings, a);
            if (units <= 0) continue;
            double slip = std::min(std::abs(rng.gauss(0.0, at(config.slippage_sd, a))), 0.99);
            double exec = at(closes, a) * (1.0 - slip);
            double gross = units * exec;
            double fee = fee_rate * gross;
            state.cash += gross - fee;
            at(state.holdings, a) -= units;
            if (at(state.holdings, a) < 0) at(state.holdings, a) = 0;
            fills.push_back({date, a, false, gross, exec, fee, -slip});
        }
    }
    return fills;
}

// ---------------------------------------------------------------------------
// Run loop

// Policies see one context per day, in day order; stateful implementations
// may accumulate history from the contexts they are shown.
class Policy {
public:
    virtual ~Policy() = default;
    virtual double alpha(const PromptContext& ctx) = 0;
};

struct BacktestResult {
    MetricsReport metrics;
    std::vector<std::pair<Day, double>> wealth;
    std::vector<TradeFill> fills;
    std::vector<std::string> warnings;
};

inline MetricsReport compute_metrics(const std::vector<std::pair<Day, double>>& wealth) {
    if (wealth.empty()) fail(kBacktestModule, "compute_metrics: empty wealth series");
    MetricsReport m;
    m.n_days = int(wealth.size());
    m.total_return = total_return(wealth.front().second, wealth.back().second);
    std::vector<double> w(wealth.size());
    for (std::size_t i = 0; i < wealth.size(); ++i) w[i] = wealth[i].second;
    m.max_drawdown = max_drawdown(w);
    std::vector<double> log_returns;
    for (std::size_t i = 1; i < w.size(); ++i) log_returns.push_back(std::log(w[i] / w[i - 1]));
    if (!log_returns.empty()) m.daily_return_mean = daily_mean(log_returns);
    try {
        m.sharpe = sharpe(log_returns);
    } catch (const Error&) {
        m.sharpe = std::nullopt;
    }
    return m;
}

// Day 1 establishes the endowment at that day's close; every later day asks
// the policy for alpha from that day's context and rebalances at the same
// day's close. Out-of-range alphas are clamped with a logged warning.
inline BacktestResult run_backtest(const RegimeWindow& window, Policy& policy,
                                   const MarketCorpus& corpus, const BacktestConfig& config) {
    config.validate();
    if (!(window.start < window.end)) fail(kBacktestModule, "window start must precede end");
    RngStream rng(config.rng_seed);
    BacktestResult result;
    PortfolioState state;
    bool first = true;
    for (Day d = window.start; d <= window.end; d = d.next()) {
        PromptContext ctx = build_prompt_context(d, corpus);
        PerAsset<double> closes;
        for (Asset a : kAssets) at(closes, a) = at(ctx.candles, a).close;
        if (first) {
            state = init_portfolio(config, closes);
            first = false;
        } else {
            double a = policy.alpha(ctx);
            if (!std::isfinite(a)) {
                fail(kBacktestModule, "policy produced a non-finite alpha on " + format_day(d));
            }
            if (a < -1.0 || a > 1.0) {
                result.warnings.push_back(format_day(d) + ": policy alpha " + fmt_double(a) +
                                          " clamped to [-1, 1]");
                a = std::clamp(a, -1.0, 1.0);
            }
            auto fills = rebalance(state, a, closes, d, config, rng);
            result.fills.insert(result.fills.end(), fills.begin(), fills.end());
        }
        state.wealth_series.emplace_back(d, state.mark_to_market(closes));
    }
    result.wealth = state.wealth_series;
    result.metrics = compute_metrics(result.wealth);
    return result;
}

// ---------------------------------------------------------------------------
// Built-in policies

class ZeroPolicy : public Policy {
public:
    double alpha(const PromptContext&) override { return 0.0; }
};

class ConstPolicy : public Policy {
public:
    explicit ConstPolicy(double a) : a_(a) {}
    double alpha(const PromptContext&) override { return a_; }

private:
    double a_;
};

// Bang-bang signal from the sign of the day's mean open-to-close move.
class MomentumPolicy : public Policy {
public:
    double alpha(const PromptContext& ctx) override {
        double m = 0;
        for (Asset a : kAssets) {
            const Candle& c = at(ctx.candles, a);
            m += c.close / c.open - 1.0;
        }
        m /= kNumAssets;
        if (m > 0) return 1.0;
        if (m < 0) return -1.0;
        return 0.0;
    }
};

// Scripted alphas from a CSV `date,alpha`; missing dates are an error.
class CsvPolicy : public Policy {
public:
    explicit CsvPolicy(const std::string& path) : path_(path) {
        csv::Table table(read_file(path, kBacktestModule), kBacktestModule, path,
                         {"date", "alpha"});
        for (const auto& row : table.rows()) {
            Day d = csv::need_day(row, 0, kBacktestModule, path);
            alphas_[d.value] = csv::need_double(row, 1, kBacktestModule, path);
        }
    }

    double alpha(const PromptContext& ctx) override {
        auto it = alphas_.find(ctx.date.value);
        if (it == alphas_.end())
            fail(kBacktestModule, path_ + ": no alpha for " + format_day(ctx.date));
        return it->second;
    }

private:
    std::string path_;
    std::map<std::int32_t, double> alphas_;
};

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json backtest_report_json(const RegimeWindow& window,
                                           const BacktestConfig& config,
                                           const BacktestResult& result) {
    nlohmann::json j;
    j["asset"] = to_string(window.asset);
    j["label"] = to_string(window.label);
    j["start"] = format_day(window.start);
    j["end"] = format_day(window.end);
    j["config"] = {{"initial_capital", config.initial_capital},
                   {"cash_fraction", config.cash_fraction},
                   {"fee_bps", config.fee_bps},
                   {"slippage_sd",
                    {{"BTC", config.slippage_sd[0]},
                     {"ETH", config.slippage_sd[1]},
                     {"SOL", config.slippage_sd[2]}}},
                   {"rng_seed", config.rng_seed}};
    auto& m = j["metrics"];
    m["total_return"] = result.metrics.total_return;
    m["daily_return_mean"] = result.metrics.daily_return_mean;
    if (result.metrics.sharpe) {
        m["sharpe"] = *result.metrics.sharpe;
        m["sharpe_degenerate"] = false;
    } else {
        m["sharpe"] = nullptr;
        m["sharpe_degenerate"] = true;
    }
    m["max_drawdown"] = result.metrics.max_drawdown;
    m["n_days"] = result.metrics.n_days;
    j["wealth"] = nlohmann::json::array();
    for (const auto& [d, w] : result.wealth) {
        j["wealth"].push_back({{"date", format_day(d)}, {"wealth", w}});
    }
    j["fills"] = nlohmann::json::array();
    for (const auto& f : result.fills) {
        j["fills"].push_back({{"date", format_day(f.date)},
                              {"asset", to_string(f.asset)},
                              {"side", f.is_buy ? "buy" : "sell"},
                              {"notional", f.notional},
                              {"executed_price", f.executed_price},
                              {"fee_paid", f.fee_paid},
                              {"slippage_applied", f.slippage_applied}});
    }
    j["warnings"] = result.warnings;
    return j;
}

inline std::string wealth_series_csv(const std::vector<std::pair<Day, double>>& wealth) {
    std::string out = "date,wealth\n";
    for (const auto& [d, w] : wealth) out += format_day(d) + "," + fmt_double(w) + "\n";
    return out;
}

}  // namespace preftrade
