#pragma once

#include <string>
#include <string_view>

#include "preftrade/backtest.hpp"
#include "preftrade/rewards.hpp"
#include "preftrade/training.hpp"

namespace preftrade {

inline constexpr const char* kConfigModule = "config";

// Every tunable in one place. A config file is flat `key = value` text; flags
// override file values, which override the defaults below.
struct RunConfig {
    std::uint64_t seed = 42;
    BacktestConfig backtest;  // rng_seed is derived from `seed` at run time
    RewardConfig rewards;
    TrainConfig train;  // rng_seed is derived from `seed` at run time
    PreferenceConfig prefs;
    int epochs = 1;
    int hidden_agg = 8;
    int hidden_judge = 4;
    int hidden_actor = 16;
    double init_scale = 0.1;
    int max_hamming = 3;
    int sentiment_dim = 8;  // rationale dimension when no corpus dictates it

    LoopConfig loop_config() const {
        LoopConfig c;
        c.train = train;
        c.train.rng_seed = seed;
        c.prefs = prefs;
        c.rewards = rewards;
        c.probe_notional_base =
            backtest.initial_capital * backtest.cash_fraction / double(kNumAssets);
        c.epochs = epochs;
        c.hidden_agg = hidden_agg;
        c.hidden_judge = hidden_judge;
        c.hidden_actor = hidden_actor;
        c.init_scale = init_scale;
        return c;
    }
};

inline double config_double(const std::string& key, const std::string& value) {
    auto v = parse_double(value);
    if (!v) fail(kConfigModule, "bad number for " + key + ": '" + value + "'");
    return *v;
}

inline std::int64_t config_int(const std::string& key, const std::string& value) {
    auto v = parse_int(value);
    if (!v) fail(kConfigModule, "bad integer for " + key + ": '" + value + "'");
    return *v;
}

// Applies one key. Unknown keys are errors so typos never pass silently.
inline void config_set(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "seed") c.seed = std::uint64_t(config_int(key, value));
    else if (key == "backtest.initial_capital") c.backtest.initial_capital = config_double(key, value);
    else if (key == "backtest.cash_fraction") c.backtest.cash_fraction = config_double(key, value);
    else if (key == "backtest.fee_bps") c.backtest.fee_bps = config_double(key, value);
    else if (key == "backtest.slippage_sd_btc") c.backtest.slippage_sd[0] = config_double(key, value);
    else if (key == "backtest.slippage_sd_eth") c.backtest.slippage_sd[1] = config_double(key, value);
    else if (key == "backtest.slippage_sd_sol") c.backtest.slippage_sd[2] = config_double(key, value);
    else if (key == "rewards.fee_bps") c.rewards.fee_bps = config_double(key, value);
    else if (key == "rewards.ew_halflife_days") c.rewards.ew_halflife_days = int(config_int(key, value));
    else if (key == "rewards.slippage_threshold_bps") c.rewards.slippage_threshold_bps = config_double(key, value);
    else if (key == "rewards.impact_coeff") c.rewards.impact_coeff = config_double(key, value);
    else if (key == "rewards.gas_scale") c.rewards.gas_scale = config_double(key, value);
    else if (key == "rewards.scale_return") c.rewards.scale_return = config_double(key, value);
    else if (key == "rewards.scale_sharpe") c.rewards.scale_sharpe = config_double(key, value);
    else if (key == "rewards.scale_drawdown") c.rewards.scale_drawdown = config_double(key, value);
    else if (key == "rewards.scale_liquidity_bps") c.rewards.scale_liquidity_bps = config_double(key, value);
    else if (key == "train.beta") c.train.beta = config_double(key, value);
    else if (key == "train.lr_meta") c.train.lr_meta = config_double(key, value);
    else if (key == "train.lr_judge") c.train.lr_judge = config_double(key, value);
    else if (key == "train.lr_actor") c.train.lr_actor = config_double(key, value);
    else if (key == "train.iterations") c.train.iterations = int(config_int(key, value));
    else if (key == "train.batch_size") c.train.batch_size = int(config_int(key, value));
    else if (key == "prefs.rho") c.prefs.rho = config_double(key, value);
    else if (key == "prefs.k_candidates") c.prefs.k_candidates = int(config_int(key, value));
    else if (key == "prefs.n_eval") c.prefs.n_eval = int(config_int(key, value));
    else if (key == "prefs.judge_noise_sd") c.prefs.judge_noise_sd = config_double(key, value);
    else if (key == "prefs.score_lo") c.prefs.score_lo = config_double(key, value);
    else if (key == "prefs.score_hi") c.prefs.score_hi = config_double(key, value);
    else if (key == "prefs.k_base") c.prefs.k_base = config_double(key, value);
    else if (key == "prefs.sigma_max") c.prefs.sigma_max = config_double(key, value);
    else if (key == "prefs.variance_gate") c.prefs.variance_gate = config_double(key, value);
    else if (key == "prefs.verbosity_pct") c.prefs.verbosity_pct = config_double(key, value);
    else if (key == "prefs.omega1") c.prefs.omega1 = config_double(key, value);
    else if (key == "prefs.omega2") c.prefs.omega2 = config_double(key, value);
    else if (key == "loop.epochs") c.epochs = int(config_int(key, value));
    else if (key == "loop.hidden_agg") c.hidden_agg = int(config_int(key, value));
    else if (key == "loop.hidden_judge") c.hidden_judge = int(config_int(key, value));
    else if (key == "loop.hidden_actor") c.hidden_actor = int(config_int(key, value));
    else if (key == "loop.init_scale") c.init_scale = config_double(key, value);
    else if (key == "market.max_hamming") c.max_hamming = int(config_int(key, value));
    else if (key == "market.sentiment_dim") c.sentiment_dim = int(config_int(key, value));
    else fail(kConfigModule, "unknown config key '" + key + "'");
}

inline std::string strip(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

// Flat `key = value` lines; '#' starts a comment, blank lines are skipped.
inline void load_config_file(RunConfig& c, const std::string& path) {
    std::string text = read_file(path, kConfigModule);
    std::string_view rest(text);
    int line_no = 0;
    while (!rest.empty()) {
        std::size_t pos = rest.find('\n');
        std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
        rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        std::string trimmed = strip(line);
        if (trimmed.empty()) continue;
        std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            fail(kConfigModule, path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = strip(std::string_view(trimmed).substr(0, eq));
        std::string value = strip(std::string_view(trimmed).substr(eq + 1));
        if (key.empty() || value.empty())
            fail(kConfigModule, path + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            config_set(c, key, value);
        } catch (const Error& e) {
            fail(kConfigModule, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

// The effective configuration, one line per key; doubles as key documentation.
inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    out += "seed = " + std::to_string(c.seed) + "\n";
    out += "backtest.initial_capital = " + fmt_double(c.backtest.initial_capital) + "\n";
    out += "backtest.cash_fraction = " + fmt_double(c.backtest.cash_fraction) + "\n";
    out += "backtest.fee_bps = " + fmt_double(c.backtest.fee_bps) + "\n";
    out += "backtest.slippage_sd_btc = " + fmt_double(c.backtest.slippage_sd[0]) + "\n";
    out += "backtest.slippage_sd_eth = " + fmt_double(c.backtest.slippage_sd[1]) + "\n";
    out += "backtest.slippage_sd_sol = " + fmt_double(c.backtest.slippage_sd[2]) + "\n";
    out += serialize_reward_config(c.rewards);
    out += "train.beta = " + fmt_double(c.train.beta) + "\n";
    out += "train.lr_meta = " + fmt_double(c.train.lr_meta) + "\n";
    out += "train.lr_judge = " + fmt_double(c.train.lr_judge) + "\n";
    out += "train.lr_actor = " + fmt_double(c.train.lr_actor) + "\n";
    out += "train.iterations = " + std::to_string(c.train.iterations) + "\n";
    out += "train.batch_size = " + std::to_string(c.train.batch_size) + "\n";
    out += "prefs.rho = " + fmt_double(c.prefs.rho) + "\n";
    out += "prefs.k_candidates = " + std::to_string(c.prefs.k_candidates) + "\n";
    out += "prefs.n_eval = " + std::to_string(c.prefs.n_eval) + "\n";
    out += "prefs.judge_noise_sd = " + fmt_double(c.prefs.judge_noise_sd) + "\n";
    out += "prefs.score_lo = " + fmt_double(c.prefs.score_lo) + "\n";
    out += "prefs.score_hi = " + fmt_double(c.prefs.score_hi) + "\n";
    out += "prefs.k_base = " + fmt_double(c.prefs.k_base) + "\n";
    out += "prefs.sigma_max = " + fmt_double(c.prefs.sigma_max) + "\n";
    out += "prefs.variance_gate = " + fmt_double(c.prefs.variance_gate) + "\n";
    out += "prefs.verbosity_pct = " + fmt_double(c.prefs.verbosity_pct) + "\n";
    out += "prefs.omega1 = " + fmt_double(c.prefs.omega1) + "\n";
    out += "prefs.omega2 = " + fmt_double(c.prefs.omega2) + "\n";
    out += "loop.epochs = " + std::to_string(c.epochs) + "\n";
    out += "loop.hidden_agg = " + std::to_string(c.hidden_agg) + "\n";
    out += "loop.hidden_judge = " + std::to_string(c.hidden_judge) + "\n";
    out += "loop.hidden_actor = " + std::to_string(c.hidden_actor) + "\n";
    out += "loop.init_scale = " + fmt_double(c.init_scale) + "\n";
    out += "market.max_hamming = " + std::to_string(c.max_hamming) + "\n";
    out += "market.sentiment_dim = " + std::to_string(c.sentiment_dim) + "\n";
    return out;
}

}  // namespace preftrade
