#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/backtest.hpp"
#include "preftrade/common.hpp"
#include "preftrade/market_data.hpp"
#include "preftrade/mlp.hpp"
#include "preftrade/preference.hpp"
#include "preftrade/rewards.hpp"

namespace preftrade {

inline constexpr const char* kTrainingModule = "training";

// ---------------------------------------------------------------------------
// Models

// Antisymmetric pairwise scorer: logit(a, b) = g(a) - g(b) for a shared
// scalar net g, so swapping the arguments exactly flips the sign and the
// preference probability at (x, x) is always 1/2.
struct PairwiseJudge {
    Mlp g;  // 1 -> hidden -> 1

    double score(double x) const { return g.forward(&x); }
    double logit(double a, double b) const { return g.forward(&a) - g.forward(&b); }
};

using JudgeModel = PairwiseJudge;
using MetaJudgeModel = PairwiseJudge;

// Differentiable candidate scorer standing in for the actor. Inputs are the
// candidate fields plus four context features: previous-day log-return per
// asset and the exponentially weighted basket volatility.
struct ActorPolicyModel {
    Mlp net;  // (rationale_dim + 6) -> hidden -> 1

    int rationale_dim() const { return net.in_dim - 6; }
    double score(const std::vector<double>& features) const { return net.forward(features); }
};

struct ContextFeatures {
    PerAsset<double> prev_day_log_return{0.0, 0.0, 0.0};
    double ew_vol = 0;
};

inline std::vector<double> actor_features(const Candidate& c, const ContextFeatures& ctx) {
    std::vector<double> f;
    f.reserve(c.rationale_vec.size() + 6);
    f.push_back(c.alpha);
    f.insert(f.end(), c.rationale_vec.begin(), c.rationale_vec.end());
    f.push_back(double(c.length) / 100.0);
    for (Asset a : kAssets) f.push_back(at(ctx.prev_day_log_return, a));
    f.push_back(ctx.ew_vol);
    return f;
}

struct TrainConfig {
    double beta = 1.0;  // preference temperature
    double lr_meta = 1e-2;
    double lr_judge = 1e-2;
    double lr_actor = 1e-3;
    int iterations = 50;  // train steps per epoch
    int batch_size = 32;
    std::uint64_t rng_seed = 42;  // global seed; streams fan out per component

    void validate() const {
        if (!(beta > 0)) fail(kTrainingModule, "beta must be positive");
        if (iterations < 0 || batch_size < 1)
            fail(kTrainingModule, "iterations must be >= 0 and batch_size >= 1");
    }
};

struct ModelBundle {
    AggregatorParams aggregator;
    MetaJudgeModel meta;
    JudgeModel judge;
    ActorPolicyModel actor;
};

// ---------------------------------------------------------------------------
// Losses, each returning the scalar loss and its analytic parameter gradient

struct LossGrad {
    double loss = 0;
    std::vector<double> grad;
};

// DPO-style preference loss for the meta-judge on a pair of scalar rewards
// ordered preferred-first: L = -log sigma(logit(r1, r2)).
inline LossGrad meta_judge_loss(const MetaJudgeModel& meta, double r1, double r2) {
    if (!meta.g.finite()) fail(kTrainingModule, "meta_judge_loss: non-finite parameters");
    if (!std::isfinite(r1) || !std::isfinite(r2))
        fail(kTrainingModule, "meta_judge_loss: non-finite inputs");
    LossGrad out;
    out.grad.assign(meta.g.n_params(), 0.0);
    double logit = meta.g.forward(&r1) - meta.g.forward(&r2);
    out.loss = softplus(-logit);
    double dlogit = -logistic(-logit);
    meta.g.forward_accumulate_grad(&r1, dlogit, out.grad.data());
    meta.g.forward_accumulate_grad(&r2, -dlogit, out.grad.data());
    return out;
}

// Distillation: mean squared difference between meta-judge and judge logits
// over a batch of scalar reward pairs; the meta-judge is a constant here and
// the gradient is with respect to the judge.
inline LossGrad align_loss(const MetaJudgeModel& meta, const JudgeModel& judge,
                           const std::vector<std::pair<double, double>>& batch) {
    if (batch.empty()) fail(kTrainingModule, "align_loss: empty batch");
    if (!meta.g.finite() || !judge.g.finite())
        fail(kTrainingModule, "align_loss: non-finite parameters");
    LossGrad out;
    out.grad.assign(judge.g.n_params(), 0.0);
    const double inv = 1.0 / double(batch.size());
    for (const auto& [r1, r2] : batch) {
        double m = meta.logit(r1, r2);
        double j = judge.logit(r1, r2);
        double diff = j - m;
        out.loss += diff * diff * inv;
        double dj = 2.0 * diff * inv;
        judge.g.forward_accumulate_grad(&r1, dj, out.grad.data());
        judge.g.forward_accumulate_grad(&r2, -dj, out.grad.data());
    }
    return out;
}

// Actor preference loss on one (chosen, rejected) feature pair:
// L = softplus((pi(rejected) - pi(chosen)) / beta).
inline LossGrad actor_loss(const ActorPolicyModel& actor, const std::vector<double>& feat_chosen,
                           const std::vector<double>& feat_rejected, double beta) {
    if (!(beta > 0)) fail(kTrainingModule, "actor_loss: beta must be positive");
    if (!actor.net.finite()) fail(kTrainingModule, "actor_loss: non-finite parameters");
    LossGrad out;
    out.grad.assign(actor.net.n_params(), 0.0);
    double pc = actor.net.forward(feat_chosen);
    double pr = actor.net.forward(feat_rejected);
    double d = (pr - pc) / beta;
    out.loss = softplus(d);
    double s = logistic(d);
    actor.net.forward_accumulate_grad(feat_rejected.data(), s / beta, out.grad.data());
    actor.net.forward_accumulate_grad(feat_chosen.data(), -s / beta, out.grad.data());
    return out;
}

// ---------------------------------------------------------------------------
// Train step

struct TrainBatch {
    // Scalar-reward source pairs for the judging stack, preferred side first.
    std::vector<std::pair<RewardVector, RewardVector>> judge_pairs;
    // Actor feature pairs, chosen side first.
    std::vector<std::pair<std::vector<double>, std::vector<double>>> actor_pairs;
};

struct StepDiagnostics {
    double l_meta = 0;
    double l_align = 0;
    double l_actor = 0;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& message, nlohmann::json snapshot)
        : Error(kTrainingModule, message), snapshot_(std::move(snapshot)) {}
    const nlohmann::json& snapshot() const { return snapshot_; }

private:
    nlohmann::json snapshot_;
};

inline nlohmann::json models_snapshot_json(const ModelBundle& models) {
    return nlohmann::json{{"aggregator", models.aggregator.net.to_json()},
                          {"meta_judge", models.meta.g.to_json()},
                          {"judge", models.judge.g.to_json()},
                          {"actor", models.actor.net.to_json()}};
}

// One optimization step: aggregate the reward-vector pairs to scalars, update
// the meta-judge on its preference loss, distill the (already updated)
// meta-judge into the judge, then update the actor on its pair loss. Plain
// gradient descent throughout; an empty pair set leaves the corresponding
// models untouched and reports zero loss. Any non-finite loss aborts with a
// model snapshot.
inline StepDiagnostics train_step(ModelBundle& models, const TrainBatch& batch,
                                  const TrainConfig& config) {
    config.validate();
    StepDiagnostics diag;
    auto guard = [&](double loss, const char* which) {
        if (!std::isfinite(loss)) {
            nlohmann::json snap = models_snapshot_json(models);
            snap["diverged_loss"] = which;
            throw DivergenceError(std::string("divergence: non-finite ") + which, snap);
        }
    };
    if (!batch.judge_pairs.empty()) {
        std::vector<std::pair<double, double>> scalar_pairs;
        scalar_pairs.reserve(batch.judge_pairs.size());
        for (const auto& [pref, other] : batch.judge_pairs) {
            scalar_pairs.emplace_back(aggregate(models.aggregator, pref),
                                      aggregate(models.aggregator, other));
        }
        std::vector<double> meta_grad(models.meta.g.n_params(), 0.0);
        const double inv = 1.0 / double(scalar_pairs.size());
        for (const auto& [s1, s2] : scalar_pairs) {
            LossGrad lg = meta_judge_loss(models.meta, s1, s2);
            diag.l_meta += lg.loss * inv;
            for (std::size_t i = 0; i < meta_grad.size(); ++i) meta_grad[i] += lg.grad[i] * inv;
        }
        guard(diag.l_meta, "l_meta");
        models.meta.g.apply_gradient_step(meta_grad.data(), config.lr_meta);

        LossGrad al = align_loss(models.meta, models.judge, scalar_pairs);
        diag.l_align = al.loss;
        guard(diag.l_align, "l_align");
        models.judge.g.apply_gradient_step(al.grad.data(), config.lr_judge);
    }
    if (!batch.actor_pairs.empty()) {
        std::vector<double> actor_grad(models.actor.net.n_params(), 0.0);
        const double inv = 1.0 / double(batch.actor_pairs.size());
        for (const auto& [fc, fr] : batch.actor_pairs) {
            LossGrad lg = actor_loss(models.actor, fc, fr, config.beta);
            diag.l_actor += lg.loss * inv;
            for (std::size_t i = 0; i < actor_grad.size(); ++i) actor_grad[i] += lg.grad[i] * inv;
        }
        guard(diag.l_actor, "l_actor");
        models.actor.net.apply_gradient_step(actor_grad.data(), config.lr_actor);
    }
    return diag;
}

// ---------------------------------------------------------------------------
// Candidate sources

class CandidateSource {
public:
    virtual ~CandidateSource() = default;
    virtual std::vector<Candidate> candidates(Day day, const PromptContext& ctx) = 0;
};

// Seeded stand-in for sampling a language model: uniform alphas, Gaussian
// rationale embeddings, uniform lengths in [20, 200].
class SyntheticCandidateSource : public CandidateSource {
public:
    SyntheticCandidateSource(int k, int rationale_dim, std::uint64_t seed)
        : k_(k), dim_(rationale_dim), rng_(seed) {}

    std::vector<Candidate> candidates(Day day, const PromptContext&) override {
        std::vector<Candidate> out;
        for (int i = 0; i < k_; ++i) {
            Candidate c;
            c.id = format_day(day) + "#" + std::to_string(i);
            c.alpha = 2.0 * rng_.uniform() - 1.0;
            for (int d = 0; d < dim_; ++d) c.rationale_vec.push_back(rng_.gauss());
            c.length = 20 + int(rng_.below(181));
            out.push_back(std::move(c));
        }
        return out;
    }

private:
    int k_;
    int dim_;
    RngStream rng_;
};

// Replays candidates from a candidates.jsonl fixture.
class JsonlCandidateSource : public CandidateSource {
public:
    explicit JsonlCandidateSource(const std::string& path) {
        for (auto& dc : load_candidates_jsonl(path)) {
            by_day_[dc.day.value].push_back(std::move(dc.candidate));
        }
    }

    std::vector<Candidate> candidates(Day day, const PromptContext&) override {
        auto it = by_day_.find(day.value);
        return it == by_day_.end() ? std::vector<Candidate>{} : it->second;
    }

private:
    std::map<std::int32_t, std::vector<Candidate>> by_day_;
};

// ---------------------------------------------------------------------------
// Dataset construction

struct PreferenceConfig {
    double rho = 0.3;
    int k_candidates = 4;
    int n_eval = 3;
    double judge_noise_sd = 0.05;
    double score_lo = -1.0;
    double score_hi = 1.0;
    double k_base = 32.0;
    double sigma_max = 0.04;
    double variance_gate = 0.02;  // minimum sigma_t for judgment pairing
    double verbosity_pct = 95.0;
    double omega1 = 1.0;
    double omega2 = 1.0;

    void validate() const {
        if (!(rho >= 0 && rho <= 1)) fail(kPreferenceModule, "rho must lie in [0, 1]");
        if (k_candidates < 1 || n_eval < 1)
            fail(kPreferenceModule, "k_candidates and n_eval must be positive");
        if (!(judge_noise_sd >= 0)) fail(kPreferenceModule, "judge_noise_sd must be >= 0");
        if (!(score_lo < score_hi)) fail(kPreferenceModule, "score range must be non-empty");
        if (!(k_base > 0 && sigma_max > 0))
            fail(kPreferenceModule, "k_base and sigma_max must be positive");
        if (!(variance_gate >= 0)) fail(kPreferenceModule, "variance_gate must be >= 0");
        if (!(verbosity_pct > 0 && verbosity_pct <= 100))
            fail(kPreferenceModule, "verbosity_pct must lie in (0, 100]");
        if (!(omega1 >= 0 && omega2 >= 0)) fail(kPreferenceModule, "omega weights must be >= 0");
    }
};

// Per-day market series shared by dataset construction and actor features.
struct DayMarketSeries {
    std::vector<Day> days;                          // complete days, ascending
    std::vector<double> basket_log_return;          // [t], 0 for t = 0
    std::vector<double> sigma;                      // EW vol of basket log-returns up to t
    std::vector<ContextFeatures> features;          // for day t (uses data before t)
};

inline DayMarketSeries build_day_series(const MarketCorpus& corpus, int ew_halflife_days) {
    DayMarketSeries s;
    s.days = corpus.complete_days();
    const std::size_t n = s.days.size();
    s.basket_log_return.assign(n, 0.0);
    s.sigma.assign(n, 0.0);
    s.features.assign(n, ContextFeatures{});
    std::vector<double> history;
    for (std::size_t t = 0; t < n; ++t) {
        if (t >= 1) {
            double mean_ratio = 0;
            for (Asset a : kAssets) {
                mean_ratio += corpus.candle(a, s.days[t])->close /
                              corpus.candle(a, s.days[t - 1])->close;
            }
            mean_ratio /= kNumAssets;
            s.basket_log_return[t] = std::log(mean_ratio);
            history.push_back(s.basket_log_return[t]);
        }
        if (history.size() >= 2) {
            s.sigma[t] = std::sqrt(ew_stats(history, ew_halflife_days).var);
        }
        ContextFeatures f;
        if (t >= 2) {
            for (Asset a : kAssets) {
                at(f.prev_day_log_return, a) = std::log(
                    corpus.candle(a, s.days[t - 1])->close / corpus.candle(a, s.days[t - 2])->close);
            }
        }
        f.ew_vol = t >= 1 ? s.sigma[t - 1] : 0.0;
        s.features[t] = f;
    }
    return s;
}

// Realized five-channel reward of a candidate on day index t of the series.
// Per-asset channels are averaged across the three assets; the Sharpe window
// is the basket log-return history with today's entry scaled by the
// candidate's alpha. Degenerate Sharpe windows and zero rationale vectors
// contribute 0 to their channels.
inline RewardVector realized_rewards(const Candidate& c, std::size_t t, const MarketCorpus& corpus,
                                     const DayMarketSeries& series, const RewardConfig& rcfg,
                                     double probe_notional_base) {
    if (t < 1 || t >= series.days.size())
        fail(kTrainingModule, "realized_rewards: day index needs a prior day");
    Day d = series.days[t];
    Day prev = series.days[t - 1];
    RewardVector r;
    double sum_ret = 0, sum_dd = 0, sum_liq = 0;
    for (Asset a : kAssets) {
        const Candle* cd = corpus.candle(a, d);
        const Candle* cp = corpus.candle(a, prev);
        const OnChainDaily* oc = corpus.onchain(a, d);
        if (!oc) {
            fail(kTrainingModule, "realized_rewards: missing on-chain record for (" +
                                      std::string(to_string(a)) + ", " + format_day(d) + ")");
        }
        sum_ret += reward_return(c.alpha, cp->close, cd->close, rcfg.fee_bps, rcfg.scale_return);
        std::vector<double> path =
            c.alpha >= 0 ? std::vector<double>{cd->open, cd->high, cd->low, cd->close}
                         : std::vector<double>{cd->open, cd->low, cd->high, cd->close};
        sum_dd += reward_drawdown(path, c.alpha, rcfg.scale_drawdown);
        sum_liq += reward_liquidity(std::abs(c.alpha) * probe_notional_base, cd->volume,
                                    oc->gas_price_mean_gwei, rcfg.slippage_threshold_bps,
                                    rcfg.impact_coeff, rcfg.gas_scale, rcfg.scale_liquidity_bps);
    }
    r.r_return = sum_ret / kNumAssets;
    r.r_dd = sum_dd / kNumAssets;
    r.r_liq = sum_liq / kNumAssets;
    std::vector<double> window(series.basket_log_return.begin() + 1,
                               series.basket_log_return.begin() + std::ptrdiff_t(t) + 1);
    if (!window.empty()) window.back() *= c.alpha;
    if (window.size() >= 2) {
        try {
            r.r_sharpe = reward_sharpe(window, rcfg.ew_halflife_days, rcfg.scale_sharpe);
        } catch (const Error&) {
            r.r_sharpe = 0;
        }
    }
    const SentimentSnapshot* sent = corpus.sentiment(d);
    if (!sent) fail(kTrainingModule, "realized_rewards: missing sentiment for " + format_day(d));
    try {
        r.r_sent = reward_sentiment(c.rationale_vec, sent->vector);
    } catch (const Error&) {
        r.r_sent = 0;
    }
    return r;
}

struct DatasetPass {
    TrainBatch pairs;  // full epoch dataset (chosen/preferred first)
    std::vector<DatedCandidate> candidates;
    std::vector<PreferencePairRecord> pair_records;
    double mean_elo_spread = 0;  // mean over gated days, natural-logistic units
    int gated_days = 0;
    double model_elo = 1500.0;   // online display rating after the pass
};

// One construction sweep over every day with a prior day: generate and score
// candidates, pick the day's actor pair, and on high-volatility days run the
// judgment tournament for a judge pair. Also advances the online 400-scale
// rating of the day's chosen signal against the equal-weight market.
inline DatasetPass construct_dataset(const MarketCorpus& corpus, CandidateSource& source,
                                     const ModelBundle& models, const DayMarketSeries& series,
                                     const PreferenceConfig& prefs, const RewardConfig& rcfg,
                                     double probe_notional_base, RngStream& noise_rng,
                                     double model_elo_start = 1500.0) {
    prefs.validate();
    DatasetPass pass;
    pass.model_elo = model_elo_start;
    const double market_elo = 1500.0;
    for (std::size_t t = 1; t < series.days.size(); ++t) {
        Day d = series.days[t];
        PromptContext ctx = build_prompt_context(d, corpus);
        std::vector<Candidate> raw = source.candidates(d, ctx);
        if (raw.size() < 2) continue;
        std::map<std::string, RewardVector> realized;
        for (const auto& c : raw) {
            realized[c.id] = realized_rewards(c, t, corpus, series, rcfg, probe_notional_base);
        }
        auto judge_fn = [&](const Candidate& c) {
            return aggregate(models.aggregator, realized.at(c.id)) +
                   noise_rng.gauss(0.0, prefs.judge_noise_sd);
        };
        std::vector<Candidate> scored;
        for (const auto& c : raw) {
            scored.push_back(score_candidates(judge_fn, c, prefs.n_eval, prefs.score_lo,
                                              prefs.score_hi));
            pass.candidates.push_back({d, scored.back()});
        }
        if (auto pair = select_actor_pair(scored, prefs.rho)) {
            pass.pairs.actor_pairs.emplace_back(actor_features(pair->chosen, series.features[t]),
                                                actor_features(pair->rejected, series.features[t]));
            pass.pair_records.push_back({d, pair->chosen.id, pair->rejected.id, PairKind::Actor});
            double bret = std::expm1(series.basket_log_return[t]);
            bool beat = pair->chosen.alpha * bret > bret;
            double k_t = elo_dynamic_k(prefs.k_base, series.sigma[t], prefs.sigma_max);
            pass.model_elo += elo_update(pass.model_elo, market_elo, k_t, beat);
        }
        if (series.sigma[t] >= prefs.variance_gate) {
            std::vector<JudgmentRecord> judgments;
            for (const auto& c : scored) {
                if (!c.mean_score) continue;
                judgments.push_back({c.id, realized.at(c.id), *c.mean_score, c.length});
            }
            if (judgments.size() >= 2) {
                WinMatrix B = build_win_matrix(judgments, prefs.omega1, prefs.omega2);
                try {
                    EloState elo = fit_elo_mle(B);
                    int cap = verbosity_percentile(judgments, prefs.verbosity_pct);
                    if (auto jp = select_judge_pair(judgments, elo.ratings, cap)) {
                        const auto& chosen = judgments[jp->first];
                        const auto& rejected = judgments[jp->second];
                        pass.pairs.judge_pairs.emplace_back(chosen.score_vector,
                                                            rejected.score_vector);
                        pass.pair_records.push_back({d, chosen.id, rejected.id, PairKind::Judge});
                        auto [lo, hi] = std::minmax_element(elo.ratings.begin(), elo.ratings.end());
                        pass.mean_elo_spread += *hi - *lo;
                        pass.gated_days += 1;
                    }
                } catch (const Error&) {
                    // all-zero or disconnected tournament: no judge pair today
                }
            }
        }
    }
    if (pass.gated_days > 0) pass.mean_elo_spread /= pass.gated_days;
    return pass;
}

// ---------------------------------------------------------------------------
// Loop orchestration

struct LoopConfig {
    TrainConfig train;
    PreferenceConfig prefs;
    RewardConfig rewards;
    double probe_notional_base = 1'000'000.0 * 0.5 / 3.0;
    int epochs = 1;
    int hidden_agg = 8;
    int hidden_judge = 4;
    int hidden_actor = 16;
    double init_scale = 0.1;
};

// Aggregator starts at the symmetric mean (sign-correct for every channel);
// the judging and actor nets start from small seeded Gaussian draws.
inline ModelBundle init_models(int rationale_dim, const LoopConfig& cfg) {
    ModelBundle m;
    m.aggregator = AggregatorParams{Mlp::mean_init(5, cfg.hidden_agg)};
    RngStream meta_rng(cfg.train.rng_seed, "init.meta");
    RngStream judge_rng(cfg.train.rng_seed, "init.judge");
    RngStream actor_rng(cfg.train.rng_seed, "init.actor");
    m.meta.g = Mlp::random_init(1, cfg.hidden_judge, meta_rng, cfg.init_scale);
    m.judge.g = Mlp::random_init(1, cfg.hidden_judge, judge_rng, cfg.init_scale);
    m.actor.net = Mlp::random_init(rationale_dim + 6, cfg.hidden_actor, actor_rng, cfg.init_scale);
    return m;
}

struct LoopResult {
    ModelBundle models;
    std::string metrics_csv;
    std::vector<PreferencePairRecord> last_pass_pairs;
    std::vector<DatedCandidate> last_pass_candidates;
    double final_model_elo = 1500.0;
};

inline TrainBatch subsample_batch(const TrainBatch& full, int batch_size, RngStream& rng) {
    auto pick = [&](std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        if (int(n) <= batch_size) return idx;
        // partial Fisher-Yates: first batch_size entries are the sample
        for (int i = 0; i < batch_size; ++i) {
            std::size_t j = i + std::size_t(rng.below(n - std::size_t(i)));
            std::swap(idx[std::size_t(i)], idx[j]);
        }
        idx.resize(std::size_t(batch_size));
        std::sort(idx.begin(), idx.end());
        return idx;
    };
    TrainBatch b;
    for (std::size_t i : pick(full.judge_pairs.size())) b.judge_pairs.push_back(full.judge_pairs[i]);
    for (std::size_t i : pick(full.actor_pairs.size())) b.actor_pairs.push_back(full.actor_pairs[i]);
    return b;
}

// Alternates a dataset-construction pass with `iterations` train steps, per
// epoch. The metrics log has one row per step:
// iter,l_meta,l_align,l_actor,n_actor_pairs,n_judge_pairs,elo_spread.
inline LoopResult run_training_loop(const MarketCorpus& corpus, CandidateSource& source,
                                    const LoopConfig& cfg) {
    cfg.train.validate();
    cfg.prefs.validate();
    cfg.rewards.validate();
    if (cfg.epochs < 0) fail(kTrainingModule, "epochs must be non-negative");
    DayMarketSeries series = build_day_series(corpus, cfg.rewards.ew_halflife_days);
    if (series.days.size() < 2)
        fail(kTrainingModule, "training needs at least 2 complete days of data");
    LoopResult result;
    result.models = init_models(int(corpus.sentiment_dim()), cfg);
    result.metrics_csv = "iter,l_meta,l_align,l_actor,n_actor_pairs,n_judge_pairs,elo_spread\n";
    RngStream noise_rng(cfg.train.rng_seed, "loop.noise");
    RngStream batch_rng(cfg.train.rng_seed, "loop.batch");
    double model_elo = 1500.0;
    int iter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        DatasetPass pass =
            construct_dataset(corpus, source, result.models, series, cfg.prefs, cfg.rewards,
                              cfg.probe_notional_base, noise_rng, model_elo);
        model_elo = pass.model_elo;
        for (int i = 0; i < cfg.train.iterations; ++i, ++iter) {
            TrainBatch batch = subsample_batch(pass.pairs, cfg.train.batch_size, batch_rng);
            StepDiagnostics diag = train_step(result.models, batch, cfg.train);
            result.metrics_csv += std::to_string(iter) + "," + fmt_double(diag.l_meta) + "," +
                                  fmt_double(diag.l_align) + "," + fmt_double(diag.l_actor) + "," +
                                  std::to_string(pass.pairs.actor_pairs.size()) + "," +
                                  std::to_string(pass.pairs.judge_pairs.size()) + "," +
                                  fmt_double(pass.mean_elo_spread) + "\n";
        }
        if (epoch == cfg.epochs - 1) {
            result.last_pass_pairs = pass.pair_records;
            result.last_pass_candidates = pass.candidates;
        }
    }
    result.final_model_elo = model_elo;
    return result;
}

// ---------------------------------------------------------------------------
// Model bundle persistence: one JSON file per model, flat parameter arrays

inline void save_models(const ModelBundle& models, const std::string& dir) {
    atomic_write_file(dir + "/aggregator.json", models.aggregator.net.to_json().dump(2) + "\n",
                      kTrainingModule);
    atomic_write_file(dir + "/meta_judge.json", models.meta.g.to_json().dump(2) + "\n",
                      kTrainingModule);
    atomic_write_file(dir + "/judge.json", models.judge.g.to_json().dump(2) + "\n",
                      kTrainingModule);
    atomic_write_file(dir + "/actor.json", models.actor.net.to_json().dump(2) + "\n",
                      kTrainingModule);
}

inline Mlp load_mlp_file(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path, kTrainingModule), nullptr, false);
    if (j.is_discarded()) fail(kTrainingModule, path + ": invalid JSON");
    return Mlp::from_json(j, kTrainingModule);
}

inline ModelBundle load_models(const std::string& dir) {
    ModelBundle m;
    m.aggregator.net = load_mlp_file(dir + "/aggregator.json");
    if (m.aggregator.net.in_dim != 5) fail(kTrainingModule, "aggregator must take 5 inputs");
    m.meta.g = load_mlp_file(dir + "/meta_judge.json");
    m.judge.g = load_mlp_file(dir + "/judge.json");
    if (m.meta.g.in_dim != 1 || m.judge.g.in_dim != 1)
        fail(kTrainingModule, "judge nets must take 1 input");
    m.actor.net = load_mlp_file(dir + "/actor.json");
    if (m.actor.net.in_dim < 7) fail(kTrainingModule, "actor net input dimension too small");
    return m;
}

// ---------------------------------------------------------------------------
// Actor-driven backtest policy: each day, draw candidates, score them with
// the trained actor, and emit the top-scoring candidate's alpha. History for
// the context features accumulates from the contexts the policy has seen.

class ActorDrivenPolicy : public Policy {
public:
    ActorDrivenPolicy(ModelBundle models, int k_candidates, int ew_halflife_days,
                      std::uint64_t seed)
        : models_(std::move(models)),
          source_(k_candidates, models_.actor.rationale_dim(), stream_seed(seed, "policy.actor")),
          halflife_(ew_halflife_days) {}

    double alpha(const PromptContext& ctx) override {
        ContextFeatures f;
        if (seen_closes_.size() >= 2) {
            const auto& prev = seen_closes_[seen_closes_.size() - 1];
            const auto& prev2 = seen_closes_[seen_closes_.size() - 2];
            for (Asset a : kAssets)
                at(f.prev_day_log_return, a) = std::log(at(prev, a) / at(prev2, a));
        }
        if (basket_lr_.size() >= 2) f.ew_vol = std::sqrt(ew_stats(basket_lr_, halflife_).var);
        std::vector<Candidate> cands = source_.candidates(ctx.date, ctx);
        double best_score = 0, best_alpha = 0;
        bool first = true;
        for (const auto& c : cands) {
            double s = models_.actor.score(actor_features(c, f));
            if (first || s > best_score) {
                best_score = s;
                best_alpha = c.alpha;
                first = false;
            }
        }
        PerAsset<double> closes;
        for (Asset a : kAssets) at(closes, a) = at(ctx.candles, a).close;
        if (!seen_closes_.empty()) {
            double mean_ratio = 0;
            for (Asset a : kAssets) mean_ratio += at(closes, a) / at(seen_closes_.back(), a);
            basket_lr_.push_back(std::log(mean_ratio / kNumAssets));
        }
        seen_closes_.push_back(closes);
        return best_alpha;
    }

private:
    ModelBundle models_;
    SyntheticCandidateSource source_;
    int halflife_;
    std::vector<PerAsset<double>> seen_closes_;
    std::vector<double> basket_lr_;
};

}  // namespace preftrade
