#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preftrade/common.hpp"
#include "preftrade/mlp.hpp"
#include "preftrade/rewards.hpp"

namespace preftrade {

inline constexpr const char* kPreferenceModule = "preference";

// ---------------------------------------------------------------------------
// Candidates and tier partitioning

struct Candidate {
    std::string id;
    double alpha = 0;                   // position signal in [-1, 1]
    std::vector<double> rationale_vec;  // D-dimensional rationale embedding
    int length = 1;                     // token count
    std::vector<double> raw_scores;     // surviving evaluations
    std::optional<double> mean_score;   // absent when every evaluation was malformed
};

// Evaluate the candidate n_eval times; evaluations that come back non-finite
// or outside [score_lo, score_hi] are discarded as malformed. The mean of the
// survivors becomes the candidate's score; a candidate with no survivors
// stays unscored.
inline Candidate score_candidates(const std::function<double(const Candidate&)>& judge,
                                  Candidate candidate, int n_eval, double score_lo = -1.0,
                                  double score_hi = 1.0) {
    if (n_eval < 1) fail(kPreferenceModule, "score_candidates: n_eval must be at least 1");
    candidate.raw_scores.clear();
    candidate.mean_score.reset();
    for (int i = 0; i < n_eval; ++i) {
        double s = judge(candidate);
        if (std::isfinite(s) && s >= score_lo && s <= score_hi) {
            candidate.raw_scores.push_back(s);
        }
    }
    if (!candidate.raw_scores.empty()) {
        double sum = std::accumulate(candidate.raw_scores.begin(), candidate.raw_scores.end(), 0.0);
        candidate.mean_score = sum / double(candidate.raw_scores.size());
    }
    return candidate;
}

struct TierPartition {
    double top_lo = 0, top_hi = 0;
    double low_lo = 0, low_hi = 0;
    double rho = 0;

    bool in_top(double s) const { return s >= top_lo && s <= top_hi; }
    bool in_low(double s) const { return s >= low_lo && s <= low_hi; }
};

// Affine tier bounds between the score extremes: the top tier spans
// [(1-rho) S_max + rho S_min, S_max], the low tier [S_min, (1-rho) S_min +
// rho S_max].
inline TierPartition partition_tiers(const std::vector<double>& scores, double rho) {
    if (!(rho >= 0 && rho <= 1)) fail(kPreferenceModule, "partition_tiers: rho must lie in [0, 1]");
    if (scores.size() < 2) fail(kPreferenceModule, "partition_tiers: need at least 2 scores");
    double s_min = scores[0], s_max = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) fail(kPreferenceModule, "partition_tiers: non-finite score");
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
    }
    if (s_min == s_max)
        fail(kPreferenceModule, "partition_tiers: degenerate (all scores equal)");
    TierPartition t;
    t.rho = rho;
    t.top_hi = s_max;
    t.top_lo = (1.0 - rho) * s_max + rho * s_min;
    t.low_lo = s_min;
    t.low_hi = (1.0 - rho) * s_min + rho * s_max;
    return t;
}

struct ActorPair {
    Candidate chosen;
    Candidate rejected;
};

// Chosen: the shortest top-tier candidate (ties: higher score, then lower
// id). Rejected: the longest low-tier candidate (ties: lower score, then
// lower id). Candidates without a score are ignored. Returns nothing when a
// tier is empty, the scores are degenerate, or both picks land on the same
// candidate (possible when rho > 0.5 makes the tiers overlap).
inline std::optional<ActorPair> select_actor_pair(const std::vector<Candidate>& candidates,
                                                  double rho) {
    std::vector<const Candidate*> valid;
    for (const auto& c : candidates) {
        if (c.mean_score) valid.push_back(&c);
    }
    if (valid.size() < 2) return std::nullopt;
    std::vector<double> scores;
    for (const auto* c : valid) scores.push_back(*c->mean_score);
    bool all_equal = std::all_of(scores.begin(), scores.end(),
                                 [&](double s) { return s == scores[0]; });
    if (all_equal) return std::nullopt;
    TierPartition tiers = partition_tiers(scores, rho);
    // (length, -score, id) lexicographic; shorter wins, higher score breaks
    // length ties, lower id breaks exact ties.
    auto better_chosen = [](const Candidate* a, const Candidate* b) {
        if (a->length != b->length) return a->length < b->length;
        if (*a->mean_score != *b->mean_score) return *a->mean_score > *b->mean_score;
        return a->id < b->id;
    };
    auto better_rejected = [](const Candidate* a, const Candidate* b) {
        if (a->length != b->length) return a->length > b->length;
        if (*a->mean_score != *b->mean_score) return *a->mean_score < *b->mean_score;
        return a->id < b->id;
    };
    const Candidate* chosen = nullptr;
    const Candidate* rejected = nullptr;
    for (const auto* c : valid) {
        double s = *c->mean_score;
        if (tiers.in_top(s) && (!chosen || better_chosen(c, chosen))) chosen = c;
        if (tiers.in_low(s) && (!rejected || better_rejected(c, rejected))) rejected = c;
    }
    if (!chosen || !rejected || chosen->id == rejected->id) return std::nullopt;
    return ActorPair{*chosen, *rejected};
}

// ---------------------------------------------------------------------------
// Judgments, win matrix, Elo

struct JudgmentRecord {
    std::string id;
    RewardVector score_vector;  // realized channel values the judgment was about
    double scalar_score = 0;    // the judge's scalar verdict
    int verbosity = 1;          // token count of the judgment
};

struct WinMatrix {
    int m = 0;
    std::vector<double> b;  // m x m row-major, b[i*m + j] = wins of i over j

    static WinMatrix zeros(int m) { return {m, std::vector<double>(std::size_t(m) * m, 0.0)}; }
    double& at(int i, int j) { return b[std::size_t(i) * m + j]; }
    double at(int i, int j) const { return b[std::size_t(i) * m + j]; }

    void validate() const {
        if (m <= 0 || b.size() != std::size_t(m) * m)
            fail(kPreferenceModule, "win matrix: bad shape");
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (!(at(i, j) >= 0)) fail(kPreferenceModule, "win matrix: negative entry");
            }
            if (at(i, i) != 0) fail(kPreferenceModule, "win matrix: nonzero diagonal");
        }
    }
};

struct EloState {
    std::vector<double> ratings;  // sum zero
    double k_base = 32.0;
    double sigma_max = 0.04;
};

// Volatility-scaled step size: K = k_base * (1 + min(sigma, sigma_max) /
// sigma_max), so K never exceeds 2 k_base.
inline double elo_dynamic_k(double k_base, double sigma_t, double sigma_max) {
    if (!(sigma_max > 0)) fail(kPreferenceModule, "elo_dynamic_k: sigma_max must be positive");
    if (!(sigma_t >= 0)) fail(kPreferenceModule, "elo_dynamic_k: sigma_t must be non-negative");
    if (!(k_base > 0)) fail(kPreferenceModule, "elo_dynamic_k: k_base must be positive");
    double sigma = std::min(sigma_t, sigma_max);
    return k_base * (1.0 + sigma / sigma_max);
}

// Non-zero-sum rating adjustment on the 400-point logistic scale:
// delta = k * (I[model beat market] - 1 / (1 + 10^((s_opp - s_model)/400))).
inline double elo_update(double s_model, double s_opponent, double k, bool model_beat_market) {
    if (!(k > 0)) fail(kPreferenceModule, "elo_update: k must be positive");
    double expected = 1.0 / (1.0 + std::pow(10.0, (s_opponent - s_model) / 400.0));
    return k * ((model_beat_market ? 1.0 : 0.0) - expected);
}

// Weighted Bradley-Terry log-likelihood of the win matrix under ratings eps
// (natural-logistic scale).
inline double elo_objective(const WinMatrix& B, const std::vector<double>& eps) {
    if (int(eps.size()) != B.m) fail(kPreferenceModule, "elo_objective: size mismatch");
    double obj = 0;
    for (int i = 0; i < B.m; ++i) {
        for (int j = 0; j < B.m; ++j) {
            if (i == j || B.at(i, j) == 0) continue;
            // log sigma(x) = -softplus(-x), numerically stable
            obj -= B.at(i, j) * softplus(-(eps[std::size_t(i)] - eps[std::size_t(j)]));
        }
    }
    return obj;
}

// Maximum-likelihood ratings for the win matrix: gradient ascent with fixed
// step 0.1 until the gradient infinity-norm drops below 1e-8 or 1e4
// iterations pass, then re-centered so the ratings sum to zero. Requires a
// connected comparison graph.
inline EloState fit_elo_mle(const WinMatrix& B) {
    B.validate();
    const int m = B.m;
    double total = std::accumulate(B.b.begin(), B.b.end(), 0.0);
    if (total == 0) fail(kPreferenceModule, "fit_elo_mle: degenerate all-zero win matrix");
    std::vector<int> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[std::size_t(x)] != x) {
            parent[std::size_t(x)] = parent[std::size_t(parent[std::size_t(x)])];
            x = parent[std::size_t(x)];
        }
        return x;
    };
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (B.at(i, j) + B.at(j, i) > 0) parent[std::size_t(find(i))] = find(j);
        }
    }
    for (int i = 1; i < m; ++i) {
        if (find(i) != find(0))
            fail(kPreferenceModule, "fit_elo_mle: disconnected comparison graph");
    }
    std::vector<double> eps(std::size_t(m), 0.0);
    std::vector<double> grad(std::size_t(m), 0.0);
    const double step = 0.1;
    for (int iter = 0; iter < 10000; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                double w = B.at(i, j);
                if (w == 0) continue;
                // d/d eps_i of w log sigma(eps_i - eps_j) = w sigma(eps_j - eps_i)
                double s = logistic(eps[std::size_t(j)] - eps[std::size_t(i)]);
                grad[std::size_t(i)] += w * s;
                grad[std::size_t(j)] -= w * s;
            }
        }
        double inf_norm = 0;
        for (double g : grad) inf_norm = std::max(inf_norm, std::abs(g));
        if (inf_norm < 1e-8) break;
        for (int i = 0; i < m; ++i) eps[std::size_t(i)] += step * grad[std::size_t(i)];
    }
    double mean = std::accumulate(eps.begin(), eps.end(), 0.0) / double(m);
    for (double& e : eps) e -= mean;
    EloState state;
    state.ratings = eps;
    return state;
}

// Natural-logistic ratings displayed on the familiar 400-point scale.
inline double elo_display_scale(double natural_rating) {
    return natural_rating * (400.0 / std::log(10.0));
}

// Pairwise accuracy tournament over the day's judgments: each judgment's
// error is the distance between its scalar verdict and the plain mean of its
// realized channels; in every pairing (lower index presented first) the more
// accurate side wins, earning omega1 when presented first and omega2 when
// presented second. Exact ties record nothing.
inline WinMatrix build_win_matrix(const std::vector<JudgmentRecord>& judgments,
                                  double omega1 = 1.0, double omega2 = 1.0) {
    const int m = int(judgments.size());
    WinMatrix B = WinMatrix::zeros(m);
    std::vector<double> err(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        auto ch = judgments[std::size_t(i)].score_vector.as_array();
        double q = std::accumulate(ch.begin(), ch.end(), 0.0) / double(ch.size());
        err[std::size_t(i)] = std::abs(judgments[std::size_t(i)].scalar_score - q);
    }
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (err[std::size_t(i)] < err[std::size_t(j)]) {
                B.at(i, j) += omega1;  // winner was presented first
            } else if (err[std::size_t(j)] < err[std::size_t(i)]) {
                B.at(j, i) += omega2;  // winner was presented second
            }
        }
    }
    return B;
}

// Nearest-rank percentile of the judgment verbosities.
inline int verbosity_percentile(const std::vector<JudgmentRecord>& judgments, double pct) {
    if (judgments.empty()) fail(kPreferenceModule, "verbosity_percentile: empty batch");
    std::vector<int> v;
    for (const auto& j : judgments) v.push_back(j.verbosity);
    std::sort(v.begin(), v.end());
    double rank = std::ceil(pct / 100.0 * double(v.size()));
    std::size_t idx = std::size_t(std::max(1.0, std::min(rank, double(v.size())))) - 1;
    return v[idx];
}

// Highest- and lowest-rated judgments after dropping verbose ones. Ties break
// toward the lower id; the rejected side is picked among the remaining
// judgments so the pair is never one judgment twice.
inline std::optional<std::pair<std::size_t, std::size_t>> select_judge_pair(
    const std::vector<JudgmentRecord>& judgments, const std::vector<double>& ratings,
    int verbosity_cap) {
    if (judgments.size() != ratings.size())
        fail(kPreferenceModule, "select_judge_pair: ratings size mismatch");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < judgments.size(); ++i) {
        if (judgments[i].verbosity <= verbosity_cap) keep.push_back(i);
    }
    if (keep.size() < 2) return std::nullopt;
    auto better = [&](std::size_t a, std::size_t b) {
        if (ratings[a] != ratings[b]) return ratings[a] > ratings[b];
        return judgments[a].id < judgments[b].id;
    };
    auto worse = [&](std::size_t a, std::size_t b) {
        if (ratings[a] != ratings[b]) return ratings[a] < ratings[b];
        return judgments[a].id < judgments[b].id;
    };
    std::size_t chosen = keep[0];
    for (std::size_t i : keep) {
        if (better(i, chosen)) chosen = i;
    }
    std::optional<std::size_t> rejected;
    for (std::size_t i : keep) {
        if (i == chosen) continue;
        if (!rejected || worse(i, *rejected)) rejected = i;
    }
    return std::pair(chosen, *rejected);
}

// ---------------------------------------------------------------------------
// JSONL interchange

struct DatedCandidate {
    Day day{};
    Candidate candidate;
};

enum class PairKind { Actor, Judge };

struct PreferencePairRecord {
    Day day{};
    std::string chosen_id;
    std::string rejected_id;
    PairKind kind = PairKind::Actor;
};

inline nlohmann::json candidate_to_json(const DatedCandidate& dc) {
    return nlohmann::json{{"day", format_day(dc.day)},
                          {"id", dc.candidate.id},
                          {"alpha", dc.candidate.alpha},
                          {"rationale_vec", dc.candidate.rationale_vec},
                          {"length", dc.candidate.length}};
}

inline std::vector<DatedCandidate> load_candidates_jsonl(const std::string& path) {
    std::string text = read_file(path, kPreferenceModule);
    std::vector<DatedCandidate> out;
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
        if (j.is_discarded() || !j.is_object())
            fail(kPreferenceModule, where + ": invalid JSON object");
        DatedCandidate dc;
        try {
            auto d = parse_day(j.at("day").get<std::string>());
            if (!d) fail(kPreferenceModule, where + ": bad day");
            dc.day = *d;
            dc.candidate.id = j.at("id").get<std::string>();
            dc.candidate.alpha = j.at("alpha").get<double>();
            dc.candidate.rationale_vec = j.at("rationale_vec").get<std::vector<double>>();
            dc.candidate.length = j.at("length").get<int>();
        } catch (const nlohmann::json::exception& e) {
            fail(kPreferenceModule, where + ": " + e.what());
        }
        if (dc.candidate.length < 1) fail(kPreferenceModule, where + ": length must be positive");
        if (!(dc.candidate.alpha >= -1 && dc.candidate.alpha <= 1))
            fail(kPreferenceModule, where + ": alpha outside [-1, 1]");
        out.push_back(std::move(dc));
    }
    return out;
}

inline std::string serialize_candidates_jsonl(const std::vector<DatedCandidate>& candidates) {
    std::string out;
    for (const auto& dc : candidates) out += candidate_to_json(dc).dump() + "\n";
    return out;
}

inline std::string serialize_pairs_jsonl(const std::vector<PreferencePairRecord>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        nlohmann::json j{{"day", format_day(p.day)},
                         {"chosen_id", p.chosen_id},
                         {"rejected_id", p.rejected_id},
                         {"kind", p.kind == PairKind::Actor ? "actor" : "judge"}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace preftrade
