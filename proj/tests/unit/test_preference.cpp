#include <catch2/catch_amalgamated.hpp>
#include <preftrade/preference.hpp>

#include "helpers.hpp"

#include <cmath>
#include <optional>
#include <vector>

using namespace preftrade;
using testutil::TempDir;
using testutil::write;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Candidate cand(std::string id, double alpha, int length) {
    Candidate c;
    c.id = std::move(id);
    c.alpha = alpha;
    c.rationale_vec = {0.1, 0.2};
    c.length = length;
    return c;
}

Candidate scored(std::string id, double score, int length) {
    Candidate c = cand(std::move(id), 0.0, length);
    c.mean_score = score;
    return c;
}

JudgmentRecord judgment(std::string id, double channel_level, double scalar, int verbosity) {
    JudgmentRecord j;
    j.id = std::move(id);
    j.score_vector = {channel_level, channel_level, channel_level, channel_level, channel_level};
    j.scalar_score = scalar;
    j.verbosity = verbosity;
    return j;
}

// Reference pair selection by exhaustive scan, used to cross-check the
// library's tie-breaking.
std::optional<ActorPair> brute_force_pair(const std::vector<Candidate>& candidates, double rho) {
    std::vector<const Candidate*> valid;
    for (const auto& c : candidates)
        if (c.mean_score) valid.push_back(&c);
    if (valid.size() < 2) return std::nullopt;
    double lo = **&valid[0]->mean_score, hi = lo;
    for (auto* c : valid) {
        lo = std::min(lo, *c->mean_score);
        hi = std::max(hi, *c->mean_score);
    }
    if (lo == hi) return std::nullopt;
    double top_lo = (1.0 - rho) * hi + rho * lo;
    double low_hi = (1.0 - rho) * lo + rho * hi;
    const Candidate* chosen = nullptr;
    const Candidate* rejected = nullptr;
    for (auto* c : valid) {
        double s = *c->mean_score;
        if (s >= top_lo) {
            if (!chosen || c->length < chosen->length ||
                (c->length == chosen->length && s > *chosen->mean_score) ||
                (c->length == chosen->length && s == *chosen->mean_score && c->id < chosen->id))
                chosen = c;
        }
        if (s <= low_hi) {
            if (!rejected || c->length > rejected->length ||
                (c->length == rejected->length && s < *rejected->mean_score) ||
                (c->length == rejected->length && s == *rejected->mean_score &&
                 c->id < rejected->id))
                rejected = c;
        }
    }
    if (!chosen || !rejected || chosen->id == rejected->id) return std::nullopt;
    return ActorPair{*chosen, *rejected};
}

}  // namespace

TEST_CASE("scoring discards malformed evaluations") {
    int call = 0;
    auto judge = [&](const Candidate&) -> double {
        double vals[] = {0.5, std::numeric_limits<double>::quiet_NaN(), 2.0, -0.1, 0.2};
        return vals[call++ % 5];
    };
    Candidate c = score_candidates(judge, cand("a", 0.1, 50), 5);
    REQUIRE(c.mean_score);
    // NaN and 2.0 fall outside [-1, 1]; survivors are 0.5, -0.1, 0.2
    CHECK(c.raw_scores == std::vector<double>{0.5, -0.1, 0.2});
    CHECK_THAT(*c.mean_score, WithinRel(0.2, 1e-12));

    call = 0;
    auto bad = [&](const Candidate&) { return std::numeric_limits<double>::infinity(); };
    Candidate uns = score_candidates(bad, cand("b", 0.1, 50), 3);
    CHECK_FALSE(uns.mean_score.has_value());
    CHECK(uns.raw_scores.empty());

    CHECK_THROWS_WITH(score_candidates(judge, cand("c", 0.0, 10), 0),
                      ContainsSubstring("n_eval"));
}

TEST_CASE("tier bounds follow the affine formulas exactly") {
    SECTION("pinned hand case") {
        TierPartition t = partition_tiers({0.0, 1.0, 0.4}, 0.25);
        CHECK(t.top_hi == 1.0);
        CHECK_THAT(t.top_lo, WithinRel(0.75, 1e-15));
        CHECK(t.low_lo == 0.0);
        CHECK_THAT(t.low_hi, WithinRel(0.25, 1e-15));
        CHECK(t.in_top(0.8));
        CHECK_FALSE(t.in_top(0.7));
        CHECK(t.in_low(0.1));
        CHECK_FALSE(t.in_low(0.3));
    }
    SECTION("random draws match the direct evaluation to 1e-12") {
        RngStream rng(stream_seed(3, "tiers"));
        for (int i = 0; i < 500; ++i) {
            std::size_t n = 2 + rng.below(10);
            std::vector<double> s;
            for (std::size_t k = 0; k < n; ++k) s.push_back(rng.gauss(0.0, 2.0));
            double rho = rng.uniform();
            double lo = *std::min_element(s.begin(), s.end());
            double hi = *std::max_element(s.begin(), s.end());
            if (lo == hi) continue;
            TierPartition t = partition_tiers(s, rho);
            CHECK_THAT(t.top_lo, WithinAbs((1.0 - rho) * hi + rho * lo, 1e-12));
            CHECK_THAT(t.low_hi, WithinAbs((1.0 - rho) * lo + rho * hi, 1e-12));
            CHECK(t.top_hi == hi);
            CHECK(t.low_lo == lo);
            CHECK((t.top_lo >= t.low_hi - 1e-12 || rho > 0.5));
        }
    }
    SECTION("rho extremes") {
        TierPartition t0 = partition_tiers({1.0, 3.0}, 0.0);
        CHECK(t0.top_lo == 3.0);  // only the max is top-tier
        CHECK(t0.low_hi == 1.0);
        TierPartition t1 = partition_tiers({1.0, 3.0}, 1.0);
        CHECK(t1.top_lo == 1.0);  // everything is in both tiers
        CHECK(t1.low_hi == 3.0);
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(partition_tiers({1.0, 2.0}, -0.1), ContainsSubstring("rho"));
        CHECK_THROWS_WITH(partition_tiers({1.0, 2.0}, 1.1), ContainsSubstring("rho"));
        CHECK_THROWS_WITH(partition_tiers({1.0}, 0.3), ContainsSubstring("at least 2"));
        CHECK_THROWS_WITH(partition_tiers({2.0, 2.0}, 0.3), ContainsSubstring("degenerate"));
        CHECK_THROWS_WITH(partition_tiers({1.0, std::nan("")}, 0.3),
                          ContainsSubstring("non-finite"));
    }
}

TEST_CASE("actor pair selection with length control") {
    SECTION("shortest top-tier wins, longest low-tier loses") {
        std::vector<Candidate> cs = {scored("a", 0.95, 120), scored("b", 0.90, 40),
                                     scored("c", 0.50, 80), scored("d", 0.05, 60),
                                     scored("e", 0.10, 200)};
        auto pair = select_actor_pair(cs, 0.3);
        REQUIRE(pair);
        CHECK(pair->chosen.id == "b");    // 0.90 >= 0.675 and shorter than a
        CHECK(pair->rejected.id == "e");  // 0.10 <= 0.32 and longer than d
    }
    SECTION("length ties break on score then id") {
        std::vector<Candidate> cs = {scored("a", 0.95, 40), scored("b", 0.90, 40),
                                     scored("c", 0.05, 60), scored("d", 0.05, 60)};
        auto pair = select_actor_pair(cs, 0.3);
        REQUIRE(pair);
        CHECK(pair->chosen.id == "a");
        CHECK(pair->rejected.id == "c");
    }
    SECTION("unscored candidates are invisible") {
        std::vector<Candidate> cs = {scored("a", 0.9, 40), scored("b", 0.1, 50),
                                     cand("ghost", 0.0, 1)};
        auto pair = select_actor_pair(cs, 0.3);
        REQUIRE(pair);
        CHECK(pair->chosen.id == "a");
        CHECK(pair->rejected.id == "b");
    }
    SECTION("degenerate inputs yield no pair") {
        CHECK_FALSE(select_actor_pair({scored("a", 0.5, 10)}, 0.3));
        CHECK_FALSE(select_actor_pair({scored("a", 0.5, 10), scored("b", 0.5, 20)}, 0.3));
        CHECK_FALSE(select_actor_pair({cand("x", 0.0, 5), cand("y", 0.0, 6)}, 0.3));
    }
    SECTION("overlapping tiers can collapse onto one candidate") {
        // rho = 1: both tiers span everything; the same candidate is both
        // shortest-top and longest-low only if it is the single valid one.
        std::vector<Candidate> cs = {scored("a", 0.9, 40), scored("b", 0.1, 40)};
        auto pair = select_actor_pair(cs, 1.0);
        REQUIRE(pair);
        CHECK(pair->chosen.id == "a");  // same length: higher score wins
        CHECK(pair->rejected.id == "b");
    }
    SECTION("matches an exhaustive scan on random draws") {
        RngStream rng(stream_seed(3, "pairs"));
        for (int i = 0; i < 300; ++i) {
            std::size_t n = 2 + rng.below(8);
            std::vector<Candidate> cs;
            for (std::size_t k = 0; k < n; ++k) {
                Candidate c = cand("c" + std::to_string(k), 0.0, 10 + int(rng.below(20)));
                if (rng.uniform() < 0.9) c.mean_score = std::floor(rng.uniform() * 5.0) / 4.0;
                cs.push_back(c);
            }
            double rho = rng.uniform();
            auto lib = select_actor_pair(cs, rho);
            auto ref = brute_force_pair(cs, rho);
            REQUIRE(lib.has_value() == ref.has_value());
            if (lib) {
                CHECK(lib->chosen.id == ref->chosen.id);
                CHECK(lib->rejected.id == ref->rejected.id);
            }
        }
    }
}

TEST_CASE("volatility-scaled rating step") {
    CHECK_THAT(elo_dynamic_k(32.0, 0.01, 0.04), WithinRel(40.0, 1e-15));
    CHECK_THAT(elo_dynamic_k(32.0, 0.0, 0.04), WithinRel(32.0, 1e-15));
    CHECK_THAT(elo_dynamic_k(32.0, 0.04, 0.04), WithinRel(64.0, 1e-15));
    CHECK_THAT(elo_dynamic_k(32.0, 9.0, 0.04), WithinRel(64.0, 1e-15));  // capped
    CHECK_THROWS_AS(elo_dynamic_k(0.0, 0.01, 0.04), Error);
    CHECK_THROWS_AS(elo_dynamic_k(32.0, -0.01, 0.04), Error);
    CHECK_THROWS_AS(elo_dynamic_k(32.0, 0.01, 0.0), Error);
}

TEST_CASE("rating update on the 400-point scale") {
    CHECK_THAT(elo_update(1600.0, 1400.0, 32.0, true), WithinRel(7.688098347265349, 1e-15));
    SECTION("win/loss deltas differ by exactly k") {
        RngStream rng(stream_seed(3, "elo"));
        for (int i = 0; i < 200; ++i) {
            double a = 1000.0 + rng.uniform() * 1000.0;
            double b = 1000.0 + rng.uniform() * 1000.0;
            double win = elo_update(a, b, 32.0, true);
            double loss = elo_update(a, b, 32.0, false);
            CHECK(win - loss == 32.0);
        }
    }
    SECTION("equal ratings move by exactly half k") {
        CHECK(elo_update(1500.0, 1500.0, 32.0, true) == 16.0);
        CHECK(elo_update(1500.0, 1500.0, 32.0, false) == -16.0);
        CHECK(elo_update(1234.5, 1234.5, 50.0, true) == 25.0);
    }
    SECTION("expected-score bounds keep deltas inside (-k, k)") {
        CHECK(elo_update(100.0, 3000.0, 32.0, true) < 32.0);
        CHECK(elo_update(100.0, 3000.0, 32.0, true) > 31.9);
        CHECK(elo_update(3000.0, 100.0, 32.0, false) > -32.0);
    }
    CHECK_THROWS_AS(elo_update(1500.0, 1500.0, 0.0, true), Error);
}

TEST_CASE("tournament ratings maximize the pairwise likelihood") {
    SECTION("two items with a 3:1 record sit ln 3 apart") {
        WinMatrix B = WinMatrix::zeros(2);
        B.at(0, 1) = 3.0;
        B.at(1, 0) = 1.0;
        EloState s = fit_elo_mle(B);
        CHECK_THAT(s.ratings[0] - s.ratings[1], WithinAbs(std::log(3.0), 1e-3));
        CHECK_THAT(s.ratings[0] + s.ratings[1], WithinAbs(0.0, 1e-12));
    }
    SECTION("two-item split matches the win fraction") {
        RngStream rng(stream_seed(3, "wins"));
        for (int i = 0; i < 50; ++i) {
            double w = 1.0 + double(rng.below(20));
            double l = 1.0 + double(rng.below(20));
            WinMatrix B = WinMatrix::zeros(2);
            B.at(0, 1) = w;
            B.at(1, 0) = l;
            EloState s = fit_elo_mle(B);
            CHECK_THAT(s.ratings[0] - s.ratings[1], WithinAbs(std::log(w / l), 1e-6));
        }
    }
    SECTION("fitted ratings beat random vectors on the objective") {
        RngStream rng(stream_seed(3, "mle"));
        for (int rep = 0; rep < 10; ++rep) {
            WinMatrix B = WinMatrix::zeros(4);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    if (i != j) B.at(i, j) = double(rng.below(6));
            double total = 0;
            for (double v : B.b) total += v;
            if (total == 0) continue;
            EloState s;
            try {
                s = fit_elo_mle(B);
            } catch (const Error&) {
                continue;  // disconnected draw
            }
            double best = elo_objective(B, s.ratings);
            for (int t = 0; t < 200; ++t) {
                std::vector<double> eps;
                for (int k = 0; k < 4; ++k) eps.push_back(rng.gauss(0.0, 2.0));
                CHECK(best >= elo_objective(B, eps) - 1e-9);
            }
        }
    }
    SECTION("degenerate and disconnected tournaments are rejected") {
        CHECK_THROWS_WITH(fit_elo_mle(WinMatrix::zeros(3)), ContainsSubstring("all-zero"));
        WinMatrix split = WinMatrix::zeros(4);
        split.at(0, 1) = 2.0;
        split.at(2, 3) = 2.0;
        CHECK_THROWS_WITH(fit_elo_mle(split), ContainsSubstring("disconnected"));
        WinMatrix neg = WinMatrix::zeros(2);
        neg.at(0, 1) = -1.0;
        CHECK_THROWS_WITH(fit_elo_mle(neg), ContainsSubstring("negative"));
        WinMatrix diag = WinMatrix::zeros(2);
        diag.at(0, 0) = 1.0;
        diag.at(0, 1) = 1.0;
        CHECK_THROWS_WITH(fit_elo_mle(diag), ContainsSubstring("diagonal"));
    }
    SECTION("display scale") {
        CHECK_THAT(elo_display_scale(std::log(10.0)), WithinRel(400.0, 1e-12));
        CHECK(elo_display_scale(0.0) == 0.0);
    }
}

TEST_CASE("win matrix from judgment accuracy") {
    // channel mean 0.2 everywhere; scalar verdicts at varying distance
    auto j1 = judgment("j1", 0.2, 0.3, 50);   // err 0.1
    auto j2 = judgment("j2", 0.2, 0.5, 80);   // err 0.3
    auto j3 = judgment("j3", 0.2, 0.0, 120);  // err 0.2

    WinMatrix B = build_win_matrix({j1, j2, j3}, 1.0, 0.5);
    CHECK(B.at(0, 1) == 1.0);  // j1 beats j2, presented first
    CHECK(B.at(0, 2) == 1.0);  // j1 beats j3, presented first
    CHECK(B.at(2, 1) == 0.5);  // j3 beats j2, presented second
    CHECK(B.at(1, 0) == 0.0);
    CHECK(B.at(1, 2) == 0.0);
    CHECK(B.at(2, 0) == 0.0);

    SECTION("exact accuracy ties record nothing") {
        // 0.25 and 0.75 are exact in binary, so both errors equal 0.25
        auto t1 = judgment("t1", 0.25, 0.5, 50);
        auto t2 = judgment("t2", 0.25, 0.0, 60);
        WinMatrix T = build_win_matrix({t1, t2}, 1.0, 1.0);
        CHECK(T.at(0, 1) == 0.0);
        CHECK(T.at(1, 0) == 0.0);
    }
}

TEST_CASE("verbosity percentile uses nearest rank") {
    std::vector<JudgmentRecord> js = {judgment("a", 0, 0, 10), judgment("b", 0, 0, 20),
                                      judgment("c", 0, 0, 30), judgment("d", 0, 0, 40)};
    CHECK(verbosity_percentile(js, 95.0) == 40);
    CHECK(verbosity_percentile(js, 100.0) == 40);
    CHECK(verbosity_percentile(js, 75.0) == 30);
    CHECK(verbosity_percentile(js, 50.0) == 20);
    CHECK(verbosity_percentile(js, 1.0) == 10);
    CHECK_THROWS_WITH(verbosity_percentile({}, 95.0), ContainsSubstring("empty"));
}

TEST_CASE("judge pair selection drops verbose judgments") {
    std::vector<JudgmentRecord> js = {judgment("a", 0, 0, 50), judgment("b", 0, 0, 60),
                                      judgment("c", 0, 0, 500)};
    std::vector<double> ratings = {0.5, -0.2, 0.9};
    SECTION("cap filters the verbose best") {
        auto pair = select_judge_pair(js, ratings, 100);
        REQUIRE(pair);
        CHECK(js[pair->first].id == "a");
        CHECK(js[pair->second].id == "b");
    }
    SECTION("no cap keeps it") {
        auto pair = select_judge_pair(js, ratings, 1000);
        REQUIRE(pair);
        CHECK(js[pair->first].id == "c");
        CHECK(js[pair->second].id == "b");
    }
    SECTION("fewer than two survivors yields nothing") {
        CHECK_FALSE(select_judge_pair(js, ratings, 55));
        CHECK_FALSE(select_judge_pair(js, ratings, 10));
    }
    SECTION("tied ratings still produce a two-sided pair") {
        std::vector<double> flat = {0.1, 0.1, 0.1};
        auto pair = select_judge_pair(js, flat, 1000);
        REQUIRE(pair);
        CHECK(js[pair->first].id == "a");
        CHECK(js[pair->second].id == "b");
        CHECK(pair->first != pair->second);
    }
    SECTION("size mismatch is fatal") {
        CHECK_THROWS_WITH(select_judge_pair(js, {0.1}, 100), ContainsSubstring("mismatch"));
    }
}

TEST_CASE("candidate and pair records round-trip through JSONL") {
    TempDir dir("prefjson");
    std::vector<DatedCandidate> cands;
    Candidate a = cand("2025-03-01#0", 0.25, 42);
    a.rationale_vec = {0.5, -1.25, 0.0};
    cands.push_back({*parse_day("2025-03-01"), a});
    Candidate b = cand("2025-03-02#1", -1.0, 7);
    cands.push_back({*parse_day("2025-03-02"), b});

    auto path = write(dir, "cands.jsonl", serialize_candidates_jsonl(cands));
    auto loaded = load_candidates_jsonl(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].day == cands[0].day);
    CHECK(loaded[0].candidate.id == "2025-03-01#0");
    CHECK(loaded[0].candidate.alpha == 0.25);
    CHECK(loaded[0].candidate.rationale_vec == a.rationale_vec);
    CHECK(loaded[0].candidate.length == 42);

    SECTION("validation") {
        auto bad_alpha = write(
            dir, "a.jsonl",
            R"({"day":"2025-03-01","id":"x","alpha":1.5,"rationale_vec":[0.1],"length":10})"
            "\n");
        CHECK_THROWS_WITH(load_candidates_jsonl(bad_alpha), ContainsSubstring("alpha"));
        auto bad_len = write(
            dir, "l.jsonl",
            R"({"day":"2025-03-01","id":"x","alpha":0.5,"rationale_vec":[0.1],"length":0})"
            "\n");
        CHECK_THROWS_WITH(load_candidates_jsonl(bad_len), ContainsSubstring("length"));
        auto bad_day = write(
            dir, "d.jsonl",
            R"({"day":"03/01/2025","id":"x","alpha":0.5,"rationale_vec":[0.1],"length":10})"
            "\n");
        CHECK_THROWS_AS(load_candidates_jsonl(bad_day), Error);
    }
    SECTION("pair records serialize one object per line") {
        std::vector<PreferencePairRecord> pairs = {
            {*parse_day("2025-03-01"), "a", "b", PairKind::Actor},
            {*parse_day("2025-03-01"), "j1", "j2", PairKind::Judge}};
        auto text = serialize_pairs_jsonl(pairs);
        CHECK_THAT(text, ContainsSubstring("\"kind\":\"actor\""));
        CHECK_THAT(text, ContainsSubstring("\"kind\":\"judge\""));
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);
        auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
        CHECK(j["day"] == "2025-03-01");
        CHECK(j["chosen_id"] == "a");
        CHECK(j["rejected_id"] == "b");
    }
}
