#include <catch2/catch_amalgamated.hpp>
#include <preftrade/evaluation.hpp>

#include "helpers.hpp"

#include <cmath>
#include <vector>

using namespace preftrade;
using testutil::TempDir;
using testutil::write;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RatingsMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    RatingsMatrix m = RatingsMatrix::make(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t i = 0; i < rows[r].size(); ++i) m.at(r, i) = rows[r][i];
    return m;
}

// Rank computation that never sorts: rank = (#smaller) + (#equal + 1) / 2.
// Deliberately a different algorithm from the library's, for cross-checks.
std::vector<double> counting_midrank(const std::vector<double>& scores) {
    std::vector<double> ranks(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        int less = 0, equal = 0;
        for (double v : scores) {
            if (v < scores[i]) ++less;
            if (v == scores[i]) ++equal;
        }
        ranks[i] = double(less) + (double(equal) + 1.0) / 2.0;
    }
    return ranks;
}

double direct_w(const std::vector<std::vector<double>>& rows) {
    const std::size_t m = rows.size(), n = rows[0].size();
    std::vector<double> rank_sum(n, 0.0);
    double tie = 0;
    for (const auto& row : rows) {
        auto ranks = counting_midrank(row);
        for (std::size_t i = 0; i < n; ++i) rank_sum[i] += ranks[i];
        for (std::size_t i = 0; i < n; ++i) {
            int equal = 0;
            for (double v : row)
                if (v == row[i]) ++equal;
            tie += double(equal) * equal - 1.0;  // summed over members = t^3 - t per group
        }
    }
    double mean = 0;
    for (double s : rank_sum) mean += s / double(n);
    double S = 0;
    for (double s : rank_sum) S += (s - mean) * (s - mean);
    return 12.0 * S /
           (double(m) * m * (double(n) * n * n - double(n)) - double(m) * tie);
}

}  // namespace

TEST_CASE("mid-rank assignment") {
    CHECK(midrank({10, 20, 30}) == std::vector<double>{1, 2, 3});
    CHECK(midrank({30, 10, 20}) == std::vector<double>{3, 1, 2});
    CHECK(midrank({10, 10, 30, 40}) == std::vector<double>{1.5, 1.5, 3, 4});
    CHECK(midrank({5, 5, 5}) == std::vector<double>{2, 2, 2});
    CHECK(midrank({7, 3, 7, 7, 1}) == std::vector<double>{4, 2, 4, 4, 1});
}

TEST_CASE("concordance across raters") {
    SECTION("identical rankings give exactly one") {
        auto m = from_rows({{1, 2, 3, 4}, {10, 20, 30, 40}, {5, 6, 7, 8}});
        CHECK(kendalls_w(m) == 1.0);
    }
    SECTION("pinned three-rater case without ties") {
        auto m = from_rows({{10, 20, 30, 40}, {20, 10, 30, 40}, {10, 20, 40, 30}});
        CHECK_THAT(kendalls_w(m), WithinRel(0.82222222222222219, 1e-15));
    }
    SECTION("pinned case with one tie group") {
        auto m = from_rows({{10, 20, 30, 40}, {20, 10, 30, 40}, {10, 10, 30, 40}});
        CHECK_THAT(kendalls_w(m), WithinRel(0.93103448275862066, 1e-15));
    }
    SECTION("invariant under relabeling items and raters") {
        auto base = from_rows({{10, 20, 30, 40}, {20, 10, 30, 40}, {10, 20, 40, 30}});
        auto items_permuted = from_rows({{40, 10, 30, 20}, {40, 20, 30, 10}, {30, 10, 40, 20}});
        auto raters_permuted = from_rows({{10, 20, 40, 30}, {10, 20, 30, 40}, {20, 10, 30, 40}});
        CHECK(kendalls_w(items_permuted) == kendalls_w(base));
        CHECK(kendalls_w(raters_permuted) == kendalls_w(base));
    }
    SECTION("matches an independent computation on random matrices") {
        RngStream rng(stream_seed(8, "kendall"));
        for (int rep = 0; rep < 100; ++rep) {
            std::size_t m = 2 + rng.below(4);
            std::size_t n = 2 + rng.below(5);
            std::vector<std::vector<double>> rows(m, std::vector<double>(n));
            bool degenerate = true;
            for (auto& row : rows) {
                for (auto& v : row) v = double(rng.below(4));  // frequent ties
                for (double v : row)
                    if (v != row[0]) degenerate = false;
            }
            if (degenerate) continue;
            double expected = direct_w(rows);
            if (!std::isfinite(expected)) continue;
            CHECK_THAT(kendalls_w(from_rows(rows)), WithinAbs(expected, 1e-9));
        }
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(kendalls_w(from_rows({{1, 2}})), ContainsSubstring("at least 2"));
        CHECK_THROWS_WITH(kendalls_w(from_rows({{1}, {2}})), ContainsSubstring("at least 2"));
        auto holey = RatingsMatrix::make(2, 2);
        holey.at(0, 0) = 1;
        holey.at(0, 1) = 2;
        holey.at(1, 0) = 1;
        CHECK_THROWS_WITH(kendalls_w(holey), ContainsSubstring("missing"));
        auto flat = from_rows({{3, 3, 3}, {5, 5, 5}});
        CHECK_THROWS_WITH(kendalls_w(flat), ContainsSubstring("degenerate"));
    }
}

TEST_CASE("chance-corrected agreement") {
    SECTION("perfect agreement is exactly one for every metric") {
        auto m = from_rows({{1, 2, 3}, {1, 2, 3}});
        CHECK(*krippendorff_alpha(m, AlphaMetric::Nominal) == 1.0);
        CHECK(*krippendorff_alpha(m, AlphaMetric::Ordinal) == 1.0);
        CHECK(*krippendorff_alpha(m, AlphaMetric::Interval) == 1.0);
    }
    SECTION("two raters swapping two values land at -1/2") {
        auto m = from_rows({{1, 2}, {2, 1}});
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Interval), WithinRel(-0.5, 1e-14));
        // with a binary domain the distance scale cancels out of the ratio
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Nominal), WithinRel(-0.5, 1e-14));
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Ordinal), WithinRel(-0.5, 1e-14));
    }
    SECTION("interval metric weighs distance: 2x3 hand case") {
        // one disagreement of size 2 among values {1, 2, 3, 5}
        auto m = from_rows({{1, 2, 3}, {1, 2, 5}});
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Interval), WithinRel(12.0 / 17.0, 1e-13));
    }
    SECTION("ordinal and nominal hand case on a 2x2 with three values") {
        auto m = from_rows({{1, 3}, {2, 2}});
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Ordinal), WithinRel(0.25, 1e-13));
        CHECK_THAT(*krippendorff_alpha(m, AlphaMetric::Nominal), WithinRel(-0.2, 1e-13));
    }
    SECTION("items with a single rating contribute nothing") {
        auto full = from_rows({{1, 2}, {1, 2}});
        auto padded = RatingsMatrix::make(3, 3);
        padded.at(0, 0) = 1;
        padded.at(0, 1) = 2;
        padded.at(1, 0) = 1;
        padded.at(1, 1) = 2;
        padded.at(2, 2) = 9;  // lone rating on its own item
        for (auto metric : {AlphaMetric::Nominal, AlphaMetric::Ordinal, AlphaMetric::Interval}) {
            CHECK(*krippendorff_alpha(padded, metric) ==
                  *krippendorff_alpha(full, metric));
        }
    }
    SECTION("a single observed value has no expected disagreement") {
        auto m = from_rows({{3, 3}, {3, 3}});
        CHECK_FALSE(krippendorff_alpha(m, AlphaMetric::Nominal).has_value());
        CHECK_FALSE(krippendorff_alpha(m, AlphaMetric::Interval).has_value());
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(krippendorff_alpha(from_rows({{1, 2}}), AlphaMetric::Nominal),
                          ContainsSubstring("at least 2"));
        auto lonely = RatingsMatrix::make(2, 2);
        lonely.at(0, 0) = 1;
        lonely.at(1, 1) = 2;
        CHECK_THROWS_WITH(krippendorff_alpha(lonely, AlphaMetric::Nominal),
                          ContainsSubstring("pairable"));
    }
    SECTION("metric names parse") {
        CHECK(parse_alpha_metric("nominal") == AlphaMetric::Nominal);
        CHECK(parse_alpha_metric("ordinal") == AlphaMetric::Ordinal);
        CHECK(parse_alpha_metric("interval") == AlphaMetric::Interval);
        CHECK_FALSE(parse_alpha_metric("ratio"));
    }
}

TEST_CASE("Likert aggregation") {
    SECTION("mean and sample deviation with one-decimal rendering") {
        LikertSummary s = aggregate_likert({2, 3, 4, 5, 6});
        CHECK(s.mean == 4.0);
        REQUIRE(s.stdev);
        CHECK_THAT(*s.stdev, WithinRel(std::sqrt(2.5), 1e-14));
        CHECK(s.formatted == "4.0 ± 1.6");
    }
    SECTION("another pinned rendering") {
        LikertSummary s = aggregate_likert({3, 4, 5});
        CHECK(s.formatted == "4.0 ± 1.0");
    }
    SECTION("a single score leaves the deviation undefined") {
        LikertSummary s = aggregate_likert({3.7});
        CHECK(s.mean == 3.7);
        CHECK_FALSE(s.stdev);
        CHECK(s.formatted == "3.7 ± n/a");
    }
    CHECK_THROWS_WITH(aggregate_likert({}), ContainsSubstring("empty"));
}

TEST_CASE("ratings CSV loader") {
    TempDir dir("ratings");
    SECTION("splits by dimension with lexicographic axes") {
        auto path = write(dir, "r.csv",
                          "rater,item,dimension,score\n"
                          "r2,i1,clarity,4\n"
                          "r1,i2,clarity,3\n"
                          "r1,i1,clarity,5\n"
                          "r2,i2,clarity,1\n"
                          "r2,i2,usefulness,2\n"
                          "r1,i1,usefulness,4\n");
        auto dims = load_ratings_csv(path);
        REQUIRE(dims.size() == 2);
        CHECK(dims[0].dimension == "clarity");
        CHECK(dims[1].dimension == "usefulness");
        CHECK(dims[0].raters == std::vector<std::string>{"r1", "r2"});
        CHECK(dims[0].items == std::vector<std::string>{"i1", "i2"});
        CHECK(*dims[0].matrix.at(0, 0) == 5.0);
        CHECK(*dims[0].matrix.at(0, 1) == 3.0);
        CHECK(*dims[0].matrix.at(1, 0) == 4.0);
        CHECK(*dims[0].matrix.at(1, 1) == 1.0);
        CHECK(dims[0].matrix.complete());
        CHECK(dims[0].all_scores == std::vector<double>{4, 3, 5, 1});

        CHECK(*dims[1].matrix.at(0, 0) == 4.0);
        CHECK(*dims[1].matrix.at(1, 1) == 2.0);
        CHECK_FALSE(dims[1].matrix.at(0, 1).has_value());
        CHECK_FALSE(dims[1].matrix.complete());
    }
    SECTION("duplicate cell is fatal") {
        auto path = write(dir, "dup.csv",
                          "rater,item,dimension,score\n"
                          "r1,i1,clarity,4\n"
                          "r1,i1,clarity,5\n");
        CHECK_THROWS_WITH(load_ratings_csv(path), ContainsSubstring("duplicate rating"));
    }
    SECTION("malformed score is fatal") {
        auto path = write(dir, "bad.csv",
                          "rater,item,dimension,score\n"
                          "r1,i1,clarity,notanumber\n");
        CHECK_THROWS_AS(load_ratings_csv(path), Error);
    }
    SECTION("wrong header is fatal") {
        auto path = write(dir, "hdr.csv", "rater,item,score\nr1,i1,4\n");
        CHECK_THROWS_AS(load_ratings_csv(path), Error);
    }
}
