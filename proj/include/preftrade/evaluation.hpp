#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "preftrade/common.hpp"
#include "preftrade/csv.hpp"

namespace preftrade {

inline constexpr const char* kEvaluationModule = "evaluation";

// Raters x items score matrix; missing entries are allowed only where the
// consuming statistic tolerates them.
struct RatingsMatrix {
    std::size_t raters = 0;
    std::size_t items = 0;
    std::vector<std::optional<double>> values;  // row-major, raters x items

    static RatingsMatrix make(std::size_t raters, std::size_t items) {
        return {raters, items, std::vector<std::optional<double>>(raters * items)};
    }
    std::optional<double>& at(std::size_t r, std::size_t i) { return values[r * items + i]; }
    const std::optional<double>& at(std::size_t r, std::size_t i) const {
        return values[r * items + i];
    }
    bool complete() const {
        return std::all_of(values.begin(), values.end(), [](const auto& v) { return bool(v); });
    }
};

// Within-rater ranks with mid-rank ties, 1-based.
inline std::vector<double> midrank(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = (double(i + 1) + double(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

// Kendall's coefficient of concordance with the standard tie correction:
// W = 12 S / (m^2 (n^3 - n) - m T), S the squared deviation of rank sums
// around their mean, T the summed (t^3 - t) over tie groups of every rater.
inline double kendalls_w(const RatingsMatrix& ratings) {
    const std::size_t m = ratings.raters, n = ratings.items;
    if (m < 2 || n < 2) fail(kEvaluationModule, "kendalls_w: need at least 2 raters and 2 items");
    if (!ratings.complete()) fail(kEvaluationModule, "kendalls_w: missing entries not allowed");
    std::vector<double> rank_sum(n, 0.0);
    double tie_corr = 0;
    for (std::size_t r = 0; r < m; ++r) {
        std::vector<double> row(n);
        for (std::size_t i = 0; i < n; ++i) row[i] = *ratings.at(r, i);
        std::vector<double> ranks = midrank(row);
        for (std::size_t i = 0; i < n; ++i) rank_sum[i] += ranks[i];
        std::vector<double> sorted(row);
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
            double t = double(j - i + 1);
            tie_corr += t * t * t - t;
            i = j + 1;
        }
    }
    double mean = 0;
    for (double s : rank_sum) mean += s;
    mean /= double(n);
    double S = 0;
    for (double s : rank_sum) S += (s - mean) * (s - mean);
    double denom = double(m) * double(m) * (double(n) * n * n - double(n)) - double(m) * tie_corr;
    if (!(denom > 0))
        fail(kEvaluationModule, "kendalls_w: degenerate ratings (every rater fully tied)");
    return 12.0 * S / denom;
}

enum class AlphaMetric { Nominal, Ordinal, Interval };

inline std::optional<AlphaMetric> parse_alpha_metric(std::string_view s) {
    if (s == "nominal") return AlphaMetric::Nominal;
    if (s == "ordinal") return AlphaMetric::Ordinal;
    if (s == "interval") return AlphaMetric::Interval;
    return std::nullopt;
}

// Krippendorff's alpha via the coincidence matrix: alpha = 1 - D_o / D_e.
// Missing entries are allowed; items with fewer than 2 ratings contribute
// nothing. Returns nothing when expected disagreement is zero (a single
// value everywhere).
inline std::optional<double> krippendorff_alpha(const RatingsMatrix& ratings, AlphaMetric metric) {
    const std::size_t m = ratings.raters, n = ratings.items;
    if (m < 2 || n < 2)
        fail(kEvaluationModule, "krippendorff_alpha: need at least 2 raters and 2 items");
    std::vector<double> domain;
    for (const auto& v : ratings.values) {
        if (v) domain.push_back(*v);
    }
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    const std::size_t V = domain.size();
    auto value_index = [&](double v) {
        return std::size_t(std::lower_bound(domain.begin(), domain.end(), v) - domain.begin());
    };
    std::vector<double> o(V * V, 0.0);
    bool any_pairable = false;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> unit;
        for (std::size_t r = 0; r < m; ++r) {
            if (ratings.at(r, i)) unit.push_back(value_index(*ratings.at(r, i)));
        }
        if (unit.size() < 2) continue;
        any_pairable = true;
        double w = 1.0 / double(unit.size() - 1);
        for (std::size_t a = 0; a < unit.size(); ++a) {
            for (std::size_t b = 0; b < unit.size(); ++b) {
                if (a == b) continue;
                o[unit[a] * V + unit[b]] += w;
            }
        }
    }
    if (!any_pairable) fail(kEvaluationModule, "krippendorff_alpha: no pairable values");
    std::vector<double> marginal(V, 0.0);
    double total = 0;
    for (std::size_t a = 0; a < V; ++a) {
        for (std::size_t b = 0; b < V; ++b) marginal[a] += o[a * V + b];
        total += marginal[a];
    }
    auto delta_sq = [&](std::size_t a, std::size_t b) -> double {
        if (a == b) return 0.0;
        switch (metric) {
            case AlphaMetric::Nominal:
                return 1.0;
            case AlphaMetric::Interval: {
                double d = domain[a] - domain[b];
                return d * d;
            }
            case AlphaMetric::Ordinal: {
                std::size_t lo = std::min(a, b), hi = std::max(a, b);
                double s = 0;
                for (std::size_t k = lo; k <= hi; ++k) s += marginal[k];
                s -= (marginal[lo] + marginal[hi]) / 2.0;
                return s * s;
            }
        }
        return 0.0;
    };
    double d_obs = 0, d_exp = 0;
    for (std::size_t a = 0; a < V; ++a) {
        for (std::size_t b = 0; b < V; ++b) {
            double d2 = delta_sq(a, b);
            d_obs += o[a * V + b] * d2;
            d_exp += marginal[a] * marginal[b] * d2;
        }
    }
    d_obs /= total;
    d_exp /= total * (total - 1.0);
    if (!(d_exp > 0)) return std::nullopt;  // degenerate: no expected disagreement
    return 1.0 - d_obs / d_exp;
}

// Per-dimension Likert summary: mean and sample standard deviation, rendered
// "x.x +/- y.y" with one decimal each; a single score leaves the deviation
// undefined.
struct LikertSummary {
    double mean = 0;
    std::optional<double> stdev;
    std::string formatted;
};

inline LikertSummary aggregate_likert(const std::vector<double>& scores) {
    if (scores.empty()) fail(kEvaluationModule, "aggregate_likert: empty input");
    LikertSummary s;
    for (double v : scores) s.mean += v;
    s.mean /= double(scores.size());
    char buf[64];
    if (scores.size() >= 2) {
        double ss = 0;
        for (double v : scores) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / double(scores.size() - 1));
        std::snprintf(buf, sizeof buf, "%.1f ± %.1f", s.mean, *s.stdev);
    } else {
        std::snprintf(buf, sizeof buf, "%.1f ± n/a", s.mean);
    }
    s.formatted = buf;
    return s;
}

// ---------------------------------------------------------------------------
// ratings.csv: rater,item,dimension,score. One matrix per dimension; rater
// and item axes are ordered lexicographically so results are reproducible.

struct DimensionRatings {
    std::string dimension;
    std::vector<std::string> raters;
    std::vector<std::string> items;
    RatingsMatrix matrix;
    std::vector<double> all_scores;
};

inline std::vector<DimensionRatings> load_ratings_csv(const std::string& path) {
    const std::string mod = kEvaluationModule;
    csv::Table table(read_file(path, mod), mod, path, {"rater", "item", "dimension", "score"});
    struct Cell {
        std::string rater, item;
        double score;
    };
    std::map<std::string, std::vector<Cell>> dims;
    for (const auto& row : table.rows()) {
        double score = csv::need_double(row, 3, mod, path);
        dims[std::string(row.fields[2])].push_back(
            {std::string(row.fields[0]), std::string(row.fields[1]), score});
    }
    std::vector<DimensionRatings> out;
    for (auto& [dim, cells] : dims) {
        DimensionRatings d;
        d.dimension = dim;
        std::set<std::string> raters, items;
        for (const auto& c : cells) {
            raters.insert(c.rater);
            items.insert(c.item);
        }
        d.raters.assign(raters.begin(), raters.end());
        d.items.assign(items.begin(), items.end());
        d.matrix = RatingsMatrix::make(d.raters.size(), d.items.size());
        auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
            return std::size_t(std::lower_bound(v.begin(), v.end(), s) - v.begin());
        };
        for (const auto& c : cells) {
            auto& slot = d.matrix.at(index_of(d.raters, c.rater), index_of(d.items, c.item));
            if (slot)
                fail(mod, path + ": duplicate rating for (" + c.rater + ", " + c.item + ", " +
                              dim + ")");
            slot = c.score;
            d.all_scores.push_back(c.score);
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace preftrade
