#include "fsgc/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fsgc/stats.hpp"

namespace fsgc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CutoffSet CutoffSet::none(std::vector<double> grid) {
    CutoffSet cs;
    cs.usable.assign(grid.size(), true);
    cs.cutoffs.assign(grid.size(), {});
    cs.grid = std::move(grid);
    cs.kind = VariableKind::continuous();
    return cs;
}

double TransformAt::forward(double x) const {
    if (values.empty()) throw InsufficientData("empty normal-score map");
    if (x <= values.front()) return scores.front();
    if (x >= values.back()) return scores.back();
    auto it = std::upper_bound(values.begin(), values.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - values.begin());
    const double x0 = values[i - 1], x1 = values[i];
    if (x1 == x0) return scores[i];
    const double w = (x - x0) / (x1 - x0);
    return scores[i - 1] + w * (scores[i] - scores[i - 1]);
}

double TransformAt::inverse(double v) const {
    if (values.empty()) throw InsufficientData("empty normal-score map");
    if (v <= scores.front()) return values.front();
    if (v >= scores.back()) return values.back();
    auto it = std::upper_bound(scores.begin(), scores.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - scores.begin());
    const double s0 = scores[i - 1], s1 = scores[i];
    if (s1 == s0) return values[i];
    const double w = (v - s0) / (s1 - s0);
    return values[i - 1] + w * (values[i] - values[i - 1]);
}

CutoffSet Margins::cutoff_set() const {
    CutoffSet cs;
    cs.grid = grid;
    cs.kind = kind;
    cs.cutoffs.reserve(points.size());
    cs.usable.reserve(points.size());
    for (const auto& p : points) {
        cs.cutoffs.push_back(p.cutoffs);
        cs.usable.push_back(p.usable);
    }
    return cs;
}

std::vector<double> estimate_cutoffs_at(const std::vector<double>& values,
                                        const VariableKind& kind) {
    if (values.empty()) throw InsufficientData("estimate_cutoffs_at: no observations");
    const double n = static_cast<double>(values.size());
    switch (kind.tag) {
        case Kind::binary:
        case Kind::truncated: {
            std::size_t zeros = 0;
            for (double x : values) zeros += x == 0.0;
            const double prop = zeros / n;
            if (prop <= 0.0 || prop >= 1.0) {
                throw DegenerateMargin("zero-proportion is degenerate at this time point");
            }
            return {norm_quantile(prop)};
        }
        case Kind::ordinal: {
            std::vector<std::size_t> counts(kind.levels, 0);
            for (double x : values) counts[static_cast<int>(x)]++;
            std::vector<double> cuts(kind.levels - 1);
            std::size_t cum = 0;
            for (int k = 1; k < kind.levels; ++k) {
                cum += counts[k - 1];
                const double prop = cum / n;
                if (prop <= 0.0 || prop >= 1.0) {
                    throw DegenerateMargin("cumulative proportion is degenerate");
                }
                cuts[k - 1] = norm_quantile(prop);
            }
            for (std::size_t i = 1; i < cuts.size(); ++i) {
                if (!(cuts[i] > cuts[i - 1])) {
                    throw DegenerateMargin("empty ordinal category at this time point");
                }
            }
            return cuts;
        }
        case Kind::continuous:
            return {};
    }
    return {};
}

CutoffSet estimate_cutoffs(const std::vector<std::vector<double>>& samples,
                           const std::vector<double>& grid, const VariableKind& kind) {
    if (samples.size() != grid.size()) {
        throw GridMismatch("estimate_cutoffs: samples/grid size mismatch");
    }
    CutoffSet cs;
    cs.grid = grid;
    cs.kind = kind;
    cs.cutoffs.resize(grid.size());
    cs.usable.assign(grid.size(), true);
    std::size_t ok = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        try {
            cs.cutoffs[j] = estimate_cutoffs_at(samples[j], kind);
            ++ok;
        } catch (const Error&) {
            cs.usable[j] = false;
        }
    }
    if (ok == 0) throw DegenerateMargin("estimate_cutoffs: every time point is degenerate");
    return cs;
}

std::vector<double> normal_score_transform(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) throw InsufficientData("normal_score_transform: need at least 2 values");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    // Midranks for ties keep the map well defined and monotone.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * (i + j) + 1.0;  // 1-based midrank
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
        i = j + 1;
    }
    const double delta = winsor_delta(n);
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double p = std::clamp(rank[t] / (n + 1.0), delta, 1.0 - delta);
        out[t] = norm_quantile(p);
    }
    return out;
}

TransformAt fit_transform_at(const std::vector<double>& values, const VariableKind& kind) {
    TransformAt tr;
    if (kind.tag == Kind::continuous) {
        if (values.size() < 2) throw InsufficientData("continuous margin needs >= 2 values");
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        const std::size_t n = values.size();
        const double delta = winsor_delta(n);
        // Rank of each distinct value within the full sample (midrank).
        std::vector<double> all = values;
        std::sort(all.begin(), all.end());
        for (double v : sorted) {
            const auto lo = std::lower_bound(all.begin(), all.end(), v) - all.begin();
            const auto hi = std::upper_bound(all.begin(), all.end(), v) - all.begin();
            const double mid = 0.5 * (lo + hi - 1) + 1.0;
            const double p = std::clamp(mid / (n + 1.0), delta, 1.0 - delta);
            tr.values.push_back(v);
            tr.scores.push_back(norm_quantile(p));
        }
        return tr;
    }
    if (kind.tag == Kind::truncated) {
        const std::size_t n = values.size();
        if (n == 0) throw InsufficientData("truncated margin needs observations");
        std::vector<double> pos;
        for (double v : values) {
            if (v > 0.0) pos.push_back(v);
        }
        const double p0 = static_cast<double>(n - pos.size()) / n;
        if (pos.empty()) return tr;  // all-zero margin: no positive-part map
        std::sort(pos.begin(), pos.end());
        std::vector<double> distinct = pos;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        const double delta = winsor_delta(pos.size());
        for (double v : distinct) {
            const auto lo = std::lower_bound(pos.begin(), pos.end(), v) - pos.begin();
            const auto hi = std::upper_bound(pos.begin(), pos.end(), v) - pos.begin();
            const double mid = 0.5 * (lo + hi - 1) + 1.0;
            // Conditional rank above the threshold, anchored at the zero mass
            // so scores stay on the correct side of the cutoff.
            const double q = std::clamp(mid / (pos.size() + 1.0), delta, 1.0 - delta);
            const double p = p0 + (1.0 - p0) * q;
            tr.values.push_back(v);
            tr.scores.push_back(norm_quantile(p));
        }
        return tr;
    }
    return tr;  // discrete kinds carry no transform
}

namespace {

// Mean of a standard normal restricted to (lo, hi); infinite bounds allowed.
double interval_mean(double lo, double hi) {
    const double p = (hi == kInf ? 1.0 : norm_cdf(hi)) - (lo == -kInf ? 0.0 : norm_cdf(lo));
    if (!(p > 0.0)) throw DegenerateMargin("category interval has zero probability");
    const double num = (lo == -kInf ? 0.0 : norm_pdf(lo)) - (hi == kInf ? 0.0 : norm_pdf(hi));
    return num / p;
}

}  // namespace

double conditional_latent_mean(double x, const VariableKind& kind,
                               const std::vector<double>& cutoffs,
                               const TransformAt* transform) {
    switch (kind.tag) {
        case Kind::binary: {
            if (cutoffs.size() != 1) throw DimensionMismatch("binary margin needs one cutoff");
            const double delta = cutoffs[0];
            return x == 1.0 ? interval_mean(delta, kInf) : interval_mean(-kInf, delta);
        }
        case Kind::ordinal: {
            if (static_cast<int>(cutoffs.size()) != kind.levels - 1) {
                throw DimensionMismatch("ordinal margin cutoff count mismatch");
            }
            const int k = static_cast<int>(x);
            const double lo = k == 0 ? -kInf : cutoffs[k - 1];
            const double hi = k == kind.levels - 1 ? kInf : cutoffs[k];
            return interval_mean(lo, hi);
        }
        case Kind::truncated: {
            if (cutoffs.size() != 1) throw DimensionMismatch("truncated margin needs one cutoff");
            if (x == 0.0) return interval_mean(-kInf, cutoffs[0]);
            if (transform == nullptr || transform->empty()) {
                throw InsufficientData("truncated margin has no positive-part map");
            }
            return transform->forward(x);
        }
        case Kind::continuous: {
            if (transform == nullptr || transform->empty()) {
                throw InsufficientData("continuous margin has no normal-score map");
            }
            return transform->forward(x);
        }
    }
    throw Error("conditional_latent_mean: unreachable");
}

Margins estimate_margins(const std::vector<std::vector<double>>& samples,
                         const std::vector<double>& grid, const VariableKind& kind) {
    if (samples.size() != grid.size()) {
        throw GridMismatch("estimate_margins: samples/grid size mismatch");
    }
    Margins m;
    m.kind = kind;
    m.grid = grid;
    m.points.resize(grid.size());
    std::size_t ok = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        TimePointMargin& pt = m.points[j];
        if (samples[j].empty()) {
            pt.usable = false;
            continue;
        }
        try {
            pt.cutoffs = estimate_cutoffs_at(samples[j], kind);
        } catch (const Error&) {
            pt.usable = false;
        }
        if (kind.tag == Kind::continuous || kind.tag == Kind::truncated) {
            try {
                pt.transform = fit_transform_at(samples[j], kind);
            } catch (const Error&) {
            }
            if (kind.tag == Kind::continuous) pt.usable = !pt.transform.empty();
            if (kind.tag == Kind::truncated && pt.transform.empty()) pt.usable = false;
        }
        if (pt.usable) {
            ++ok;
            continue;
        }
        if (kind.is_discrete()) {
            const int levels = kind.tag == Kind::binary ? 2 : kind.levels;
            std::vector<std::size_t> counts(levels, 0);
            for (double v : samples[j]) counts[static_cast<int>(v)]++;
            pt.fallback_category = static_cast<int>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
        } else if (kind.tag == Kind::truncated && pt.transform.empty()) {
            pt.fallback_category = 0;  // all observed values were zero
        }
    }
    if (ok == 0) {
        throw DegenerateMargin("estimate_margins: every time point is degenerate");
    }
    return m;
}

}  // namespace fsgc
