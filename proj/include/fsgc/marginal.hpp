#pragma once

#include <cmath>
#include <vector>

#include "fsgc/types.hpp"

namespace fsgc {

// Latent thresholds per time point. For ordinal data the stored vector holds
// the l-1 interior cutoffs; the outer -inf/+inf bounds are implicit.
// Time points whose threshold estimate is degenerate are flagged unusable.
struct CutoffSet {
    std::vector<double> grid;
    std::vector<std::vector<double>> cutoffs;
    std::vector<bool> usable;
    VariableKind kind;

    // All-usable, no-threshold set for continuous data.
    static CutoffSet none(std::vector<double> grid);
    std::size_t size() const { return grid.size(); }
};

// Monotone empirical normal-score map at one time point: sorted observed
// values paired with latent scores. For truncated margins the table covers
// the positive part only and the scores sit above the threshold.
struct TransformAt {
    std::vector<double> values;  // sorted ascending
    std::vector<double> scores;  // nondecreasing

    bool empty() const { return values.empty(); }
    double forward(double x) const;   // value -> latent score
    double inverse(double v) const;   // latent score -> value (constant beyond range)
};

struct MarginalTransform {
    std::vector<double> grid;
    std::vector<TransformAt> maps;
};

// Per-time-point marginal summary used by trajectory and prediction code.
struct TimePointMargin {
    bool usable = true;
    std::vector<double> cutoffs;
    TransformAt transform;
    // Majority observed category at degenerate discrete margins (prediction
    // fallback); -1 when usable or not applicable.
    int fallback_category = -1;
};

struct Margins {
    VariableKind kind;
    std::vector<double> grid;
    std::vector<TimePointMargin> points;

    CutoffSet cutoff_set() const;
};

// Method-of-moments cutoff estimate from the sample at one time point.
// Throws DegenerateMargin when a required cumulative proportion is 0 or 1
// (or an ordinal category is empty).
std::vector<double> estimate_cutoffs_at(const std::vector<double>& values,
                                        const VariableKind& kind);

// Batch version over a grid; degenerate time points are flagged unusable
// instead of throwing. Throws DegenerateMargin only if no point is usable.
CutoffSet estimate_cutoffs(const std::vector<std::vector<double>>& samples,
                           const std::vector<double>& grid, const VariableKind& kind);

// Winsorization constant for the empirical normal-score map.
inline double winsor_delta(std::size_t n) {
    return 1.0 / (4.0 * std::pow(static_cast<double>(n), 0.25));
}

// Latent scores of a continuous sample: Phi^{-1} of the Winsorized empirical
// CDF with midranks, so the output is invariant to strictly monotone
// transformations of the input. Throws InsufficientData for n < 2.
std::vector<double> normal_score_transform(const std::vector<double>& values);

// Normal-score table for one margin (continuous, or positive part of
// truncated anchored above the estimated threshold).
TransformAt fit_transform_at(const std::vector<double>& values, const VariableKind& kind);

// Univariate latent conditional mean E[V | X = x] at one time point.
// Discrete kinds use the truncated-normal interval mean; continuous and the
// positive truncated branch read the normal-score map.
double conditional_latent_mean(double x, const VariableKind& kind,
                               const std::vector<double>& cutoffs,
                               const TransformAt* transform);

// Cutoffs + transforms over a grid of samples, with degenerate flags and
// prediction fallbacks.
Margins estimate_margins(const std::vector<std::vector<double>>& samples,
                         const std::vector<double>& grid, const VariableKind& kind);

}  // namespace fsgc
