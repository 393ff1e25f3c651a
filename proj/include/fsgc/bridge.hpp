#pragma once

#include <cstdint>
#include <vector>

#include "fsgc/stats.hpp"
#include "fsgc/types.hpp"

namespace fsgc {

// Margins of one same-type variable pair: thresholds at the two time points
// (empty for continuous). The bridging function maps latent correlation to
// the population Kendall's tau of the observed pair.
struct BridgeContext {
    VariableKind kind;
    std::vector<double> cutoffs_a;
    std::vector<double> cutoffs_b;

    static BridgeContext continuous();
    static BridgeContext binary(double delta_a, double delta_b);
    static BridgeContext ordinal(std::vector<double> cuts_a, std::vector<double> cuts_b);
    static BridgeContext truncated(double delta_a, double delta_b);

    void validate() const;
};

// Population Kendall's tau of the observed pair at latent correlation r.
// Continuous and binary pairs use closed forms; ordinal and truncated pairs
// reduce the concordance expectation to Gaussian rectangle/orthant
// probabilities evaluated by deterministic quadrature.
double bridge_forward(double r, const BridgeContext& ctx);

// dF/dr. Analytic for continuous/binary/ordinal; central difference for
// truncated pairs (whose forward value is itself quadrature-based).
double bridge_forward_derivative(double r, const BridgeContext& ctx);

struct BridgeInverse {
    double r = 0.0;
    bool clamped = false;
};

// Monotone inverse of the bridging function: the unique root of F(r) = tau
// to |dr| <= 1e-8 when tau is attainable; otherwise clamps to +/-(1 - 1e-6)
// and flags the clamp.
BridgeInverse bridge_inverse(double tau, const BridgeContext& ctx);

struct McTau {
    double tau = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo oracle for the bridging function: simulates pairs of
// independent latent bivariate normals, applies the observation mapping for
// the context kind, and averages the concordance sign statistic.
McTau mc_tau_oracle(double r, const BridgeContext& ctx, std::size_t n_samples,
                    std::uint64_t seed);

// Precomputed bridge curve for one pair: monotone cubic interpolation of F
// over an r-grid (nodes uniform in asin r so accuracy holds near |r| -> 1).
// Used inside the least-squares loop where F is evaluated many times.
class BridgeTable {
  public:
    BridgeTable() = default;
    BridgeTable(const BridgeContext& ctx, int points = 201);

    double value(double r) const;
    double derivative(double r) const;
    BridgeInverse inverse(double tau) const;
    double r_max() const { return r_max_; }

  private:
    MonotoneCubic curve_;  // theta = asin(r) -> tau
    double r_max_ = 0.0;
};

// Largest |r| handled by direct evaluation and table endpoints.
inline constexpr double kBridgeRMax = 1.0 - 1e-6;

}  // namespace fsgc
