#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "fsgc/basis.hpp"
#include "fsgc/bridge.hpp"
#include "fsgc/marginal.hpp"
#include "fsgc/rank.hpp"

namespace fsgc {

struct FitConfig {
    int basis_dim = 7;
    int max_iterations = 200;
    double gradient_tol = 1e-8;
    double objective_decrease_tol = 1e-12;
    int max_step_halvings = 30;
    std::int64_t c0 = 5;
    enum class Init { inverse_bridge, zeros } init = Init::inverse_bridge;
    // Tabulated bridge nodes for truncated pairs (quadrature-backed F is
    // expensive inside the inner loop). Other kinds evaluate directly.
    int bridge_table_points = 201;
};

struct FitDiagnostics {
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool non_convergence = false;
    bool init_fallback = false;       // linear initialization was rank-deficient
    bool levenberg_used = false;      // normal equations needed damping
    std::size_t pairs_used = 0;
    std::vector<double> objective_trace;
};

// Fitted latent correlation surface with its margins and fit diagnostics.
struct LatentCorrelationModel {
    SplineBasis basis{7};
    CoefficientMatrix coeffs;
    CutoffSet cutoffs;
    VariableKind kind;
    FitConfig config;
    FitDiagnostics diagnostics;

    // Correlation value at (s, t), s != t; callers pin the diagonal to 1.
    double evaluate(double s, double t) const { return eval_surface(coeffs, basis, s, t); }
};

// Per-pair bridge evaluator: closed-form/analytic for continuous, binary and
// ordinal pairs; monotone-cubic table for truncated pairs.
class PairBridge {
  public:
    PairBridge(const BridgeContext& ctx, int table_points);
    double value(double r) const;
    double derivative(double r) const;
    BridgeInverse inverse(double tau) const;

  private:
    BridgeContext ctx_;
    std::shared_ptr<const BridgeTable> table_;
};

// The supported upper-triangle pair terms of the least-squares objective.
struct PairTerms {
    std::vector<int> j, k;              // grid indices, j < k
    std::vector<double> tau;            // sample Kendall's tau
    Eigen::MatrixXd design;             // rows: predictor design in packed U
    std::vector<PairBridge> bridges;

    std::size_t size() const { return tau.size(); }
};

PairTerms build_pair_terms(const TauMatrix& tau, const CutoffSet& cutoffs,
                           const SplineBasis& basis, const FitConfig& cfg);

// Sum of squared residuals tau_p - F_p(g(eta_p)) at packed coefficients
// theta; optionally fills the residual vector and the chain-rule weights
// F'(g(eta)) g'(eta) whose negated product with the design rows is the
// Jacobian of the residual vector.
double pair_objective(const PairTerms& terms, const Eigen::VectorXd& theta,
                      Eigen::VectorXd* residual, Eigen::VectorXd* weight);

// Elementwise inverse bridging + linear least squares on the link scale.
// Falls back to zeros (flag set) when the design is rank-deficient.
CoefficientMatrix initialize_coefficients(const PairTerms& terms, const SplineBasis& basis,
                                          bool* fallback);

// Gauss-Newton nonlinear least squares on the Kendall's tau residuals with
// step-halving line search and Levenberg damping on singular normal
// equations. Throws NotEnoughPairs if fewer supported pairs than parameters.
// The overload taking prebuilt terms avoids rebuilding bridge tables.
LatentCorrelationModel fit_latent_correlation(const TauMatrix& tau, const CutoffSet& cutoffs,
                                              const FitConfig& cfg);
LatentCorrelationModel fit_latent_correlation(const TauMatrix& tau, const CutoffSet& cutoffs,
                                              const FitConfig& cfg, const PairTerms* terms);

// Objective of a fitted model against a tau matrix, through the same bridge
// evaluators used during fitting.
double evaluate_objective(const LatentCorrelationModel& model, const TauMatrix& tau);

struct CorrelationResult {
    Eigen::MatrixXd corr;
    double projection_distance = 0.0;  // Frobenius distance moved by the PSD projection
    int projection_iterations = 0;
};

// Surface evaluated on a grid with unit diagonal, then projected to the
// nearest symmetric PSD matrix with unit diagonal (eigenvalue clipping plus
// diagonal rescaling).
CorrelationResult reconstruct_correlation(const LatentCorrelationModel& model,
                                          const std::vector<double>& grid);

// Nearest-correlation projection used by both the model reconstruction and
// the unsmoothed pointwise comparator.
Eigen::MatrixXd nearest_correlation(Eigen::MatrixXd m, double* distance, int* iterations);

}  // namespace fsgc
