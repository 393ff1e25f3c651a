#pragma once

#include <Eigen/Core>
#include <vector>

#include "fsgc/fit.hpp"
#include "fsgc/marginal.hpp"

namespace fsgc {

// Latent eigensystem on a grid: trapezoidal quadrature weights, descending
// nonnegative eigenvalues, eigenfunctions with unit L2 norm under the
// quadrature rule, zero latent mean.
struct EigenSystem {
    std::vector<double> grid;
    Eigen::VectorXd weights;
    Eigen::VectorXd eigenvalues;     // all M, clipped at zero, descending
    Eigen::MatrixXd eigenfunctions;  // M x K retained
    int K = 0;
};

struct ScoreMatrix {
    Eigen::MatrixXd scores;          // n x K
    Eigen::VectorXd score_variance;  // sample variance per component
    int K = 0;
};

Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid);

// Weighted eigenproblem W^{1/2} C W^{1/2}; K chosen as the smallest count
// reaching pve_target of total eigenvalue mass, or fixed_K when positive.
// Throws NotPSD if the matrix has an eigenvalue below -1e-6.
EigenSystem eigendecompose(const Eigen::MatrixXd& corr, const std::vector<double>& grid,
                           double pve_target, int fixed_K = 0);

struct TrajectoryResult {
    Eigen::VectorXd latent;  // full grid
    bool ridged = false;     // conditioning matrix needed a ridge
};

// Univariate conditional means at observed usable points, extended to the
// rest of the grid by the Gaussian conditional mean under `corr`.
TrajectoryResult latent_trajectory(const Eigen::VectorXd& row, const Eigen::MatrixXd& corr,
                                   const Margins& margins);

// Scores of latent trajectories under the eigensystem's quadrature rule.
ScoreMatrix latent_scores(const Eigen::MatrixXd& trajectories, const EigenSystem& eig);

struct PredictionResult {
    std::vector<double> times;
    Eigen::VectorXd latent_mean;
    Eigen::MatrixXd conditional_cov;
    Eigen::VectorXd observed_scale;
    bool ridged = false;
};

// Conditional-Gaussian curve prediction at new time points, mapped back to
// the observed scale per kind (threshold indicator, interval lookup, or
// inverse normal-score map).
PredictionResult predict_curve(const Eigen::VectorXd& row, const LatentCorrelationModel& model,
                               const Margins& margins, const std::vector<double>& new_times);

// Euclidean distance between latent score vectors.
double latent_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Observed-scale value at one margin given a latent level (shared by
// prediction and the experiment driver).
double map_latent_to_observed(double v, const VariableKind& kind, const TimePointMargin& margin);

}  // namespace fsgc
