#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fsgc/rank.hpp"

namespace fsgc {

// Latent correlation kernel: Matern (sigma^2, nu, range tau) or the
// normalized non-stationary sine/cosine kernel with a diagonal nugget.
struct KernelSpec {
    enum class Type { matern, nonstationary };
    Type type = Type::matern;
    double sigma2 = 1.0;
    double nu = 3.5;
    double range = 1.0 / 7.0;

    static KernelSpec matern(double sigma2 = 1.0, double nu = 3.5, double range = 1.0 / 7.0);
    static KernelSpec nonstationary();
    std::string name() const { return type == Type::matern ? "matern" : "nonstationary"; }
};

double kernel_eval(const KernelSpec& spec, double s, double t);
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const std::vector<double>& grid);

// Scenario of the simulation study: observation map applied to the latent
// Gaussian process plus the sampling design.
//   A: binary threshold 2.5       B: ordinal cutoffs (-0.6, 0.1, 0.6)
//   C: truncation at 0.5          D: continuous cube
struct ScenarioSpec {
    char scenario = 'A';
    int n = 500;
    int m = 50;
    double sparse_fraction = 1.0;
    std::uint64_t seed = 0;

    VariableKind kind() const;
    std::vector<double> true_cutoffs() const;  // empty for D
    bool sparse() const { return sparse_fraction < 1.0; }
};

std::vector<double> uniform_grid(int m);

// n rows of a zero-mean Gaussian process with the kernel's covariance on the
// grid; per-row streams derived from the seed, so rows are reproducible
// independently of evaluation order.
Eigen::MatrixXd sample_latent(const KernelSpec& spec, const std::vector<double>& grid,
                              int n, std::uint64_t seed);

// Elementwise scenario map plus sparse masking (each subject keeps a uniform
// random subset of round(sparse_fraction * m) grid points).
ObservationSet apply_scenario(const Eigen::MatrixXd& latent, const ScenarioSpec& spec,
                              const std::vector<double>& grid);

}  // namespace fsgc
