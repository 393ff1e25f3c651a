#include "fsgc/simgen.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fsgc/stats.hpp"

namespace fsgc {

KernelSpec KernelSpec::matern(double sigma2, double nu, double range) {
    if (!(sigma2 > 0.0 && nu > 0.0 && range > 0.0)) {
        throw OutOfDomain("matern kernel parameters must be positive");
    }
    return {Type::matern, sigma2, nu, range};
}

KernelSpec KernelSpec::nonstationary() { return {Type::nonstationary, 1.0, 0.0, 0.0}; }

namespace {

constexpr double kPi = std::numbers::pi;

double nonstationary_raw(double s, double t) {
    double v = 0.05 * 0.05 * 2.0 * std::sin(kPi * t) * std::sin(kPi * s) +
               0.09 * 0.09 * 2.0 * std::cos(kPi * t) * std::cos(kPi * s);
    if (s == t) v += 0.01 * 0.01;
    return v;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, double s, double t) {
    if (spec.type == KernelSpec::Type::nonstationary) {
        return nonstationary_raw(s, t) /
               std::sqrt(nonstationary_raw(s, s) * nonstationary_raw(t, t));
    }
    const double d = std::fabs(s - t);
    if (d == 0.0) return spec.sigma2;
    const double u = std::sqrt(2.0 * spec.nu) * d / spec.range;
    const double value = spec.sigma2 * std::pow(2.0, 1.0 - spec.nu) / std::tgamma(spec.nu) *
                         std::pow(u, spec.nu) * std::cyl_bessel_k(spec.nu, u);
    return std::max(value, 0.0);  // Bessel underflow at large distances
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const std::vector<double>& grid) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i; j < m; ++j) {
            k(i, j) = k(j, i) = kernel_eval(spec, grid[i], grid[j]);
        }
    }
    return k;
}

VariableKind ScenarioSpec::kind() const {
    switch (scenario) {
        case 'A': return VariableKind::binary();
        case 'B': return VariableKind::ordinal(4);
        case 'C': return VariableKind::truncated();
        case 'D': return VariableKind::continuous();
    }
    throw Error("unknown scenario (expected A, B, C or D)");
}

std::vector<double> ScenarioSpec::true_cutoffs() const {
    switch (scenario) {
        case 'A': return {2.5};
        case 'B': return {-0.6, 0.1, 0.6};
        case 'C': return {0.5};
        case 'D': return {};
    }
    throw Error("unknown scenario");
}

std::vector<double> uniform_grid(int m) {
    if (m < 2) throw OutOfDomain("uniform_grid: need m >= 2");
    std::vector<double> g(m);
    for (int j = 0; j < m; ++j) g[j] = static_cast<double>(j) / (m - 1);
    return g;
}

Eigen::MatrixXd sample_latent(const KernelSpec& spec, const std::vector<double>& grid,
                              int n, std::uint64_t seed) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd k = kernel_matrix(spec, grid);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        k.diagonal().array() += 1e-10;
        llt.compute(k);
        if (llt.info() != Eigen::Success) {
            throw NumericalFailure("sample_latent: kernel matrix is not PSD");
        }
    }
    const Eigen::MatrixXd chol = llt.matrixL();
    Eigen::MatrixXd out(n, m);
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 engine(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> normal;
        Eigen::VectorXd z(m);
        for (Eigen::Index j = 0; j < m; ++j) z[j] = normal(engine);
        out.row(i) = (chol * z).transpose();
    }
    return out;
}

ObservationSet apply_scenario(const Eigen::MatrixXd& latent, const ScenarioSpec& spec,
                              const std::vector<double>& grid) {
    if (!latent.allFinite()) throw NumericalFailure("apply_scenario: latent values not finite");
    if (latent.cols() != static_cast<Eigen::Index>(grid.size())) {
        throw GridMismatch("apply_scenario: latent columns must match grid");
    }
    const Eigen::Index n = latent.rows();
    const Eigen::Index m = latent.cols();
    Eigen::MatrixXd x(n, m);
    const std::vector<double> cuts = spec.true_cutoffs();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = latent(i, j);
            double mapped = 0.0;
            switch (spec.scenario) {
                case 'A': mapped = v > cuts[0] ? 1.0 : 0.0; break;
                case 'B': {
                    const auto it = std::upper_bound(cuts.begin(), cuts.end(), v);
                    mapped = static_cast<double>(it - cuts.begin());
                    break;
                }
                case 'C': mapped = v >= cuts[0] ? v : 0.0; break;
                case 'D': mapped = v * v * v; break;
                default: throw Error("unknown scenario");
            }
            x(i, j) = mapped;
        }
    }
    if (spec.sparse()) {
        const int keep = std::max<int>(1, static_cast<int>(std::lround(spec.sparse_fraction * m)));
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::vector<Eigen::Index> idx(m);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::mt19937_64 engine(
                derive_seed(spec.seed ^ 0xA5A5A5A5A5A5A5A5ull, static_cast<std::uint64_t>(i)));
            std::iota(idx.begin(), idx.end(), 0);
            // Partial Fisher-Yates: the first `keep` entries are the kept points.
            for (int t = 0; t < keep; ++t) {
                std::uniform_int_distribution<Eigen::Index> pick(t, m - 1);
                std::swap(idx[t], idx[pick(engine)]);
            }
            std::vector<bool> kept(m, false);
            for (int t = 0; t < keep; ++t) kept[idx[t]] = true;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (!kept[j]) x(i, j) = nan;
            }
        }
    }
    return ObservationSet::from_matrix(std::move(x), grid, spec.kind());
}

}  // namespace fsgc
