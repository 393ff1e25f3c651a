#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "fsgc/fit.hpp"
#include "fsgc/simgen.hpp"

using namespace fsgc;

namespace {

// Small smooth symmetric coefficient matrix whose surface stays moderate.
CoefficientMatrix planted_coefficients(int d, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::MatrixXd full(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            full(i, j) = full(j, i) = gauss(rng) + (i == j ? 1.5 * scale : 0.0);
        }
    }
    return CoefficientMatrix::from_full(full);
}

// Noise-free tau generated through the model itself.
TauMatrix planted_tau(const CoefficientMatrix& u, const SplineBasis& basis,
                      const std::vector<double>& grid, const BridgeContext& proto) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    TauMatrix tau;
    tau.grid = grid;
    tau.tau = Eigen::MatrixXd::Identity(m, m);
    tau.support.setConstant(m, m, 1000);
    tau.supported.setConstant(m, m, true);
    for (Eigen::Index j = 0; j < m; ++j) {
        tau.supported(j, j) = false;
        for (Eigen::Index k = j + 1; k < m; ++k) {
            const double r = eval_surface(u, basis, grid[j], grid[k]);
            tau.tau(j, k) = tau.tau(k, j) = bridge_forward(r, proto);
        }
    }
    return tau;
}

CutoffSet constant_cutoffs(const std::vector<double>& grid, const VariableKind& kind,
                           const std::vector<double>& cuts) {
    CutoffSet cs;
    cs.grid = grid;
    cs.kind = kind;
    cs.cutoffs.assign(grid.size(), cuts);
    cs.usable.assign(grid.size(), true);
    return cs;
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("planted continuous surface is recovered exactly") {
    const int d = 7;
    const SplineBasis basis(d);
    const std::vector<double> grid = uniform_grid(50);
    const CoefficientMatrix u0 = planted_coefficients(d, 21, 0.5);
    const TauMatrix tau = planted_tau(u0, basis, grid, BridgeContext::continuous());
    const CutoffSet cutoffs = CutoffSet::none(grid);

    FitConfig cfg;
    cfg.basis_dim = d;
    const PairTerms terms = build_pair_terms(tau, cutoffs, basis, cfg);
    bool fallback = true;
    const CoefficientMatrix init = initialize_coefficients(terms, basis, &fallback);
    CHECK(!fallback);
    CHECK((init.packed() - u0.packed()).lpNorm<Eigen::Infinity>() < 1e-8);

    const LatentCorrelationModel model = fit_latent_correlation(tau, cutoffs, cfg);
    CHECK(model.diagnostics.objective < 1e-12);
    CHECK(model.diagnostics.converged);
    double max_err = 0.0;
    for (double s : grid) {
        for (double t : grid) {
            if (s == t) continue;
            max_err = std::max(max_err, std::fabs(model.evaluate(s, t) -
                                                  eval_surface(u0, basis, s, t)));
        }
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("planted binary surface is recovered") {
    const int d = 5;
    const SplineBasis basis(d);
    const std::vector<double> grid = uniform_grid(20);
    const CoefficientMatrix u0 = planted_coefficients(d, 4, 0.4);
    const BridgeContext proto = BridgeContext::binary(0.3, 0.3);
    const TauMatrix tau = planted_tau(u0, basis, grid, proto);
    const CutoffSet cutoffs = constant_cutoffs(grid, VariableKind::binary(), {0.3});

    FitConfig cfg;
    cfg.basis_dim = d;
    const LatentCorrelationModel model = fit_latent_correlation(tau, cutoffs, cfg);
    CHECK(model.diagnostics.objective < 1e-14);
    CHECK((model.coeffs.packed() - u0.packed()).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("all-zero tau gives the zero solution under both initializations") {
    const std::vector<double> grid = uniform_grid(15);
    TauMatrix tau;
    tau.grid = grid;
    tau.tau = Eigen::MatrixXd::Identity(15, 15);
    tau.tau.triangularView<Eigen::StrictlyUpper>().setZero();
    tau.tau.triangularView<Eigen::StrictlyLower>().setZero();
    tau.support.setConstant(15, 15, 100);
    tau.supported.setConstant(15, 15, true);
    for (int j = 0; j < 15; ++j) tau.supported(j, j) = false;
    const CutoffSet cutoffs = CutoffSet::none(grid);
    for (auto init : {FitConfig::Init::inverse_bridge, FitConfig::Init::zeros}) {
        FitConfig cfg;
        cfg.basis_dim = 5;
        cfg.init = init;
        const LatentCorrelationModel model = fit_latent_correlation(tau, cutoffs, cfg);
        CHECK(model.diagnostics.objective == 0.0);
        CHECK(model.coeffs.packed().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("rank-deficient support falls back to zero initialization") {
    // All supported pairs in a short subinterval: most basis functions never
    // activate, so the linear initialization system is rank-deficient.
    std::vector<double> grid(10);
    for (int j = 0; j < 10; ++j) grid[j] = 0.015 * j;
    grid.push_back(1.0);  // keep the domain anchored
    const int m = static_cast<int>(grid.size());
    TauMatrix tau;
    tau.grid = grid;
    tau.tau = Eigen::MatrixXd::Identity(m, m);
    tau.support.setConstant(m, m, 100);
    tau.supported.setConstant(m, m, false);
    int count = 0;
    for (int j = 0; j < 10; ++j) {
        for (int k = j + 1; k < 10; ++k) {
            tau.tau(j, k) = tau.tau(k, j) = 0.1;
            tau.supported(j, k) = tau.supported(k, j) = true;
            ++count;
        }
    }
    REQUIRE(count >= 28);
    FitConfig cfg;
    cfg.basis_dim = 7;
    const SplineBasis basis(7);
    const PairTerms terms = build_pair_terms(tau, CutoffSet::none(grid), basis, cfg);
    bool fallback = false;
    const CoefficientMatrix init = initialize_coefficients(terms, basis, &fallback);
    CHECK(fallback);
    CHECK(init.packed().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("too few supported pairs throws") {
    const std::vector<double> grid = uniform_grid(5);
    TauMatrix tau;
    tau.grid = grid;
    tau.tau = Eigen::MatrixXd::Identity(5, 5);
    tau.support.setConstant(5, 5, 100);
    tau.supported.setConstant(5, 5, true);
    for (int j = 0; j < 5; ++j) tau.supported(j, j) = false;
    FitConfig cfg;
    cfg.basis_dim = 7;  // 28 parameters, only 10 pairs
    CHECK_THROWS_AS(fit_latent_correlation(tau, CutoffSet::none(grid), cfg), NotEnoughPairs);
}

TEST_CASE("objective never increases across accepted steps") {
    const SplineBasis basis(5);
    const std::vector<double> grid = uniform_grid(18);
    const CoefficientMatrix u0 = planted_coefficients(5, 77, 0.6);
    TauMatrix tau = planted_tau(u0, basis, grid, BridgeContext::continuous());
    // Perturb to make the problem non-trivial (noisy residuals).
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int j = 0; j < 18; ++j) {
        for (int k = j + 1; k < 18; ++k) {
            const double t = std::clamp(tau.tau(j, k) + noise(rng), -0.99, 0.99);
            tau.tau(j, k) = tau.tau(k, j) = t;
        }
    }
    FitConfig cfg;
    cfg.basis_dim = 5;
    cfg.init = FitConfig::Init::zeros;
    const LatentCorrelationModel model =
        fit_latent_correlation(tau, CutoffSet::none(grid), cfg);
    const auto& trace = model.diagnostics.objective_trace;
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("analytic jacobian matches central finite differences") {
    const int d = 4;
    const SplineBasis basis(d);
    const std::vector<double> grid = uniform_grid(9);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> gauss(0.0, 0.7);

    const std::vector<std::pair<VariableKind, std::vector<double>>> kinds = {
        {VariableKind::continuous(), {}},
        {VariableKind::binary(), {0.4}},
        {VariableKind::ordinal(4), {-0.6, 0.1, 0.6}},
        {VariableKind::truncated(), {0.5}},
    };
    for (const auto& [kind, cuts] : kinds) {
        const CutoffSet cutoffs = constant_cutoffs(grid, kind, cuts);
        const CoefficientMatrix u0 = planted_coefficients(d, 5, 0.5);
        BridgeContext proto{kind, cuts, cuts};
        const TauMatrix tau = planted_tau(u0, basis, grid, proto);
        FitConfig cfg;
        cfg.basis_dim = d;
        const PairTerms terms = build_pair_terms(tau, cutoffs, basis, cfg);
        const Eigen::Index p = terms.design.cols();

        for (int trial = 0; trial < 5; ++trial) {
            Eigen::VectorXd theta(p);
            for (Eigen::Index i = 0; i < p; ++i) theta[i] = gauss(rng);
            Eigen::VectorXd residual(terms.size()), weight(terms.size());
            pair_objective(terms, theta, &residual, &weight);
            // Analytic Jacobian row p: -weight[p] * design.row(p).
            const double h = 1e-6;
            for (Eigen::Index q = 0; q < p; ++q) {
                Eigen::VectorXd tp = theta, tm = theta;
                tp[q] += h;
                tm[q] -= h;
                Eigen::VectorXd rp(terms.size()), rm(terms.size());
                pair_objective(terms, tp, &rp, nullptr);
                pair_objective(terms, tm, &rm, nullptr);
                for (std::size_t t = 0; t < terms.size(); ++t) {
                    const double fd = (rp[t] - rm[t]) / (2 * h);
                    const double an = -weight[t] * terms.design(t, q);
                    CHECK(an == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
                }
            }
        }
    }
}

TEST_CASE("model reproduces its training objective on re-evaluation") {
    const SplineBasis basis(5);
    const std::vector<double> grid = uniform_grid(14);
    const CoefficientMatrix u0 = planted_coefficients(5, 9, 0.5);
    TauMatrix tau = planted_tau(u0, basis, grid, BridgeContext::binary(0.2, 0.2));
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (int j = 0; j < 14; ++j) {
        for (int k = j + 1; k < 14; ++k) {
            const double t = std::clamp(tau.tau(j, k) + noise(rng), -0.9, 0.9);
            tau.tau(j, k) = tau.tau(k, j) = t;
        }
    }
    const CutoffSet cutoffs = constant_cutoffs(grid, VariableKind::binary(), {0.2});
    FitConfig cfg;
    cfg.basis_dim = 5;
    const LatentCorrelationModel model = fit_latent_correlation(tau, cutoffs, cfg);
    CHECK(evaluate_objective(model, tau) ==
          doctest::Approx(model.diagnostics.objective).epsilon(1e-10));
}

TEST_CASE("reconstruction: identity, planted PSD, adversarial projection") {
    const std::vector<double> grid = uniform_grid(25);

    SUBCASE("zero coefficients give the identity matrix") {
        FitConfig cfg;
        cfg.basis_dim = 5;
        LatentCorrelationModel model{SplineBasis(5), CoefficientMatrix(5),
                                     CutoffSet::none(grid), VariableKind::continuous(),
                                     cfg, {}};
        const CorrelationResult res = reconstruct_correlation(model, grid);
        CHECK((res.corr - Eigen::MatrixXd::Identity(25, 25)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(res.projection_distance == 0.0);
    }

    SUBCASE("valid surfaces pass through untouched") {
        // Small rank-one coefficients keep the grid matrix diagonally
        // dominant, hence PSD.
        Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(5, 0.2, 1.0);
        const Eigen::MatrixXd full = 0.15 * v * v.transpose();
        FitConfig cfg;
        cfg.basis_dim = 5;
        LatentCorrelationModel model{SplineBasis(5), CoefficientMatrix::from_full(full),
                                     CutoffSet::none(grid), VariableKind::continuous(),
                                     cfg, {}};
        const CorrelationResult res = reconstruct_correlation(model, grid);
        CHECK(res.projection_distance < 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.corr);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }

    SUBCASE("adversarial coefficients are projected to a valid correlation") {
        std::mt19937_64 rng(10);
        std::normal_distribution<double> gauss(0.0, 3.0);
        FitConfig cfg;
        cfg.basis_dim = 7;
        for (int trial = 0; trial < 10; ++trial) {
            CoefficientMatrix u(7);
            for (int i = 0; i < u.packed_size(); ++i) u.packed()[i] = gauss(rng);
            LatentCorrelationModel model{SplineBasis(7), u, CutoffSet::none(grid),
                                         VariableKind::continuous(), cfg, {}};
            const CorrelationResult res = reconstruct_correlation(model, grid);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.corr);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8);
            CHECK((res.corr.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-10);
            CHECK((res.corr - res.corr.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("sparse and dense paths agree on complete data") {
    const KernelSpec kernel = KernelSpec::matern();
    const std::vector<double> grid = uniform_grid(12);
    const Eigen::MatrixXd latent = sample_latent(kernel, grid, 200, 31);
    ScenarioSpec spec{'D', 200, 12, 1.0, 31};
    const ObservationSet obs = apply_scenario(latent, spec, grid);

    const TauMatrix dense = kendall_dense(obs.values, grid);
    const TauMatrix sparse = kendall_sparse(obs, 5);
    CHECK((dense.tau - sparse.tau).cwiseAbs().maxCoeff() == 0.0);

    FitConfig cfg;
    cfg.basis_dim = 4;
    const CutoffSet cutoffs = CutoffSet::none(grid);
    const auto m1 = fit_latent_correlation(dense, cutoffs, cfg);
    const auto m2 = fit_latent_correlation(sparse, cutoffs, cfg);
    CHECK((m1.coeffs.packed() - m2.coeffs.packed()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("monotone distortion of observed data leaves the fitted model identical") {
    const KernelSpec kernel = KernelSpec::matern();
    const std::vector<double> grid = uniform_grid(10);
    const Eigen::MatrixXd latent = sample_latent(kernel, grid, 150, 77);
    ScenarioSpec spec{'D', 150, 10, 1.0, 77};
    const ObservationSet obs = apply_scenario(latent, spec, grid);

    Eigen::MatrixXd distorted = obs.values;
    for (Eigen::Index i = 0; i < distorted.size(); ++i) {
        distorted(i) = std::exp(0.7 * distorted(i)) + 0.2 * distorted(i);
    }
    const TauMatrix t1 = kendall_dense(obs.values, grid);
    const TauMatrix t2 = kendall_dense(distorted, grid);
    CHECK((t1.tau - t2.tau).cwiseAbs().maxCoeff() == 0.0);

    FitConfig cfg;
    cfg.basis_dim = 4;
    const auto m1 = fit_latent_correlation(t1, CutoffSet::none(grid), cfg);
    const auto m2 = fit_latent_correlation(t2, CutoffSet::none(grid), cfg);
    CHECK((m1.coeffs.packed() - m2.coeffs.packed()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("iteration cap flags non-convergence but still returns a model") {
    const SplineBasis basis(5);
    const std::vector<double> grid = uniform_grid(14);
    const CoefficientMatrix u0 = planted_coefficients(5, 13, 0.8);
    TauMatrix tau = planted_tau(u0, basis, grid, BridgeContext::continuous());
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int j = 0; j < 14; ++j) {
        for (int k = j + 1; k < 14; ++k) {
            const double t = std::clamp(tau.tau(j, k) + noise(rng), -0.99, 0.99);
            tau.tau(j, k) = tau.tau(k, j) = t;
        }
    }
    FitConfig cfg;
    cfg.basis_dim = 5;
    cfg.init = FitConfig::Init::zeros;
    cfg.max_iterations = 1;
    const LatentCorrelationModel model =
        fit_latent_correlation(tau, CutoffSet::none(grid), cfg);
    CHECK(model.diagnostics.non_convergence);
    CHECK(model.coeffs.packed().allFinite());
}

}  // TEST_SUITE
