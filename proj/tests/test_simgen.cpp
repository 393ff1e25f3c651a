#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fsgc/rank.hpp"
#include "fsgc/simgen.hpp"

using namespace fsgc;

namespace {

// Half-integer Matérn (nu = 7/2) reduces to an elementary closed form:
// exp(-u) (u^3 + 6u^2 + 15u + 15)/15 with u = sqrt(2 nu) d / range.
double matern_35_closed_form(double d, double range) {
    const double u = std::sqrt(7.0) * d / range;
    return std::exp(-u) * (u * u * u + 6.0 * u * u + 15.0 * u + 15.0) / 15.0;
}

}  // namespace

TEST_SUITE("simgen") {

TEST_CASE("matern kernel: limits, closed form, monotone decay") {
    const KernelSpec spec = KernelSpec::matern();
    CHECK(kernel_eval(spec, 0.3, 0.3) == 1.0);
    for (int i = 1; i <= 100; ++i) {
        const double d = i / 100.0;
        CHECK(kernel_eval(spec, 0.0, d) ==
              doctest::Approx(matern_35_closed_form(d, spec.range)).epsilon(1e-12));
    }
    double prev = kernel_eval(spec, 0.0, 0.0);
    for (int i = 1; i <= 100; ++i) {
        const double cur = kernel_eval(spec, 0.0, i / 100.0);
        CHECK(cur < prev);
        prev = cur;
    }
    const double far = kernel_eval(spec, 0.0, 1.0);
    CHECK(far > 0.0);
    CHECK(far < 0.05);
}

TEST_CASE("non-stationary kernel is a correlation") {
    const KernelSpec spec = KernelSpec::nonstationary();
    for (double t : {0.0, 0.5, 0.77}) CHECK(kernel_eval(spec, t, t) == 1.0);
    // Symmetry and range.
    for (double s : {0.1, 0.4, 0.8}) {
        for (double t : {0.2, 0.6, 0.95}) {
            CHECK(kernel_eval(spec, s, t) == doctest::Approx(kernel_eval(spec, t, s)));
            CHECK(std::fabs(kernel_eval(spec, s, t)) <= 1.0);
        }
    }
    // Strong negative dependence across the half-period.
    CHECK(kernel_eval(spec, 0.1, 0.9) < -0.5);
}

TEST_CASE("latent sampling is seed-deterministic") {
    const std::vector<double> grid = uniform_grid(10);
    const Eigen::MatrixXd a = sample_latent(KernelSpec::matern(), grid, 50, 123);
    const Eigen::MatrixXd b = sample_latent(KernelSpec::matern(), grid, 50, 123);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd c = sample_latent(KernelSpec::matern(), grid, 50, 124);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    // Row streams are derived per subject: a prefix of rows is unchanged by n.
    const Eigen::MatrixXd d = sample_latent(KernelSpec::matern(), grid, 60, 123);
    CHECK((d.topRows(50) - a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("latent sample matches the kernel law at scale") {
    const std::vector<double> grid = uniform_grid(8);
    const int n = 20000;
    for (const KernelSpec& spec : {KernelSpec::matern(), KernelSpec::nonstationary()}) {
        const Eigen::MatrixXd v = sample_latent(spec, grid, n, 2718);
        const Eigen::MatrixXd k = kernel_matrix(spec, grid);
        const Eigen::RowVectorXd mean = v.colwise().mean();
        const Eigen::MatrixXd centered = v.rowwise() - mean;
        const Eigen::MatrixXd emp = centered.transpose() * centered / (n - 1);
        CHECK((emp - k).cwiseAbs().maxCoeff() < 0.03);
        for (int j = 0; j < 8; ++j) CHECK(std::fabs(emp(j, j) - 1.0) < 0.03);
    }
}

TEST_CASE("scenario maps: pointwise values") {
    const std::vector<double> grid = {0.0, 1.0};
    Eigen::MatrixXd v(1, 2);

    ScenarioSpec a{'A', 1, 2, 1.0, 0};
    v << 3.0, 2.0;
    const ObservationSet oa = apply_scenario(v, a, grid);
    CHECK(oa.values(0, 0) == 1.0);
    CHECK(oa.values(0, 1) == 0.0);

    ScenarioSpec b{'B', 1, 2, 1.0, 0};
    v << 0.0, -0.7;
    const ObservationSet ob = apply_scenario(v, b, grid);
    CHECK(ob.values(0, 0) == 1.0);  // -0.6 <= 0 < 0.1
    CHECK(ob.values(0, 1) == 0.0);
    CHECK(ob.kind.levels == 4);

    ScenarioSpec c{'C', 1, 2, 1.0, 0};
    v << 0.4, 1.3;
    const ObservationSet oc = apply_scenario(v, c, grid);
    CHECK(oc.values(0, 0) == 0.0);
    CHECK(oc.values(0, 1) == 1.3);

    ScenarioSpec d{'D', 1, 2, 1.0, 0};
    v << -2.0, 0.5;
    const ObservationSet od = apply_scenario(v, d, grid);
    CHECK(od.values(0, 0) == -8.0);
    CHECK(od.values(0, 1) == 0.125);
}

TEST_CASE("scenario maps are monotone") {
    const std::vector<double> grid = uniform_grid(6);
    const Eigen::MatrixXd v = sample_latent(KernelSpec::matern(), grid, 40, 5);
    for (char sc : {'A', 'B', 'C', 'D'}) {
        ScenarioSpec spec{sc, 40, 6, 1.0, 5};
        const ObservationSet obs = apply_scenario(v, spec, grid);
        for (int i = 0; i < 40; ++i) {
            for (int j = 0; j < 6; ++j) {
                for (int k = 0; k < 6; ++k) {
                    if (v(i, j) < v(i, k)) CHECK(obs.values(i, j) <= obs.values(i, k));
                }
            }
        }
    }
}

TEST_CASE("cube transformation preserves the tau matrix exactly") {
    const std::vector<double> grid = uniform_grid(7);
    const Eigen::MatrixXd v = sample_latent(KernelSpec::matern(), grid, 80, 9);
    ScenarioSpec d{'D', 80, 7, 1.0, 9};
    const ObservationSet obs = apply_scenario(v, d, grid);
    const TauMatrix latent_tau = kendall_dense(v, grid);
    const TauMatrix observed_tau = kendall_dense(obs.values, grid);
    CHECK((latent_tau.tau - observed_tau.tau).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sparse masking keeps exact per-subject counts, reproducibly") {
    const std::vector<double> grid = uniform_grid(50);
    const Eigen::MatrixXd v = sample_latent(KernelSpec::matern(), grid, 30, 77);
    ScenarioSpec spec{'A', 30, 50, 0.1, 77};
    const ObservationSet obs = apply_scenario(v, spec, grid);
    for (int i = 0; i < 30; ++i) {
        int count = 0;
        for (int j = 0; j < 50; ++j) count += !std::isnan(obs.values(i, j));
        CHECK(count == 5);
    }
    const ObservationSet again = apply_scenario(v, spec, grid);
    for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 50; ++j) {
            CHECK(std::isnan(obs.values(i, j)) == std::isnan(again.values(i, j)));
        }
    }
}

TEST_CASE("scenario kinds and cutoffs") {
    CHECK(ScenarioSpec{'A', 2, 4, 1.0, 0}.kind().tag == Kind::binary);
    CHECK(ScenarioSpec{'B', 2, 4, 1.0, 0}.true_cutoffs() ==
          std::vector<double>{-0.6, 0.1, 0.6});
    CHECK(ScenarioSpec{'C', 2, 4, 1.0, 0}.true_cutoffs() == std::vector<double>{0.5});
    CHECK(ScenarioSpec{'D', 2, 4, 1.0, 0}.kind().tag == Kind::continuous);
    CHECK_THROWS_AS((ScenarioSpec{'E', 2, 4, 1.0, 0}.kind()), Error);
}

}  // TEST_SUITE
