#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fsgc/stats.hpp"
#include "fsgc/types.hpp"

using namespace fsgc;

TEST_SUITE("stats") {

TEST_CASE("normal quantile reference values") {
    CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(norm_quantile(0.3) == doctest::Approx(-0.5244005127080407).epsilon(1e-12));
    CHECK(norm_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
    CHECK_THROWS_AS(norm_quantile(0.0), OutOfDomain);
    CHECK_THROWS_AS(norm_quantile(1.0), OutOfDomain);
}

TEST_CASE("quantile inverts the cdf") {
    for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
        CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    for (int n : {6, 12, 15, 20}) {
        const GaussRule& rule = gauss_legendre(n);
        double w_sum = 0.0, x2 = 0.0, x_hi = 0.0;
        for (int i = 0; i < n; ++i) {
            w_sum += rule.weights[i];
            x2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
            x_hi += rule.weights[i] * std::pow(rule.nodes[i], 2 * n - 2);
        }
        CHECK(w_sum == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(x2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
        // Degree 2n-1 rule: x^{2n-2} is still exact.
        CHECK(x_hi == doctest::Approx(2.0 / (2.0 * n - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("adaptive quadrature") {
    const double got = integrate([](double x) { return std::exp(-x * x); }, -6.0, 6.0, 1e-12);
    CHECK(got == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
    const double g2 = integrate_2d([](double x, double y) { return x * x + y * y * y; },
                                   0.0, 1.0, 0.0, 2.0, 1e-12);
    CHECK(g2 == doctest::Approx(2.0 / 3.0 + 4.0).epsilon(1e-12));
}

namespace {

// Independent check on the bivariate normal CDF: integrate the density in
// the correlation parameter from zero (where the CDF factorizes).
double bvn_cdf_oracle(double h, double k, double r) {
    const double base = norm_cdf(h) * norm_cdf(k);
    if (r == 0.0) return base;
    const double lo = std::min(0.0, r), hi = std::max(0.0, r);
    const double corr = integrate([&](double s) { return bvn_pdf(h, k, s); }, lo, hi, 1e-14);
    return base + (r > 0 ? corr : -corr);
}

}  // namespace

TEST_CASE("bivariate normal cdf against density-integral oracle") {
    const double hs[] = {-2.5, -1.0, -0.3, 0.0, 0.4, 1.2, 2.8};
    const double rs[] = {-0.99, -0.9, -0.6, -0.2, 0.0, 0.15, 0.5, 0.85, 0.93, 0.999};
    for (double h : hs) {
        for (double k : hs) {
            for (double r : rs) {
                const double got = bvn_cdf(h, k, r);
                const double want = bvn_cdf_oracle(h, k, r);
                CHECK(got == doctest::Approx(want).epsilon(5e-11).scale(1.0));
            }
        }
    }
}

TEST_CASE("bivariate normal cdf special values") {
    for (double r : {-0.95, -0.5, 0.0, 0.3, 0.8, 0.999}) {
        CHECK(bvn_cdf(0.0, 0.0, r) ==
              doctest::Approx(0.25 + std::asin(r) / (2.0 * std::numbers::pi)).epsilon(1e-14));
    }
    // Degenerate correlations.
    CHECK(bvn_cdf(0.3, 1.2, 1.0) == doctest::Approx(norm_cdf(0.3)).epsilon(1e-15));
    CHECK(bvn_cdf(0.3, -1.2, -1.0) ==
          doctest::Approx(std::max(0.0, norm_cdf(0.3) + norm_cdf(-1.2) - 1.0)).epsilon(1e-15));
    // Factorization at r = 0 (1 ulp slack: the reference side constant-folds).
    CHECK(bvn_cdf(0.7, -0.2, 0.0) ==
          doctest::Approx(norm_cdf(0.7) * norm_cdf(-0.2)).epsilon(1e-15));
    // Marginal reduction.
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(bvn_rectangle(-inf, 0.7, -inf, inf, 0.5) == doctest::Approx(norm_cdf(0.7)));
}

TEST_CASE("bivariate normal cdf is monotone in r") {
    double prev = bvn_cdf(0.5, -0.4, -0.999);
    for (double r = -0.99; r <= 0.999; r += 0.01) {
        const double cur = bvn_cdf(0.5, -0.4, r);
        CHECK(cur >= prev - 1e-14);
        prev = cur;
    }
}

TEST_CASE("monotone cubic interpolation") {
    std::vector<double> x, y;
    for (int i = 0; i <= 20; ++i) {
        x.push_back(i / 20.0);
        y.push_back(std::atan(3.0 * (x.back() - 0.4)));
    }
    MonotoneCubic f(x, y);
    // Knot interpolation.
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(f(x[i]) == doctest::Approx(y[i]));
    // Monotone between knots.
    double prev = f(0.0);
    for (double t = 0.001; t <= 1.0; t += 0.001) {
        CHECK(f(t) >= prev - 1e-14);
        prev = f(t);
    }
    // Derivative consistent with finite differences of the interpolant.
    for (double t : {0.11, 0.37, 0.68, 0.93}) {
        const double h = 1e-6;
        const double fd = (f(t + h) - f(t - h)) / (2 * h);
        CHECK(f.derivative(t) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("brent finds bracketed roots") {
    const double root = brent_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0, 1e-12);
    CHECK(std::cos(root) - root == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12),
                    NumericalFailure);
}

TEST_CASE("seed derivation is deterministic and stream-separated") {
    CHECK(derive_seed(42, 0) == derive_seed(42, 0));
    CHECK(derive_seed(42, 0) != derive_seed(42, 1));
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}

}  // TEST_SUITE
