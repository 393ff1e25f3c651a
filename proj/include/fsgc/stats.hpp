#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace fsgc {

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Standard normal CDF via erfc; accurate to full double precision in both tails.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Upper tail P(Z > x).
inline double norm_sf(double x) { return norm_cdf(-x); }

// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16).
// Throws OutOfDomain for p outside (0,1).
double norm_quantile(double p);

// P(X > h, Y > k) for standard bivariate normal with correlation r.
// Genz's double-precision quadrature; absolute error below ~5e-16.
double bvn_upper(double h, double k, double r);

// P(X <= h, Y <= k).
inline double bvn_cdf(double h, double k, double r) { return bvn_upper(-h, -k, r); }

// Standard bivariate normal density at (x, y) with correlation r.
inline double bvn_pdf(double x, double y, double r) {
    const double s = 1.0 - r * r;
    return std::exp(-0.5 * (x * x - 2.0 * r * x * y + y * y) / s) /
           (2.0 * std::numbers::pi * std::sqrt(s));
}

// P(a1 <= X < b1, a2 <= Y < b2); infinite bounds allowed.
double bvn_rectangle(double a1, double b1, double a2, double b2, double r);

// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

// Adaptive 1-d quadrature: Gauss-Legendre panel vs. bisected panels.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, int max_depth = 24);

// Adaptive 2-d quadrature over a rectangle, bisecting the longer axis.
double integrate_2d(const std::function<double(double, double)>& f, double ax,
                    double bx, double ay, double by, double abs_tol,
                    int max_depth = 18);

// Monotone cubic Hermite interpolant (Fritsch-Carlson slopes).
// Preserves monotonicity of the data; derivative is the exact derivative
// of the interpolant.
class MonotoneCubic {
  public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double derivative(double x) const;
    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }
    double y_front() const { return y_.front(); }
    double y_back() const { return y_.back(); }

  private:
    int interval(double x) const;
    std::vector<double> x_, y_, d_;
};

// Brent root finder on [a, b]; f(a) and f(b) must bracket a root.
double brent_root(const std::function<double(double)>& f, double a, double b,
                  double x_tol, int max_iter = 200);

// SplitMix64 step; used as the fixed seed-splitting rule for derived streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic sub-stream seed: same (master, stream) always yields the
// same seed regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull);
    return splitmix64(s);
}

}  // namespace fsgc
