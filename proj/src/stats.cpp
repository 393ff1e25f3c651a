#include "fsgc/stats.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>

#include "fsgc/types.hpp"

namespace fsgc {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double norm_quantile(double p) {
    // Wichura (1988), algorithm AS 241, routine PPND16.
    if (!(p > 0.0 && p < 1.0)) {
        throw OutOfDomain("norm_quantile: p must lie strictly inside (0,1), got " +
                          std::to_string(p));
    }
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

namespace {

// Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence.
void legendre_pair(int n, double x, double* pn, double* pn1) {
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    *pn = p1;
    *pn1 = p0;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pn = 0.0, pn1 = 0.0, dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            legendre_pair(n, x, &pn, &pn1);
            dp = n * (x * pn - pn1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        legendre_pair(n, x, &pn, &pn1);
        dp = n * (x * pn - pn1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    auto [pos, unused] = cache.emplace(n, std::move(rule));
    (void)unused;
    return pos->second;
}

double bvn_upper(double h, double k, double r) {
    // Genz (2004), "Numerical computation of rectangular bivariate and
    // trivariate normal and t probabilities".
    if (std::isnan(h) || std::isnan(k) || std::isnan(r)) {
        throw NumericalFailure("bvn_upper: NaN argument");
    }
    if (r > 1.0 || r < -1.0) throw OutOfDomain("bvn_upper: |r| > 1");
    if (h == kInf || k == kInf) return 0.0;
    if (h == -kInf) return k == -kInf ? 1.0 : norm_sf(k);
    if (k == -kInf) return norm_sf(h);
    if (r == 1.0) return norm_sf(std::max(h, k));
    if (r == -1.0) return std::max(0.0, 1.0 - norm_cdf(h) - norm_cdf(k));

    const GaussRule& rule = gauss_legendre(std::fabs(r) < 0.3   ? 6
                                           : std::fabs(r) < 0.75 ? 12
                                                                 : 20);
    double hk = h * k;
    double bvn = 0.0;
    if (std::fabs(r) < 0.925) {
        if (r != 0.0) {
            const double hs = 0.5 * (h * h + k * k);
            const double asr = std::asin(r);
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double sn = std::sin(0.5 * asr * (rule.nodes[i] + 1.0));
                bvn += rule.weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
            bvn *= asr / (4.0 * kPi);
        }
        bvn += norm_sf(h) * norm_sf(k);
        return bvn;
    }

    // |r| >= 0.925: Genz's singularity-subtracted form.
    double kk = k;
    if (r < 0.0) {
        kk = -kk;
        hk = -hk;
    }
    const double as0 = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as0);
    const double bs = (h - kk) * (h - kk);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -0.5 * (bs / as0 + hk);
    if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as0) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as0 * as0 / 5.0);
    }
    if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-0.5 * hk) * std::sqrt(2.0 * kPi) * norm_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a *= 0.5;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double xs = a * (rule.nodes[i] + 1.0);
        xs *= xs;
        const double rs = std::sqrt(1.0 - xs);
        asr = -0.5 * (bs / xs + hk);
        if (asr > -100.0) {
            bvn += a * rule.weights[i] * std::exp(asr) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
        }
    }
    bvn = -bvn / (2.0 * kPi);
    if (r > 0.0) {
        bvn += norm_sf(std::max(h, kk));
    } else {
        bvn = -bvn;
        if (kk > h) bvn += norm_cdf(kk) - norm_cdf(h);
    }
    return std::clamp(bvn, 0.0, 1.0);
}

double bvn_rectangle(double a1, double b1, double a2, double b2, double r) {
    auto cdf = [r](double x, double y) {
        if (x == -kInf || y == -kInf) return 0.0;
        if (x == kInf && y == kInf) return 1.0;
        if (x == kInf) return norm_cdf(y);
        if (y == kInf) return norm_cdf(x);
        return bvn_cdf(x, y, r);
    };
    const double p = cdf(b1, b2) - cdf(a1, b2) - cdf(b1, a2) + cdf(a1, a2);
    return std::clamp(p, 0.0, 1.0);
}

namespace {

double gl_panel(const std::function<double(double)>& f, double a, double b,
                const GaussRule& rule) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    return sum * half;
}

double integrate_rec(const std::function<double(double)>& f, double a, double b,
                     double whole, double abs_tol, int depth, const GaussRule& rule) {
    const double mid = 0.5 * (a + b);
    const double left = gl_panel(f, a, mid, rule);
    const double right = gl_panel(f, mid, b, rule);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= abs_tol || depth <= 0) return left + right;
    return integrate_rec(f, a, mid, left, 0.5 * abs_tol, depth - 1, rule) +
           integrate_rec(f, mid, b, right, 0.5 * abs_tol, depth - 1, rule);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, int max_depth) {
    if (!(b > a)) return 0.0;
    const GaussRule& rule = gauss_legendre(15);
    const double whole = gl_panel(f, a, b, rule);
    return integrate_rec(f, a, b, whole, abs_tol, max_depth, rule);
}

namespace {

double gl_panel_2d(const std::function<double(double, double)>& f, double ax,
                   double bx, double ay, double by, const GaussRule& rule) {
    const double mx = 0.5 * (ax + bx), hx = 0.5 * (bx - ax);
    const double my = 0.5 * (ay + by), hy = 0.5 * (by - ay);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = mx + hx * rule.nodes[i];
        double row = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            row += rule.weights[j] * f(x, my + hy * rule.nodes[j]);
        }
        sum += rule.weights[i] * row;
    }
    return sum * hx * hy;
}

double integrate_2d_rec(const std::function<double(double, double)>& f, double ax,
                        double bx, double ay, double by, double whole,
                        double abs_tol, int depth, const GaussRule& rule) {
    double w1, w2;
    double ax1 = ax, bx1 = bx, ay1 = ay, by1 = by;
    double ax2 = ax, bx2 = bx, ay2 = ay, by2 = by;
    if (bx - ax >= by - ay) {
        const double mx = 0.5 * (ax + bx);
        bx1 = mx;
        ax2 = mx;
    } else {
        const double my = 0.5 * (ay + by);
        by1 = my;
        ay2 = my;
    }
    w1 = gl_panel_2d(f, ax1, bx1, ay1, by1, rule);
    w2 = gl_panel_2d(f, ax2, bx2, ay2, by2, rule);
    const double delta = w1 + w2 - whole;
    if (std::fabs(delta) <= abs_tol || depth <= 0) return w1 + w2;
    return integrate_2d_rec(f, ax1, bx1, ay1, by1, w1, 0.5 * abs_tol, depth - 1, rule) +
           integrate_2d_rec(f, ax2, bx2, ay2, by2, w2, 0.5 * abs_tol, depth - 1, rule);
}

}  // namespace

double integrate_2d(const std::function<double(double, double)>& f, double ax,
                    double bx, double ay, double by, double abs_tol, int max_depth) {
    if (!(bx > ax) || !(by > ay)) return 0.0;
    const GaussRule& rule = gauss_legendre(8);
    const double whole = gl_panel_2d(f, ax, bx, ay, by, rule);
    return integrate_2d_rec(f, ax, bx, ay, by, whole, abs_tol, max_depth, rule);
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) {
        throw Error("MonotoneCubic: need at least two matching knots");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) throw Error("MonotoneCubic: x must be strictly increasing");
    }
    std::vector<double> h(n - 1), slope(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        slope[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    d_[0] = slope[0];
    d_[n - 1] = slope[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (slope[i - 1] * slope[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            // Fritsch-Carlson weighted harmonic mean keeps the interpolant monotone.
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
        }
    }
    // Limit endpoint slopes (three-point clamp).
    for (std::size_t end = 0; end < 2; ++end) {
        const std::size_t i = end == 0 ? 0 : n - 1;
        const double s = end == 0 ? slope[0] : slope[n - 2];
        if (s == 0.0) {
            d_[i] = 0.0;
        } else if (d_[i] * s < 0.0) {
            d_[i] = 0.0;
        } else if (std::fabs(d_[i]) > 3.0 * std::fabs(s)) {
            d_[i] = 3.0 * s;
        }
    }
}

int MonotoneCubic::interval(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    int i = static_cast<int>(it - x_.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(x_.size()) - 2);
}

double MonotoneCubic::operator()(double x) const {
    if (x <= x_.front()) return y_.front() + d_.front() * (x - x_.front());
    if (x >= x_.back()) return y_.back() + d_.back() * (x - x_.back());
    const int i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double MonotoneCubic::derivative(double x) const {
    if (x <= x_.front()) return d_.front();
    if (x >= x_.back()) return d_.back();
    const int i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double g00 = (6 * t2 - 6 * t) / h, g10 = 3 * t2 - 4 * t + 1;
    const double g01 = (-6 * t2 + 6 * t) / h, g11 = 3 * t2 - 2 * t;
    return g00 * y_[i] + g10 * d_[i] + g01 * y_[i + 1] + g11 * d_[i + 1];
}

double brent_root(const std::function<double(double)>& f, double a, double b,
                  double x_tol, int max_iter) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw NumericalFailure("brent_root: interval does not bracket a root");
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) +
                           0.5 * x_tol;
        const double m = 0.5 * (c - b);
        if (std::fabs(m) <= tol || fb == 0.0) return b;
        if (std::fabs(e) < tol || std::fabs(fa) <= std::fabs(fb)) {
            d = m;
            e = m;
        } else {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc, rr = fb / fc;
                p = s * (2.0 * m * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += std::fabs(d) > tol ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    return b;
}

}  // namespace fsgc
