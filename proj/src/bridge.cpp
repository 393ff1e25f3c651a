#include "fsgc/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace fsgc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadCut = 8.5;   // Gaussian tail truncation for quadratures
constexpr double kQuadTol = 1e-7;  // per-term quadrature tolerance

std::vector<double> with_infinite_bounds(const std::vector<double>& cuts) {
    std::vector<double> b;
    b.reserve(cuts.size() + 2);
    b.push_back(-kInf);
    b.insert(b.end(), cuts.begin(), cuts.end());
    b.push_back(kInf);
    return b;
}

// tau for a pair of discretized margins: the concordance expectation reduces
// to a double sum of bivariate-normal rectangle probabilities over category
// pairs, folded here through 2-d prefix sums.
double tau_discrete(double r, const std::vector<double>& cuts_a,
                    const std::vector<double>& cuts_b, double* derivative) {
    const std::vector<double> ba = with_infinite_bounds(cuts_a);
    const std::vector<double> bb = with_infinite_bounds(cuts_b);
    const int la = static_cast<int>(ba.size()) - 1;
    const int lb = static_cast<int>(bb.size()) - 1;

    std::vector<double> prob(la * lb), dprob;
    if (derivative) dprob.assign(la * lb, 0.0);
    auto corner_pdf = [&](double x, double y) {
        return std::isinf(x) || std::isinf(y) ? 0.0 : bvn_pdf(x, y, r);
    };
    for (int k = 0; k < la; ++k) {
        for (int q = 0; q < lb; ++q) {
            prob[k * lb + q] = bvn_rectangle(ba[k], ba[k + 1], bb[q], bb[q + 1], r);
            if (derivative) {
                dprob[k * lb + q] = corner_pdf(ba[k + 1], bb[q + 1]) -
                                    corner_pdf(ba[k], bb[q + 1]) -
                                    corner_pdf(ba[k + 1], bb[q]) + corner_pdf(ba[k], bb[q]);
            }
        }
    }
    // Prefix sums S(k,q) = sum_{l<=k, l'<=q} P.
    std::vector<double> S((la + 1) * (lb + 1), 0.0);
    auto Sat = [&](int k, int q) -> double& { return S[(k + 1) * (lb + 1) + (q + 1)]; };
    for (int k = 0; k < la; ++k) {
        for (int q = 0; q < lb; ++q) {
            Sat(k, q) = prob[k * lb + q] + Sat(k - 1, q) + Sat(k, q - 1) - Sat(k - 1, q - 1);
        }
    }
    const double total = Sat(la - 1, lb - 1);
    auto quadrant_weight = [&](int k, int q) {
        const double below_below = Sat(k - 1, q - 1);
        const double above_above = total - Sat(k, lb - 1) - Sat(la - 1, q) + Sat(k, q);
        const double below_above = Sat(k - 1, lb - 1) - Sat(k - 1, q);
        const double above_below = Sat(la - 1, q - 1) - Sat(k, q - 1);
        return below_below + above_above - below_above - above_below;
    };
    double tau = 0.0, dtau = 0.0;
    for (int k = 0; k < la; ++k) {
        for (int q = 0; q < lb; ++q) {
            const double w = quadrant_weight(k, q);
            tau += prob[k * lb + q] * w;
            if (derivative) dtau += dprob[k * lb + q] * w;
        }
    }
    if (derivative) *derivative = 2.0 * dtau;
    return tau;
}

// Truncated-truncated tau. With thresholds a, b the concordance expectation
// splits into closed bivariate terms plus orthant-type probabilities of the
// 4-d Gaussian of two independent subject pairs; the latter reduce, by
// conditioning, to one- and two-dimensional integrals with Phi2 integrands.
struct TruncatedTau {
    double a, b, r, sigma;

    double phi_cond(double target, double given) const {
        // P(V_target-coordinate <= `target` | other coordinate = `given`)
        return norm_cdf((target - r * given) / sigma);
    }

    // E[I(V1>s)I(V1'<=s) I(V2>o)I(V2'>o) sgn(V2-V2')]: split coordinate at s,
    // ordered coordinate above o.
    double ordered_split(double s, double o) const {
        auto f = [&](double w) {
            const double cond_below = norm_cdf((s - r * w) / sigma);
            const double piece1 = cond_below * bvn_upper(s, w, r);
            const double piece2 =
                (1.0 - cond_below) * (norm_cdf(s) - bvn_cdf(s, w, r));
            return norm_pdf(w) * (piece1 - piece2);
        };
        const double lo = std::max(o, -kQuadCut);
        if (lo >= kQuadCut) return 0.0;
        return integrate(f, lo, kQuadCut, kQuadTol);
    }

    // P(V1 > V1' > a, V2 > V2' > b): rotated coordinates keep the integrand
    // well conditioned for |r| near one.
    double chained_orthant() const {
        const double s1 = std::sqrt(std::max(1.0 - r, 1e-18));
        const double us = std::sqrt(std::max(1.0 + r, 1e-18));
        const double sqrt2 = std::numbers::sqrt2;
        auto pmin = [&](double q) {
            return std::max(sqrt2 * a - s1 * q, sqrt2 * b + s1 * q) / us;
        };
        auto patch = [&](double q, double x) {
            const double lo = std::clamp(pmin(q), -kQuadCut, kQuadCut);
            const double span = kQuadCut - lo;
            const double p = lo + x * span;
            const double u = us * p, z = s1 * q;
            const double v = (u + z) / sqrt2, w = (u - z) / sqrt2;
            return norm_pdf(q) * norm_pdf(p) * bvn_upper(v, w, r) * span;
        };
        const double qstar = (a - b) / (sqrt2 * s1);
        double out = 0.0;
        const double q0 = -kQuadCut, q1 = kQuadCut;
        if (qstar > q0 && qstar < q1) {
            out += integrate_2d(patch, q0, qstar, 0.0, 1.0, kQuadTol);
            out += integrate_2d(patch, qstar, q1, 0.0, 1.0, kQuadTol);
        } else {
            out = integrate_2d(patch, q0, q1, 0.0, 1.0, kQuadTol);
        }
        return out;
    }

    double eval() const {
        const double upper_both = bvn_upper(a, b, r);
        const double lower_both = bvn_cdf(a, b, r);
        const double t1 = upper_both * lower_both;
        const double t2 = -(norm_cdf(b) - lower_both) * (norm_cdf(a) - lower_both);
        const double t3 = ordered_split(a, b);
        const double t7 = ordered_split(b, a);
        const double i2 = chained_orthant();
        auto j_f = [&](double v) {
            return norm_pdf(v) * (1.0 - phi_cond(b, v)) * bvn_upper(v, b, r);
        };
        const double jlo = std::max(a, -kQuadCut);
        const double j = jlo >= kQuadCut ? 0.0 : integrate(j_f, jlo, kQuadCut, kQuadTol);
        return 2.0 * (t1 + t2 + t3 + t7) + 4.0 * i2 - 2.0 * j;
    }
};

}  // namespace

BridgeContext BridgeContext::continuous() {
    return {VariableKind::continuous(), {}, {}};
}

BridgeContext BridgeContext::binary(double delta_a, double delta_b) {
    return {VariableKind::binary(), {delta_a}, {delta_b}};
}

BridgeContext BridgeContext::ordinal(std::vector<double> cuts_a, std::vector<double> cuts_b) {
    if (cuts_a.size() != cuts_b.size() || cuts_a.size() < 2) {
        throw DimensionMismatch("ordinal bridge context needs matching cutoff vectors (>= 2)");
    }
    BridgeContext ctx{VariableKind::ordinal(static_cast<int>(cuts_a.size()) + 1),
                      std::move(cuts_a), std::move(cuts_b)};
    ctx.validate();
    return ctx;
}

BridgeContext BridgeContext::truncated(double delta_a, double delta_b) {
    return {VariableKind::truncated(), {delta_a}, {delta_b}};
}

void BridgeContext::validate() const {
    const int want = kind.cutoff_count();
    if (static_cast<int>(cutoffs_a.size()) != want ||
        static_cast<int>(cutoffs_b.size()) != want) {
        throw DimensionMismatch("bridge context cutoff count does not match kind");
    }
    for (const auto* cuts : {&cutoffs_a, &cutoffs_b}) {
        for (std::size_t i = 0; i < cuts->size(); ++i) {
            if (!std::isfinite((*cuts)[i])) throw Error("bridge cutoffs must be finite");
            if (i > 0 && !((*cuts)[i] > (*cuts)[i - 1])) {
                throw Error("bridge cutoffs must be strictly increasing");
            }
        }
    }
}

double bridge_forward(double r, const BridgeContext& ctx) {
    if (std::fabs(r) > 1.0) throw OutOfDomain("bridge_forward: |r| > 1");
    switch (ctx.kind.tag) {
        case Kind::continuous:
            return (2.0 / kPi) * std::asin(r);
        case Kind::binary:
            return 2.0 * (bvn_cdf(ctx.cutoffs_a[0], ctx.cutoffs_b[0], r) -
                          norm_cdf(ctx.cutoffs_a[0]) * norm_cdf(ctx.cutoffs_b[0]));
        case Kind::ordinal:
            return tau_discrete(r, ctx.cutoffs_a, ctx.cutoffs_b, nullptr);
        case Kind::truncated: {
            if (r == 0.0) return 0.0;
            const double rr = std::clamp(r, -(1.0 - 1e-9), 1.0 - 1e-9);
            TruncatedTau tt{ctx.cutoffs_a[0], ctx.cutoffs_b[0], rr,
                            std::sqrt(1.0 - rr * rr)};
            return tt.eval();
        }
    }
    throw Error("bridge_forward: unreachable");
}

double bridge_forward_derivative(double r, const BridgeContext& ctx) {
    switch (ctx.kind.tag) {
        case Kind::continuous:
            return (2.0 / kPi) / std::sqrt(std::max(1.0 - r * r, 1e-18));
        case Kind::binary:
            // Plackett: d Phi2(h,k;r)/dr is the bivariate density at (h,k).
            return 2.0 * bvn_pdf(ctx.cutoffs_a[0], ctx.cutoffs_b[0], r);
        case Kind::ordinal: {
            double d = 0.0;
            tau_discrete(r, ctx.cutoffs_a, ctx.cutoffs_b, &d);
            return d;
        }
        case Kind::truncated: {
            // Forward value is quadrature-based; use a central difference.
            const double h = 1e-4 * std::max(0.05, 1.0 - std::fabs(r));
            const double lo = std::max(r - h, -kBridgeRMax);
            const double hi = std::min(r + h, kBridgeRMax);
            return (bridge_forward(hi, ctx) - bridge_forward(lo, ctx)) / (hi - lo);
        }
    }
    throw Error("bridge_forward_derivative: unreachable");
}

BridgeInverse bridge_inverse(double tau, const BridgeContext& ctx) {
    if (tau == 0.0) return {0.0, false};
    if (ctx.kind.tag == Kind::continuous) {
        const double t_max = (2.0 / kPi) * std::asin(kBridgeRMax);
        if (tau >= t_max) return {kBridgeRMax, tau > t_max};
        if (tau <= -t_max) return {-kBridgeRMax, tau < -t_max};
        return {std::sin(0.5 * kPi * tau), false};
    }
    const double f_hi = bridge_forward(kBridgeRMax, ctx);
    const double f_lo = bridge_forward(-kBridgeRMax, ctx);
    if (tau >= f_hi) return {kBridgeRMax, tau > f_hi};
    if (tau <= f_lo) return {-kBridgeRMax, tau < f_lo};
    const double root = brent_root(
        [&](double r) { return bridge_forward(r, ctx) - tau; }, -kBridgeRMax,
        kBridgeRMax, 1e-9);
    return {root, false};
}

McTau mc_tau_oracle(double r, const BridgeContext& ctx, std::size_t n_samples,
                    std::uint64_t seed) {
    if (n_samples < 10000) throw InsufficientData("mc_tau_oracle: need >= 1e4 samples");
    ctx.validate();
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    const double c = std::sqrt(std::max(0.0, 1.0 - r * r));

    auto observe = [&](double v, const std::vector<double>& cuts) -> double {
        switch (ctx.kind.tag) {
            case Kind::binary:
                return v > cuts[0] ? 1.0 : 0.0;
            case Kind::ordinal: {
                const auto it = std::upper_bound(cuts.begin(), cuts.end(), v);
                return static_cast<double>(it - cuts.begin());
            }
            case Kind::truncated:
                // Monotone positive-part map keeps observed values >= 0 with
                // mass at 0, as the data model requires, for any threshold.
                return v > cuts[0] ? v - cuts[0] : 0.0;
            case Kind::continuous:
                return v;
        }
        return v;
    };

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double z1 = normal(engine), z2 = normal(engine);
        const double z3 = normal(engine), z4 = normal(engine);
        const double x1 = observe(z1, ctx.cutoffs_a);
        const double y1 = observe(r * z1 + c * z2, ctx.cutoffs_b);
        const double x2 = observe(z3, ctx.cutoffs_a);
        const double y2 = observe(r * z3 + c * z4, ctx.cutoffs_b);
        const double dx = x1 - x2, dy = y1 - y2;
        const double s = dx * dy > 0.0 ? 1.0 : dx * dy < 0.0 ? -1.0 : 0.0;
        sum += s;
        sum_sq += s * s;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

BridgeTable::BridgeTable(const BridgeContext& ctx, int points) {
    if (points < 5) throw Error("BridgeTable: need at least 5 nodes");
    ctx.validate();
    r_max_ = kBridgeRMax;
    const double theta_max = std::asin(r_max_);
    std::vector<double> theta(points), tau(points);
    for (int i = 0; i < points; ++i) {
        theta[i] = -theta_max + 2.0 * theta_max * i / (points - 1);
        tau[i] = bridge_forward(std::sin(theta[i]), ctx);
    }
    curve_ = MonotoneCubic(std::move(theta), std::move(tau));
}

double BridgeTable::value(double r) const {
    const double rc = std::clamp(r, -r_max_, r_max_);
    double v = curve_(std::asin(rc));
    if (r != rc) v += derivative(rc) * (r - rc);  // linear continuation
    return v;
}

double BridgeTable::derivative(double r) const {
    const double rc = std::clamp(r, -r_max_, r_max_);
    const double dtheta = curve_.derivative(std::asin(rc));
    return dtheta / std::sqrt(std::max(1.0 - rc * rc, 1e-18));
}

BridgeInverse BridgeTable::inverse(double tau) const {
    if (tau == 0.0) return {0.0, false};
    const double f_lo = curve_.y_front(), f_hi = curve_.y_back();
    if (tau >= f_hi) return {r_max_, tau > f_hi};
    if (tau <= f_lo) return {-r_max_, tau < f_lo};
    const double theta = brent_root(
        [&](double th) { return curve_(th) - tau; }, curve_.x_front(), curve_.x_back(),
        1e-10);
    return {std::sin(theta), false};
}

}  // namespace fsgc
