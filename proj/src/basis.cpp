#include "fsgc/basis.hpp"

#include <cmath>

#include "fsgc/types.hpp"

namespace fsgc {

SplineBasis::SplineBasis(int dimension) : d_(dimension) {
    if (d_ < kDegree + 1) {
        throw Error("SplineBasis: dimension must be at least degree+1 = 4");
    }
    const int interior = d_ - kDegree - 1;
    knots_.reserve(d_ + kDegree + 1);
    for (int i = 0; i <= kDegree; ++i) knots_.push_back(0.0);
    for (int i = 1; i <= interior; ++i) {
        knots_.push_back(static_cast<double>(i) / (interior + 1));
    }
    for (int i = 0; i <= kDegree; ++i) knots_.push_back(1.0);
}

Eigen::VectorXd SplineBasis::eval(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw OutOfDomain("SplineBasis::eval: t outside [0,1]");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d_);
    // Knot span containing t; last basis function owns t = 1.
    int span = kDegree;
    while (span < d_ - 1 && t >= knots_[span + 1]) ++span;

    // Cox-de Boor triangle for the degree+1 nonzero functions on this span.
    double vals[kDegree + 1];
    double left[kDegree + 1], right[kDegree + 1];
    vals[0] = 1.0;
    for (int j = 1; j <= kDegree; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double tmp = denom != 0.0 ? vals[r] / denom : 0.0;
            vals[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        vals[j] = saved;
    }
    for (int r = 0; r <= kDegree; ++r) out[span - kDegree + r] = vals[r];
    return out;
}

CoefficientMatrix::CoefficientMatrix(int d)
    : d_(d), packed_(Eigen::VectorXd::Zero(d * (d + 1) / 2)) {}

int CoefficientMatrix::pack_index(int k, int l) {
    if (k < l) std::swap(k, l);
    return k * (k + 1) / 2 + l;
}

CoefficientMatrix CoefficientMatrix::from_full(const Eigen::MatrixXd& full) {
    if (full.rows() != full.cols()) throw DimensionMismatch("coefficient matrix must be square");
    CoefficientMatrix u(static_cast<int>(full.rows()));
    for (int k = 0; k < u.d_; ++k) {
        for (int l = 0; l <= k; ++l) {
            u.packed_[pack_index(k, l)] = 0.5 * (full(k, l) + full(l, k));
        }
    }
    return u;
}

CoefficientMatrix CoefficientMatrix::from_packed(int d, Eigen::VectorXd packed) {
    if (packed.size() != d * (d + 1) / 2) {
        throw DimensionMismatch("packed coefficient size mismatch");
    }
    CoefficientMatrix u(d);
    u.packed_ = std::move(packed);
    return u;
}

double CoefficientMatrix::operator()(int k, int l) const {
    return packed_[pack_index(k, l)];
}

Eigen::MatrixXd CoefficientMatrix::full() const {
    Eigen::MatrixXd m(d_, d_);
    for (int k = 0; k < d_; ++k) {
        for (int l = 0; l <= k; ++l) {
            m(k, l) = m(l, k) = packed_[pack_index(k, l)];
        }
    }
    return m;
}

double link_g(double x) {
    // tanh(x/2); saturates cleanly for large |x|.
    return std::tanh(0.5 * x);
}

double link_g_prime(double x) {
    const double g = std::tanh(0.5 * x);
    return 0.5 * (1.0 - g * g);
}

double link_g_inverse(double c) {
    if (!(c > -1.0 && c < 1.0)) {
        throw OutOfDomain("link_g_inverse: argument must lie strictly inside (-1,1)");
    }
    return 2.0 * std::atanh(c);
}

double eval_predictor(const CoefficientMatrix& coeffs, const SplineBasis& basis,
                      double s, double t) {
    const Eigen::VectorXd bs = basis.eval(s);
    const Eigen::VectorXd bt = basis.eval(t);
    double eta = 0.0;
    for (int k = 0; k < coeffs.dim(); ++k) {
        for (int l = 0; l <= k; ++l) {
            const double u = coeffs(k, l);
            eta += k == l ? u * (bs[k] * bt[k]) : u * (bs[k] * bt[l] + bs[l] * bt[k]);
        }
    }
    return eta;
}

double eval_surface(const CoefficientMatrix& coeffs, const SplineBasis& basis,
                    double s, double t) {
    return link_g(eval_predictor(coeffs, basis, s, t));
}

Eigen::VectorXd predictor_design_row(const SplineBasis& basis, double s, double t) {
    const Eigen::VectorXd bs = basis.eval(s);
    const Eigen::VectorXd bt = basis.eval(t);
    const int d = basis.dimension();
    Eigen::VectorXd row(d * (d + 1) / 2);
    for (int k = 0; k < d; ++k) {
        for (int l = 0; l <= k; ++l) {
            row[CoefficientMatrix::pack_index(k, l)] =
                k == l ? bs[k] * bt[k] : bs[k] * bt[l] + bs[l] * bt[k];
        }
    }
    return row;
}

}  // namespace fsgc
