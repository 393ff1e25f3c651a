#pragma once

#include <Eigen/Core>
#include <vector>

namespace fsgc {

// Cubic B-spline basis on [0,1] with clamped, equally spaced knots.
// Basis values at any t are nonnegative and sum to one.
class SplineBasis {
  public:
    explicit SplineBasis(int dimension);

    int dimension() const { return d_; }
    const std::vector<double>& knots() const { return knots_; }

    // All d basis values at t (Cox-de Boor). Throws OutOfDomain outside [0,1].
    Eigen::VectorXd eval(double t) const;

  private:
    static constexpr int kDegree = 3;
    int d_;
    std::vector<double> knots_;
};

// Symmetric d x d coefficient matrix stored as d(d+1)/2 free parameters
// (lower triangle, row-major).
class CoefficientMatrix {
  public:
    CoefficientMatrix() = default;
    explicit CoefficientMatrix(int d);
    static CoefficientMatrix from_full(const Eigen::MatrixXd& full);
    static CoefficientMatrix from_packed(int d, Eigen::VectorXd packed);

    int dim() const { return d_; }
    int packed_size() const { return d_ * (d_ + 1) / 2; }
    const Eigen::VectorXd& packed() const { return packed_; }
    Eigen::VectorXd& packed() { return packed_; }

    double operator()(int k, int l) const;
    Eigen::MatrixXd full() const;

    // Index of (k,l), k >= l, within the packed vector.
    static int pack_index(int k, int l);

  private:
    int d_ = 0;
    Eigen::VectorXd packed_;
};

// Inverse Fisher link mapping the spline predictor into (-1, 1):
// g(x) = (e^x - 1)/(e^x + 1) = tanh(x/2).
double link_g(double x);
double link_g_prime(double x);
// Throws OutOfDomain for |c| >= 1.
double link_g_inverse(double c);

// Spline predictor eta(s,t) = B(s)' U B(t); symmetric in (s,t) by storage.
double eval_predictor(const CoefficientMatrix& coeffs, const SplineBasis& basis,
                      double s, double t);

// Correlation surface g(eta(s,t)), defined off-diagonal; callers pin C(t,t)=1.
double eval_surface(const CoefficientMatrix& coeffs, const SplineBasis& basis,
                    double s, double t);

// Design row for the packed parameters: eta(s,t) = row . packed.
Eigen::VectorXd predictor_design_row(const SplineBasis& basis, double s, double t);

}  // namespace fsgc
