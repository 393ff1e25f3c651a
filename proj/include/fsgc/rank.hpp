#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fsgc/types.hpp"

namespace fsgc {

struct ObservationRecord {
    std::string subject;
    double time = 0.0;
    double value = 0.0;
};

// Long-format mixed-type functional observations. Internally a subjects x grid
// value matrix with NaN marking unobserved cells; the grid is the sorted union
// of observed time points.
struct ObservationSet {
    VariableKind kind;
    std::vector<double> grid;              // sorted, in [0,1]
    std::vector<std::string> subject_ids;  // row labels
    Eigen::MatrixXd values;                // n x M, NaN = unobserved

    static ObservationSet from_records(const std::vector<ObservationRecord>& records,
                                       const VariableKind& kind);
    static ObservationSet from_matrix(Eigen::MatrixXd values, std::vector<double> grid,
                                      const VariableKind& kind);

    Eigen::Index n_subjects() const { return values.rows(); }
    Eigen::Index grid_size() const { return values.cols(); }
    bool complete() const;
    std::vector<ObservationRecord> to_records() const;
    // Observed values at grid column j (skipping NaN).
    std::vector<double> column_sample(Eigen::Index j) const;
};

// Pairwise sample Kendall's tau over the grid with pair-support counts.
// support(j,j') counts subject pairs jointly observed at both time points;
// pairs failing the support threshold are masked out of `supported`.
struct TauMatrix {
    std::vector<double> grid;
    Eigen::MatrixXd tau;
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> support;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> supported;

    Eigen::Index size() const { return tau.rows(); }
};

// Sign-statistic Kendall tau of two columns: ties contribute zero, no tie
// correction. Knight's O(n log n) merge-sort inversion count.
double kendall_tau_pair(const std::vector<double>& x, const std::vector<double>& y);

// Dense design: every subject observed at every grid point.
// Throws InsufficientData for n < 2.
TauMatrix kendall_dense(const Eigen::MatrixXd& values, const std::vector<double>& grid);

// Sparse design: tau over pairwise-complete subjects; pairs with support
// <= c0 are masked unsupported. Throws EmptySupport when nothing survives.
TauMatrix kendall_sparse(const ObservationSet& data, std::int64_t c0);

}  // namespace fsgc
