#include "fsgc/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace fsgc {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ObservationSet ObservationSet::from_records(const std::vector<ObservationRecord>& records,
                                            const VariableKind& kind) {
    std::vector<double> times;
    std::map<std::string, std::size_t> subject_index;
    for (const auto& r : records) {
        if (!(r.time >= 0.0 && r.time <= 1.0)) {
            throw OutOfDomain("observation time outside [0,1]");
        }
        kind.validate_value(r.value);
        times.push_back(r.time);
        subject_index.emplace(r.subject, 0);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    ObservationSet out;
    out.kind = kind;
    out.grid = times;
    out.subject_ids.reserve(subject_index.size());
    std::size_t idx = 0;
    for (auto& [id, pos] : subject_index) {
        pos = idx++;
        out.subject_ids.push_back(id);
    }
    out.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(idx),
                                           static_cast<Eigen::Index>(times.size()), kNaN);
    for (const auto& r : records) {
        const auto it = std::lower_bound(times.begin(), times.end(), r.time);
        const Eigen::Index j = it - times.begin();
        const Eigen::Index i = static_cast<Eigen::Index>(subject_index[r.subject]);
        if (!std::isnan(out.values(i, j))) {
            throw Error("duplicate observation for subject " + r.subject + " at t=" +
                        std::to_string(r.time));
        }
        out.values(i, j) = r.value;
    }
    return out;
}

ObservationSet ObservationSet::from_matrix(Eigen::MatrixXd values, std::vector<double> grid,
                                           const VariableKind& kind) {
    if (values.cols() != static_cast<Eigen::Index>(grid.size())) {
        throw GridMismatch("ObservationSet: matrix columns must match grid");
    }
    for (std::size_t j = 1; j < grid.size(); ++j) {
        if (!(grid[j] > grid[j - 1])) throw Error("ObservationSet: grid must be increasing");
    }
    ObservationSet out;
    out.kind = kind;
    out.grid = std::move(grid);
    out.values = std::move(values);
    out.subject_ids.reserve(out.values.rows());
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        out.subject_ids.push_back("s" + std::to_string(i));
    }
    return out;
}

bool ObservationSet::complete() const { return !values.hasNaN(); }

std::vector<ObservationRecord> ObservationSet::to_records() const {
    std::vector<ObservationRecord> recs;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (!std::isnan(values(i, j))) {
                recs.push_back({subject_ids[i], grid[j], values(i, j)});
            }
        }
    }
    return recs;
}

std::vector<double> ObservationSet::column_sample(Eigen::Index j) const {
    std::vector<double> out;
    out.reserve(values.rows());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if (!std::isnan(values(i, j))) out.push_back(values(i, j));
    }
    return out;
}

namespace {

// Strict inversion count (y_i > y_j for i < j) by bottom-up merge sort.
std::int64_t count_inversions(std::vector<double>& y, std::vector<double>& buf) {
    const std::size_t n = y.size();
    std::int64_t inversions = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t a = lo, b = mid, k = lo;
            while (a < mid && b < hi) {
                if (y[b] < y[a]) {
                    inversions += static_cast<std::int64_t>(mid - a);
                    buf[k++] = y[b++];
                } else {
                    buf[k++] = y[a++];
                }
            }
            while (a < mid) buf[k++] = y[a++];
            while (b < hi) buf[k++] = y[b++];
            std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
        }
    }
    return inversions;
}

std::int64_t tie_pairs(const std::vector<double>& sorted) {
    std::int64_t t = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const std::int64_t g = static_cast<std::int64_t>(j - i + 1);
        t += g * (g - 1) / 2;
        i = j + 1;
    }
    return t;
}

}  // namespace

double kendall_tau_pair(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw DimensionMismatch("kendall_tau_pair: length mismatch");
    if (n < 2) throw InsufficientData("kendall_tau_pair: need at least 2 observations");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    const std::int64_t n0 = static_cast<std::int64_t>(n) * (n - 1) / 2;
    // Ties in x and joint ties, scanned along the (x, y)-sorted order.
    std::int64_t n1 = 0, n3 = 0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            const std::int64_t g = static_cast<std::int64_t>(j - i + 1);
            n1 += g * (g - 1) / 2;
            std::size_t a = i;
            while (a <= j) {
                std::size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                const std::int64_t h = static_cast<std::int64_t>(b - a + 1);
                n3 += h * (h - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    const std::int64_t swaps = count_inversions(ys, buf);
    // ys is now sorted; reuse it for the y-tie count.
    const std::int64_t n2 = tie_pairs(ys);

    // Knight (1966): concordant - discordant = n0 - n1 - n2 + n3 - 2*swaps.
    const std::int64_t cmd = n0 - n1 - n2 + n3 - 2 * swaps;
    return static_cast<double>(cmd) / static_cast<double>(n0);
}

TauMatrix kendall_dense(const Eigen::MatrixXd& values, const std::vector<double>& grid) {
    const Eigen::Index n = values.rows();
    const Eigen::Index m = values.cols();
    if (n < 2) throw InsufficientData("kendall_dense: need at least 2 subjects");
    if (m != static_cast<Eigen::Index>(grid.size())) {
        throw GridMismatch("kendall_dense: grid size mismatch");
    }
    if (values.hasNaN()) throw Error("kendall_dense: missing entries not allowed");

    TauMatrix out;
    out.grid = grid;
    out.tau = Eigen::MatrixXd::Identity(m, m);
    out.support.setConstant(m, m, n * (n - 1) / 2);
    out.supported.setConstant(m, m, true);
    for (Eigen::Index j = 0; j < m; ++j) out.supported(j, j) = false;

    std::vector<std::vector<double>> cols(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        cols[j].assign(values.col(j).data(), values.col(j).data() + n);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = j + 1; k < m; ++k) {
            const double t = kendall_tau_pair(cols[j], cols[k]);
            out.tau(j, k) = out.tau(k, j) = t;
        }
    }
    return out;
}

TauMatrix kendall_sparse(const ObservationSet& data, std::int64_t c0) {
    if (c0 < 2) throw Error("kendall_sparse: c0 must be >= 2");
    const Eigen::Index n = data.n_subjects();
    const Eigen::Index m = data.grid_size();
    if (n < 2) throw InsufficientData("kendall_sparse: need at least 2 subjects");

    TauMatrix out;
    out.grid = data.grid;
    out.tau = Eigen::MatrixXd::Identity(m, m);
    out.support.setZero(m, m);
    out.supported.setConstant(m, m, false);

    std::vector<std::vector<Eigen::Index>> observed(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!std::isnan(data.values(i, j))) observed[j].push_back(i);
        }
    }

    bool any = false;
    std::vector<double> xs, ys;
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = j + 1; k < m; ++k) {
            xs.clear();
            ys.clear();
            // Intersect the (sorted) subject lists of the two time points.
            std::size_t a = 0, b = 0;
            while (a < observed[j].size() && b < observed[k].size()) {
                if (observed[j][a] < observed[k][b]) {
                    ++a;
                } else if (observed[j][a] > observed[k][b]) {
                    ++b;
                } else {
                    const Eigen::Index i = observed[j][a];
                    xs.push_back(data.values(i, j));
                    ys.push_back(data.values(i, k));
                    ++a;
                    ++b;
                }
            }
            const std::int64_t c = static_cast<std::int64_t>(xs.size());
            const std::int64_t pairs = c * (c - 1) / 2;
            out.support(j, k) = out.support(k, j) = pairs;
            if (c >= 2) {
                const double t = kendall_tau_pair(xs, ys);
                out.tau(j, k) = out.tau(k, j) = t;
            }
            if (pairs > c0) {
                out.supported(j, k) = out.supported(k, j) = true;
                any = true;
            }
        }
    }
    if (!any) throw EmptySupport("kendall_sparse: no pair exceeds the support threshold");
    return out;
}

}  // namespace fsgc
