#include "fsgc/latent.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fsgc {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    if (m == 0) throw GridMismatch("trapezoid_weights: empty grid");
    Eigen::VectorXd w(m);
    if (m == 1) {
        w[0] = 1.0;
        return w;
    }
    w[0] = 0.5 * (grid[1] - grid[0]);
    for (Eigen::Index j = 1; j + 1 < m; ++j) w[j] = 0.5 * (grid[j + 1] - grid[j - 1]);
    w[m - 1] = 0.5 * (grid[m - 1] - grid[m - 2]);
    return w;
}

EigenSystem eigendecompose(const Eigen::MatrixXd& corr, const std::vector<double>& grid,
                           double pve_target, int fixed_K) {
    const Eigen::Index m = corr.rows();
    if (corr.cols() != m || m != static_cast<Eigen::Index>(grid.size())) {
        throw GridMismatch("eigendecompose: matrix/grid size mismatch");
    }
    if (fixed_K <= 0 && !(pve_target > 0.0 && pve_target <= 1.0)) {
        throw OutOfDomain("eigendecompose: pve_target must lie in (0,1]");
    }

    EigenSystem out;
    out.grid = grid;
    out.weights = trapezoid_weights(grid);
    const Eigen::VectorXd ws = out.weights.cwiseSqrt();

    Eigen::MatrixXd a = ws.asDiagonal() * corr * ws.asDiagonal();
    a = Eigen::MatrixXd(0.5 * (a + a.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.eigenvalues().minCoeff() < -1e-6) {
        throw NotPSD("eigendecompose: input matrix has eigenvalue below -1e-6");
    }

    // Descending order, negatives clipped to zero.
    out.eigenvalues.resize(m);
    Eigen::MatrixXd vecs(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.eigenvalues[i] = std::max(es.eigenvalues()[m - 1 - i], 0.0);
        vecs.col(i) = es.eigenvectors().col(m - 1 - i);
    }

    const double total = out.eigenvalues.sum();
    int K = fixed_K > 0 ? std::min<int>(fixed_K, static_cast<int>(m)) : 1;
    if (fixed_K <= 0) {
        double cum = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            cum += out.eigenvalues[i];
            if (total <= 0.0 || cum >= pve_target * total) {
                K = static_cast<int>(i) + 1;
                break;
            }
            K = static_cast<int>(i) + 1;
        }
    }
    out.K = K;
    out.eigenfunctions.resize(m, K);
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd psi = vecs.col(k).cwiseQuotient(ws);
        // Sign convention: positive value at the point of maximum magnitude.
        Eigen::Index at = 0;
        psi.cwiseAbs().maxCoeff(&at);
        if (psi[at] < 0.0) psi = -psi;
        out.eigenfunctions.col(k) = psi;
    }
    return out;
}

namespace {

// Solve C_oo x = rhs with a flagged ridge fallback on near-singular systems.
Eigen::VectorXd conditioned_solve(const Eigen::MatrixXd& c_oo, const Eigen::VectorXd& rhs,
                                  bool* ridged) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c_oo);
    if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd x = ldlt.solve(rhs);
        if ((c_oo * x - rhs).lpNorm<Eigen::Infinity>() <=
            1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
            return x;
        }
    }
    if (ridged) *ridged = true;
    Eigen::MatrixXd h = c_oo;
    h.diagonal().array() += 1e-8;
    return Eigen::LDLT<Eigen::MatrixXd>(h).solve(rhs);
}

}  // namespace

TrajectoryResult latent_trajectory(const Eigen::VectorXd& row, const Eigen::MatrixXd& corr,
                                   const Margins& margins) {
    const Eigen::Index m = row.size();
    if (corr.rows() != m || static_cast<Eigen::Index>(margins.points.size()) != m) {
        throw GridMismatch("latent_trajectory: size mismatch");
    }
    std::vector<Eigen::Index> obs;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (!std::isnan(row[j]) && margins.points[j].usable) obs.push_back(j);
    }
    if (obs.empty()) {
        throw InsufficientData("latent_trajectory: subject has no usable observation");
    }

    Eigen::VectorXd v_obs(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& pt = margins.points[obs[i]];
        v_obs[i] = conditional_latent_mean(row[obs[i]], margins.kind, pt.cutoffs,
                                           &pt.transform);
    }

    TrajectoryResult out;
    out.latent.resize(m);
    if (static_cast<Eigen::Index>(obs.size()) == m) {
        out.latent = v_obs;
        return out;
    }
    Eigen::MatrixXd c_oo(obs.size(), obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        for (std::size_t j = 0; j < obs.size(); ++j) c_oo(i, j) = corr(obs[i], obs[j]);
    }
    const Eigen::VectorXd x = conditioned_solve(c_oo, v_obs, &out.ridged);
    std::vector<bool> is_obs(m, false);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        is_obs[obs[i]] = true;
        out.latent[obs[i]] = v_obs[i];
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        if (is_obs[j]) continue;
        double mean = 0.0;
        for (std::size_t i = 0; i < obs.size(); ++i) mean += corr(j, obs[i]) * x[i];
        out.latent[j] = mean;
    }
    return out;
}

ScoreMatrix latent_scores(const Eigen::MatrixXd& trajectories, const EigenSystem& eig) {
    if (trajectories.cols() != eig.eigenfunctions.rows()) {
        throw GridMismatch("latent_scores: trajectories not on the eigensystem grid");
    }
    ScoreMatrix out;
    out.K = eig.K;
    const Eigen::MatrixXd weighted =
        eig.weights.asDiagonal() * eig.eigenfunctions;  // M x K
    out.scores = trajectories * weighted;               // n x K
    out.score_variance.resize(eig.K);
    const Eigen::Index n = out.scores.rows();
    for (int k = 0; k < eig.K; ++k) {
        if (n < 2) {
            out.score_variance[k] = 0.0;
            continue;
        }
        const double mean = out.scores.col(k).mean();
        out.score_variance[k] =
            (out.scores.col(k).array() - mean).square().sum() / (n - 1);
    }
    return out;
}

double map_latent_to_observed(double v, const VariableKind& kind,
                              const TimePointMargin& margin) {
    if (!margin.usable) {
        if (kind.tag == Kind::truncated && !margin.transform.empty()) {
            return margin.transform.inverse(v);  // no-zero margin: continuous branch
        }
        return static_cast<double>(std::max(margin.fallback_category, 0));
    }
    switch (kind.tag) {
        case Kind::binary:
            return v > margin.cutoffs[0] ? 1.0 : 0.0;
        case Kind::ordinal: {
            const auto it =
                std::upper_bound(margin.cutoffs.begin(), margin.cutoffs.end(), v);
            return static_cast<double>(it - margin.cutoffs.begin());
        }
        case Kind::truncated:
            return v > margin.cutoffs[0] ? margin.transform.inverse(v) : 0.0;
        case Kind::continuous:
            return margin.transform.inverse(v);
    }
    return kNaN;
}

namespace {

// Margin at an arbitrary time: exact grid match when available, otherwise
// cutoffs interpolated between the nearest usable neighbours and the
// transform taken from the nearest usable margin.
TimePointMargin margin_at_time(const Margins& margins, double t) {
    const auto& grid = margins.grid;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (std::fabs(grid[j] - t) < 1e-12) return margins.points[j];
    }
    std::ptrdiff_t lo = -1, hi = -1;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!margins.points[j].usable) continue;
        if (grid[j] <= t) lo = static_cast<std::ptrdiff_t>(j);
        if (grid[j] > t && hi < 0) hi = static_cast<std::ptrdiff_t>(j);
    }
    if (lo < 0 && hi < 0) throw DegenerateMargin("no usable margin near requested time");
    if (lo < 0) return margins.points[hi];
    if (hi < 0) return margins.points[lo];
    TimePointMargin out = margins.points[lo];
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    for (std::size_t c = 0; c < out.cutoffs.size(); ++c) {
        out.cutoffs[c] = (1.0 - w) * margins.points[lo].cutoffs[c] +
                         w * margins.points[hi].cutoffs[c];
    }
    if (w > 0.5) out.transform = margins.points[hi].transform;
    return out;
}

}  // namespace

PredictionResult predict_curve(const Eigen::VectorXd& row, const LatentCorrelationModel& model,
                               const Margins& margins, const std::vector<double>& new_times) {
    for (double t : new_times) {
        if (!(t >= 0.0 && t <= 1.0)) throw OutOfDomain("predict_curve: time outside [0,1]");
    }
    std::vector<double> obs_times;
    std::vector<Eigen::Index> obs_idx;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (!std::isnan(row[j]) && margins.points[j].usable) {
            obs_times.push_back(margins.grid[j]);
            obs_idx.push_back(j);
        }
    }
    if (obs_idx.empty()) throw InsufficientData("predict_curve: no usable observations");

    // Union grid of observed and requested times.
    std::vector<double> union_grid = obs_times;
    union_grid.insert(union_grid.end(), new_times.begin(), new_times.end());
    std::sort(union_grid.begin(), union_grid.end());
    union_grid.erase(std::unique(union_grid.begin(), union_grid.end(),
                                 [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
                     union_grid.end());
    auto find_in_union = [&](double t) {
        for (std::size_t i = 0; i < union_grid.size(); ++i) {
            if (std::fabs(union_grid[i] - t) < 1e-12) return static_cast<Eigen::Index>(i);
        }
        throw GridMismatch("predict_curve: time missing from union grid");
    };

    const CorrelationResult cres = reconstruct_correlation(model, union_grid);
    std::vector<Eigen::Index> o_pos, n_pos;
    for (double t : obs_times) o_pos.push_back(find_in_union(t));
    for (double t : new_times) n_pos.push_back(find_in_union(t));

    Eigen::MatrixXd c_oo(o_pos.size(), o_pos.size());
    for (std::size_t i = 0; i < o_pos.size(); ++i) {
        for (std::size_t j = 0; j < o_pos.size(); ++j) {
            c_oo(i, j) = cres.corr(o_pos[i], o_pos[j]);
        }
    }
    Eigen::MatrixXd c_no(n_pos.size(), o_pos.size());
    for (std::size_t i = 0; i < n_pos.size(); ++i) {
        for (std::size_t j = 0; j < o_pos.size(); ++j) {
            c_no(i, j) = cres.corr(n_pos[i], o_pos[j]);
        }
    }
    Eigen::MatrixXd c_nn(n_pos.size(), n_pos.size());
    for (std::size_t i = 0; i < n_pos.size(); ++i) {
        for (std::size_t j = 0; j < n_pos.size(); ++j) {
            c_nn(i, j) = cres.corr(n_pos[i], n_pos[j]);
        }
    }

    Eigen::VectorXd v_obs(obs_idx.size());
    for (std::size_t i = 0; i < obs_idx.size(); ++i) {
        const auto& pt = margins.points[obs_idx[i]];
        v_obs[i] = conditional_latent_mean(row[obs_idx[i]], margins.kind, pt.cutoffs,
                                           &pt.transform);
    }

    PredictionResult out;
    out.times = new_times;
    const Eigen::VectorXd x = conditioned_solve(c_oo, v_obs, &out.ridged);
    out.latent_mean = c_no * x;
    Eigen::MatrixXd solved(o_pos.size(), n_pos.size());
    {
        bool dummy = false;
        for (std::size_t j = 0; j < n_pos.size(); ++j) {
            solved.col(j) = conditioned_solve(c_oo, c_no.row(j).transpose(), &dummy);
        }
    }
    out.conditional_cov = c_nn - c_no * solved;
    out.conditional_cov =
        Eigen::MatrixXd(0.5 * (out.conditional_cov + out.conditional_cov.transpose()));

    out.observed_scale.resize(new_times.size());
    for (std::size_t i = 0; i < new_times.size(); ++i) {
        const TimePointMargin margin = margin_at_time(margins, new_times[i]);
        out.observed_scale[i] =
            map_latent_to_observed(out.latent_mean[i], margins.kind, margin);
    }
    return out;
}

double latent_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionMismatch("latent_distance: unequal score length");
    return (a - b).norm();
}

}  // namespace fsgc
