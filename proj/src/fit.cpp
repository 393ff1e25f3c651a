#include "fsgc/fit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace fsgc {

PairBridge::PairBridge(const BridgeContext& ctx, int table_points) : ctx_(ctx) {
    ctx_.validate();
    if (ctx_.kind.tag == Kind::truncated && table_points > 0) {
        table_ = std::make_shared<const BridgeTable>(ctx_, table_points);
    }
}

double PairBridge::value(double r) const {
    return table_ ? table_->value(r) : bridge_forward(r, ctx_);
}

double PairBridge::derivative(double r) const {
    return table_ ? table_->derivative(r) : bridge_forward_derivative(r, ctx_);
}

BridgeInverse PairBridge::inverse(double tau) const {
    return table_ ? table_->inverse(tau) : bridge_inverse(tau, ctx_);
}

PairTerms build_pair_terms(const TauMatrix& tau, const CutoffSet& cutoffs,
                           const SplineBasis& basis, const FitConfig& cfg) {
    const Eigen::Index m = tau.size();
    if (cutoffs.grid.size() != tau.grid.size()) {
        throw GridMismatch("tau matrix and cutoff grid differ");
    }
    PairTerms terms;
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = j + 1; k < m; ++k) {
            if (!tau.supported(j, k)) continue;
            if (!cutoffs.usable[j] || !cutoffs.usable[k]) continue;
            if (!std::isfinite(tau.tau(j, k))) {
                throw NumericalFailure("non-finite tau entry in supported pair");
            }
            terms.j.push_back(static_cast<int>(j));
            terms.k.push_back(static_cast<int>(k));
            terms.tau.push_back(tau.tau(j, k));
        }
    }
    const std::size_t n_terms = terms.tau.size();
    terms.design.resize(n_terms, basis.dimension() * (basis.dimension() + 1) / 2);
    // Basis rows are shared across pairs at the same grid point.
    std::vector<Eigen::VectorXd> brows(m);
    for (Eigen::Index j = 0; j < m; ++j) brows[j] = basis.eval(tau.grid[j]);
    for (std::size_t p = 0; p < n_terms; ++p) {
        const Eigen::VectorXd& bj = brows[terms.j[p]];
        const Eigen::VectorXd& bk = brows[terms.k[p]];
        Eigen::VectorXd row(terms.design.cols());
        for (int a = 0; a < basis.dimension(); ++a) {
            for (int b = 0; b <= a; ++b) {
                row[CoefficientMatrix::pack_index(a, b)] =
                    a == b ? bj[a] * bk[a] : bj[a] * bk[b] + bj[b] * bk[a];
            }
        }
        terms.design.row(p) = row;
    }
    terms.bridges.reserve(n_terms);
    for (std::size_t p = 0; p < n_terms; ++p) {
        BridgeContext ctx{cutoffs.kind, cutoffs.cutoffs[terms.j[p]],
                          cutoffs.cutoffs[terms.k[p]]};
        terms.bridges.emplace_back(ctx, cfg.bridge_table_points);
    }
    return terms;
}

CoefficientMatrix initialize_coefficients(const PairTerms& terms, const SplineBasis& basis,
                                          bool* fallback) {
    if (fallback) *fallback = false;
    const Eigen::Index p = terms.design.cols();
    Eigen::VectorXd z(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double r = terms.bridges[i].inverse(terms.tau[i]).r;
        z[i] = link_g_inverse(std::clamp(r, -kBridgeRMax, kBridgeRMax));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(terms.design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        if (fallback) *fallback = true;
        return CoefficientMatrix(basis.dimension());
    }
    return CoefficientMatrix::from_packed(basis.dimension(), qr.solve(z));
}

double pair_objective(const PairTerms& terms, const Eigen::VectorXd& theta,
                      Eigen::VectorXd* residual, Eigen::VectorXd* weight) {
    const Eigen::VectorXd eta = terms.design * theta;
    double sse = 0.0;
    for (std::size_t p = 0; p < terms.size(); ++p) {
        // The link saturates to +-1 in doubles for |eta| beyond ~19; keep the
        // bridge argument inside its working range so F and F' stay finite.
        const double c = std::clamp(link_g(eta[p]), -kBridgeRMax, kBridgeRMax);
        const double res = terms.tau[p] - terms.bridges[p].value(c);
        sse += res * res;
        if (residual) (*residual)[p] = res;
        if (weight) {
            (*weight)[p] = terms.bridges[p].derivative(c) * link_g_prime(eta[p]);
        }
    }
    return sse;
}

LatentCorrelationModel fit_latent_correlation(const TauMatrix& tau, const CutoffSet& cutoffs,
                                              const FitConfig& cfg) {
    return fit_latent_correlation(tau, cutoffs, cfg, nullptr);
}

LatentCorrelationModel fit_latent_correlation(const TauMatrix& tau, const CutoffSet& cutoffs,
                                              const FitConfig& cfg,
                                              const PairTerms* prebuilt) {
    LatentCorrelationModel model{SplineBasis(cfg.basis_dim), CoefficientMatrix(cfg.basis_dim),
                                 cutoffs, cutoffs.kind, cfg, {}};
    PairTerms terms = prebuilt ? *prebuilt : build_pair_terms(tau, cutoffs, model.basis, cfg);
    const Eigen::Index p = terms.design.cols();
    if (static_cast<Eigen::Index>(terms.size()) < p) {
        throw NotEnoughPairs("fit_latent_correlation: " + std::to_string(terms.size()) +
                             " supported pairs for " + std::to_string(p) + " parameters");
    }
    model.diagnostics.pairs_used = terms.size();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    if (cfg.init == FitConfig::Init::inverse_bridge) {
        bool fb = false;
        Eigen::VectorXd init = initialize_coefficients(terms, model.basis, &fb).packed();
        // Clamped inversions (tau outside the attainable range) can poison the
        // linear step with saturated link values; keep the zero start then.
        if (!fb && pair_objective(terms, init, nullptr, nullptr) >
                       pair_objective(terms, theta, nullptr, nullptr)) {
            fb = true;
        } else if (!fb) {
            theta = std::move(init);
        }
        model.diagnostics.init_fallback = fb;
    }

    const std::size_t n_terms = terms.size();
    Eigen::VectorXd residual(n_terms), weight(n_terms);
    double sse = pair_objective(terms, theta, &residual, &weight);
    model.diagnostics.objective_trace.push_back(sse);

    bool converged = false;
    int iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        // grad(SSE) = -2 * design' (w .* residual)
        const Eigen::VectorXd wr = weight.cwiseProduct(residual);
        const Eigen::VectorXd half_grad = terms.design.transpose() * wr;  // = -grad/2
        const double grad_norm =
            2.0 * half_grad.lpNorm<Eigen::Infinity>() / std::max(1.0, sse);
        model.diagnostics.gradient_norm = grad_norm;
        if (grad_norm < cfg.gradient_tol) {
            converged = true;
            break;
        }
        const Eigen::VectorXd w2 = weight.cwiseProduct(weight);
        const Eigen::MatrixXd normal_eq =
            terms.design.transpose() * w2.asDiagonal() * terms.design;

        // Gauss-Newton step; Levenberg damping escalation on singular systems.
        Eigen::VectorXd step;
        bool have_step = false;
        double lambda = 0.0;
        const double scale = std::max(normal_eq.diagonal().maxCoeff(), 1e-300);
        for (int esc = 0; esc <= 8; ++esc) {
            Eigen::MatrixXd h = normal_eq;
            if (lambda > 0.0) h.diagonal().array() += lambda;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(half_grad);
                const double resid_norm = (h * step - half_grad).norm();
                if (std::isfinite(step.sum()) &&
                    resid_norm <= 1e-8 * std::max(1.0, half_grad.norm())) {
                    have_step = true;
                    break;
                }
            }
            model.diagnostics.levenberg_used = true;
            lambda = lambda == 0.0 ? 1e-8 * scale : lambda * 10.0;
        }
        if (!have_step) {
            model.diagnostics.non_convergence = true;
            break;
        }

        // Step-halving line search; require strict decrease.
        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd theta_new;
        double sse_new = sse;
        for (int h = 0; h <= cfg.max_step_halvings; ++h) {
            theta_new = theta + alpha * step;
            sse_new = pair_objective(terms, theta_new, nullptr, nullptr);
            if (sse_new < sse) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // No descent along the Gauss-Newton direction: treat as converged
            // if the gradient is already tiny relative to the objective.
            converged = grad_norm < std::sqrt(cfg.gradient_tol);
            model.diagnostics.non_convergence = !converged;
            break;
        }
        const double decrease = (sse - sse_new) / std::max(1.0, sse);
        theta = theta_new;
        sse = pair_objective(terms, theta, &residual, &weight);
        model.diagnostics.objective_trace.push_back(sse);
        if (decrease < cfg.objective_decrease_tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (iter == cfg.max_iterations && !converged) model.diagnostics.non_convergence = true;

    model.coeffs = CoefficientMatrix::from_packed(cfg.basis_dim, theta);
    model.diagnostics.objective = sse;
    model.diagnostics.iterations = iter;
    model.diagnostics.converged = converged;
    return model;
}

double evaluate_objective(const LatentCorrelationModel& model, const TauMatrix& tau) {
    PairTerms terms = build_pair_terms(tau, model.cutoffs, model.basis, model.config);
    return pair_objective(terms, model.coeffs.packed(), nullptr, nullptr);
}

Eigen::MatrixXd nearest_correlation(Eigen::MatrixXd m, double* distance, int* iterations) {
    const Eigen::MatrixXd original = m;
    constexpr double kEigClip = 1e-8;
    constexpr double kDiagTol = 1e-10;
    int iter = 0;
    for (; iter < 100; ++iter) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        const double min_eig = es.eigenvalues().minCoeff();
        const double diag_err = (m.diagonal().array() - 1.0).abs().maxCoeff();
        if (min_eig >= -kEigClip && diag_err <= kDiagTol) break;
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(kEigClip);
        m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        const Eigen::VectorXd scale = m.diagonal().cwiseSqrt().cwiseInverse();
        m = scale.asDiagonal() * m * scale.asDiagonal();
        m = Eigen::MatrixXd(0.5 * (m + m.transpose()));
        m.diagonal().setOnes();
    }
    if (distance) *distance = (m - original).norm();
    if (iterations) *iterations = iter;
    return m;
}

CorrelationResult reconstruct_correlation(const LatentCorrelationModel& model,
                                          const std::vector<double>& grid) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd corr(m, m);
    std::vector<Eigen::VectorXd> brows(m);
    for (Eigen::Index j = 0; j < m; ++j) brows[j] = model.basis.eval(grid[j]);
    const Eigen::MatrixXd u = model.coeffs.full();
    for (Eigen::Index j = 0; j < m; ++j) {
        corr(j, j) = 1.0;
        for (Eigen::Index k = j + 1; k < m; ++k) {
            const double eta = brows[j].dot(u * brows[k]);
            corr(j, k) = corr(k, j) = link_g(eta);
        }
    }
    CorrelationResult out;
    out.corr = nearest_correlation(std::move(corr), &out.projection_distance,
                                   &out.projection_iterations);
    return out;
}

}  // namespace fsgc
