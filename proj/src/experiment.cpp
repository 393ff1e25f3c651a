#include "fsgc/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace fsgc {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

double ise(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
           const std::vector<double>& grid) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    if (truth.rows() != m || truth.cols() != m || estimate.rows() != m ||
        estimate.cols() != m) {
        throw GridMismatch("ise: matrices must match the grid");
    }
    const Eigen::VectorXd w = trapezoid_weights(grid);
    const Eigen::MatrixXd diff2 = (truth - estimate).array().square();
    return w.dot(diff2 * w);
}

BaselineResult naive_fpca_baseline(const ObservationSet& data, double pve_target) {
    const Eigen::Index n = data.n_subjects();
    const Eigen::Index m = data.grid_size();
    if (n < 2) throw InsufficientData("naive_fpca_baseline: need at least 2 subjects");
    if (!data.complete()) throw InsufficientData("naive_fpca_baseline: requires dense data");

    const Eigen::RowVectorXd mean = data.values.colwise().mean();
    Eigen::MatrixXd centered = data.values.rowwise() - mean;
    Eigen::VectorXd sd(m);
    BaselineResult out;
    for (Eigen::Index j = 0; j < m; ++j) {
        sd[j] = std::sqrt(centered.col(j).squaredNorm() / (n - 1));
        if (sd[j] == 0.0) ++out.zero_variance_columns;
    }
    if (out.zero_variance_columns == m) {
        throw InsufficientData("naive_fpca_baseline: all columns are constant");
    }
    out.corr = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (sd[j] == 0.0) continue;
        for (Eigen::Index k = j + 1; k < m; ++k) {
            if (sd[k] == 0.0) continue;
            const double cov = centered.col(j).dot(centered.col(k)) / (n - 1);
            out.corr(j, k) = out.corr(k, j) = cov / (sd[j] * sd[k]);
        }
    }
    out.eig = eigendecompose(out.corr, data.grid, pve_target);
    return out;
}

double accuracy(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted,
                const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& observed) {
    const Eigen::Index n = truth.rows();
    const Eigen::Index m = truth.cols();
    if (predicted.rows() != n || predicted.cols() != m || observed.rows() != n ||
        observed.cols() != m) {
        throw DimensionMismatch("accuracy: shape mismatch");
    }
    double total = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index held = 0, hit = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (observed(i, j)) continue;
            ++held;
            if (truth(i, j) == predicted(i, j)) ++hit;
        }
        if (held == 0) continue;
        total += static_cast<double>(hit) / held;
        ++used;
    }
    if (used == 0) throw NoHeldOutPoints("accuracy: every grid point is observed");
    return total / used;
}

int RunConfig::effective_basis_dim() const {
    if (basis_dim > 0) return basis_dim;
    return sparse_fraction < 1.0 ? 5 : 7;
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "scenario") {
        if (value.size() != 1) throw Error("scenario must be A, B, C or D");
        scenario = value[0];
    } else if (key == "kernel") {
        if (value == "matern") {
            kernel.type = KernelSpec::Type::matern;
        } else if (value == "nonstationary") {
            kernel = KernelSpec::nonstationary();
        } else {
            throw Error("kernel must be matern or nonstationary");
        }
    } else if (key == "sigma2") {
        kernel.sigma2 = std::stod(value);
    } else if (key == "nu") {
        kernel.nu = std::stod(value);
    } else if (key == "range") {
        kernel.range = std::stod(value);
    } else if (key == "n") {
        n = std::stoi(value);
    } else if (key == "m") {
        m = std::stoi(value);
    } else if (key == "sparse_fraction") {
        sparse_fraction = std::stod(value);
    } else if (key == "replications") {
        replications = std::stoi(value);
    } else if (key == "seed") {
        seed = std::stoull(value);
        seed_set = true;
    } else if (key == "basis_dim") {
        basis_dim = std::stoi(value);
    } else if (key == "c0") {
        c0 = std::stoll(value);
    } else if (key == "pve") {
        pve = std::stod(value);
    } else if (key == "score_components") {
        score_components = std::stoi(value);
    } else if (key == "max_iterations") {
        max_iterations = std::stoi(value);
    } else if (key == "bridge_table_points") {
        bridge_table_points = std::stoi(value);
    } else if (key == "threads") {
        threads = std::stoi(value);
    } else if (key == "out_dir") {
        out_dir = value;
    } else {
        throw Error("unknown config key: " + key);
    }
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) continue;
        cfg.apply_override(key, value);
    }
    return cfg;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> m_;
    m_["scenario"] = std::string(1, scenario);
    m_["kernel"] = kernel.name();
    m_["sigma2"] = format_double(kernel.sigma2);
    m_["nu"] = format_double(kernel.nu);
    m_["range"] = format_double(kernel.range);
    m_["n"] = std::to_string(n);
    m_["m"] = std::to_string(m);
    m_["sparse_fraction"] = format_double(sparse_fraction);
    m_["replications"] = std::to_string(replications);
    m_["seed"] = std::to_string(seed);
    m_["basis_dim"] = std::to_string(effective_basis_dim());
    m_["c0"] = std::to_string(c0);
    m_["pve"] = format_double(pve);
    m_["score_components"] = std::to_string(score_components);
    m_["max_iterations"] = std::to_string(max_iterations);
    m_["bridge_table_points"] = std::to_string(bridge_table_points);
    return m_;
}

namespace {

// Subjects whose observations all fall on degenerate margins cannot be
// conditioned on; their latent trajectory is the prior mean (zero).
Eigen::VectorXd subject_trajectory_or_prior(const Eigen::VectorXd& row,
                                            const Eigen::MatrixXd& corr,
                                            const Margins& margins) {
    try {
        return latent_trajectory(row, corr, margins).latent;
    } catch (const InsufficientData&) {
        return Eigen::VectorXd::Zero(row.size());
    }
}

double abs_pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double ma = a.mean(), mb = b.mean();
    const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
    const double denom = std::sqrt(da.square().sum() * db.square().sum());
    if (denom == 0.0) return kNaN;
    return std::fabs((da * db).sum() / denom);
}

// Unsmoothed comparator: elementwise inverse-bridged correlation, projected
// to the nearest correlation matrix.
Eigen::MatrixXd pointwise_latent_correlation(const TauMatrix& tau, const PairTerms& terms,
                                             Eigen::Index m) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m, m);
    for (std::size_t p = 0; p < terms.size(); ++p) {
        const double value = terms.bridges[p].inverse(tau.tau(terms.j[p], terms.k[p])).r;
        r(terms.j[p], terms.k[p]) = r(terms.k[p], terms.j[p]) = value;
    }
    return nearest_correlation(std::move(r), nullptr, nullptr);
}

}  // namespace

ReplicationRecord run_replication(const RunConfig& cfg, int rep_index) {
    ReplicationRecord rec;
    rec.rep = rep_index;
    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep_index));
    rec.ise_fsgc = rec.ise_latent = rec.ise_naive = kNaN;
    rec.acc = rec.score_corr1 = rec.score_corr2 = kNaN;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::vector<double> grid = uniform_grid(cfg.m);
        ScenarioSpec spec{cfg.scenario, cfg.n, cfg.m, cfg.sparse_fraction, rec.seed};
        const Eigen::MatrixXd latent = sample_latent(cfg.kernel, grid, cfg.n, rec.seed);
        const ObservationSet obs = apply_scenario(latent, spec, grid);

        std::vector<std::vector<double>> samples(grid.size());
        for (Eigen::Index j = 0; j < obs.grid_size(); ++j) samples[j] = obs.column_sample(j);
        const Margins margins = estimate_margins(samples, grid, obs.kind);
        for (const auto& pt : margins.points) rec.unusable_margins += pt.usable ? 0 : 1;
        const CutoffSet cutoffs = margins.cutoff_set();

        const TauMatrix tau = spec.sparse() ? kendall_sparse(obs, cfg.c0)
                                            : kendall_dense(obs.values, grid);

        FitConfig fit_cfg;
        fit_cfg.basis_dim = cfg.effective_basis_dim();
        fit_cfg.c0 = cfg.c0;
        fit_cfg.max_iterations = cfg.max_iterations;
        fit_cfg.bridge_table_points = cfg.bridge_table_points;
        const SplineBasis basis(fit_cfg.basis_dim);
        PairTerms terms = build_pair_terms(tau, cutoffs, basis, fit_cfg);
        const LatentCorrelationModel model =
            fit_latent_correlation(tau, cutoffs, fit_cfg, &terms);
        rec.objective = model.diagnostics.objective;
        rec.iterations = model.diagnostics.iterations;
        rec.converged = model.diagnostics.converged;

        const Eigen::MatrixXd truth = kernel_matrix(cfg.kernel, grid);
        const CorrelationResult recon = reconstruct_correlation(model, grid);
        rec.ise_fsgc = ise(truth, recon.corr, grid);
        rec.ise_latent =
            ise(truth, pointwise_latent_correlation(tau, terms, obs.grid_size()), grid);

        if (!spec.sparse()) {
            try {
                const BaselineResult base = naive_fpca_baseline(obs, cfg.pve);
                rec.ise_naive = ise(truth, base.corr, grid);
            } catch (const InsufficientData&) {
                rec.ise_naive = kNaN;
            }
            // Score fidelity against FPCA scores of the true latent curves.
            Eigen::MatrixXd traj(cfg.n, cfg.m);
            for (int i = 0; i < cfg.n; ++i) {
                traj.row(i) = subject_trajectory_or_prior(obs.values.row(i), recon.corr,
                                                          margins);
            }
            const EigenSystem eig =
                eigendecompose(recon.corr, grid, cfg.pve, cfg.score_components);
            const ScoreMatrix est = latent_scores(traj, eig);

            const Eigen::RowVectorXd vmean = latent.colwise().mean();
            const Eigen::MatrixXd vc = latent.rowwise() - vmean;
            Eigen::MatrixXd vcov = vc.transpose() * vc / (cfg.n - 1);
            const EigenSystem true_eig =
                eigendecompose(vcov, grid, cfg.pve, cfg.score_components);
            const ScoreMatrix true_scores = latent_scores(vc, true_eig);

            if (est.K >= 1 && true_scores.K >= 1) {
                rec.score_corr1 = abs_pearson(est.scores.col(0), true_scores.scores.col(0));
            }
            if (est.K >= 2 && true_scores.K >= 2) {
                rec.score_corr2 = abs_pearson(est.scores.col(1), true_scores.scores.col(1));
            }
        } else {
            // Curve prediction at unobserved grid points, observed scale.
            ScenarioSpec dense_spec = spec;
            dense_spec.sparse_fraction = 1.0;
            const ObservationSet full = apply_scenario(latent, dense_spec, grid);
            Eigen::MatrixXd predicted(cfg.n, cfg.m);
            Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(cfg.n, cfg.m);
            for (int i = 0; i < cfg.n; ++i) {
                const Eigen::VectorXd vi =
                    subject_trajectory_or_prior(obs.values.row(i), recon.corr, margins);
                for (int j = 0; j < cfg.m; ++j) {
                    mask(i, j) = !std::isnan(obs.values(i, j));
                    predicted(i, j) =
                        map_latent_to_observed(vi[j], obs.kind, margins.points[j]);
                }
            }
            if (obs.kind.is_discrete()) {
                rec.acc = accuracy(full.values, predicted, mask);
            }
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        std::string msg = e.what();
        for (char& c : msg) {
            if (c == ',' || c == '\n') c = ';';
        }
        rec.error = msg;
    }
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return rec;
}

std::map<std::string, Aggregate> aggregate_records(const std::vector<ReplicationRecord>& recs) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : recs) {
        if (!r.ok) continue;
        auto push = [&](const std::string& key, double v) {
            if (!std::isnan(v)) values[key].push_back(v);
        };
        push("ise_fsgc", r.ise_fsgc);
        push("ise_latent", r.ise_latent);
        push("ise_naive", r.ise_naive);
        push("acc", r.acc);
        push("score_corr1", r.score_corr1);
        push("score_corr2", r.score_corr2);
        push("objective", r.objective);
        push("iterations", static_cast<double>(r.iterations));
        push("converged", r.converged ? 1.0 : 0.0);
        push("unusable_margins", static_cast<double>(r.unusable_margins));
        push("elapsed_ms", r.elapsed_ms);
    }
    std::map<std::string, Aggregate> out;
    for (const auto& [key, vec] : values) {
        Aggregate a;
        a.count = static_cast<int>(vec.size());
        double sum = 0.0;
        for (double v : vec) sum += v;
        a.mean = sum / a.count;
        if (a.count > 1) {
            double ss = 0.0;
            for (double v : vec) ss += (v - a.mean) * (v - a.mean);
            a.sd = std::sqrt(ss / (a.count - 1));
        }
        out[key] = a;
    }
    return out;
}

bool EvaluationReport::all_ok() const {
    for (const auto& r : replications) {
        if (!r.ok) return false;
    }
    return !replications.empty();
}

EvaluationReport run_experiment(const RunConfig& cfg) {
    if (!cfg.seed_set) throw Error("run_experiment: seed is mandatory");
    if (cfg.replications < 1) throw Error("run_experiment: need at least one replication");
    EvaluationReport report;
    report.config = cfg;
    report.replications.resize(cfg.replications);

    const auto t0 = std::chrono::steady_clock::now();
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    int n_threads = cfg.threads > 0 ? cfg.threads : std::max(1, hw);
    n_threads = std::min(n_threads, cfg.replications);

    std::atomic<int> next{0};
    auto worker = [&]() {
        int i;
        while ((i = next.fetch_add(1)) < cfg.replications) {
            report.replications[i] = run_replication(cfg, i);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    report.aggregates = aggregate_records(report.replications);
    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {
const char* kCsvHeader =
    "rep,seed,ok,error,ise_fsgc,ise_latent,ise_naive,acc,score_corr1,score_corr2,"
    "objective,iterations,converged,unusable_margins,elapsed_ms";
}

void write_report(const EvaluationReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream csv(dir + "/replications.csv");
        csv << kCsvHeader << "\n";
        for (const auto& r : report.replications) {
            csv << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << r.error << ','
                << format_double(r.ise_fsgc) << ',' << format_double(r.ise_latent) << ','
                << format_double(r.ise_naive) << ',' << format_double(r.acc) << ','
                << format_double(r.score_corr1) << ',' << format_double(r.score_corr2) << ','
                << format_double(r.objective) << ',' << r.iterations << ','
                << (r.converged ? 1 : 0) << ',' << r.unusable_margins << ','
                << format_double(r.elapsed_ms) << "\n";
        }
    }
    nlohmann::json j;
    j["config"] = report.config.to_map();
    j["results"]["n_replications"] = report.replications.size();
    j["results"]["all_ok"] = report.all_ok();
    for (const auto& [key, agg] : report.aggregates) {
        j["results"]["metrics"][key] = {
            {"mean", agg.mean}, {"sd", agg.sd}, {"count", agg.count}};
    }
    j["results"]["replications_file"] = "replications.csv";
    j["timing"]["total_seconds"] = report.total_seconds;
    std::ofstream out(dir + "/report.json");
    out << j.dump(2) << "\n";
}

std::vector<ReplicationRecord> read_replication_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw Error("unexpected replications.csv header");
    }
    std::vector<ReplicationRecord> recs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 15) throw Error("malformed replications.csv row");
        ReplicationRecord r;
        r.rep = std::stoi(f[0]);
        r.seed = std::stoull(f[1]);
        r.ok = f[2] == "1";
        r.error = f[3];
        r.ise_fsgc = std::stod(f[4]);
        r.ise_latent = std::stod(f[5]);
        r.ise_naive = std::stod(f[6]);
        r.acc = std::stod(f[7]);
        r.score_corr1 = std::stod(f[8]);
        r.score_corr2 = std::stod(f[9]);
        r.objective = std::stod(f[10]);
        r.iterations = std::stoi(f[11]);
        r.converged = f[12] == "1";
        r.unusable_margins = std::stoi(f[13]);
        r.elapsed_ms = std::stod(f[14]);
        recs.push_back(r);
    }
    return recs;
}

bool verify_report(const std::string& dir, std::string* message) {
    std::ostringstream msg;
    bool ok = true;
    try {
        const auto recs = read_replication_csv(dir + "/replications.csv");
        std::ifstream jf(dir + "/report.json");
        if (!jf) throw Error("cannot open report.json");
        nlohmann::json j;
        jf >> j;
        const auto recomputed = aggregate_records(recs);
        const auto& metrics = j.at("results").at("metrics");
        for (const auto& [key, agg] : recomputed) {
            if (!metrics.contains(key)) {
                msg << "missing metric in report: " << key << "\n";
                ok = false;
                continue;
            }
            const double mean = metrics.at(key).at("mean").get<double>();
            const double sd = metrics.at(key).at("sd").get<double>();
            const int count = metrics.at(key).at("count").get<int>();
            auto close = [](double a, double b) {
                return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
            };
            if (!close(mean, agg.mean) || !close(sd, agg.sd) || count != agg.count) {
                msg << "metric " << key << " mismatch: report (" << mean << ", " << sd << ", "
                    << count << ") vs csv (" << agg.mean << ", " << agg.sd << ", " << agg.count
                    << ")\n";
                ok = false;
            } else {
                msg << "metric " << key << " ok\n";
            }
        }
        for (auto it = metrics.begin(); it != metrics.end(); ++it) {
            if (recomputed.find(it.key()) == recomputed.end()) {
                msg << "metric " << it.key() << " in report but not recomputable\n";
                ok = false;
            }
        }
        const std::size_t n_rep = j.at("results").at("n_replications").get<std::size_t>();
        if (n_rep != recs.size()) {
            msg << "replication count mismatch\n";
            ok = false;
        }
    } catch (const std::exception& e) {
        msg << "verification failed: " << e.what() << "\n";
        ok = false;
    }
    if (message) *message = msg.str();
    return ok;
}

}  // namespace fsgc
