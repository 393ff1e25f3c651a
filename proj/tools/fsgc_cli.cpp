// Batch front end: simulate, fit, scores, predict, evaluate, verify-report.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fsgc/experiment.hpp"

namespace {

using fsgc::Error;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string default_out_dir() {
    const char* env = std::getenv("FSGC_OUT_DIR");
    return env != nullptr && *env != '\0' ? env : "fsgc_out";
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << format_double(m(i, j)) << (j + 1 < m.cols() ? "," : "");
        }
        out << "\n";
    }
}

void write_grid_csv(const std::string& path, const std::vector<double>& grid) {
    std::ofstream out(path);
    out << "time\n";
    for (double t : grid) out << format_double(t) << "\n";
}

void write_data_csv(const std::string& path, const fsgc::ObservationSet& obs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "subject_id,time,value\n";
    for (const auto& r : obs.to_records()) {
        out << r.subject << ',' << format_double(r.time) << ',' << format_double(r.value)
            << "\n";
    }
}

void write_meta(const std::string& path, const fsgc::VariableKind& kind) {
    nlohmann::json j;
    j["kind"] = kind.name();
    if (kind.tag == fsgc::Kind::ordinal) j["levels"] = kind.levels;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

fsgc::ObservationSet read_data(const std::string& data_path, const std::string& meta_path) {
    std::ifstream meta(meta_path);
    if (!meta) throw Error("cannot open metadata file: " + meta_path);
    nlohmann::json j;
    meta >> j;
    const fsgc::VariableKind kind =
        fsgc::kind_from_name(j.at("kind").get<std::string>(), j.value("levels", 0));

    std::ifstream in(data_path);
    if (!in) throw Error("cannot open data file: " + data_path);
    std::string line;
    if (!std::getline(in, line) || line != "subject_id,time,value") {
        throw Error("data file must start with header subject_id,time,value");
    }
    std::vector<fsgc::ObservationRecord> recs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw Error("malformed data row: " + line);
        }
        recs.push_back({line.substr(0, c1), std::stod(line.substr(c1 + 1, c2 - c1 - 1)),
                        std::stod(line.substr(c2 + 1))});
    }
    return fsgc::ObservationSet::from_records(recs, kind);
}

struct FitOutput {
    fsgc::Margins margins;
    fsgc::TauMatrix tau;
    fsgc::LatentCorrelationModel model;
    fsgc::CorrelationResult recon;
};

FitOutput run_fit_pipeline(const fsgc::ObservationSet& obs, const fsgc::RunConfig& cfg) {
    std::vector<std::vector<double>> samples(obs.grid.size());
    for (Eigen::Index j = 0; j < obs.grid_size(); ++j) samples[j] = obs.column_sample(j);
    FitOutput out{fsgc::estimate_margins(samples, obs.grid, obs.kind), {}, {}, {}};
    out.tau = obs.complete() ? fsgc::kendall_dense(obs.values, obs.grid)
                             : fsgc::kendall_sparse(obs, cfg.c0);
    fsgc::FitConfig fit_cfg;
    fit_cfg.basis_dim = cfg.basis_dim > 0
                            ? cfg.basis_dim
                            : (obs.complete() ? 7 : 5);
    fit_cfg.c0 = cfg.c0;
    fit_cfg.max_iterations = cfg.max_iterations;
    fit_cfg.bridge_table_points = cfg.bridge_table_points;
    out.model = fsgc::fit_latent_correlation(out.tau, out.margins.cutoff_set(), fit_cfg);
    out.recon = fsgc::reconstruct_correlation(out.model, obs.grid);
    return out;
}

void write_fit_outputs(const FitOutput& fit, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_grid_csv(dir + "/grid.csv", fit.model.cutoffs.grid);
    write_matrix_csv(dir + "/correlation.csv", fit.recon.corr);
    write_matrix_csv(dir + "/coefficients.csv", fit.model.coeffs.full());
    write_matrix_csv(dir + "/tau.csv", fit.tau.tau);
    {
        std::ofstream out(dir + "/cutoffs.csv");
        out << "time,usable,cutoffs\n";
        for (std::size_t j = 0; j < fit.model.cutoffs.grid.size(); ++j) {
            out << format_double(fit.model.cutoffs.grid[j]) << ','
                << (fit.model.cutoffs.usable[j] ? 1 : 0);
            for (double c : fit.model.cutoffs.cutoffs[j]) out << ',' << format_double(c);
            out << "\n";
        }
    }
    nlohmann::json j;
    const auto& d = fit.model.diagnostics;
    j["objective"] = d.objective;
    j["iterations"] = d.iterations;
    j["converged"] = d.converged;
    j["non_convergence"] = d.non_convergence;
    j["gradient_norm"] = d.gradient_norm;
    j["init_fallback"] = d.init_fallback;
    j["levenberg_used"] = d.levenberg_used;
    j["pairs_used"] = d.pairs_used;
    j["basis_dim"] = fit.model.basis.dimension();
    j["projection_distance"] = fit.recon.projection_distance;
    j["projection_iterations"] = fit.recon.projection_iterations;
    std::ofstream out(dir + "/fit.json");
    out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiparametric Gaussian-copula covariance estimation and latent FPCA "
                 "for mixed-type functional data"};
    app.require_subcommand(1);

    std::string config_path, data_path, meta_path, out_dir, report_dir, times_arg;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", overrides, "config override key=value (repeatable)");
        cmd->add_option("--out", out_dir, "output directory");
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate one scenario dataset");
    add_common(sim);
    bool emit_latent = false;
    sim->add_flag("--emit-latent", emit_latent, "also write the true latent curves");

    CLI::App* fit_cmd = app.add_subcommand("fit", "estimate the latent correlation surface");
    add_common(fit_cmd);
    fit_cmd->add_option("--data", data_path, "long CSV: subject_id,time,value")->required();
    fit_cmd->add_option("--meta", meta_path, "metadata JSON (kind, levels)")->required();

    CLI::App* scores_cmd = app.add_subcommand("scores", "latent principal component scores");
    add_common(scores_cmd);
    scores_cmd->add_option("--data", data_path)->required();
    scores_cmd->add_option("--meta", meta_path)->required();
    std::string variant = "functional";
    scores_cmd->add_option("--variant", variant,
                           "conditioning correlation: functional|multivariate");

    CLI::App* predict_cmd =
        app.add_subcommand("predict", "predict curves at new time points");
    add_common(predict_cmd);
    predict_cmd->add_option("--data", data_path)->required();
    predict_cmd->add_option("--meta", meta_path)->required();
    predict_cmd->add_option("--times", times_arg, "comma-separated times in [0,1]")
        ->required();

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "run the replication study");
    add_common(eval_cmd);

    CLI::App* verify_cmd = app.add_subcommand("verify-report",
                                              "recompute report aggregates from the CSV");
    verify_cmd->add_option("--dir", report_dir, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        fsgc::RunConfig cfg;
        if (!config_path.empty()) cfg = fsgc::RunConfig::from_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error("override must be key=value: " + kv);
            cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir();

        if (app.got_subcommand(sim)) {
            if (!cfg.seed_set) throw Error("simulate requires a seed (--set seed=...)");
            const auto grid = fsgc::uniform_grid(cfg.m);
            fsgc::ScenarioSpec spec{cfg.scenario, cfg.n, cfg.m, cfg.sparse_fraction, cfg.seed};
            const Eigen::MatrixXd latent =
                fsgc::sample_latent(cfg.kernel, grid, cfg.n, cfg.seed);
            const fsgc::ObservationSet obs = fsgc::apply_scenario(latent, spec, grid);
            std::filesystem::create_directories(cfg.out_dir);
            write_data_csv(cfg.out_dir + "/data.csv", obs);
            write_meta(cfg.out_dir + "/data.meta.json", obs.kind);
            write_grid_csv(cfg.out_dir + "/grid.csv", grid);
            if (emit_latent) write_matrix_csv(cfg.out_dir + "/latent.csv", latent);
            std::cout << "wrote " << cfg.out_dir << "/data.csv (" << obs.n_subjects()
                      << " subjects, " << obs.grid_size() << " grid points)\n";
            return 0;
        }

        if (app.got_subcommand(fit_cmd)) {
            const auto obs = read_data(data_path, meta_path);
            const FitOutput fit = run_fit_pipeline(obs, cfg);
            write_fit_outputs(fit, cfg.out_dir);
            std::cout << "fit: objective " << fit.model.diagnostics.objective << " after "
                      << fit.model.diagnostics.iterations << " iterations ("
                      << (fit.model.diagnostics.converged ? "converged" : "not converged")
                      << ")\n";
            return fit.model.diagnostics.non_convergence ? 1 : 0;
        }

        if (app.got_subcommand(scores_cmd)) {
            const auto obs = read_data(data_path, meta_path);
            const FitOutput fit = run_fit_pipeline(obs, cfg);
            Eigen::MatrixXd corr = fit.recon.corr;
            if (variant == "multivariate") {
                fsgc::FitConfig fc;
                fc.basis_dim = fit.model.basis.dimension();
                fc.bridge_table_points = cfg.bridge_table_points;
                const auto terms = fsgc::build_pair_terms(fit.tau, fit.model.cutoffs,
                                                          fit.model.basis, fc);
                Eigen::MatrixXd r = Eigen::MatrixXd::Identity(obs.grid_size(), obs.grid_size());
                for (std::size_t p = 0; p < terms.size(); ++p) {
                    const double v =
                        terms.bridges[p].inverse(fit.tau.tau(terms.j[p], terms.k[p])).r;
                    r(terms.j[p], terms.k[p]) = r(terms.k[p], terms.j[p]) = v;
                }
                corr = fsgc::nearest_correlation(std::move(r), nullptr, nullptr);
            } else if (variant != "functional") {
                throw Error("--variant must be functional or multivariate");
            }
            const fsgc::EigenSystem eig = fsgc::eigendecompose(
                corr, obs.grid, cfg.pve,
                cfg.score_components > 0 ? cfg.score_components : 0);
            Eigen::MatrixXd traj(obs.n_subjects(), obs.grid_size());
            for (Eigen::Index i = 0; i < obs.n_subjects(); ++i) {
                traj.row(i) =
                    fsgc::latent_trajectory(obs.values.row(i), corr, fit.margins).latent;
            }
            const fsgc::ScoreMatrix sm = fsgc::latent_scores(traj, eig);
            write_fit_outputs(fit, cfg.out_dir);
            write_matrix_csv(cfg.out_dir + "/eigenfunctions.csv", eig.eigenfunctions);
            write_matrix_csv(cfg.out_dir + "/eigenvalues.csv", eig.eigenvalues);
            write_matrix_csv(cfg.out_dir + "/trajectories.csv", traj);
            {
                std::ofstream out(cfg.out_dir + "/scores.csv");
                out << "subject_id";
                for (int k = 0; k < sm.K; ++k) out << ",score" << (k + 1);
                out << "\n";
                for (Eigen::Index i = 0; i < sm.scores.rows(); ++i) {
                    out << obs.subject_ids[i];
                    for (int k = 0; k < sm.K; ++k) {
                        out << ',' << format_double(sm.scores(i, k));
                    }
                    out << "\n";
                }
            }
            std::cout << "scores: " << sm.scores.rows() << " subjects x " << sm.K
                      << " components (" << variant << " variant)\n";
            return 0;
        }

        if (app.got_subcommand(predict_cmd)) {
            const auto obs = read_data(data_path, meta_path);
            const FitOutput fit = run_fit_pipeline(obs, cfg);
            std::vector<double> times;
            std::stringstream ss(times_arg);
            std::string tok;
            while (std::getline(ss, tok, ',')) times.push_back(std::stod(tok));
            std::filesystem::create_directories(cfg.out_dir);
            std::ofstream out(cfg.out_dir + "/predictions.csv");
            out << "subject_id,time,latent_mean,conditional_sd,observed_scale\n";
            for (Eigen::Index i = 0; i < obs.n_subjects(); ++i) {
                const fsgc::PredictionResult pr =
                    fsgc::predict_curve(obs.values.row(i), fit.model, fit.margins, times);
                for (std::size_t t = 0; t < times.size(); ++t) {
                    out << obs.subject_ids[i] << ',' << format_double(times[t]) << ','
                        << format_double(pr.latent_mean[t]) << ','
                        << format_double(std::sqrt(std::max(0.0, pr.conditional_cov(t, t))))
                        << ',' << format_double(pr.observed_scale[t]) << "\n";
                }
            }
            std::cout << "wrote " << cfg.out_dir << "/predictions.csv\n";
            return 0;
        }

        if (app.got_subcommand(eval_cmd)) {
            const fsgc::EvaluationReport report = fsgc::run_experiment(cfg);
            fsgc::write_report(report, cfg.out_dir);
            for (const auto& [key, agg] : report.aggregates) {
                std::cout << key << ": mean " << agg.mean << " sd " << agg.sd << " (n="
                          << agg.count << ")\n";
            }
            if (!report.all_ok()) {
                for (const auto& r : report.replications) {
                    if (!r.ok) {
                        std::cerr << "replication " << r.rep << " failed: " << r.error << "\n";
                    }
                }
                return 1;
            }
            return 0;
        }

        if (app.got_subcommand(verify_cmd)) {
            std::string message;
            const bool ok = fsgc::verify_report(report_dir, &message);
            std::cout << message;
            std::cout << (ok ? "report verified\n" : "report verification FAILED\n");
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
