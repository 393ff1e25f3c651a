#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fsgc/experiment.hpp"

using namespace fsgc;

namespace {

RunConfig small_config(char scenario, int n, int m, double sparse, std::uint64_t seed) {
    RunConfig cfg;
    cfg.scenario = scenario;
    cfg.n = n;
    cfg.m = m;
    cfg.sparse_fraction = sparse;
    cfg.replications = 1;
    cfg.seed = seed;
    cfg.seed_set = true;
    return cfg;
}

bool same_statistics(const ReplicationRecord& a, const ReplicationRecord& b) {
    auto eq = [](double x, double y) {
        return (std::isnan(x) && std::isnan(y)) || x == y;
    };
    return a.rep == b.rep && a.seed == b.seed && a.ok == b.ok &&
           eq(a.ise_fsgc, b.ise_fsgc) && eq(a.ise_latent, b.ise_latent) &&
           eq(a.ise_naive, b.ise_naive) && eq(a.acc, b.acc) &&
           eq(a.score_corr1, b.score_corr1) && eq(a.score_corr2, b.score_corr2) &&
           eq(a.objective, b.objective) && a.iterations == b.iterations &&
           a.converged == b.converged && a.unusable_margins == b.unusable_margins;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("ise quadrature") {
    const std::vector<double> grid = uniform_grid(40);
    const Eigen::MatrixXd truth = kernel_matrix(KernelSpec::matern(), grid);
    CHECK(ise(truth, truth, grid) == 0.0);

    // Constant offset integrates exactly under the trapezoid rule.
    const double delta = 0.37;
    const Eigen::MatrixXd shifted = truth.array() + delta;
    CHECK(ise(truth, shifted, grid) == doctest::Approx(delta * delta).epsilon(1e-12));

    // Quadrature refinement on a smooth difference.
    auto smooth_ise = [](int m) {
        const std::vector<double> g = uniform_grid(m);
        Eigen::MatrixXd a(m, m), b(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                a(i, j) = 0.0;
                b(i, j) = 0.3 * std::sin(2 * std::numbers::pi * g[i]) *
                          std::cos(std::numbers::pi * g[j]);
            }
        }
        return ise(a, b, g);
    };
    CHECK(smooth_ise(50) == doctest::Approx(smooth_ise(200)).epsilon(1e-4));

    Eigen::MatrixXd wrong(3, 3);
    CHECK_THROWS_AS(ise(truth, wrong, grid), GridMismatch);
}

TEST_CASE("prediction accuracy metric") {
    Eigen::MatrixXd truth(2, 3), pred(2, 3);
    truth << 1, 0, 1, 0, 0, 1;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed(2, 3);
    observed.setConstant(false);

    pred = truth;
    CHECK(accuracy(truth, pred, observed) == 1.0);
    pred = 1.0 - truth.array();  // all wrong
    CHECK(accuracy(truth, pred, observed) == 0.0);

    // Held-out points only: first subject half right on its two unobserved.
    pred = truth;
    pred(0, 1) = 1;
    observed(0, 0) = true;
    CHECK(accuracy(truth, pred, observed) == doctest::Approx(0.75));

    observed.setConstant(true);
    CHECK_THROWS_AS(accuracy(truth, pred, observed), NoHeldOutPoints);
}

TEST_CASE("naive baseline differs from the rank-based estimate on distorted data") {
    const std::vector<double> grid = uniform_grid(12);
    const Eigen::MatrixXd latent = sample_latent(KernelSpec::matern(), grid, 300, 5);
    ScenarioSpec spec{'D', 300, 12, 1.0, 5};
    const ObservationSet obs = apply_scenario(latent, spec, grid);

    const BaselineResult base = naive_fpca_baseline(obs);
    std::vector<std::vector<double>> samples(grid.size());
    for (Eigen::Index j = 0; j < obs.grid_size(); ++j) samples[j] = obs.column_sample(j);
    const Margins margins = estimate_margins(samples, grid, obs.kind);
    FitConfig fc;
    fc.basis_dim = 5;
    const TauMatrix tau = kendall_dense(obs.values, grid);
    const LatentCorrelationModel model =
        fit_latent_correlation(tau, margins.cutoff_set(), fc);
    const CorrelationResult recon = reconstruct_correlation(model, grid);
    // Pearson on cubed values is not rank-invariant: the estimates disagree.
    CHECK((base.corr - recon.corr).cwiseAbs().maxCoeff() > 0.01);
}

TEST_CASE("naive baseline degenerate inputs") {
    const std::vector<double> grid = {0.0, 0.5, 1.0};
    Eigen::MatrixXd constant(4, 3);
    constant.setConstant(1.0);
    const ObservationSet all_const =
        ObservationSet::from_matrix(constant, grid, VariableKind::binary());
    CHECK_THROWS_AS(naive_fpca_baseline(all_const), InsufficientData);

    Eigen::MatrixXd partial(4, 3);
    partial << 0, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0;  // middle column constant
    const ObservationSet one_const =
        ObservationSet::from_matrix(partial, grid, VariableKind::binary());
    const BaselineResult base = naive_fpca_baseline(one_const);
    CHECK(base.zero_variance_columns == 1);
    CHECK(base.corr(0, 1) == 0.0);
    CHECK(base.corr(1, 1) == 1.0);
}

TEST_CASE("config file parsing and overrides") {
    const std::string path = "/tmp/fsgc_test_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "scenario = B\n";
        out << "kernel = nonstationary\n";
        out << "n = 123\n";
        out << "sparse_fraction = 0.1\n";
        out << "seed = 99\n";
    }
    RunConfig cfg = RunConfig::from_file(path);
    CHECK(cfg.scenario == 'B');
    CHECK(cfg.kernel.type == KernelSpec::Type::nonstationary);
    CHECK(cfg.n == 123);
    CHECK(cfg.seed == 99);
    CHECK(cfg.seed_set);
    CHECK(cfg.effective_basis_dim() == 5);  // sparse default
    cfg.apply_override("basis_dim", "6");
    CHECK(cfg.effective_basis_dim() == 6);
    CHECK_THROWS_AS(cfg.apply_override("nonsense", "1"), Error);
}

TEST_CASE("replication is deterministic and complete for every scenario") {
    for (char sc : {'A', 'B', 'C', 'D'}) {
        RunConfig cfg = small_config(sc, 150, 10, 1.0, 1234);
        cfg.basis_dim = 4;
        cfg.bridge_table_points = sc == 'C' ? 101 : 201;
        const ReplicationRecord a = run_replication(cfg, 0);
        const ReplicationRecord b = run_replication(cfg, 0);
        CAPTURE(sc);
        CAPTURE(a.error);
        CHECK(a.ok);
        CHECK(same_statistics(a, b));
        CHECK(std::isfinite(a.ise_fsgc));
        CHECK(std::isfinite(a.ise_latent));
        CHECK(std::isfinite(a.ise_naive));
    }
}

TEST_CASE("experiment thread count does not change results") {
    RunConfig cfg = small_config('D', 100, 8, 1.0, 777);
    cfg.basis_dim = 4;
    cfg.replications = 3;
    cfg.threads = 1;
    const EvaluationReport seq = run_experiment(cfg);
    cfg.threads = 3;
    const EvaluationReport par = run_experiment(cfg);
    REQUIRE(seq.replications.size() == par.replications.size());
    for (std::size_t i = 0; i < seq.replications.size(); ++i) {
        CHECK(same_statistics(seq.replications[i], par.replications[i]));
    }
}

TEST_CASE("sparse replication produces prediction accuracy") {
    RunConfig cfg = small_config('A', 400, 20, 0.25, 2024);
    const ReplicationRecord rec = run_replication(cfg, 0);
    CAPTURE(rec.error);
    CHECK(rec.ok);
    CHECK(rec.acc > 0.5);
    CHECK(rec.acc <= 1.0);
    CHECK(std::isnan(rec.ise_naive));  // baseline requires dense data
}

TEST_CASE("report round trip and verification") {
    RunConfig cfg = small_config('D', 80, 8, 1.0, 31);
    cfg.basis_dim = 4;
    cfg.replications = 2;
    const EvaluationReport report = run_experiment(cfg);
    CHECK(report.all_ok());

    const std::string dir = "/tmp/fsgc_test_report";
    std::filesystem::remove_all(dir);
    write_report(report, dir);
    std::string message;
    CHECK(verify_report(dir, &message));

    const auto recs = read_replication_csv(dir + "/replications.csv");
    REQUIRE(recs.size() == 2);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(same_statistics(recs[i], report.replications[i]));
    }

    // Tampering with an aggregate must fail verification.
    {
        std::ifstream in(dir + "/report.json");
        std::string json((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        const auto pos = json.find("\"mean\"");
        REQUIRE(pos != std::string::npos);
        json.replace(pos, 6, "\"mean\": 0.5, \"unused\"");
        std::ofstream out(dir + "/report.json");
        out << json;
    }
    CHECK(!verify_report(dir, &message));
}

TEST_CASE("aggregates skip NaN metrics and use the sample deviation") {
    std::vector<ReplicationRecord> recs(3);
    for (int i = 0; i < 3; ++i) {
        recs[i].rep = i;
        recs[i].ok = true;
        recs[i].ise_fsgc = i + 1.0;
        recs[i].acc = std::numeric_limits<double>::quiet_NaN();
        recs[i].ise_latent = 1.0;
        recs[i].ise_naive = std::numeric_limits<double>::quiet_NaN();
        recs[i].score_corr1 = std::numeric_limits<double>::quiet_NaN();
        recs[i].score_corr2 = std::numeric_limits<double>::quiet_NaN();
    }
    recs[2].ok = false;  // excluded
    const auto agg = aggregate_records(recs);
    CHECK(agg.at("ise_fsgc").count == 2);
    CHECK(agg.at("ise_fsgc").mean == doctest::Approx(1.5));
    CHECK(agg.at("ise_fsgc").sd == doctest::Approx(std::sqrt(0.5)));
    CHECK(agg.find("acc") == agg.end());
}

}  // TEST_SUITE
