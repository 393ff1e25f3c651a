#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "fsgc/fit.hpp"
#include "fsgc/latent.hpp"
#include "fsgc/simgen.hpp"

namespace fsgc {

// Trapezoidal double quadrature of the squared surface difference over the
// unit square. Throws GridMismatch on incompatible shapes.
double ise(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
           const std::vector<double>& grid);

struct BaselineResult {
    Eigen::MatrixXd corr;
    EigenSystem eig;
    int zero_variance_columns = 0;  // entries involving them are filled with 0
};

// Pearson correlation of the observed values per time-point pair plus its
// eigensystem; no latent bridging. Requires dense complete data.
BaselineResult naive_fpca_baseline(const ObservationSet& data, double pve_target = 0.99);

// Mean over subjects of the exact-match fraction at grid points outside the
// subject's observed set. Throws NoHeldOutPoints when no subject has any.
double accuracy(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted,
                const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& observed);

struct RunConfig {
    char scenario = 'A';
    KernelSpec kernel = KernelSpec::matern();
    int n = 500;
    int m = 50;
    double sparse_fraction = 1.0;
    int replications = 20;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int basis_dim = 0;          // 0 = default: 7 dense, 5 sparse
    std::int64_t c0 = 5;
    double pve = 0.99;
    int score_components = 2;
    int max_iterations = 200;
    int bridge_table_points = 201;
    int threads = 0;            // 0 = hardware concurrency
    std::string out_dir;

    int effective_basis_dim() const;
    static RunConfig from_file(const std::string& path);
    void apply_override(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_map() const;
};

struct ReplicationRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double ise_fsgc = 0.0;
    double ise_latent = 0.0;   // unsmoothed pointwise comparator
    double ise_naive = 0.0;    // NaN when the baseline is unavailable (sparse)
    double acc = 0.0;          // NaN unless sparse prediction ran
    double score_corr1 = 0.0;  // |corr| with scores from the true latent curves
    double score_corr2 = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    int unusable_margins = 0;
    double elapsed_ms = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double sd = 0.0;
    int count = 0;
};

struct EvaluationReport {
    RunConfig config;
    std::vector<ReplicationRecord> replications;
    std::map<std::string, Aggregate> aggregates;
    double total_seconds = 0.0;

    bool all_ok() const;
};

// Aggregate mean/sd over successful replications, skipping NaN metrics.
std::map<std::string, Aggregate> aggregate_records(const std::vector<ReplicationRecord>& recs);

// One full scenario replication (simulate -> margins -> tau -> fits ->
// metrics). Exposed for tests; run_experiment loops it over derived seeds.
ReplicationRecord run_replication(const RunConfig& cfg, int rep_index);

EvaluationReport run_experiment(const RunConfig& cfg);

// Report files: per-replication CSV plus aggregate JSON.
void write_report(const EvaluationReport& report, const std::string& dir);
// Recomputes every aggregate from the CSV and compares with the JSON.
bool verify_report(const std::string& dir, std::string* message);

std::vector<ReplicationRecord> read_replication_csv(const std::string& path);

}  // namespace fsgc
