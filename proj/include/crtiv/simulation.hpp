#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "crtiv/data_model.hpp"
#include "crtiv/identification.hpp"

namespace crtiv {

/// One row of the resampled (cluster size, compliance rate) table.
struct SizeRow {
    std::int64_t n = 0;
    double compliance_rate = 0.0;
};

/// Linear mixed model for outcomes:
///   Y_ji = alpha + beta n_j + c_j + e_ji + Z_j * [complier] * effect_j
/// with c_j, e_ji scaled Student-t draws. The size interaction gamma Z_j n_j
/// is carried by the compliers of cluster j, so that assignment affects
/// outcomes only through receipt: each complier's effect is
///   effect_j = tau + gamma n_j^2 / n_co_j,
/// which leaves the treated cluster total of the interaction at gamma n_j^2
/// and reduces to tau + gamma n_j when every unit complies.
struct DgpConfig {
    double alpha_intercept = 0.0;
    double tau = 2.0;
    double beta = 0.01;
    double gamma = 0.0;
    double lambda_icc = 0.28;
    double error_df = 5.0;  // +inf selects normal errors
    std::vector<SizeRow> pi_source;
    std::size_t J = 50;
    std::size_t m = 0;  // 0 selects round(J * 112 / 157)
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t treated_count() const;
};

struct IccScales {
    double cluster_scale = 0.0;
    double unit_scale = 1.0;
};

/// Scales for which Var(c) / (Var(c) + Var(e)) = lambda when both errors are
/// t(df) draws multiplied by the returned scales.
IccScales icc_calibrate(double lambda_target, double error_df);

struct Population {
    ClusterTrial trial;
    std::vector<OracleClusterSpec> oracle;  // one per cluster, trial order
    std::vector<ClusterSummary> summaries;
    double true_cace = std::numeric_limits<double>::quiet_NaN();  // NaN when nobody complies
};

/// Draws one population and its randomization. With keep_units the oracle
/// specs carry unit-level potential outcomes.
Population generate_population(const DgpConfig& dgp, bool keep_units = false);

enum class TruthTarget { Realized, Superpopulation };

struct SimScenario {
    DgpConfig dgp;
    std::vector<std::size_t> J_grid{20, 30, 50, 80, 100, 200};
    std::vector<double> gamma_grid{0.0, -0.03, 0.03};
    std::size_t replicates = 2000;
    double alpha_level = 0.05;
    double treated_fraction = 112.0 / 157.0;
    TruthTarget truth = TruthTarget::Realized;
    /// Monte Carlo draws for an additional permutation region; 0 disables it.
    std::uint64_t permutation_draws = 0;

    void validate() const;
};

/// Reads a scenario from JSON. pi_source may be an inline array of
/// [n, compliance_rate] pairs or a path to a size table, resolved relative to
/// base_dir. Throws InvalidInput naming the offending field.
SimScenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir = {});
SimScenario load_scenario(const std::filesystem::path& path);

std::vector<SizeRow> read_size_table(const std::filesystem::path& path);
std::vector<SizeRow> read_size_table(std::istream& in);

/// Aggregate over the replicates of one (method, J, gamma) cell. Infinite
/// regions are excluded from mean_ci_length and counted in
/// infinite_ci_rate. Replicates where the estimator threw are counted in
/// skipped and excluded from every other metric.
struct SimCell {
    std::string method;
    std::size_t J = 0;
    double gamma = 0.0;
    std::size_t replicates = 0;
    std::size_t skipped = 0;
    double mean_estimate = 0.0;
    double mean_truth = 0.0;
    double bias_ratio = 0.0;
    double coverage = 0.0;
    double mean_ci_length = 0.0;
    double infinite_ci_rate = 0.0;
};

struct SimReport {
    std::vector<SimCell> cells;
    std::uint64_t seed = 0;
    std::size_t replicates = 0;
    double alpha_level = 0.05;
};

/// Runs every grid cell. Replicate (g, j, r) draws from the stream
/// derive_seed(seed, {g, j, r}), and aggregation runs in replicate order after
/// all workers finish, so the report does not depend on the worker count.
SimReport run_scenario(const SimScenario& scenario, unsigned workers = 1);

/// Long format: method,J,gamma,metric,value.
void write_report_csv(const SimReport& report, std::ostream& out);
/// Three aligned tables: bias ratio, coverage, mean CI length.
void write_report_tables(const SimReport& report, std::ostream& out);

}  // namespace crtiv
