#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crtiv {

/// One row of unit-level input.
struct UnitRecord {
    std::string cluster_id;
    int z = 0;
    int d = 0;
    double y = 0.0;
};

struct Unit {
    int d = 0;
    double y = 0.0;
};

struct Cluster {
    std::string id;
    int z = 0;
    std::vector<Unit> units;
};

/// Observed cluster-randomized trial. Immutable once constructed; the
/// constructor enforces binary z/d, finite y, non-empty clusters and
/// 0 < m < J.
class ClusterTrial {
   public:
    explicit ClusterTrial(std::vector<Cluster> clusters);

    /// Groups records by cluster id in order of first appearance. Throws
    /// if a cluster mixes assignments.
    static ClusterTrial from_records(std::span<const UnitRecord> records);

    const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
    std::size_t J() const noexcept { return clusters_.size(); }
    std::size_t m() const noexcept { return m_; }
    std::size_t n() const noexcept { return n_; }

   private:
    std::vector<Cluster> clusters_;
    std::size_t m_ = 0;
    std::size_t n_ = 0;
};

/// Per-cluster sums and means.
struct ClusterSummary {
    std::size_t n = 0;
    double y_sum = 0.0;
    double d_sum = 0.0;
    double y_bar = 0.0;
    double d_bar = 0.0;
    int z = 0;
};

/// Arm counts recovered from a list of summaries.
struct Design {
    std::size_t J = 0;
    std::size_t m = 0;
    std::size_t n = 0;
};

Design design_of(std::span<const ClusterSummary> summaries) noexcept;

struct IngestOptions {
    /// Receives non-fatal notices (e.g. ignored extra columns).
    std::function<void(std::string_view)> on_warning;
};

ClusterTrial ingest_csv(const std::filesystem::path& path, const IngestOptions& options = {});
ClusterTrial read_csv(std::istream& in, const IngestOptions& options = {});

/// Writes `cluster_id,z,d,y` with y in shortest round-trip form.
void write_csv(const ClusterTrial& trial, std::ostream& out);

std::vector<ClusterSummary> summarize(const ClusterTrial& trial);

struct IttEstimates {
    double mu_y = 0.0;
    double mu_d = 0.0;
};

/// Difference-in-means of cluster sums, scaled to per-unit effects:
/// mu = (1/n) [ (J/m) sum_treated S_j - (J/(J-m)) sum_control S_j ].
IttEstimates itt_estimates(std::span<const ClusterSummary> summaries);

}  // namespace crtiv
