#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crtiv/data_model.hpp"
#include "crtiv/region.hpp"

namespace crtiv {

enum class Method { ClusterLevel, TSLS, EffectRatio };

std::string_view method_tag(Method method) noexcept;

struct EstimateReport {
    Method method = Method::EffectRatio;
    double point = 0.0;
    std::optional<double> variance;
    ConfidenceRegion region;
    double alpha = 0.05;
    std::map<std::string, double> diagnostics;
    std::vector<std::string> warnings;
};

/// Means of cluster means by arm.
struct ArmMeans {
    double y_bar_T = 0.0;
    double y_bar_C = 0.0;
    double d_bar_T = 0.0;
    double d_bar_C = 0.0;
};

ArmMeans arm_means(std::span<const ClusterSummary> summaries);

/// Wald ratio of cluster-mean differences with the three-term Delta-method
/// variance and a symmetric normal interval.
EstimateReport estimate_cluster_level(std::span<const ClusterSummary> summaries, double alpha = 0.05);

/// Sums that fully determine the closed-form TSLS estimate and its
/// cluster-robust variance. First-stage fitted values are the arm-level
/// compliance proportions, so every sum reduces to cluster totals.
struct TslsPieces {
    double point = 0.0;
    double point_ratio_form = 0.0;
    double fitted_treated = 0.0;   // D-hat for units in treated clusters
    double fitted_control = 0.0;   // D-hat for units in control clusters
    double variance = 0.0;
};

TslsPieces tsls_pieces(std::span<const ClusterSummary> summaries);

/// Closed-form TSLS with the scalar cluster-robust sandwich variance.
EstimateReport estimate_tsls(std::span<const ClusterSummary> summaries, double alpha = 0.05);

enum class RegionMethod { Quadratic, Permutation };

struct PermutationOptions {
    /// Enumerate all C(J, m) assignments when true, otherwise sample.
    bool exhaustive = true;
    std::uint64_t cap = 2'000'000;
    std::uint64_t draws = 10'000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct EffectRatioOptions {
    RegionMethod region = RegionMethod::Quadratic;
    PermutationOptions permutation;
};

/// Ratio of difference-in-means of cluster sums; the root of T(tau) = 0.
EstimateReport estimate_effect_ratio(std::span<const ClusterSummary> summaries, double alpha = 0.05,
                                     const EffectRatioOptions& options = {});

/// Numerator and denominator of the effect-ratio estimator:
/// (1/m) sum_T S_j - (1/(J-m)) sum_C S_j for S = Y and S = D.
struct ArmSumContrast {
    double outcome = 0.0;
    double compliance = 0.0;
};

ArmSumContrast arm_sum_contrast(std::span<const ClusterSummary> summaries);

/// A_j(tau0) = Y_j - D_j tau0.
std::vector<double> adjusted_responses(std::span<const ClusterSummary> summaries, double tau0);

/// T(tau0) = A_T(tau0) - A_C(tau0).
double test_statistic(std::span<const ClusterSummary> summaries, double tau0);

/// Threshold below which a compliance contrast counts as zero.
double zero_denominator_threshold(std::span<const ClusterSummary> summaries) noexcept;

}  // namespace crtiv
