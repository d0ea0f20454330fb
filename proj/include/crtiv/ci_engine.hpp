#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crtiv/data_model.hpp"
#include "crtiv/estimators.hpp"
#include "crtiv/region.hpp"

namespace crtiv {

/// Neyman-style variance of T(tau0) with per-arm divisors m(m-1) and
/// (J-m)(J-m-1). Throws DegenerateArm when an arm has fewer than two
/// clusters.
double variance_s2(std::span<const ClusterSummary> summaries, double tau0);

/// Coefficients of {tau0 : a tau0^2 + 2 b tau0 + c <= 0}.
struct QuadraticCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    // Arm-wise sample (co)variances of the cluster sums Y_j and D_j.
    double s2_y_T = 0.0;
    double s2_y_C = 0.0;
    double s2_d_T = 0.0;
    double s2_d_C = 0.0;
    double s2_yd_T = 0.0;
    double s2_yd_C = 0.0;
    // Arm-mean contrasts of cluster sums (numerator/denominator of tau_AE).
    double contrast_y = 0.0;
    double contrast_d = 0.0;
    double z = 0.0;
    std::size_t m = 0;
    std::size_t J = 0;

    /// S^2(tau0) from the expanded form.
    double s2_at(double tau0) const noexcept;
    double evaluate(double tau0) const noexcept { return (a * tau0 + 2.0 * b) * tau0 + c; }
};

QuadraticCoefficients quadratic_coefficients(std::span<const ClusterSummary> summaries, double alpha);

ConfidenceRegion quadratic_region(std::span<const ClusterSummary> summaries, double alpha);

/// Solution set of a tau^2 + 2 b tau + c <= 0 for arbitrary coefficients.
ConfidenceRegion solve_quadratic_region(double a, double b, double c, double alpha);

/// Treated-arm subset sums of Y_j and D_j for a collection of assignments.
/// Every null statistic T_k(tau0) is an affine function of these two sums.
struct AssignmentSums {
    std::vector<double> y;
    std::vector<double> d;
    std::size_t observed_index = 0;
    bool exhaustive = true;
    std::uint64_t draws = 0;
    std::uint64_t seed = 0;
};

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

/// Enumerates assignments in lexicographic order of treated index sets
/// (exhaustive mode) or samples them uniformly (Monte Carlo mode, with the
/// observed assignment stored first). Throws CapExceeded when C(J, m)
/// exceeds the cap in exhaustive mode.
AssignmentSums assignment_sums(std::span<const ClusterSummary> summaries, const PermutationOptions& options);

struct PermutationNull {
    double tau0 = 0.0;
    double observed = 0.0;
    std::vector<double> statistics;  // sorted ascending
    bool exhaustive = true;
    std::uint64_t draws = 0;
    std::uint64_t seed = 0;
};

PermutationNull permutation_null(std::span<const ClusterSummary> summaries, double tau0,
                                 const PermutationOptions& options = {});

struct PermutationPValue {
    double lower = 1.0;      // P(T <= t_obs)
    double upper = 1.0;      // P(T >= t_obs)
    double two_sided = 1.0;  // min(1, 2 min(lower, upper))
    std::uint64_t count = 0;
};

PermutationPValue permutation_pvalue(const PermutationNull& null);

/// Tightest interval bracketing {tau0 : p(tau0) >= alpha}. Each null
/// statistic crosses the observed one at most once as tau0 varies, so the
/// p-value is piecewise constant and the accepted set is located exactly by
/// sweeping the crossing points.
ConfidenceRegion permutation_region(std::span<const ClusterSummary> summaries, double alpha,
                                    const PermutationOptions& options = {});

ConfidenceRegion permutation_region(const AssignmentSums& sums, std::span<const ClusterSummary> summaries,
                                    double alpha);

}  // namespace crtiv
