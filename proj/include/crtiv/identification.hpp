#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "crtiv/estimators.hpp"
#include "crtiv/rational.hpp"

namespace crtiv {

/// Unit-level potential outcomes of one cluster.
struct PotentialOutcomes {
    std::vector<double> y1;
    std::vector<double> y0;
    std::vector<int> d1;
    std::vector<int> d0;
};

/// Complete description of one cluster of a known population.
struct OracleClusterSpec {
    std::int64_t n = 0;
    std::int64_t n_co = 0;
    double tau = 0.0;  // cluster CACE; ignored when n_co == 0
    std::optional<PotentialOutcomes> units;

    /// Builds the spec from unit-level potential outcomes; n_co and tau are
    /// derived from the complier set.
    static OracleClusterSpec from_units(PotentialOutcomes units);
    /// Checks 0 <= n_co <= n and, when units are present, monotonicity and
    /// consistency of n_co and tau with them.
    void validate() const;
};

/// Exact counterpart of OracleClusterSpec used to reproduce fractions.
struct RationalSpec {
    std::int64_t n = 0;
    std::int64_t n_co = 0;
    Rational tau;
};

/// Complier-weighted mean of the cluster CACEs.
double true_cace(std::span<const OracleClusterSpec> specs);

/// Weights each method places on the cluster CACEs; they sum to one.
///   ClusterLevel: n_co_j / n_j normalized.
///   TSLS:         n_co_j (n - n_j) normalized.
///   EffectRatio:  n_co_j normalized (the CACE's own weights).
std::vector<double> method_weights(std::span<const OracleClusterSpec> specs, Method method);

double identified_value(std::span<const OracleClusterSpec> specs, Method method);

Rational exact_true_cace(std::span<const RationalSpec> specs);
std::vector<Rational> exact_method_weights(std::span<const RationalSpec> specs, Method method);
Rational exact_identified_value(std::span<const RationalSpec> specs, Method method);

/// Limits of growing-cluster-size populations: p_co[j] are complier
/// proportions, rho[j][k] the limit of n_j / n_k, tau_inf[j] the limiting
/// cluster CACEs.
struct AsymptoticSpec {
    std::vector<double> p_co;
    std::vector<std::vector<double>> rho;
    std::vector<double> tau_inf;

    void validate() const;
    /// rho from a vector of relative sizes.
    static AsymptoticSpec from_sizes(std::span<const double> sizes, std::vector<double> p_co,
                                     std::vector<double> tau_inf);
};

/// Signed limit of tau_CL - tau as cluster sizes grow with J fixed.
double asymptotic_gap_cluster_level(const AsymptoticSpec& spec);
/// Signed limit of tau_TSLS - tau as cluster sizes grow with J fixed.
double asymptotic_gap_tsls(const AsymptoticSpec& spec);

/// Bounded cluster sizes with a discrete law; J grows.
struct GapDemoConfig {
    std::vector<std::pair<std::int64_t, double>> size_law;  // (size, probability)
    std::map<std::int64_t, double> tau_law;                  // size -> cluster CACE
    double p_co = 0.5;
    std::size_t J = 1000;
    std::uint64_t seed = 0;
    Method method = Method::ClusterLevel;
};

struct GapDemoResult {
    double gap = 0.0;  // |identified - truth|
    double identified = 0.0;
    double truth = 0.0;
    std::uint64_t seed = 0;
};

GapDemoResult growing_J_gap_demo(const GapDemoConfig& config);

/// Reads `n,n_co,tau` rows.
std::vector<OracleClusterSpec> read_spec_csv(const std::filesystem::path& path);
/// Same file, with tau parsed as an exact decimal or fraction.
std::vector<RationalSpec> read_exact_spec_csv(const std::filesystem::path& path);

}  // namespace crtiv
