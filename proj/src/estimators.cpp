#include "crtiv/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "crtiv/ci_engine.hpp"
#include "crtiv/error.hpp"
#include "crtiv/normal.hpp"

namespace crtiv {

namespace {

constexpr double kFewClusters = 40.0;

void require_both_arms(const Design& design) {
    if (design.m == 0 || design.m == design.J) {
        throw Error(ErrorCode::InvalidInput, "both arms must be non-empty");
    }
}

ConfidenceRegion normal_interval(double point, double variance, double alpha) {
    const double half = two_sided_critical(alpha) * std::sqrt(variance);
    return ConfidenceRegion::finite(point - half, point + half, alpha);
}

void flag_common(EstimateReport& report, const Design& design) {
    report.diagnostics["J"] = static_cast<double>(design.J);
    report.diagnostics["m"] = static_cast<double>(design.m);
    report.diagnostics["few_clusters"] = static_cast<double>(design.J) < kFewClusters ? 1.0 : 0.0;
    if (static_cast<double>(design.J) < kFewClusters) {
        report.warnings.push_back("fewer than 40 clusters: asymptotic variance may be unreliable");
    }
}

}  // namespace

std::string_view method_tag(Method method) noexcept {
    switch (method) {
        case Method::ClusterLevel: return "cluster_level";
        case Method::TSLS: return "tsls";
        case Method::EffectRatio: return "effect_ratio";
    }
    return "";
}

ArmMeans arm_means(std::span<const ClusterSummary> summaries) {
    const auto design = design_of(summaries);
    require_both_arms(design);
    ArmMeans a;
    for (const auto& s : summaries) {
        if (s.z == 1) {
            a.y_bar_T += s.y_bar;
            a.d_bar_T += s.d_bar;
        } else {
            a.y_bar_C += s.y_bar;
            a.d_bar_C += s.d_bar;
        }
    }
    const double m = static_cast<double>(design.m);
    const double mc = static_cast<double>(design.J - design.m);
    a.y_bar_T /= m;
    a.d_bar_T /= m;
    a.y_bar_C /= mc;
    a.d_bar_C /= mc;
    return a;
}

EstimateReport estimate_cluster_level(std::span<const ClusterSummary> summaries, double alpha) {
    const auto design = design_of(summaries);
    const auto means = arm_means(summaries);
    const double denom = means.d_bar_T - means.d_bar_C;
    if (std::abs(denom) < 1e-12) {
        throw Error(ErrorCode::ZeroDenominator, "compliance difference is zero");
    }
    if (design.J <= 2) {
        throw Error(ErrorCode::DegenerateVariance, "cluster-level variance needs J > 2");
    }

    const double J = static_cast<double>(design.J);
    const double m = static_cast<double>(design.m);
    const double mc = J - m;

    double ss_y = 0.0, ss_d = 0.0, cp_T = 0.0, cp_C = 0.0;
    for (const auto& s : summaries) {
        const double ey = s.y_bar - (s.z == 1 ? means.y_bar_T : means.y_bar_C);
        const double ed = s.d_bar - (s.z == 1 ? means.d_bar_T : means.d_bar_C);
        ss_y += ey * ey;
        ss_d += ed * ed;
        (s.z == 1 ? cp_T : cp_C) += ey * ed;
    }
    const double s2_y = ss_y / (J - 2.0);
    const double s2_d = ss_d / (J - 2.0);
    const double var_y = J * s2_y / (m * mc);
    const double var_d = J * s2_d / (m * mc);
    const double cov = cp_T / (m * m) + cp_C / (mc * mc);

    EstimateReport report;
    report.method = Method::ClusterLevel;
    report.alpha = alpha;
    report.point = (means.y_bar_T - means.y_bar_C) / denom;
    const double tau = report.point;
    double variance = (var_y + tau * tau * var_d - 2.0 * tau * cov) / (denom * denom);
    if (variance < 0.0) {
        report.warnings.push_back("negative Delta-method variance truncated to zero");
        variance = 0.0;
    }
    report.variance = variance;
    report.region = normal_interval(tau, variance, alpha);
    report.diagnostics["denominator"] = denom;
    report.diagnostics["compliance_rate"] = itt_estimates(summaries).mu_d;
    flag_common(report, design);
    return report;
}

TslsPieces tsls_pieces(std::span<const ClusterSummary> summaries) {
    const auto design = design_of(summaries);
    require_both_arms(design);
    double n1 = 0.0, n0 = 0.0, y1 = 0.0, y0 = 0.0, d1 = 0.0, d0 = 0.0;
    for (const auto& s : summaries) {
        const double nj = static_cast<double>(s.n);
        if (s.z == 1) {
            n1 += nj;
            y1 += s.y_sum;
            d1 += s.d_sum;
        } else {
            n0 += nj;
            y0 += s.y_sum;
            d0 += s.d_sum;
        }
    }
    TslsPieces p;
    p.fitted_treated = d1 / n1;
    p.fitted_control = d0 / n0;
    if (std::abs(p.fitted_treated - p.fitted_control) < 1e-12) {
        throw Error(ErrorCode::ZeroDenominator, "compliance difference is zero");
    }
    p.point = (n0 * y1 - n1 * y0) / (n0 * d1 - n1 * d0);
    p.point_ratio_form = (y1 / n1 - y0 / n0) / (d1 / n1 - d0 / n0);

    const double n = static_cast<double>(design.n);
    const double sum_dhat = d1 + d0;
    const double sum_dhat2 = n1 * p.fitted_treated * p.fitted_treated + n0 * p.fitted_control * p.fitted_control;
    const double det = n * sum_dhat2 - sum_dhat * sum_dhat;
    if (!(det > 1e-12 * n * n)) {
        throw Error(ErrorCode::RankDeficientFirstStage, "first-stage fitted values are constant");
    }

    double su2 = 0.0, sdu2 = 0.0, su_du = 0.0;
    for (const auto& s : summaries) {
        const double u = s.y_sum - s.d_sum * p.point;
        const double du = (s.z == 1 ? p.fitted_treated : p.fitted_control) * u;
        su2 += u * u;
        sdu2 += du * du;
        su_du += u * du;
    }
    p.variance = (sum_dhat * sum_dhat * su2 + n * n * sdu2 - 2.0 * n * sum_dhat * su_du) / (det * det);
    return p;
}

EstimateReport estimate_tsls(std::span<const ClusterSummary> summaries, double alpha) {
    const auto design = design_of(summaries);
    const auto pieces = tsls_pieces(summaries);
    EstimateReport report;
    report.method = Method::TSLS;
    report.alpha = alpha;
    report.point = pieces.point;
    const double variance = std::max(0.0, pieces.variance);
    report.variance = variance;
    report.region = normal_interval(pieces.point, variance, alpha);
    report.diagnostics["denominator"] = pieces.fitted_treated - pieces.fitted_control;
    report.diagnostics["compliance_rate"] = itt_estimates(summaries).mu_d;
    flag_common(report, design);
    return report;
}

ArmSumContrast arm_sum_contrast(std::span<const ClusterSummary> summaries) {
    const auto design = design_of(summaries);
    require_both_arms(design);
    double y1 = 0.0, y0 = 0.0, d1 = 0.0, d0 = 0.0;
    for (const auto& s : summaries) {
        if (s.z == 1) {
            y1 += s.y_sum;
            d1 += s.d_sum;
        } else {
            y0 += s.y_sum;
            d0 += s.d_sum;
        }
    }
    const double m = static_cast<double>(design.m);
    const double mc = static_cast<double>(design.J - design.m);
    return {y1 / m - y0 / mc, d1 / m - d0 / mc};
}

double zero_denominator_threshold(std::span<const ClusterSummary> summaries) noexcept {
    double scale = 1.0;
    for (const auto& s : summaries) scale = std::max(scale, std::abs(s.d_sum));
    return 1e-12 * scale;
}

std::vector<double> adjusted_responses(std::span<const ClusterSummary> summaries, double tau0) {
    std::vector<double> out;
    out.reserve(summaries.size());
    for (const auto& s : summaries) out.push_back(s.y_sum - s.d_sum * tau0);
    return out;
}

double test_statistic(std::span<const ClusterSummary> summaries, double tau0) {
    const auto design = design_of(summaries);
    require_both_arms(design);
    double a1 = 0.0, a0 = 0.0;
    for (const auto& s : summaries) {
        const double a = s.y_sum - s.d_sum * tau0;
        (s.z == 1 ? a1 : a0) += a;
    }
    return a1 / static_cast<double>(design.m) - a0 / static_cast<double>(design.J - design.m);
}

EstimateReport estimate_effect_ratio(std::span<const ClusterSummary> summaries, double alpha,
                                     const EffectRatioOptions& options) {
    const auto design = design_of(summaries);
    const auto contrast = arm_sum_contrast(summaries);
    if (std::abs(contrast.compliance) < zero_denominator_threshold(summaries)) {
        throw Error(ErrorCode::ZeroDenominator, "compliance difference is zero");
    }

    EstimateReport report;
    report.method = Method::EffectRatio;
    report.alpha = alpha;
    report.point = contrast.outcome / contrast.compliance;

    double scale = 0.0;
    for (const auto& s : summaries) scale = std::max(scale, std::abs(s.y_sum) + std::abs(s.d_sum * report.point));
    report.diagnostics["T_at_point"] = test_statistic(summaries, report.point);
    report.diagnostics["T_scale"] = scale;
    report.diagnostics["denominator"] = contrast.compliance;
    report.diagnostics["compliance_rate"] = itt_estimates(summaries).mu_d;
    flag_common(report, design);

    if (options.region == RegionMethod::Quadratic) {
        report.region = quadratic_region(summaries, alpha);
        report.diagnostics["s2_at_point"] = variance_s2(summaries, report.point);
    } else {
        const auto sums = assignment_sums(summaries, options.permutation);
        report.region = permutation_region(sums, summaries, alpha);
        report.diagnostics["null_size"] = static_cast<double>(sums.y.size());
        report.diagnostics["exhaustive"] = sums.exhaustive ? 1.0 : 0.0;
        if (!sums.exhaustive) report.diagnostics["seed"] = static_cast<double>(sums.seed);
        report.diagnostics["p_value_at_point"] =
            permutation_pvalue(permutation_null(summaries, report.point, options.permutation)).two_sided;
    }
    if (report.region.is_infinite()) {
        report.warnings.push_back(
            "infinite confidence region: the data carry little information about the effect (weak instrument)");
    } else if (report.region.kind == ConfidenceRegion::Kind::Empty) {
        report.warnings.push_back(options.region == RegionMethod::Permutation
                                      ? "empty confidence region: effect homogeneity across clusters is doubtful"
                                      : "empty confidence region");
    }
    return report;
}

}  // namespace crtiv
