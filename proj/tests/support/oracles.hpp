#pragma once
// Reference implementations used only by tests. They are written from the
// textbook definitions, unit level where possible, and share no code with the
// library beyond the data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crtiv/data_model.hpp"

namespace oracle {

using crtiv::Cluster;
using crtiv::ClusterSummary;
using crtiv::ClusterTrial;

struct TrialShape {
    std::size_t J_min = 6;
    std::size_t J_max = 30;
    int n_min = 2;
    int n_max = 25;
    double effect = 1.5;
};

// Random trial with one-sided noncompliance, heterogeneous sizes and
// compliance, and at least two clusters per arm.
inline ClusterTrial random_trial(std::mt19937_64& rng, const TrialShape& shape = {}) {
    std::uniform_int_distribution<std::size_t> pickJ(shape.J_min, shape.J_max);
    const std::size_t J = pickJ(rng);
    std::uniform_int_distribution<std::size_t> pickm(2, J - 2);
    const std::size_t m = pickm(rng);
    std::vector<int> z(J, 0);
    std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(m), 1);
    std::shuffle(z.begin(), z.end(), rng);

    std::uniform_int_distribution<int> pickn(shape.n_min, shape.n_max);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Cluster> clusters(J);
    for (std::size_t j = 0; j < J; ++j) {
        clusters[j].id = "r" + std::to_string(j);
        clusters[j].z = z[j];
        const int n = pickn(rng);
        const double pi = 0.2 + 0.7 * unif(rng);
        const double c = noise(rng);
        const double tau_j = shape.effect + 0.5 * noise(rng);
        for (int i = 0; i < n; ++i) {
            const bool complier = unif(rng) < pi;
            const int d = z[j] && complier ? 1 : 0;
            clusters[j].units.push_back({d, 1.0 + c + tau_j * d + noise(rng)});
        }
    }
    // Guarantee a non-zero compliance contrast.
    for (auto& c : clusters) {
        if (c.z == 1) {
            c.units.front().d = 1;
            break;
        }
    }
    return ClusterTrial(std::move(clusters));
}

using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 inverse(const Mat2& a) {
    const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    return {{{a[1][1] / det, -a[0][1] / det}, {-a[1][0] / det, a[0][0] / det}}};
}

inline Mat2 multiply(const Mat2& a, const Mat2& b) {
    Mat2 c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

struct TwoStage {
    double point = 0.0;
    double variance = 0.0;
};

// Explicit two-stage least squares on the unit-level design:
// first stage D ~ [1, Z], second stage Y ~ [1, D-hat], with the cluster
// sandwich bread^-1 (sum_j g_j g_j') bread^-1, g_j = sum_i x-hat_ji u_ji and
// u_ji = Y_ji - D_ji tau.
inline TwoStage two_stage_regression(const ClusterTrial& trial) {
    struct Row {
        std::size_t cluster;
        double z, d, y;
    };
    std::vector<Row> rows;
    for (std::size_t j = 0; j < trial.clusters().size(); ++j) {
        const auto& c = trial.clusters()[j];
        for (const auto& u : c.units) rows.push_back({j, static_cast<double>(c.z), static_cast<double>(u.d), u.y});
    }
    // First stage by normal equations.
    Mat2 zz{};
    std::array<double, 2> zd{};
    for (const auto& r : rows) {
        const double x[2] = {1.0, r.z};
        for (int i = 0; i < 2; ++i) {
            zd[i] += x[i] * r.d;
            for (int k = 0; k < 2; ++k) zz[i][k] += x[i] * x[k];
        }
    }
    const Mat2 zzi = inverse(zz);
    const double g0 = zzi[0][0] * zd[0] + zzi[0][1] * zd[1];
    const double g1 = zzi[1][0] * zd[0] + zzi[1][1] * zd[1];

    Mat2 xx{};
    std::array<double, 2> xy{};
    std::vector<double> dhat(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        dhat[k] = g0 + g1 * rows[k].z;
        const double x[2] = {1.0, dhat[k]};
        for (int i = 0; i < 2; ++i) {
            xy[i] += x[i] * rows[k].y;
            for (int l = 0; l < 2; ++l) xx[i][l] += x[i] * x[l];
        }
    }
    const Mat2 bread = inverse(xx);
    TwoStage out;
    out.point = bread[1][0] * xy[0] + bread[1][1] * xy[1];

    const std::size_t J = trial.clusters().size();
    std::vector<std::array<double, 2>> score(J, {0.0, 0.0});
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double u = rows[k].y - rows[k].d * out.point;
        score[rows[k].cluster][0] += u;
        score[rows[k].cluster][1] += dhat[k] * u;
    }
    Mat2 meat{};
    for (const auto& g : score)
        for (int i = 0; i < 2; ++i)
            for (int l = 0; l < 2; ++l) meat[i][l] += g[i] * g[l];
    out.variance = multiply(multiply(bread, meat), bread)[1][1];
    return out;
}

// T(tau0) straight from the unit-level data.
inline double statistic(const ClusterTrial& trial, double tau0) {
    double t1 = 0.0, t0 = 0.0;
    for (const auto& c : trial.clusters()) {
        double a = 0.0;
        for (const auto& u : c.units) a += u.y - tau0 * u.d;
        (c.z ? t1 : t0) += a;
    }
    const double m = static_cast<double>(trial.m());
    return t1 / m - t0 / (static_cast<double>(trial.J()) - m);
}

// S^2(tau0) from the adjusted responses with per-arm divisors.
inline double s2_direct(const ClusterTrial& trial, double tau0) {
    std::vector<double> a1, a0;
    for (const auto& c : trial.clusters()) {
        double a = 0.0;
        for (const auto& u : c.units) a += u.y - tau0 * u.d;
        (c.z ? a1 : a0).push_back(a);
    }
    auto part = [](const std::vector<double>& v) {
        const double k = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x / k;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return ss / (k * (k - 1.0));
    };
    return part(a1) + part(a0);
}

// Two-sided p-value of T(tau0) over every assignment of m treated clusters,
// enumerated as bitmasks. Ties within 1e-12 of the observed value count in
// both tails.
struct PermP {
    double p = 1.0;
    double lower = 1.0;
    double upper = 1.0;
    std::uint64_t count = 0;
    std::uint64_t lower_count = 0;
    std::uint64_t upper_count = 0;
};

inline PermP brute_force_pvalue(const std::vector<ClusterSummary>& s, double tau0) {
    const std::size_t J = s.size();
    std::size_t m = 0;
    double total = 0.0;
    std::vector<double> a(J);
    for (std::size_t j = 0; j < J; ++j) {
        a[j] = s[j].y_sum - tau0 * s[j].d_sum;
        total += a[j];
        m += s[j].z;
    }
    const double dm = static_cast<double>(m), dc = static_cast<double>(J - m);
    auto stat = [&](double treated) { return treated / dm - (total - treated) / dc; };
    double obs_t = 0.0;
    for (std::size_t j = 0; j < J; ++j)
        if (s[j].z) obs_t += a[j];
    const double obs = stat(obs_t);

    std::vector<double> all;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << J); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) != m) continue;
        double t = 0.0;
        for (std::size_t j = 0; j < J; ++j)
            if (mask >> j & 1) t += a[j];
        all.push_back(stat(t));
    }
    double scale = 1.0;
    for (double v : all) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * scale;
    PermP p;
    p.count = all.size();
    for (double v : all) {
        if (v <= obs + tol) ++p.lower_count;
        if (v >= obs - tol) ++p.upper_count;
    }
    p.lower = static_cast<double>(p.lower_count) / static_cast<double>(p.count);
    p.upper = static_cast<double>(p.upper_count) / static_cast<double>(p.count);
    p.p = std::min(1.0, 2.0 * std::min(p.lower, p.upper));
    return p;
}

// One-way ANOVA estimator of the intraclass correlation for groups of
// possibly unequal size.
inline double anova_icc(const std::vector<std::vector<double>>& groups) {
    double N = 0.0, grand = 0.0, sum_n2 = 0.0;
    for (const auto& g : groups) {
        N += static_cast<double>(g.size());
        sum_n2 += static_cast<double>(g.size()) * static_cast<double>(g.size());
        for (double v : g) grand += v;
    }
    grand /= N;
    const double k = static_cast<double>(groups.size());
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double mean = 0.0;
        for (double v : g) mean += v;
        mean /= static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
        for (double v : g) ssw += (v - mean) * (v - mean);
    }
    const double msb = ssb / (k - 1.0);
    const double msw = ssw / (N - k);
    const double n0 = (N - sum_n2 / N) / (k - 1.0);
    return (msb - msw) / (msb + (n0 - 1.0) * msw);
}

}  // namespace oracle
