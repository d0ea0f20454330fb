#include "crtiv/ci_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "crtiv/error.hpp"
#include "crtiv/normal.hpp"
#include "crtiv/rng.hpp"

namespace crtiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_two_per_arm(const Design& d) {
    if (d.m < 2 || d.J - d.m < 2) {
        throw Error(ErrorCode::DegenerateArm, "each arm needs at least two clusters (m=" + std::to_string(d.m) +
                                                  ", J-m=" + std::to_string(d.J - d.m) + ")");
    }
}

template <class Fn>
void parallel_for_chunks(std::uint64_t total, unsigned workers, Fn&& fn) {
    workers = std::max(1u, workers);
    if (workers == 1 || total < 2 * static_cast<std::uint64_t>(workers)) {
        fn(std::uint64_t{0}, total);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t begin = total * w / workers;
        const std::uint64_t end = total * (w + 1) / workers;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

std::vector<std::size_t> unrank_combination(std::uint64_t rank, std::size_t J, std::size_t m) {
    std::vector<std::size_t> c(m);
    std::size_t next = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t cand = next;; ++cand) {
            const std::uint64_t count = binomial(J - 1 - cand, m - 1 - i);
            if (rank < count) {
                c[i] = cand;
                next = cand + 1;
                break;
            }
            rank -= count;
        }
    }
    return c;
}

std::uint64_t rank_combination(const std::vector<std::size_t>& c, std::size_t J) {
    const std::size_t m = c.size();
    std::uint64_t rank = 0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t cand = next; cand < c[i]; ++cand) rank += binomial(J - 1 - cand, m - 1 - i);
        next = c[i] + 1;
    }
    return rank;
}

bool next_combination(std::vector<std::size_t>& c, std::size_t J) {
    const std::size_t m = c.size();
    std::size_t i = m;
    while (i > 0 && c[i - 1] == J - m + (i - 1)) --i;
    if (i == 0) return false;
    ++c[i - 1];
    for (std::size_t k = i; k < m; ++k) c[k] = c[k - 1] + 1;
    return true;
}

}  // namespace

double variance_s2(std::span<const ClusterSummary> summaries, double tau0) {
    const auto design = design_of(summaries);
    require_two_per_arm(design);
    const auto a = adjusted_responses(summaries, tau0);
    const double m = static_cast<double>(design.m);
    const double mc = static_cast<double>(design.J - design.m);
    double sum_T = 0.0, sum_C = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) (summaries[j].z == 1 ? sum_T : sum_C) += a[j];
    const double mean_T = sum_T / m;
    const double mean_C = sum_C / mc;
    double ss_T = 0.0, ss_C = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (summaries[j].z == 1) {
            ss_T += (a[j] - mean_T) * (a[j] - mean_T);
        } else {
            ss_C += (a[j] - mean_C) * (a[j] - mean_C);
        }
    }
    return ss_T / (m * (m - 1.0)) + ss_C / (mc * (mc - 1.0));
}

double QuadraticCoefficients::s2_at(double tau0) const noexcept {
    const double m_ = static_cast<double>(m);
    const double mc = static_cast<double>(J - m);
    const double vy = s2_y_T / m_ + s2_y_C / mc;
    const double vyd = s2_yd_T / m_ + s2_yd_C / mc;
    const double vd = s2_d_T / m_ + s2_d_C / mc;
    return vy - 2.0 * tau0 * vyd + tau0 * tau0 * vd;
}

QuadraticCoefficients quadratic_coefficients(std::span<const ClusterSummary> summaries, double alpha) {
    const auto design = design_of(summaries);
    require_two_per_arm(design);

    QuadraticCoefficients q;
    q.m = design.m;
    q.J = design.J;
    q.z = two_sided_critical(alpha);

    const double m = static_cast<double>(design.m);
    const double mc = static_cast<double>(design.J - design.m);
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
    const double my1 = y1 / m, my0 = y0 / mc, md1 = d1 / m, md0 = d0 / mc;
    for (const auto& s : summaries) {
        if (s.z == 1) {
            const double ey = s.y_sum - my1, ed = s.d_sum - md1;
            q.s2_y_T += ey * ey;
            q.s2_d_T += ed * ed;
            q.s2_yd_T += ey * ed;
        } else {
            const double ey = s.y_sum - my0, ed = s.d_sum - md0;
            q.s2_y_C += ey * ey;
            q.s2_d_C += ed * ed;
            q.s2_yd_C += ey * ed;
        }
    }
    q.s2_y_T /= m - 1.0;
    q.s2_d_T /= m - 1.0;
    q.s2_yd_T /= m - 1.0;
    q.s2_y_C /= mc - 1.0;
    q.s2_d_C /= mc - 1.0;
    q.s2_yd_C /= mc - 1.0;

    q.contrast_y = my1 - my0;
    q.contrast_d = md1 - md0;
    const double z2 = q.z * q.z;
    q.a = q.contrast_d * q.contrast_d - z2 * (q.s2_d_T / m + q.s2_d_C / mc);
    q.b = -(q.contrast_y * q.contrast_d - z2 * (q.s2_yd_T / m + q.s2_yd_C / mc));
    q.c = q.contrast_y * q.contrast_y - z2 * (q.s2_y_T / m + q.s2_y_C / mc);
    return q;
}

ConfidenceRegion solve_quadratic_region(double a, double b, double c, double alpha) {
    if (a == 0.0) {
        // Linear: 2 b tau + c <= 0.
        if (b == 0.0) return c <= 0.0 ? ConfidenceRegion::whole_line(alpha) : ConfidenceRegion::empty(alpha);
        const double root = -c / (2.0 * b);
        return b > 0.0 ? ConfidenceRegion::complement(root, kInf, alpha)
                       : ConfidenceRegion::complement(-kInf, root, alpha);
    }
    double disc = b * b - a * c;
    if (disc < 0.0 && disc >= -1e-12 * b * b) disc = 0.0;

    auto roots = [&](double d) {
        const double sq = std::sqrt(d);
        const double q = -(b + std::copysign(sq, b));
        double x1, x2;
        if (q != 0.0) {
            x1 = q / a;
            x2 = c / q;
        } else {
            x1 = x2 = -b / a;
        }
        return std::pair{std::min(x1, x2), std::max(x1, x2)};
    };

    if (a > 0.0) {
        if (disc < 0.0) return ConfidenceRegion::empty(alpha);
        const auto [lo, hi] = roots(disc);
        return ConfidenceRegion::finite(lo, hi, alpha);
    }
    if (disc <= 0.0) return ConfidenceRegion::whole_line(alpha);
    const auto [lo, hi] = roots(disc);
    return ConfidenceRegion::complement(lo, hi, alpha);
}

ConfidenceRegion quadratic_region(std::span<const ClusterSummary> summaries, double alpha) {
    const auto q = quadratic_coefficients(summaries, alpha);
    return solve_quadratic_region(q.a, q.b, q.c, alpha);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
    if (k > n) return 0;
    k = std::min(k, n - k);
    __uint128_t result = 1;
    for (std::uint64_t i = 0; i < k; ++i) {
        result = result * (n - i) / (i + 1);
        if (result > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(result);
}

AssignmentSums assignment_sums(std::span<const ClusterSummary> summaries, const PermutationOptions& options) {
    const auto design = design_of(summaries);
    if (design.m == 0 || design.m == design.J) {
        throw Error(ErrorCode::InvalidInput, "both arms must be non-empty");
    }
    const std::size_t J = design.J;
    const std::size_t m = design.m;

    std::vector<std::size_t> observed;
    for (std::size_t j = 0; j < J; ++j) {
        if (summaries[j].z == 1) observed.push_back(j);
    }

    AssignmentSums out;
    out.exhaustive = options.exhaustive;
    if (options.exhaustive) {
        const std::uint64_t total = binomial(J, m);
        if (total > options.cap) {
            throw Error(ErrorCode::CapExceeded, "C(" + std::to_string(J) + "," + std::to_string(m) +
                                                    ") assignments exceed the enumeration cap of " +
                                                    std::to_string(options.cap) + "; use Monte Carlo mode");
        }
        out.y.resize(total);
        out.d.resize(total);
        out.observed_index = rank_combination(observed, J);
        parallel_for_chunks(total, options.workers, [&](std::uint64_t begin, std::uint64_t end) {
            if (begin >= end) return;
            auto comb = unrank_combination(begin, J, m);
            for (std::uint64_t k = begin; k < end; ++k) {
                double sy = 0.0, sd = 0.0;
                for (auto j : comb) {
                    sy += summaries[j].y_sum;
                    sd += summaries[j].d_sum;
                }
                out.y[k] = sy;
                out.d[k] = sd;
                next_combination(comb, J);
            }
        });
        return out;
    }

    if (options.draws == 0) throw Error(ErrorCode::InvalidInput, "Monte Carlo mode needs at least one draw");
    out.draws = options.draws;
    out.seed = options.seed;
    out.y.resize(options.draws + 1);
    out.d.resize(options.draws + 1);
    out.observed_index = 0;
    for (auto j : observed) {
        out.y[0] += summaries[j].y_sum;
        out.d[0] += summaries[j].d_sum;
    }
    parallel_for_chunks(options.draws, options.workers, [&](std::uint64_t begin, std::uint64_t end) {
        std::vector<std::size_t> idx(J);
        for (std::uint64_t k = begin; k < end; ++k) {
            Xoshiro256 rng(derive_seed(options.seed, {k}));
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = 0; i < m; ++i) {
                const auto pick = i + static_cast<std::size_t>(rng.below(J - i));
                std::swap(idx[i], idx[pick]);
            }
            std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
            double sy = 0.0, sd = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                sy += summaries[idx[i]].y_sum;
                sd += summaries[idx[i]].d_sum;
            }
            out.y[k + 1] = sy;
            out.d[k + 1] = sd;
        }
    });
    return out;
}

PermutationNull permutation_null(std::span<const ClusterSummary> summaries, double tau0,
                                 const PermutationOptions& options) {
    const auto design = design_of(summaries);
    const auto sums = assignment_sums(summaries, options);
    const double m = static_cast<double>(design.m);
    const double mc = static_cast<double>(design.J - design.m);
    double total = 0.0;
    for (const auto& s : summaries) total += s.y_sum - s.d_sum * tau0;

    PermutationNull null;
    null.tau0 = tau0;
    null.exhaustive = sums.exhaustive;
    null.draws = sums.draws;
    null.seed = sums.seed;
    null.statistics.resize(sums.y.size());
    for (std::size_t k = 0; k < sums.y.size(); ++k) {
        const double treated = sums.y[k] - tau0 * sums.d[k];
        null.statistics[k] = treated / m - (total - treated) / mc;
    }
    null.observed = null.statistics[sums.observed_index];
    std::sort(null.statistics.begin(), null.statistics.end());
    return null;
}

PermutationPValue permutation_pvalue(const PermutationNull& null) {
    const auto& t = null.statistics;
    double scale = 1.0;
    if (!t.empty()) scale = std::max({scale, std::abs(t.front()), std::abs(t.back())});
    const double tol = 1e-12 * scale;
    // Statistics within tol of the observed value count as ties in both tails.
    const auto below = std::upper_bound(t.begin(), t.end(), null.observed + tol) - t.begin();
    const auto above = t.end() - std::lower_bound(t.begin(), t.end(), null.observed - tol);
    PermutationPValue p;
    p.count = t.size();
    const double N = static_cast<double>(t.size());
    p.lower = static_cast<double>(below) / N;
    p.upper = static_cast<double>(above) / N;
    p.two_sided = std::min(1.0, 2.0 * std::min(p.lower, p.upper));
    return p;
}

ConfidenceRegion permutation_region(const AssignmentSums& sums, std::span<const ClusterSummary> summaries,
                                    double alpha) {
    const double y_obs = sums.y[sums.observed_index];
    const double d_obs = sums.d[sums.observed_index];
    double y_scale = 1.0, d_scale = 1.0;
    for (const auto& s : summaries) {
        y_scale += std::abs(s.y_sum);
        d_scale += std::abs(s.d_sum);
    }
    const double y_tol = 1e-12 * y_scale;
    const double d_tol = 1e-12 * d_scale;

    // The sign of T_k(tau) - T_obs(tau) is the sign of dy - tau dd, where
    // dy, dd are differences of treated subset sums.
    //   dd > 0: counts as >= observed below the root, <= above it.
    //   dd < 0: the reverse.  Both tails at the root itself.
    struct Crossing {
        double root;
        int rising;   // dd > 0
        int falling;  // dd < 0
    };
    std::vector<Crossing> crossings;
    crossings.reserve(sums.y.size());
    std::uint64_t lower = 0, upper = 0;  // counts for tau -> -inf
    for (std::size_t k = 0; k < sums.y.size(); ++k) {
        const double dy = sums.y[k] - y_obs;
        const double dd = sums.d[k] - d_obs;
        if (std::abs(dd) <= d_tol) {
            if (dy <= y_tol) ++lower;
            if (dy >= -y_tol) ++upper;
        } else if (dd > 0.0) {
            ++upper;
            crossings.push_back({dy / dd, 1, 0});
        } else {
            ++lower;
            crossings.push_back({dy / dd, 0, 1});
        }
    }
    std::sort(crossings.begin(), crossings.end(), [](const Crossing& x, const Crossing& y) { return x.root < y.root; });

    const double N = static_cast<double>(sums.y.size());
    auto accepted = [&](std::uint64_t lo_count, std::uint64_t hi_count) {
        const double p = std::min(1.0, 2.0 * static_cast<double>(std::min(lo_count, hi_count)) / N);
        return p >= alpha;
    };

    double first = kInf, last = -kInf;
    auto accept_span = [&](double from, double to) {
        first = std::min(first, from);
        last = std::max(last, to);
    };

    if (accepted(lower, upper)) accept_span(-kInf, crossings.empty() ? kInf : crossings.front().root);
    std::size_t i = 0;
    while (i < crossings.size()) {
        const double root = crossings[i].root;
        std::uint64_t rising = 0, falling = 0;
        while (i < crossings.size() && crossings[i].root == root) {
            rising += crossings[i].rising;
            falling += crossings[i].falling;
            ++i;
        }
        if (accepted(lower + rising, upper + falling)) accept_span(root, root);
        lower = lower + rising - falling;
        upper = upper - rising + falling;
        const double next = i < crossings.size() ? crossings[i].root : kInf;
        if (accepted(lower, upper)) accept_span(root, next);
    }

    if (first > last) return ConfidenceRegion::empty(alpha);
    if (std::isinf(first) && std::isinf(last)) return ConfidenceRegion::whole_line(alpha);
    if (std::isinf(first)) return ConfidenceRegion::complement(last, kInf, alpha);
    if (std::isinf(last)) return ConfidenceRegion::complement(-kInf, first, alpha);
    return ConfidenceRegion::finite(first, last, alpha);
}

ConfidenceRegion permutation_region(std::span<const ClusterSummary> summaries, double alpha,
                                    const PermutationOptions& options) {
    return permutation_region(assignment_sums(summaries, options), summaries, alpha);
}

}  // namespace crtiv
