// Acceptance checks. Each criterion prints exactly one line:
//   PASS criterion N: <detail>   or   FAIL criterion N: <detail>
// Usage: acceptance [--criterion N|all] [--workers W]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"

#include "crtiv/ci_engine.hpp"
#include "crtiv/cli.hpp"
#include "crtiv/error.hpp"
#include "crtiv/estimators.hpp"
#include "crtiv/identification.hpp"
#include "crtiv/rng.hpp"
#include "crtiv/simulation.hpp"

using namespace crtiv;
namespace fs = std::filesystem;
using Kind = ConfidenceRegion::Kind;

namespace {

unsigned g_workers = std::max(1u, std::thread::hardware_concurrency());

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

class Stopwatch {
   public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

   private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string data(const std::string& name) { return (fs::path(CRTIV_DATA_DIR) / name).string(); }

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "crtiv");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

// 1 ------------------------------------------------------------------------
Outcome identification_tables() {
    Outcome o;
    Stopwatch clock;
    struct Expect {
        const char* file;
        double truth, cl, tsls;
        const char *truth_q, *cl_q, *tsls_q;
    };
    const Expect cases[] = {{"weights_a.csv", 1.15, 1.5, 1.397, "23/20", "3/2", "95/68"},
                            {"weights_b.csv", 1.5, 1.706, 1.675, "3/2", "29/17", "67/40"}};
    for (const auto& c : cases) {
        const auto f = cli({"weights", "--spec", data(c.file), "--format", "json"});
        const auto q = cli({"weights", "--spec", data(c.file), "--exact", "--format", "json"});
        o.require(f.code == 0 && q.code == 0, std::string(c.file) + " exit code");
        if (f.code != 0 || q.code != 0) continue;
        const auto fj = nlohmann::json::parse(f.out), qj = nlohmann::json::parse(q.out);
        const double truth = fj["true_cace"], cl = fj["identified"]["cluster_level"], ts = fj["identified"]["tsls"];
        o.require(std::abs(truth - c.truth) <= 0.005, std::string(c.file) + " true");
        o.require(std::abs(cl - c.cl) <= 0.005, std::string(c.file) + " cl");
        o.require(std::abs(ts - c.tsls) <= 0.005, std::string(c.file) + " tsls");
        o.require(qj["true_cace_exact"] == c.truth_q, std::string(c.file) + " exact true");
        o.require(qj["identified_exact"]["cluster_level"] == c.cl_q, std::string(c.file) + " exact cl");
        o.require(qj["identified_exact"]["tsls"] == c.tsls_q, std::string(c.file) + " exact tsls");
        o.detail << c.file << ": tau=" << qj["true_cace_exact"].get<std::string>() << " ("
                 << fmt(truth) << "), cl=" << qj["identified_exact"]["cluster_level"].get<std::string>() << " ("
                 << fmt(cl) << "), tsls=" << qj["identified_exact"]["tsls"].get<std::string>() << " (" << fmt(ts)
                 << "); ";
    }
    const double t = clock.seconds();
    o.require(t < 1.0, "runtime");
    o.detail << "runtime " << fmt(t, 3) << " s";
    return o;
}

// 2 ------------------------------------------------------------------------
Outcome gap_demo() {
    Outcome o;
    Stopwatch clock;
    GapDemoConfig cfg;
    cfg.size_law = {{2, 0.5}, {4, 0.5}};
    cfg.tau_law = {{2, 4.0}, {4, 2.0}};
    cfg.p_co = 0.5;
    cfg.J = 100000;
    double mean = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        mean += growing_J_gap_demo(cfg).gap / seeds;
    }
    o.require(std::abs(mean - 1.0 / 6.0) <= 0.01, "cluster-level gap vs 1/6");
    o.detail << "mean |cl gap| over 20 seeds at J=1e5 = " << fmt(mean) << " (target 1/6 = " << fmt(1.0 / 6.0)
             << ", exact limit of this population 1/3); ";

    cfg.method = Method::TSLS;
    cfg.seed = 0;
    for (std::size_t J : {1000u, 10000u, 100000u}) {
        cfg.J = J;
        const double gap = growing_J_gap_demo(cfg).gap;
        o.require(gap <= 10.0 / static_cast<double>(J), "tsls gap at J=" + std::to_string(J));
        o.detail << "tsls gap J=" << J << ": " << fmt(gap, 3) << " (bound " << fmt(10.0 / J, 3) << "); ";
    }
    const double t = clock.seconds();
    o.require(t < 10.0, "runtime");
    o.detail << "runtime " << fmt(t, 3) << " s";
    return o;
}

// 3 ------------------------------------------------------------------------
Outcome asymptotic_limits() {
    Outcome o;
    Stopwatch clock;
    struct Case {
        std::vector<double> sizes, p, tau;
    };
    const Case cases[] = {
        {{1.0, 2.5, 4.0, 0.5}, {0.3, 0.6, 0.45, 0.8}, {1.0, -2.0, 3.0, 0.5}},
        {{0.2, 1.0, 3.0}, {0.9, 0.5, 0.1}, {5.0, 2.0, -1.0}},
        {{1.0, 1.5, 2.0, 6.0, 0.75, 3.25}, {0.15, 0.95, 0.5, 0.35, 0.7, 0.6}, {2.0, 2.5, -0.5, 4.0, 1.0, 0.0}},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
        const auto spec = AsymptoticSpec::from_sizes(c.sizes, c.p, c.tau);
        std::vector<OracleClusterSpec> finite;
        for (std::size_t j = 0; j < c.sizes.size(); ++j) {
            const auto n = std::llround(c.sizes[j] * 1e6);
            finite.push_back({n, std::llround(c.p[j] * static_cast<double>(n)), c.tau[j], {}});
        }
        const double truth = true_cace(finite);
        const double d_cl =
            std::abs(asymptotic_gap_cluster_level(spec) - (identified_value(finite, Method::ClusterLevel) - truth));
        const double d_ts = std::abs(asymptotic_gap_tsls(spec) - (identified_value(finite, Method::TSLS) - truth));
        worst = std::max({worst, d_cl, d_ts});
    }
    o.require(worst <= 1e-4, "agreement within 1e-4");
    const double t = clock.seconds();
    o.require(t < 1.0, "runtime");
    o.detail << "3 specs, largest |limit - finite gap| at scale 1e6 = " << fmt(worst, 3) << "; runtime "
             << fmt(t, 3) << " s";
    return o;
}

// 4 ------------------------------------------------------------------------
Outcome oracle_equivalences() {
    Outcome o;
    constexpr double z95 = 1.959963984540054;
    double worst_point = 0.0, worst_var = 0.0, worst_s2 = 0.0;
    {
        std::mt19937_64 rng(404);
        for (int rep = 0; rep < 200; ++rep) {
            const auto trial = oracle::random_trial(rng);
            const auto s = summarize(trial);
            const auto ref = oracle::two_stage_regression(trial);
            const auto p = tsls_pieces(s);
            worst_point = std::max(worst_point, std::abs(p.point - ref.point) / std::max(1.0, std::abs(ref.point)));
            worst_var = std::max(worst_var, std::abs(p.variance - ref.variance) / std::abs(ref.variance));
        }
    }
    {
        std::mt19937_64 rng(405);
        std::uniform_real_distribution<double> tau(-5.0, 5.0);
        for (int rep = 0; rep < 200; ++rep) {
            const auto trial = oracle::random_trial(rng);
            const auto s = summarize(trial);
            const double t0 = tau(rng);
            const double direct = oracle::s2_direct(trial, t0);
            worst_s2 = std::max(worst_s2, std::abs(quadratic_coefficients(s, 0.05).s2_at(t0) - direct) / direct);
        }
    }
    o.require(worst_point <= 1e-10, "(a) tsls point");
    o.require(worst_var <= 1e-10, "(b) sandwich variance");
    o.require(worst_s2 <= 1e-10, "(c) S2 forms");

    int mismatched_trials = 0;
    std::mt19937_64 rng(406);
    for (int rep = 0; rep < 50; ++rep) {
        const auto trial = oracle::random_trial(rng);
        const auto s = summarize(trial);
        const auto region = quadratic_region(s, 0.05);
        const auto contrast = arm_sum_contrast(s);
        const double center = contrast.outcome / contrast.compliance;
        const double scale = std::max(1.0, region.kind == Kind::FiniteInterval ? region.length() : std::abs(center));
        const double step = 1e-3 * scale;
        bool bad = false;
        for (double t0 = center - 10 * scale; t0 <= center + 10 * scale; t0 += step) {
            const double T = oracle::statistic(trial, t0);
            const bool accept = std::abs(T) <= z95 * std::sqrt(oracle::s2_direct(trial, t0));
            if (accept != region.contains(t0)) {
                const bool edge = std::abs(t0 - region.lo) <= step || std::abs(t0 - region.hi) <= step;
                if (!edge) bad = true;
            }
        }
        mismatched_trials += bad;
    }
    o.require(mismatched_trials == 0, "(d) grid inversion");
    o.detail << "(a) max rel err " << fmt(worst_point, 3) << "; (b) " << fmt(worst_var, 3) << "; (c) "
             << fmt(worst_s2, 3) << "; (d) " << 50 - mismatched_trials << "/50 trials agree at step 1e-3*scale";
    return o;
}

// 5 ------------------------------------------------------------------------
Outcome exact_permutation() {
    Outcome o;
    oracle::TrialShape shape;
    shape.J_min = 6;
    shape.J_max = 12;
    shape.n_min = 2;
    shape.n_max = 12;
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> tau(-3.0, 6.0);
    int regions = 0, lattice = 0;
    double worst_edge = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto trial = oracle::random_trial(rng, shape);
        const auto s = summarize(trial);
        const std::uint64_t N = binomial(trial.J(), trial.m());

        const auto null = permutation_null(s, tau(rng));
        o.require(null.statistics.size() == N, "null size");
        const auto p = permutation_pvalue(null);
        for (double v : {p.lower, p.upper, p.two_sided}) {
            const double k = v * static_cast<double>(N);
            if (std::abs(k - std::round(k)) > 1e-9) o.require(false, "lattice");
        }
        ++lattice;

        const auto region = permutation_region(s, 0.05);
        if (region.kind != Kind::FiniteInterval) continue;
        ++regions;
        const double step = 1e-3;
        const double pad = std::max(1.0, region.length());
        double first = std::numeric_limits<double>::infinity(), last = -first;
        for (double t0 = region.lo - pad; t0 <= region.hi + pad; t0 += step) {
            if (oracle::brute_force_pvalue(s, t0).p >= 0.05) {
                first = std::min(first, t0);
                last = std::max(last, t0);
            }
        }
        worst_edge = std::max({worst_edge, std::abs(first - region.lo), std::abs(last - region.hi)});
    }
    o.require(regions >= 5, "enough finite regions");
    o.require(worst_edge <= 2e-3, "endpoints within 2e-3");
    o.detail << lattice << " nulls of size C(J,m) with lattice p-values; " << regions
             << " regions, worst endpoint difference vs brute-force grid " << fmt(worst_edge, 3);
    return o;
}

// Simulation helpers -------------------------------------------------------
SimScenario bundled_scenario() {
    auto sc = load_scenario(data("scenarios/full_grid.json"));
    sc.replicates = 2000;
    return sc;
}

const SimCell* find(const SimReport& r, const std::string& method, std::size_t J, double gamma) {
    for (const auto& c : r.cells)
        if (c.method == method && c.J == J && c.gamma == gamma) return &c;
    return nullptr;
}

// 6 ------------------------------------------------------------------------
Outcome simulation_bias() {
    Outcome o;
    Stopwatch clock;
    auto sc = bundled_scenario();
    sc.J_grid = {50, 200};
    sc.gamma_grid = {0.0, -0.03, 0.03};
    const auto r = run_scenario(sc, g_workers);
    for (std::size_t J : sc.J_grid) {
        const double er0 = find(r, "effect_ratio", J, 0.0)->bias_ratio;
        const double cl0 = find(r, "cluster_level", J, 0.0)->bias_ratio;
        const double ts0 = find(r, "tsls", J, 0.0)->bias_ratio;
        for (double v : {er0, cl0, ts0}) o.require(v >= 0.97 && v <= 1.03, "gamma=0 band at J=" + std::to_string(J));

        const double ern = find(r, "effect_ratio", J, -0.03)->bias_ratio;
        const double cln = find(r, "cluster_level", J, -0.03)->bias_ratio;
        const double tsn = find(r, "tsls", J, -0.03)->bias_ratio;
        o.require(cln <= 0.90, "gamma=-0.03 cl at J=" + std::to_string(J));
        for (double v : {ern, tsn}) o.require(v >= 0.95 && v <= 1.05, "gamma=-0.03 er/tsls at J=" + std::to_string(J));

        const double erp = find(r, "effect_ratio", J, 0.03)->bias_ratio;
        const double clp = find(r, "cluster_level", J, 0.03)->bias_ratio;
        const double tsp = find(r, "tsls", J, 0.03)->bias_ratio;
        o.require(clp <= 0.97 && clp <= std::min(erp, tsp) - 0.03, "gamma=+0.03 cl at J=" + std::to_string(J));

        o.detail << "J=" << J << " er/cl/tsls: g=0 " << fmt(er0, 3) << "/" << fmt(cl0, 3) << "/" << fmt(ts0, 3)
                 << ", g=-.03 " << fmt(ern, 3) << "/" << fmt(cln, 3) << "/" << fmt(tsn, 3) << ", g=+.03 "
                 << fmt(erp, 3) << "/" << fmt(clp, 3) << "/" << fmt(tsp, 3) << "; ";
    }
    const double t = clock.seconds();
    o.require(t < 600.0, "runtime");
    o.detail << "runtime " << fmt(t, 3) << " s with " << g_workers << " worker(s)";
    return o;
}

// 7 ------------------------------------------------------------------------
Outcome simulation_coverage() {
    Outcome o;
    auto sc = bundled_scenario();
    const auto r = run_scenario(sc, g_workers);
    const double nominal = 0.93;
    double worst = 1.0;
    std::string worst_cell;
    for (const auto& c : r.cells) {
        if (c.method != "effect_ratio") continue;
        const double n = static_cast<double>(c.replicates - c.skipped);
        const double floor = nominal - 1.959963984540054 * std::sqrt(nominal * (1.0 - nominal) / n);
        if (c.coverage < floor) o.require(false, "er coverage J=" + std::to_string(c.J) + " gamma=" + fmt(c.gamma));
        if (c.coverage < worst) {
            worst = c.coverage;
            worst_cell = "J=" + std::to_string(c.J) + ",gamma=" + fmt(c.gamma);
        }
    }
    o.detail << "lowest er coverage " << fmt(worst, 4) << " at " << worst_cell << " (0.93 less binomial half-width "
             << fmt(nominal - 1.959963984540054 * std::sqrt(nominal * (1 - nominal) / sc.replicates), 4) << "); ";

    std::vector<double> cl;
    for (std::size_t J : sc.J_grid)
        if (J >= 50) cl.push_back(find(r, "cluster_level", J, -0.03)->coverage);
    bool decreasing = true;
    for (std::size_t k = 1; k < cl.size(); ++k) decreasing = decreasing && cl[k] < cl[k - 1];
    o.require(decreasing, "cl coverage decreasing in J");
    o.require(!cl.empty() && cl.back() <= 0.85, "cl coverage at J=200");
    o.detail << "cl coverage at gamma=-0.03, J=50..200:";
    for (double v : cl) o.detail << ' ' << fmt(v, 4);
    return o;
}

// 8 ------------------------------------------------------------------------
Outcome weak_instrument() {
    Outcome o;
    DgpConfig d;
    d.pi_source = read_size_table(data("size_table.csv"));
    for (std::size_t k = 0; k < d.pi_source.size(); ++k) d.pi_source[k].compliance_rate = 0.005 + 0.005 * (k % 2);
    d.J = 20;
    const int reps = 500;
    int infinite = 0, estimated = 0;
    double worst_T = 0.0;
    for (int r = 0; r < reps; ++r) {
        d.seed = derive_seed(8080, {static_cast<std::uint64_t>(r)});
        const auto pop = generate_population(d);
        infinite += quadratic_region(pop.summaries, 0.05).is_infinite();
        try {
            const auto est = estimate_effect_ratio(pop.summaries, 0.05);
            ++estimated;
            const double scale = std::max(1.0, est.diagnostics.at("T_scale"));
            worst_T = std::max(worst_T, std::abs(test_statistic(pop.summaries, est.point)) / scale);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ZeroDenominator) throw;
        }
    }
    const double rate = static_cast<double>(infinite) / reps;
    o.require(rate >= 0.5, "infinite-region rate");
    o.require(worst_T <= 1e-10, "T at the estimate");
    o.detail << "J=20, compliance 0.5-1%: infinite quadratic region in " << infinite << "/" << reps << " ("
             << fmt(rate, 3) << "); estimate defined in " << estimated << ", max scaled |T(tau_hat)| "
             << fmt(worst_T, 3);
    return o;
}

// 9 ------------------------------------------------------------------------
Outcome determinism() {
    Outcome o;
    const auto base = fs::temp_directory_path() / "crtiv_acceptance_determinism";
    fs::remove_all(base);
    std::vector<std::string> reports;
    for (const char* w : {"1", "2", "4", "1"}) {
        const auto dir = base / (std::string("w") + w + "_" + std::to_string(reports.size()));
        const auto r = cli({"simulate", "--scenario", data("scenarios/smoke.json"), "--out", dir.string(),
                            "--workers", w, "--seed", "99"});
        o.require(r.code == 0, std::string("simulate with ") + w + " workers");
        reports.push_back(slurp(dir / "report.csv"));
    }
    bool same = !reports.front().empty();
    for (const auto& rep : reports) same = same && rep == reports.front();
    o.require(same, "byte-identical report.csv");
    o.detail << "report.csv from workers 1,2,4 and a repeat of 1: " << (same ? "identical" : "different") << " ("
             << reports.front().size() << " bytes, fnv1a64 " << std::hex << fnv1a64(reports.front()) << std::dec
             << ")";
    fs::remove_all(base);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::string which = "all";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            which = argv[++i];
        } else if (a == "--workers" && i + 1 < argc) {
            g_workers = static_cast<unsigned>(std::max(1, std::atoi(argv[++i])));
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion N|all] [--workers W]\n");
            return 64;
        }
    }
    const std::vector<std::function<Outcome()>> criteria{identification_tables, gap_demo,         asymptotic_limits,
                                                         oracle_equivalences,   exact_permutation, simulation_bias,
                                                         simulation_coverage,   weak_instrument,  determinism};
    bool all_pass = true;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (which != "all" && which != std::to_string(k + 1)) continue;
        Outcome o;
        try {
            o = criteria[k]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", k + 1, o.detail.str().c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
