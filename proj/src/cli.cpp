#include "crtiv/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crtiv/error.hpp"
#include "crtiv/estimators.hpp"
#include "crtiv/identification.hpp"
#include "crtiv/simulation.hpp"

namespace crtiv {

namespace {

using json = nlohmann::json;

std::string fmt_double(double v, int precision = 10) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
    if (!std::isfinite(v)) return fmt_double(v);
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// JSON has no infinities; endpoints are written as strings in that case.
json json_number(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::string to_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Manifest {
    std::string command;
    std::map<std::string, std::string> options;
    std::map<std::string, std::string> digests;
    std::vector<std::uint64_t> seeds;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    double elapsed_seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    json to_json() const {
        json j;
        j["command"] = command;
        j["options"] = options;
        j["input_digests"] = digests;
        j["seeds"] = seeds;
        j["tool_version"] = std::string(kToolVersion);
        j["wall_clock_seconds"] = elapsed_seconds();
        return j;
    }

    void to_text(std::ostream& out, const char* prefix = "") const {
        out << prefix << "manifest:\n";
        out << prefix << "  command: " << command << '\n';
        for (const auto& [k, v] : options) out << prefix << "  option " << k << ": " << v << '\n';
        for (const auto& [k, v] : digests) out << prefix << "  fnv1a64 " << k << ": " << v << '\n';
        for (auto s : seeds) out << prefix << "  seed: " << s << '\n';
        out << prefix << "  tool_version: " << kToolVersion << '\n';
        out << prefix << "  wall_clock_seconds: " << fmt_double(elapsed_seconds(), 4) << '\n';
    }
};

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("CRTIV_SEED");
    if (s == nullptr || *s == '\0') return std::nullopt;
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') {
        throw Error(ErrorCode::InvalidInput, std::string("CRTIV_SEED is not an unsigned integer: '") + s + "'");
    }
    return v;
}

struct EstimateArgs {
    std::string data;
    std::string method = "er";
    std::string ci;
    double alpha = 0.05;
    std::uint64_t perm_cap = 2'000'000;
    std::uint64_t perm_draws = 0;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::string format = "text";
};

struct WeightsArgs {
    std::string spec;
    bool exact = false;
    std::string format = "text";
};

struct SimulateArgs {
    std::string scenario;
    std::string out_dir;
    unsigned workers = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
};

void print_estimate(const EstimateReport& r, const std::string& ci, const Manifest& manifest, const std::string& format,
                    std::ostream& out) {
    if (format == "json") {
        json j;
        j["method"] = std::string(method_tag(r.method));
        j["ci"] = ci;
        j["alpha"] = r.alpha;
        j["point"] = json_number(r.point);
        j["variance"] = r.variance ? json_number(*r.variance) : json(nullptr);
        j["region"] = {{"kind", std::string(kind_tag(r.region.kind))},
                       {"label", std::string(kind_label(r.region.kind))},
                       {"lo", json_number(r.region.lo)},
                       {"hi", json_number(r.region.hi)},
                       {"alpha", r.region.alpha}};
        json diag = json::object();
        for (const auto& [k, v] : r.diagnostics) diag[k] = json_number(v);
        j["diagnostics"] = diag;
        j["warnings"] = r.warnings;
        j["manifest"] = manifest.to_json();
        out << j.dump(2) << '\n';
        return;
    }
    if (format == "csv") {
        out << "key,value\n";
        out << "method," << method_tag(r.method) << '\n';
        out << "ci," << ci << '\n';
        out << "alpha," << shortest(r.alpha) << '\n';
        out << "point," << shortest(r.point) << '\n';
        out << "variance," << (r.variance ? shortest(*r.variance) : "") << '\n';
        out << "region_kind," << kind_tag(r.region.kind) << '\n';
        out << "region_lo," << shortest(r.region.lo) << '\n';
        out << "region_hi," << shortest(r.region.hi) << '\n';
        for (const auto& [k, v] : r.diagnostics) out << "diag_" << k << ',' << shortest(v) << '\n';
        for (const auto& w : r.warnings) out << "warning,\"" << w << "\"\n";
        manifest.to_text(out, "# ");
        return;
    }
    out << "method:      " << method_tag(r.method) << '\n';
    out << "estimate:    " << fmt_double(r.point) << '\n';
    out << "variance:    " << (r.variance ? fmt_double(*r.variance) : std::string("not defined")) << '\n';
    out << "region:      " << format_region(r.region, 8) << "  (" << kind_label(r.region.kind) << ", " << ci
        << ", level " << fmt_double(1.0 - r.alpha, 6) << ")\n";
    out << "diagnostics:\n";
    for (const auto& [k, v] : r.diagnostics) out << "  " << k << ": " << fmt_double(v) << '\n';
    if (!r.warnings.empty()) {
        out << "warnings:\n";
        for (const auto& w : r.warnings) out << "  - " << w << '\n';
    }
    manifest.to_text(out);
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, std::vector<std::string>> allowed{
        {"cl", {"delta"}}, {"tsls", {"sandwich"}}, {"er", {"quadratic", "permutation"}}};
    const auto& ok = allowed.at(a.method);
    const std::string ci = a.ci.empty() ? ok.front() : a.ci;
    if (std::find(ok.begin(), ok.end(), ci) == ok.end()) {
        err << "error: --method " << a.method << " does not support --ci " << ci << "\n"
            << "usage: crtiv estimate --data <csv> --method {cl|tsls|er} --ci {delta|sandwich|quadratic|permutation}\n"
            << "       cl takes delta, tsls takes sandwich, er takes quadratic or permutation\n";
        return 1;
    }

    Manifest manifest;
    manifest.command = "estimate";
    manifest.options = {{"data", a.data},
                        {"method", a.method},
                        {"ci", ci},
                        {"alpha", shortest(a.alpha)},
                        {"format", a.format}};
    manifest.digests[a.data] = file_digest(a.data);

    std::vector<std::string> notices;
    IngestOptions ingest;
    ingest.on_warning = [&](std::string_view w) { notices.emplace_back(w); };
    const auto trial = ingest_csv(a.data, ingest);
    const auto summaries = summarize(trial);

    EstimateReport report;
    if (a.method == "cl") {
        report = estimate_cluster_level(summaries, a.alpha);
    } else if (a.method == "tsls") {
        report = estimate_tsls(summaries, a.alpha);
    } else {
        EffectRatioOptions opt;
        if (ci == "permutation") {
            opt.region = RegionMethod::Permutation;
            opt.permutation.cap = a.perm_cap;
            opt.permutation.workers = a.workers;
            opt.permutation.exhaustive = a.perm_draws == 0;
            opt.permutation.draws = a.perm_draws;
            std::uint64_t seed = 0;
            if (a.seed) {
                seed = *a.seed;
            } else if (auto s = env_seed()) {
                seed = *s;
            }
            opt.permutation.seed = seed;
            manifest.options["perm_cap"] = std::to_string(a.perm_cap);
            manifest.options["perm_draws"] = std::to_string(a.perm_draws);
            if (a.perm_draws > 0) manifest.seeds.push_back(seed);
        }
        report = estimate_effect_ratio(summaries, a.alpha, opt);
    }
    for (auto& n : notices) report.warnings.insert(report.warnings.begin(), "input: " + n);
    print_estimate(report, ci, manifest, a.format, out);
    return 0;
}

int cmd_weights(const WeightsArgs& a, std::ostream& out) {
    Manifest manifest;
    manifest.command = "weights";
    manifest.options = {{"spec", a.spec}, {"exact", a.exact ? "true" : "false"}, {"format", a.format}};
    manifest.digests[a.spec] = file_digest(a.spec);

    const Method methods[] = {Method::ClusterLevel, Method::TSLS};
    std::vector<std::string> truth_w, col_truth;
    std::string truth_str;
    std::map<Method, std::vector<std::string>> weight_str;
    std::map<Method, std::string> value_str, gap_str;
    std::map<Method, double> value_num, gap_num;
    std::vector<std::vector<std::string>> rows;  // n, n_co, tau
    double truth_num = 0.0;

    if (a.exact) {
        const auto specs = read_exact_spec_csv(a.spec);
        const Rational truth = exact_true_cace(specs);
        truth_str = truth.str();
        truth_num = truth.to_double();
        for (auto& w : exact_method_weights(specs, Method::EffectRatio)) truth_w.push_back(w.str());
        for (auto m : methods) {
            for (auto& w : exact_method_weights(specs, m)) weight_str[m].push_back(w.str());
            const Rational v = exact_identified_value(specs, m);
            value_str[m] = v.str();
            gap_str[m] = (v - truth).str();
            value_num[m] = v.to_double();
            gap_num[m] = (v - truth).to_double();
        }
        for (const auto& s : specs) rows.push_back({std::to_string(s.n), std::to_string(s.n_co), s.tau.str()});
    } else {
        const auto specs = read_spec_csv(a.spec);
        truth_num = true_cace(specs);
        truth_str = fmt_double(truth_num);
        for (double w : method_weights(specs, Method::EffectRatio)) truth_w.push_back(fmt_double(w, 6));
        for (auto m : methods) {
            for (double w : method_weights(specs, m)) weight_str[m].push_back(fmt_double(w, 6));
            value_num[m] = identified_value(specs, m);
            gap_num[m] = value_num[m] - truth_num;
            value_str[m] = fmt_double(value_num[m]);
            gap_str[m] = fmt_double(gap_num[m]);
        }
        for (const auto& s : specs) rows.push_back({std::to_string(s.n), std::to_string(s.n_co), fmt_double(s.tau)});
    }

    if (a.format == "json") {
        json j;
        j["exact"] = a.exact;
        j["true_cace"] = truth_num;
        if (a.exact) j["true_cace_exact"] = truth_str;
        j["weights"]["true"] = truth_w;
        for (auto m : methods) {
            const std::string tag(method_tag(m));
            j["identified"][tag] = value_num[m];
            j["gap"][tag] = gap_num[m];
            j["weights"][tag] = weight_str[m];
            if (a.exact) j["identified_exact"][tag] = value_str[m];
        }
        j["manifest"] = manifest.to_json();
        out << j.dump(2) << '\n';
        return 0;
    }
    if (a.format == "csv") {
        out << "quantity,method,value\n";
        out << "identified,true," << truth_str << '\n';
        for (auto m : methods) out << "identified," << method_tag(m) << ',' << value_str[m] << '\n';
        for (auto m : methods) out << "gap," << method_tag(m) << ',' << gap_str[m] << '\n';
        manifest.to_text(out, "# ");
        return 0;
    }

    char line[256];
    out << "true CACE: " << truth_str << '\n' << '\n';
    std::snprintf(line, sizeof line, "%-14s %-22s %-22s\n", "method", "identified", "gap (method - true)");
    out << line;
    std::snprintf(line, sizeof line, "%-14s %-22s %-22s\n", "true", truth_str.c_str(), "0");
    out << line;
    for (auto m : methods) {
        std::snprintf(line, sizeof line, "%-14s %-22s %-22s\n", std::string(method_tag(m)).c_str(),
                      value_str[m].c_str(), gap_str[m].c_str());
        out << line;
    }
    out << '\n';
    std::snprintf(line, sizeof line, "%-8s %6s %6s %10s %14s %14s %14s\n", "cluster", "n", "n_co", "tau", "w_true",
                  "w_cl", "w_tsls");
    out << line;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        std::snprintf(line, sizeof line, "%-8zu %6s %6s %10s %14s %14s %14s\n", j + 1, rows[j][0].c_str(),
                      rows[j][1].c_str(), rows[j][2].c_str(), truth_w[j].c_str(),
                      weight_str[Method::ClusterLevel][j].c_str(), weight_str[Method::TSLS][j].c_str());
        out << line;
    }
    out << '\n';
    manifest.to_text(out);
    return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    Manifest manifest;
    manifest.command = "simulate";
    manifest.digests[a.scenario] = file_digest(a.scenario);

    SimScenario scenario = load_scenario(a.scenario);
    if (a.seed) {
        scenario.dgp.seed = *a.seed;
    } else if (auto s = env_seed()) {
        scenario.dgp.seed = *s;
    }
    if (a.replicates) {
        scenario.replicates = *a.replicates;
        scenario.validate();
    }
    manifest.seeds.push_back(scenario.dgp.seed);
    manifest.options = {{"scenario", a.scenario},
                        {"out", a.out_dir},
                        {"workers", std::to_string(a.workers)},
                        {"replicates", std::to_string(scenario.replicates)},
                        {"alpha_level", shortest(scenario.alpha_level)},
                        {"tau", shortest(scenario.dgp.tau)},
                        {"alpha_intercept", shortest(scenario.dgp.alpha_intercept)},
                        {"beta", shortest(scenario.dgp.beta)},
                        {"lambda_icc", shortest(scenario.dgp.lambda_icc)},
                        {"error_df", shortest(scenario.dgp.error_df)},
                        {"treated_fraction", shortest(scenario.treated_fraction)},
                        {"truth", scenario.truth == TruthTarget::Realized ? "realized" : "superpopulation"},
                        {"permutation_draws", std::to_string(scenario.permutation_draws)},
                        {"pi_source_rows", std::to_string(scenario.dgp.pi_source.size())}};

    const auto report = run_scenario(scenario, a.workers);

    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw Error(ErrorCode::InvalidInput, "cannot create output directory '" + a.out_dir + "'");
    const std::filesystem::path dir(a.out_dir);
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error(ErrorCode::InvalidInput, "cannot write '" + p.string() + "'");
        return f;
    };
    {
        auto f = open(dir / "report.csv");
        write_report_csv(report, f);
    }
    {
        auto f = open(dir / "tables.txt");
        write_report_tables(report, f);
    }
    {
        auto f = open(dir / "manifest.json");
        f << manifest.to_json().dump(2) << '\n';
    }
    write_report_tables(report, out);
    out << '\n' << "wrote " << (dir / "report.csv").string() << ", " << (dir / "tables.txt").string() << ", "
        << (dir / "manifest.json").string() << '\n';
    return 0;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return to_hex(fnv1a64(ss.str()));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Complier average causal effects in cluster-randomized trials", "crtiv"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate the CACE from unit-level data");
    est->add_option("--data", ea.data, "CSV with cluster_id,z,d,y")->required()->check(CLI::ExistingFile);
    est->add_option("--method", ea.method, "Estimator")->check(CLI::IsMember({"cl", "tsls", "er"}));
    est->add_option("--ci", ea.ci, "Confidence region (defaults to the method's own)")
        ->check(CLI::IsMember({"delta", "sandwich", "quadratic", "permutation"}));
    est->add_option("--alpha", ea.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    est->add_option("--perm-cap", ea.perm_cap, "Largest C(J,m) enumerated exhaustively");
    est->add_option("--perm-draws", ea.perm_draws, "Monte Carlo assignments instead of enumeration");
    est->add_option("--seed", ea.seed, "Seed for Monte Carlo permutation draws (default: $CRTIV_SEED or 0)");
    est->add_option("--workers", ea.workers, "Threads for permutation enumeration")->check(CLI::Range(1u, 256u));
    est->add_option("--format", ea.format, "Output format")->check(CLI::IsMember({"text", "csv", "json"}));

    WeightsArgs wa;
    auto* wts = app.add_subcommand("weights", "Identification weights of each method on a known population");
    wts->add_option("--spec", wa.spec, "CSV with n,n_co,tau")->required()->check(CLI::ExistingFile);
    wts->add_flag("--exact", wa.exact, "Exact rational arithmetic");
    wts->add_option("--format", wa.format, "Output format")->check(CLI::IsMember({"text", "csv", "json"}));

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo scenario");
    sim->add_option("--scenario", sa.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", sa.out_dir, "Output directory")->required();
    sim->add_option("--workers", sa.workers, "Worker threads")->check(CLI::Range(1u, 1024u));
    sim->add_option("--seed", sa.seed, "Master seed (default: $CRTIV_SEED, then the scenario's seed)");
    sim->add_option("--replicates", sa.replicates, "Override the scenario's replicate count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*est) return cmd_estimate(ea, out, err);
        if (*wts) return cmd_weights(wa, out);
        return cmd_simulate(sa, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_statistical(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace crtiv
