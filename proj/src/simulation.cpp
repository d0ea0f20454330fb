#include "crtiv/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "crtiv/ci_engine.hpp"
#include "crtiv/error.hpp"
#include "crtiv/estimators.hpp"
#include "crtiv/rng.hpp"

namespace crtiv {

namespace {

constexpr double kDefaultTreatedFraction = 112.0 / 157.0;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::InvalidInput, "scenario field '" + field + "': " + what);
}

// Student-t with unit scale; df = inf gives a standard normal.
class ErrorDraw {
   public:
    explicit ErrorDraw(double df) : normal_(df == std::numeric_limits<double>::infinity()), t_(normal_ ? 1.0 : df) {}
    double operator()(Xoshiro256& rng) { return normal_ ? n_(rng) : t_(rng); }

   private:
    bool normal_;
    std::student_t_distribution<double> t_;
    std::normal_distribution<double> n_;
};

struct Draw {
    std::vector<Cluster> clusters;  // filled only on request
    std::vector<ClusterSummary> summaries;
    std::vector<OracleClusterSpec> oracle;
    double true_cace = std::numeric_limits<double>::quiet_NaN();
};

Draw draw_population(const DgpConfig& dgp, bool keep_clusters, bool keep_units) {
    dgp.validate();
    const std::size_t J = dgp.J;
    const std::size_t m = dgp.treated_count();
    const auto scales = icc_calibrate(dgp.lambda_icc, dgp.error_df);
    Xoshiro256 rng(dgp.seed);
    ErrorDraw err(dgp.error_df);

    std::vector<std::size_t> order(J);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) std::swap(order[i], order[i + rng.below(J - i)]);
    std::vector<int> z(J, 0);
    for (std::size_t i = 0; i < m; ++i) z[order[i]] = 1;

    Draw out;
    out.summaries.resize(J);
    out.oracle.resize(J);
    if (keep_clusters) out.clusters.resize(J);

    std::vector<char> complier;
    std::vector<double> base;
    double effect_total = 0.0;
    std::int64_t compliers_total = 0;
    for (std::size_t j = 0; j < J; ++j) {
        const auto& row = dgp.pi_source[rng.below(dgp.pi_source.size())];
        const auto n = static_cast<std::size_t>(row.n);
        const double nd = static_cast<double>(row.n);
        const double c = scales.cluster_scale * err(rng);
        const double level = dgp.alpha_intercept + dgp.beta * nd + c;

        complier.assign(n, 0);
        base.assign(n, 0.0);
        std::int64_t n_co = 0;
        for (std::size_t i = 0; i < n; ++i) {
            complier[i] = rng.uniform() < row.compliance_rate ? 1 : 0;
            n_co += complier[i];
            base[i] = level + scales.unit_scale * err(rng);
        }
        const double effect = n_co > 0 ? dgp.tau + dgp.gamma * nd * nd / static_cast<double>(n_co) : 0.0;

        auto& s = out.summaries[j];
        s.n = n;
        s.z = z[j];
        auto& spec = out.oracle[j];
        spec.n = row.n;
        spec.n_co = n_co;
        spec.tau = effect;
        PotentialOutcomes po;
        if (keep_units) {
            po.y1.resize(n);
            po.y0.resize(n);
            po.d1.resize(n);
            po.d0.assign(n, 0);
        }
        if (keep_clusters) {
            out.clusters[j].id = "c" + std::to_string(j + 1);
            out.clusters[j].z = z[j];
            out.clusters[j].units.resize(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double y0 = base[i];
            const double y1 = complier[i] ? base[i] + effect : base[i];
            const int d = z[j] * complier[i];
            const double y = z[j] ? y1 : y0;
            s.y_sum += y;
            s.d_sum += d;
            if (keep_units) {
                po.y1[i] = y1;
                po.y0[i] = y0;
                po.d1[i] = complier[i];
            }
            if (keep_clusters) out.clusters[j].units[i] = {d, y};
        }
        s.y_bar = s.y_sum / nd;
        s.d_bar = s.d_sum / nd;
        if (keep_units) spec.units = std::move(po);
        effect_total += effect * static_cast<double>(n_co);
        compliers_total += n_co;
    }
    if (compliers_total > 0) out.true_cace = effect_total / static_cast<double>(compliers_total);
    return out;
}

double superpopulation_cace(const DgpConfig& dgp) {
    double n2 = 0.0, co = 0.0;
    for (const auto& r : dgp.pi_source) {
        const double n = static_cast<double>(r.n);
        n2 += n * n;
        co += r.compliance_rate * n;
    }
    return dgp.tau + dgp.gamma * n2 / co;
}

struct Outcome {
    bool ok = false;
    double estimate = 0.0;
    bool covered = false;
    bool infinite = false;
    double length = 0.0;
};

struct Replicate {
    double truth = std::numeric_limits<double>::quiet_NaN();
    std::vector<Outcome> outcomes;
};

template <class Fn>
Outcome evaluate(Fn&& fn, double truth) {
    Outcome o;
    try {
        const ConfidenceRegion region = fn(o.estimate);
        o.ok = std::isfinite(o.estimate);
        o.covered = region.contains(truth);
        o.infinite = region.is_infinite();
        o.length = region.length();
    } catch (const Error&) {
        o.ok = false;
    }
    return o;
}

std::string json_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

double number_field(const nlohmann::json& obj, const std::string& parent, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) field_error(json_path(parent, key), "expected a number");
    return v.get<double>();
}

std::uint64_t count_field(const nlohmann::json& obj, const std::string& parent, const std::string& key,
                          std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        field_error(json_path(parent, key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

void put(std::ostream& out, const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    out << buf;
}

}  // namespace

void DgpConfig::validate() const {
    if (pi_source.empty()) throw Error(ErrorCode::EmptyPiSource, "size/compliance table is empty");
    for (const auto& r : pi_source) {
        if (r.n < 1) throw Error(ErrorCode::InvalidInput, "cluster sizes must be positive");
        if (!(r.compliance_rate >= 0.0 && r.compliance_rate <= 1.0)) {
            throw Error(ErrorCode::InvalidInput, "compliance rates must lie in [0, 1]");
        }
    }
    if (!(lambda_icc >= 0.0 && lambda_icc < 1.0)) throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1)");
    if (!(error_df > 2.0)) throw Error(ErrorCode::InvalidInput, "error_df must exceed 2");
    for (double v : {alpha_intercept, tau, beta, gamma}) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "DGP coefficients must be finite");
    }
    const auto mt = treated_count();
    if (J < 2 || mt == 0 || mt >= J) {
        throw Error(ErrorCode::InvalidInput, "need J >= 2 and 0 < m < J (J=" + std::to_string(J) +
                                                 ", m=" + std::to_string(mt) + ")");
    }
}

std::size_t DgpConfig::treated_count() const {
    if (m != 0) return m;
    return static_cast<std::size_t>(std::llround(static_cast<double>(J) * kDefaultTreatedFraction));
}

IccScales icc_calibrate(double lambda_target, double error_df) {
    if (!(lambda_target >= 0.0 && lambda_target < 1.0)) {
        throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1)");
    }
    if (!(error_df > 2.0)) throw Error(ErrorCode::InvalidInput, "error_df must exceed 2");
    // Both errors share the t variance df/(df-2), so it cancels.
    return {std::sqrt(lambda_target / (1.0 - lambda_target)), 1.0};
}

Population generate_population(const DgpConfig& dgp, bool keep_units) {
    auto d = draw_population(dgp, true, keep_units);
    return Population{ClusterTrial(std::move(d.clusters)), std::move(d.oracle), std::move(d.summaries), d.true_cace};
}

void SimScenario::validate() const {
    if (replicates < 1) field_error("replicates", "must be at least 1");
    if (J_grid.empty()) field_error("J_grid", "must not be empty");
    if (gamma_grid.empty()) field_error("gamma_grid", "must not be empty");
    if (!(alpha_level > 0.0 && alpha_level < 1.0)) field_error("alpha_level", "must lie in (0, 1)");
    if (!(treated_fraction > 0.0 && treated_fraction < 1.0)) field_error("treated_fraction", "must lie in (0, 1)");
    for (auto J : J_grid) {
        const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(J) * treated_fraction));
        if (J < 4 || m < 2 || J - m < 2) {
            field_error("J_grid", "J=" + std::to_string(J) + " leaves an arm with fewer than two clusters");
        }
    }
    for (double g : gamma_grid) {
        if (!std::isfinite(g)) field_error("gamma_grid", "values must be finite");
    }
    if (dgp.pi_source.empty()) throw Error(ErrorCode::EmptyPiSource, "scenario field 'dgp.pi_source': table is empty");
    if (!(dgp.lambda_icc >= 0.0 && dgp.lambda_icc < 1.0)) field_error("dgp.lambda_icc", "must lie in [0, 1)");
    if (!(dgp.error_df > 2.0)) field_error("dgp.error_df", "must exceed 2");
}

SimScenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::InvalidInput, "scenario must be a JSON object");

    static const std::vector<std::string> top_keys{"dgp",         "J_grid",           "gamma_grid",        "replicates",
                                                   "alpha_level", "treated_fraction", "permutation_draws", "truth",
                                                   "seed",        "description"};
    for (const auto& [key, _] : doc.items()) {
        if (std::find(top_keys.begin(), top_keys.end(), key) == top_keys.end()) field_error(key, "unknown field");
    }

    SimScenario sc;
    if (!doc.contains("dgp") || !doc["dgp"].is_object()) field_error("dgp", "required object");
    const auto& d = doc["dgp"];
    static const std::vector<std::string> dgp_keys{"alpha_intercept", "tau",      "beta",     "lambda_icc",
                                                   "error_df",        "pi_source", "m"};
    for (const auto& [key, _] : d.items()) {
        if (std::find(dgp_keys.begin(), dgp_keys.end(), key) == dgp_keys.end()) field_error("dgp." + key, "unknown field");
    }
    sc.dgp.alpha_intercept = number_field(d, "dgp", "alpha_intercept", sc.dgp.alpha_intercept);
    sc.dgp.tau = number_field(d, "dgp", "tau", sc.dgp.tau);
    sc.dgp.beta = number_field(d, "dgp", "beta", sc.dgp.beta);
    sc.dgp.lambda_icc = number_field(d, "dgp", "lambda_icc", sc.dgp.lambda_icc);
    if (d.contains("error_df") && d["error_df"].is_string()) {
        if (d["error_df"] != "inf") field_error("dgp.error_df", "expected a number or \"inf\"");
        sc.dgp.error_df = std::numeric_limits<double>::infinity();
    } else {
        sc.dgp.error_df = number_field(d, "dgp", "error_df", sc.dgp.error_df);
    }
    sc.dgp.m = count_field(d, "dgp", "m", 0);
    if (sc.dgp.m != 0 && doc.contains("J_grid") && doc["J_grid"].size() > 1) {
        field_error("dgp.m", "a fixed m only makes sense with a single J");
    }

    if (!d.contains("pi_source")) field_error("dgp.pi_source", "required");
    const auto& src = d["pi_source"];
    if (src.is_string()) {
        std::filesystem::path p = src.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        try {
            sc.dgp.pi_source = read_size_table(p);
        } catch (const Error& e) {
            field_error("dgp.pi_source", e.what());
        }
    } else if (src.is_array()) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            const auto& row = src[i];
            if (!row.is_array() || row.size() != 2 || !row[0].is_number_integer() || !row[1].is_number()) {
                field_error("dgp.pi_source[" + std::to_string(i) + "]", "expected [n, compliance_rate]");
            }
            sc.dgp.pi_source.push_back({row[0].get<std::int64_t>(), row[1].get<double>()});
        }
    } else {
        field_error("dgp.pi_source", "expected a file path or an array of [n, compliance_rate]");
    }

    auto read_list = [&](const char* key, auto& target) {
        if (!doc.contains(key)) return;
        const auto& v = doc[key];
        if (!v.is_array()) field_error(key, "expected an array");
        target.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            using T = typename std::decay_t<decltype(target)>::value_type;
            if constexpr (std::is_integral_v<T>) {
                if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 1) {
                    field_error(std::string(key) + "[" + std::to_string(i) + "]", "expected a positive integer");
                }
            } else {
                if (!v[i].is_number()) field_error(std::string(key) + "[" + std::to_string(i) + "]", "expected a number");
            }
            target.push_back(v[i].get<T>());
        }
    };
    read_list("J_grid", sc.J_grid);
    read_list("gamma_grid", sc.gamma_grid);
    sc.replicates = count_field(doc, "", "replicates", sc.replicates);
    sc.alpha_level = number_field(doc, "", "alpha_level", sc.alpha_level);
    sc.treated_fraction = number_field(doc, "", "treated_fraction", sc.treated_fraction);
    sc.permutation_draws = count_field(doc, "", "permutation_draws", 0);
    sc.dgp.seed = count_field(doc, "", "seed", 0);
    if (doc.contains("truth")) {
        const auto& t = doc["truth"];
        if (t == "realized") {
            sc.truth = TruthTarget::Realized;
        } else if (t == "superpopulation") {
            sc.truth = TruthTarget::Superpopulation;
        } else {
            field_error("truth", "expected \"realized\" or \"superpopulation\"");
        }
    }
    sc.validate();
    return sc;
}

SimScenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open scenario '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

std::vector<SizeRow> read_size_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open size table '" + path.string() + "'");
    return read_size_table(in);
}

std::vector<SizeRow> read_size_table(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    int col_n = -1, col_rate = -1;
    std::size_t width = 0;
    std::vector<SizeRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (col_n < 0) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (f[i] == "n") col_n = static_cast<int>(i);
                if (f[i] == "compliance_rate") col_rate = static_cast<int>(i);
            }
            if (col_n < 0 || col_rate < 0) {
                throw Error(ErrorCode::ParseError, "size table header must name n and compliance_rate");
            }
            width = f.size();
            continue;
        }
        const auto where = "line " + std::to_string(line_no) + ": ";
        if (f.size() != width) throw Error(ErrorCode::ParseError, where + "wrong field count");
        SizeRow r;
        const auto& sn = f[col_n];
        const auto& sr = f[col_rate];
        auto a = std::from_chars(sn.data(), sn.data() + sn.size(), r.n);
        auto b = std::from_chars(sr.data(), sr.data() + sr.size(), r.compliance_rate);
        if (a.ec != std::errc{} || a.ptr != sn.data() + sn.size() || sn.empty()) {
            throw Error(ErrorCode::ParseError, where + "bad size '" + sn + "'");
        }
        if (b.ec != std::errc{} || b.ptr != sr.data() + sr.size() || sr.empty()) {
            throw Error(ErrorCode::ParseError, where + "bad compliance rate '" + sr + "'");
        }
        if (r.n < 1 || !(r.compliance_rate >= 0.0 && r.compliance_rate <= 1.0)) {
            throw Error(ErrorCode::InvalidInput, where + "need n >= 1 and compliance rate in [0, 1]");
        }
        rows.push_back(r);
    }
    if (col_n < 0) throw Error(ErrorCode::ParseError, "size table is empty");
    if (rows.empty()) throw Error(ErrorCode::EmptyPiSource, "size table has no rows");
    return rows;
}

SimReport run_scenario(const SimScenario& scenario, unsigned workers) {
    scenario.validate();
    const double alpha = scenario.alpha_level;
    const bool with_perm = scenario.permutation_draws > 0;
    std::vector<std::string> methods{"effect_ratio", "cluster_level", "tsls"};
    if (with_perm) methods.emplace_back("effect_ratio_permutation");

    const std::size_t G = scenario.gamma_grid.size();
    const std::size_t NJ = scenario.J_grid.size();
    const std::size_t R = scenario.replicates;
    const std::size_t tasks = G * NJ * R;
    std::vector<Replicate> results(tasks);

    auto run_one = [&](std::size_t task) {
        const std::size_t g = task / (NJ * R);
        const std::size_t j = (task / R) % NJ;
        const std::size_t r = task % R;
        DgpConfig dgp = scenario.dgp;
        dgp.gamma = scenario.gamma_grid[g];
        dgp.J = scenario.J_grid[j];
        dgp.m = static_cast<std::size_t>(std::llround(static_cast<double>(dgp.J) * scenario.treated_fraction));
        const std::uint64_t rep_seed = derive_seed(scenario.dgp.seed, {g, j, r});
        dgp.seed = derive_seed(rep_seed, {0});

        auto pop = draw_population(dgp, false, false);
        Replicate& out = results[task];
        out.truth = scenario.truth == TruthTarget::Realized ? pop.true_cace : superpopulation_cace(dgp);
        if (!std::isfinite(out.truth)) {
            out.outcomes.assign(methods.size(), Outcome{});
            return;
        }
        const auto& s = pop.summaries;
        out.outcomes.push_back(evaluate(
            [&](double& est) {
                auto rep = estimate_effect_ratio(s, alpha);
                est = rep.point;
                return rep.region;
            },
            out.truth));
        out.outcomes.push_back(evaluate(
            [&](double& est) {
                auto rep = estimate_cluster_level(s, alpha);
                est = rep.point;
                return rep.region;
            },
            out.truth));
        out.outcomes.push_back(evaluate(
            [&](double& est) {
                auto rep = estimate_tsls(s, alpha);
                est = rep.point;
                return rep.region;
            },
            out.truth));
        if (with_perm) {
            out.outcomes.push_back(evaluate(
                [&](double& est) {
                    EffectRatioOptions opt;
                    opt.region = RegionMethod::Permutation;
                    opt.permutation.exhaustive = false;
                    opt.permutation.draws = scenario.permutation_draws;
                    opt.permutation.seed = derive_seed(rep_seed, {1});
                    auto rep = estimate_effect_ratio(s, alpha, opt);
                    est = rep.point;
                    return rep.region;
                },
                out.truth));
        }
    };

    workers = std::max(1u, workers);
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks; ++t) run_one(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < tasks; t = next++) run_one(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    SimReport report;
    report.seed = scenario.dgp.seed;
    report.replicates = R;
    report.alpha_level = alpha;
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t j = 0; j < NJ; ++j) {
            for (std::size_t k = 0; k < methods.size(); ++k) {
                SimCell cell;
                cell.method = methods[k];
                cell.J = scenario.J_grid[j];
                cell.gamma = scenario.gamma_grid[g];
                cell.replicates = R;
                double est = 0.0, truth = 0.0, len = 0.0;
                std::size_t ok = 0, covered = 0, infinite = 0, finite = 0;
                for (std::size_t r = 0; r < R; ++r) {
                    const auto& rep = results[(g * NJ + j) * R + r];
                    const auto& o = rep.outcomes[k];
                    if (!o.ok) {
                        ++cell.skipped;
                        continue;
                    }
                    ++ok;
                    est += o.estimate;
                    truth += rep.truth;
                    covered += o.covered;
                    if (o.infinite) {
                        ++infinite;
                    } else {
                        ++finite;
                        len += o.length;
                    }
                }
                const double nan = std::numeric_limits<double>::quiet_NaN();
                const double dok = static_cast<double>(ok);
                cell.mean_estimate = ok ? est / dok : nan;
                cell.mean_truth = ok ? truth / dok : nan;
                cell.bias_ratio = ok ? est / truth : nan;
                cell.coverage = ok ? static_cast<double>(covered) / dok : nan;
                cell.infinite_ci_rate = ok ? static_cast<double>(infinite) / dok : nan;
                cell.mean_ci_length = finite ? len / static_cast<double>(finite) : nan;
                report.cells.push_back(cell);
            }
        }
    }
    return report;
}

void write_report_csv(const SimReport& report, std::ostream& out) {
    out << "method,J,gamma,metric,value\n";
    for (const auto& c : report.cells) {
        const std::pair<const char*, double> metrics[] = {
            {"bias_ratio", c.bias_ratio},
            {"coverage", c.coverage},
            {"mean_ci_length", c.mean_ci_length},
            {"infinite_ci_rate", c.infinite_ci_rate},
            {"mean_estimate", c.mean_estimate},
            {"mean_truth", c.mean_truth},
            {"replicates", static_cast<double>(c.replicates)},
            {"skipped", static_cast<double>(c.skipped)},
        };
        for (const auto& [name, value] : metrics) {
            out << c.method << ',' << c.J << ',';
            put(out, "%g", c.gamma);
            out << ',' << name << ',';
            put(out, "%.10g", value);
            out << '\n';
        }
    }
}

void write_report_tables(const SimReport& report, std::ostream& out) {
    // Column order follows the published layout: effect ratio, cluster-level, TSLS.
    static const std::vector<std::pair<std::string, std::string>> columns{
        {"effect_ratio", "Gen. Effect Ratio"},
        {"cluster_level", "Cluster-level Averages"},
        {"tsls", "TSLS"},
        {"effect_ratio_permutation", "Effect Ratio (perm.)"},
    };
    std::vector<std::pair<std::string, std::string>> present;
    for (const auto& col : columns) {
        if (std::any_of(report.cells.begin(), report.cells.end(), [&](const SimCell& c) { return c.method == col.first; })) {
            present.push_back(col);
        }
    }
    std::vector<double> gammas;
    std::vector<std::size_t> Js;
    for (const auto& c : report.cells) {
        if (std::find(gammas.begin(), gammas.end(), c.gamma) == gammas.end()) gammas.push_back(c.gamma);
        if (std::find(Js.begin(), Js.end(), c.J) == Js.end()) Js.push_back(c.J);
    }
    std::map<std::tuple<std::string, std::size_t, double>, const SimCell*> lookup;
    for (const auto& c : report.cells) lookup[{c.method, c.J, c.gamma}] = &c;

    auto block_title = [](double g) -> std::string {
        if (g == 0.0) return "Constant Complier Effects (gamma = 0)";
        char buf[96];
        std::snprintf(buf, sizeof buf, "Nonconstant Complier Effects: %s Correlation (gamma = %g)",
                      g < 0.0 ? "Negative" : "Positive", g);
        return buf;
    };

    struct Table {
        const char* title;
        double SimCell::*field;
    };
    const Table tables[] = {
        {"Bias: ratio of average estimate to true effect", &SimCell::bias_ratio},
        {"Coverage of nominal confidence intervals", &SimCell::coverage},
        {"Average length of finite confidence intervals", &SimCell::mean_ci_length},
    };
    const int width = 24;
    bool first = true;
    for (const auto& t : tables) {
        if (!first) out << '\n';
        first = false;
        out << t.title << " (" << report.replicates << " replicates, alpha = ";
        put(out, "%g", report.alpha_level);
        out << ")\n";
        std::string header = "Clusters  ";
        for (const auto& col : present) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%*s", width, col.second.c_str());
            header += buf;
        }
        const std::string rule(header.size(), '-');
        out << rule << '\n' << header << '\n';
        for (double g : gammas) {
            out << rule << '\n' << block_title(g) << '\n' << rule << '\n';
            for (auto J : Js) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%8zu  ", J);
                out << buf;
                for (const auto& col : present) {
                    auto it = lookup.find({col.first, J, g});
                    char cell[64];
                    if (it == lookup.end()) {
                        std::snprintf(cell, sizeof cell, "%*s", width, "-");
                    } else {
                        std::snprintf(cell, sizeof cell, "%*.2f", width, it->second->*t.field);
                    }
                    out << cell;
                }
                out << '\n';
            }
        }
        out << rule << '\n';
    }
}

}  // namespace crtiv
