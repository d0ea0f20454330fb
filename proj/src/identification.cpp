#include "crtiv/identification.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "crtiv/error.hpp"
#include "crtiv/rng.hpp"

namespace crtiv {

namespace {

std::int64_t total_size(std::span<const OracleClusterSpec> specs) {
    std::int64_t n = 0;
    for (const auto& s : specs) n += s.n;
    return n;
}

[[noreturn]] void no_compliers() { throw Error(ErrorCode::NoCompliers, "population has no compliers"); }

struct SpecRow {
    std::int64_t n;
    std::int64_t n_co;
    std::string tau;
};

std::vector<SpecRow> read_spec_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            auto pos = s.find(',', start);
            out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
            if (pos == std::string::npos) return out;
            start = pos + 1;
        }
    };
    auto chomp = [&line] {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty spec file");
    ++line_no;
    chomp();
    const auto header = split(line);
    int cn = -1, cco = -1, ct = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "n") cn = i;
        if (header[i] == "n_co") cco = i;
        if (header[i] == "tau") ct = i;
    }
    if (cn < 0 || cco < 0 || ct < 0) throw Error(ErrorCode::ParseError, "spec header must name n, n_co, tau");

    auto parse_count = [&](const std::string& s) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad count '" + s + "'");
        }
        return v;
    };
    std::vector<SpecRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        chomp();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": wrong field count");
        }
        rows.push_back({parse_count(f[cn]), parse_count(f[cco]), f[ct]});
        if (rows.back().n < 1 || rows.back().n_co < 0 || rows.back().n_co > rows.back().n) {
            throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line_no) + ": need 0 <= n_co <= n, n >= 1");
        }
    }
    if (rows.empty()) throw Error(ErrorCode::ParseError, "spec file has no rows");
    return rows;
}

}  // namespace

OracleClusterSpec OracleClusterSpec::from_units(PotentialOutcomes units) {
    const auto size = units.y1.size();
    if (units.y0.size() != size || units.d1.size() != size || units.d0.size() != size) {
        throw Error(ErrorCode::InvalidInput, "potential outcome arrays differ in length");
    }
    OracleClusterSpec spec;
    spec.n = static_cast<std::int64_t>(size);
    double effect = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        if (units.d1[i] == 1 && units.d0[i] == 0) {
            ++spec.n_co;
            effect += units.y1[i] - units.y0[i];
        }
    }
    spec.tau = spec.n_co > 0 ? effect / static_cast<double>(spec.n_co) : 0.0;
    spec.units = std::move(units);
    spec.validate();
    return spec;
}

void OracleClusterSpec::validate() const {
    if (n < 1 || n_co < 0 || n_co > n) throw Error(ErrorCode::InvalidInput, "need 0 <= n_co <= n and n >= 1");
    if (!units) return;
    const auto& u = *units;
    if (static_cast<std::int64_t>(u.y1.size()) != n) throw Error(ErrorCode::InvalidInput, "unit arrays do not match n");
    std::int64_t compliers = 0;
    double effect = 0.0;
    for (std::size_t i = 0; i < u.y1.size(); ++i) {
        if (u.d0[i] > u.d1[i]) throw Error(ErrorCode::InvalidInput, "defier present: d0 > d1");
        if (u.d1[i] == 1 && u.d0[i] == 0) {
            ++compliers;
            effect += u.y1[i] - u.y0[i];
        }
    }
    if (compliers != n_co) throw Error(ErrorCode::InvalidInput, "n_co disagrees with unit-level compliers");
    if (compliers > 0) {
        const double mean = effect / static_cast<double>(compliers);
        if (std::abs(mean - tau) > 1e-9 * std::max(1.0, std::abs(mean))) {
            throw Error(ErrorCode::InvalidInput, "tau disagrees with unit-level complier effects");
        }
    }
}

std::vector<double> method_weights(std::span<const OracleClusterSpec> specs, Method method) {
    const double n = static_cast<double>(total_size(specs));
    std::vector<double> w(specs.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& s = specs[j];
        if (s.n_co == 0) continue;
        const double nco = static_cast<double>(s.n_co);
        const double nj = static_cast<double>(s.n);
        switch (method) {
            case Method::ClusterLevel: w[j] = nco / nj; break;
            case Method::TSLS: w[j] = nco * (n - nj); break;
            case Method::EffectRatio: w[j] = nco; break;
        }
        total += w[j];
    }
    if (!(total > 0.0)) no_compliers();
    for (auto& x : w) x /= total;
    return w;
}

double identified_value(std::span<const OracleClusterSpec> specs, Method method) {
    const auto w = method_weights(specs, method);
    double value = 0.0;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        if (specs[j].n_co > 0) value += w[j] * specs[j].tau;
    }
    return value;
}

double true_cace(std::span<const OracleClusterSpec> specs) { return identified_value(specs, Method::EffectRatio); }

std::vector<Rational> exact_method_weights(std::span<const RationalSpec> specs, Method method) {
    std::int64_t n = 0;
    for (const auto& s : specs) n += s.n;
    std::vector<Rational> w(specs.size());
    Rational total;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& s = specs[j];
        if (s.n_co == 0) continue;
        switch (method) {
            case Method::ClusterLevel: w[j] = Rational(s.n_co, s.n); break;
            case Method::TSLS: w[j] = Rational(s.n_co) * Rational(n - s.n); break;
            case Method::EffectRatio: w[j] = Rational(s.n_co); break;
        }
        total += w[j];
    }
    if (total == Rational(0)) no_compliers();
    for (auto& x : w) x = x / total;
    return w;
}

Rational exact_identified_value(std::span<const RationalSpec> specs, Method method) {
    const auto w = exact_method_weights(specs, method);
    Rational value;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        if (specs[j].n_co > 0) value += w[j] * specs[j].tau;
    }
    return value;
}

Rational exact_true_cace(std::span<const RationalSpec> specs) {
    return exact_identified_value(specs, Method::EffectRatio);
}

void AsymptoticSpec::validate() const {
    const auto J = p_co.size();
    if (J == 0 || rho.size() != J || tau_inf.size() != J) {
        throw Error(ErrorCode::InvalidInput, "asymptotic spec dimensions disagree");
    }
    for (std::size_t j = 0; j < J; ++j) {
        if (!(p_co[j] > 0.0 && p_co[j] < 1.0)) throw Error(ErrorCode::InvalidInput, "p_co must lie in (0, 1)");
        if (rho[j].size() != J) throw Error(ErrorCode::InvalidInput, "rho must be square");
        if (std::abs(rho[j][j] - 1.0) > 1e-9) throw Error(ErrorCode::InvalidInput, "rho_jj must equal 1");
        for (std::size_t k = 0; k < J; ++k) {
            if (!(rho[j][k] >= 0.0)) throw Error(ErrorCode::InvalidInput, "rho must be non-negative");
            if (std::abs(rho[j][k] * rho[k][j] - 1.0) > 1e-9) {
                throw Error(ErrorCode::InvalidInput, "rho_jk * rho_kj must equal 1");
            }
        }
    }
}

AsymptoticSpec AsymptoticSpec::from_sizes(std::span<const double> sizes, std::vector<double> p_co,
                                          std::vector<double> tau_inf) {
    AsymptoticSpec spec;
    spec.p_co = std::move(p_co);
    spec.tau_inf = std::move(tau_inf);
    spec.rho.assign(sizes.size(), std::vector<double>(sizes.size(), 1.0));
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        for (std::size_t k = 0; k < sizes.size(); ++k) spec.rho[j][k] = sizes[j] / sizes[k];
    }
    spec.validate();
    return spec;
}

double asymptotic_gap_cluster_level(const AsymptoticSpec& spec) {
    spec.validate();
    const auto J = spec.p_co.size();
    const auto& p = spec.p_co;
    const auto& rho = spec.rho;
    double p_total = 0.0;
    for (double x : p) p_total += x;

    double gap = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        double num = 0.0, size_ratio = p[j];
        for (std::size_t l = 0; l < J; ++l) {
            if (l == j) continue;
            num += p[j] * p[l] * (rho[l][j] - 1.0);
            size_ratio += rho[l][j] * p[l];
        }
        gap += spec.tau_inf[j] * num / (p_total * size_ratio);
    }
    return gap;
}

double asymptotic_gap_tsls(const AsymptoticSpec& spec) {
    spec.validate();
    const auto J = spec.p_co.size();
    const auto& p = spec.p_co;
    const auto& rho = spec.rho;

    double gap = 0.0;
    for (std::size_t q = 0; q < J; ++q) {
        double size_ratio = p[q];
        for (std::size_t l = 0; l < J; ++l) {
            if (l != q) size_ratio += rho[l][q] * p[l];
        }
        double inner = 0.0;
        for (std::size_t k = 0; k < J; ++k) {
            if (k == q) continue;
            // sum over ordered pairs l != j of p_l rho_lk rho_jq
            double pairs = 0.0;
            for (std::size_t l = 0; l < J; ++l) {
                for (std::size_t j = 0; j < J; ++j) {
                    if (j != l) pairs += p[l] * rho[l][k] * rho[j][q];
                }
            }
            inner += p[q] * p[k] * (rho[k][q] - 1.0) / (pairs * size_ratio);
        }
        gap += spec.tau_inf[q] * inner;
    }
    return gap;
}

GapDemoResult growing_J_gap_demo(const GapDemoConfig& config) {
    if (config.size_law.empty()) throw Error(ErrorCode::InvalidInput, "size law is empty");
    if (!(config.p_co > 0.0 && config.p_co <= 1.0)) throw Error(ErrorCode::InvalidInput, "p_co must lie in (0, 1]");
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& [size, prob] : config.size_law) {
        if (size < 1 || prob < 0.0) throw Error(ErrorCode::InvalidInput, "invalid size law entry");
        if (!config.tau_law.contains(size)) {
            throw Error(ErrorCode::InvalidInput, "tau law has no entry for size " + std::to_string(size));
        }
        acc += prob;
        cumulative.push_back(acc);
    }

    Xoshiro256 rng(config.seed);
    std::vector<OracleClusterSpec> specs(config.J);
    for (auto& s : specs) {
        const double u = rng.uniform() * acc;
        std::size_t pick = 0;
        while (pick + 1 < cumulative.size() && u >= cumulative[pick]) ++pick;
        const auto size = config.size_law[pick].first;
        s.n = size;
        s.n_co = std::llround(config.p_co * static_cast<double>(size));
        s.tau = config.tau_law.at(size);
    }
    GapDemoResult r;
    r.seed = config.seed;
    r.truth = true_cace(specs);
    r.identified = identified_value(specs, config.method);
    r.gap = std::abs(r.identified - r.truth);
    return r;
}

std::vector<OracleClusterSpec> read_spec_csv(const std::filesystem::path& path) {
    std::vector<OracleClusterSpec> out;
    for (const auto& row : read_spec_rows(path)) {
        OracleClusterSpec s;
        s.n = row.n;
        s.n_co = row.n_co;
        double tau = 0.0;
        const auto& t = row.tau;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), tau);
        if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(tau)) {
            // Allow fractions such as 7/4.
            tau = Rational::parse(t).to_double();
        }
        s.tau = tau;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<RationalSpec> read_exact_spec_csv(const std::filesystem::path& path) {
    std::vector<RationalSpec> out;
    for (const auto& row : read_spec_rows(path)) out.push_back({row.n, row.n_co, Rational::parse(row.tau)});
    return out;
}

}  // namespace crtiv
