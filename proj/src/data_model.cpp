#include "crtiv/data_model.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "crtiv/error.hpp"

namespace crtiv {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

int parse_binary(std::string_view field, std::size_t line, const char* name) {
    if (field == "0") return 0;
    if (field == "1") return 1;
    if (field.empty()) parse_fail(line, std::string("missing value for ") + name);
    parse_fail(line, std::string("non-binary ") + name + " value '" + std::string(field) + "'");
}

double parse_outcome(std::string_view field, std::size_t line) {
    if (field.empty()) parse_fail(line, "missing value for y");
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        parse_fail(line, "malformed y value '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) parse_fail(line, "non-finite y value");
    return value;
}

}  // namespace

ClusterTrial::ClusterTrial(std::vector<Cluster> clusters) : clusters_(std::move(clusters)) {
    for (const auto& c : clusters_) {
        if (c.units.empty()) {
            throw Error(ErrorCode::InvalidInput, "cluster '" + c.id + "' has no units");
        }
        if (c.z != 0 && c.z != 1) {
            throw Error(ErrorCode::InvalidInput, "cluster '" + c.id + "' has non-binary z");
        }
        for (const auto& u : c.units) {
            if (u.d != 0 && u.d != 1) {
                throw Error(ErrorCode::InvalidInput, "cluster '" + c.id + "' has non-binary d");
            }
            if (!std::isfinite(u.y)) {
                throw Error(ErrorCode::InvalidInput, "cluster '" + c.id + "' has non-finite y");
            }
        }
        m_ += static_cast<std::size_t>(c.z);
        n_ += c.units.size();
    }
    if (m_ == 0 || m_ == clusters_.size()) {
        throw Error(ErrorCode::InvalidInput,
                    "both arms must be non-empty (m=" + std::to_string(m_) +
                        ", J=" + std::to_string(clusters_.size()) + ")");
    }
}

ClusterTrial ClusterTrial::from_records(std::span<const UnitRecord> records) {
    std::vector<Cluster> clusters;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& r : records) {
        auto [it, inserted] = index.try_emplace(r.cluster_id, clusters.size());
        if (inserted) {
            clusters.push_back(Cluster{r.cluster_id, r.z, {}});
        } else if (clusters[it->second].z != r.z) {
            throw Error(ErrorCode::InvalidInput,
                        "non-uniform assignment in cluster '" + r.cluster_id + "'");
        }
        clusters[it->second].units.push_back(Unit{r.d, r.y});
    }
    return ClusterTrial(std::move(clusters));
}

ClusterTrial ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidInput, "cannot open '" + path.string() + "'");
    }
    return read_csv(in, options);
}

ClusterTrial read_csv(std::istream& in, const IngestOptions& options) {
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line()) throw Error(ErrorCode::ParseError, "empty input: missing header");
    // Strip a UTF-8 byte order mark if present.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    constexpr std::array<std::string_view, 4> required{"cluster_id", "z", "d", "y"};
    std::array<std::optional<std::size_t>, 4> col;
    const auto header = split_commas(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        bool known = false;
        for (std::size_t k = 0; k < required.size(); ++k) {
            if (header[i] == required[k]) {
                if (col[k]) parse_fail(line_no, "duplicate column '" + std::string(header[i]) + "'");
                col[k] = i;
                known = true;
            }
        }
        if (!known && options.on_warning) {
            options.on_warning("ignoring extra column '" + std::string(header[i]) + "'");
        }
    }
    for (std::size_t k = 0; k < required.size(); ++k) {
        if (!col[k]) parse_fail(line_no, "missing required column '" + std::string(required[k]) + "'");
    }

    std::vector<UnitRecord> records;
    while (next_line()) {
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != header.size()) {
            parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
        }
        UnitRecord r;
        r.cluster_id = std::string(fields[*col[0]]);
        if (r.cluster_id.empty()) parse_fail(line_no, "missing value for cluster_id");
        r.z = parse_binary(fields[*col[1]], line_no, "z");
        r.d = parse_binary(fields[*col[2]], line_no, "d");
        r.y = parse_outcome(fields[*col[3]], line_no);
        records.push_back(std::move(r));
    }
    if (records.empty()) throw Error(ErrorCode::ParseError, "no data rows");
    return ClusterTrial::from_records(records);
}

void write_csv(const ClusterTrial& trial, std::ostream& out) {
    out << "cluster_id,z,d,y\n";
    std::array<char, 64> buf{};
    for (const auto& c : trial.clusters()) {
        for (const auto& u : c.units) {
            auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), u.y);
            out << c.id << ',' << c.z << ',' << u.d << ',' << std::string_view(buf.data(), ptr - buf.data())
                << '\n';
        }
    }
}

std::vector<ClusterSummary> summarize(const ClusterTrial& trial) {
    std::vector<ClusterSummary> out;
    out.reserve(trial.J());
    for (const auto& c : trial.clusters()) {
        ClusterSummary s;
        s.n = c.units.size();
        s.z = c.z;
        for (const auto& u : c.units) {
            s.y_sum += u.y;
            s.d_sum += u.d;
        }
        s.y_bar = s.y_sum / static_cast<double>(s.n);
        s.d_bar = s.d_sum / static_cast<double>(s.n);
        out.push_back(s);
    }
    return out;
}

Design design_of(std::span<const ClusterSummary> summaries) noexcept {
    Design d;
    d.J = summaries.size();
    for (const auto& s : summaries) {
        d.m += static_cast<std::size_t>(s.z);
        d.n += s.n;
    }
    return d;
}

IttEstimates itt_estimates(std::span<const ClusterSummary> summaries) {
    const auto [J, m, n] = design_of(summaries);
    if (m == 0 || m == J) throw Error(ErrorCode::InvalidInput, "both arms must be non-empty");
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
    const double Jd = static_cast<double>(J);
    const double w1 = Jd / static_cast<double>(m);
    const double w0 = Jd / static_cast<double>(J - m);
    const double nd = static_cast<double>(n);
    return {(w1 * y1 - w0 * y0) / nd, (w1 * d1 - w0 * d0) / nd};
}

}  // namespace crtiv
