#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optimizer.hpp"
#include "training.hpp"

namespace pbt {

/// %.17g: enough digits for any double to survive a text round trip.
inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void write_complex_matrix(std::ostream &os, const ComplexMatrix &m)
{
    os << "[\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << "    [";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c)
                os << ", ";
            os << '[' << format_double(m(r, c).real()) << ", " << format_double(m(r, c).imag()) << ']';
        }
        os << (r + 1 < m.rows() ? "],\n" : "]\n");
    }
    os << "  ]";
}

inline ComplexMatrix read_complex_matrix(const nlohmann::json &j, std::size_t rows, std::size_t cols,
                                         const char *name)
{
    require(j.is_array() && j.size() == rows, std::string("pattern file: '") + name + "' must have N rows");
    ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto &row = j[r];
        require(row.is_array() && row.size() == cols, std::string("pattern file: '") + name + "' rows need M entries");
        for (std::size_t c = 0; c < cols; ++c) {
            const auto &e = row[c];
            require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
                    std::string("pattern file: '") + name + "' entries must be [re, im]");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {e[0].get<double>(), e[1].get<double>()};
        }
    }
    return m;
}

} // namespace detail

/// Pattern file: a JSON document with kind, N, M, K, seed, weights and the
/// probe / combining matrices as row-major nested arrays of [re, im] pairs.
inline void write_pattern(std::ostream &os, const PatternPair &pair)
{
    os << "{\n";
    os << "  \"kind\": \"" << to_string(pair.kind) << "\",\n";
    os << "  \"N\": " << pair.n() << ",\n";
    os << "  \"M\": " << pair.m() << ",\n";
    os << "  \"K\": " << (pair.meta.arms ? std::to_string(*pair.meta.arms) : "null") << ",\n";
    os << "  \"seed\": " << (pair.meta.seed ? std::to_string(*pair.meta.seed) : "null") << ",\n";
    if (pair.meta.weights) {
        const auto &w = *pair.meta.weights;
        os << "  \"weights\": [" << format_double(w[0]) << ", " << format_double(w[1]) << ", "
           << format_double(w[2]) << "],\n";
    } else {
        os << "  \"weights\": null,\n";
    }
    os << "  \"probe\": ";
    detail::write_complex_matrix(os, pair.probe);
    os << ",\n  \"combining\": ";
    detail::write_complex_matrix(os, pair.combining);
    os << "\n}\n";
}

inline std::string pattern_to_string(const PatternPair &pair)
{
    std::ostringstream os;
    write_pattern(os, pair);
    return os.str();
}

inline PatternPair parse_pattern(const std::string &text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError(std::string("pattern file: ") + e.what());
    }
    require(j.is_object(), "pattern file: top level must be an object");
    for (const char *key : {"kind", "N", "M", "probe", "combining"})
        require(j.contains(key), std::string("pattern file: missing '") + key + "'");

    PatternPair pair;
    pair.kind = pattern_kind_from_string(j.at("kind").get<std::string>());
    const auto n = j.at("N").get<std::size_t>();
    const auto m = j.at("M").get<std::size_t>();
    require(n >= 1 && m >= 1 && m <= n, "pattern file: need 1 <= M <= N");
    if (j.contains("K") && !j["K"].is_null())
        pair.meta.arms = j["K"].get<std::size_t>();
    if (j.contains("seed") && !j["seed"].is_null())
        pair.meta.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("weights") && !j["weights"].is_null()) {
        const auto w = j["weights"].get<std::vector<double>>();
        require(w.size() == 3, "pattern file: weights must have 3 entries");
        pair.meta.weights = std::array<double, 3>{w[0], w[1], w[2]};
    }
    pair.probe = detail::read_complex_matrix(j.at("probe"), n, m, "probe");
    pair.combining = detail::read_complex_matrix(j.at("combining"), n, m, "combining");
    pair.validate();
    return pair;
}

inline std::string read_text_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot write '" + path + "'");
    out << text;
    require(static_cast<bool>(out), "failed writing '" + path + "'");
}

inline PatternPair load_pattern(const std::string &path) { return parse_pattern(read_text_file(path)); }

inline void save_pattern(const std::string &path, const PatternPair &pair)
{
    write_text_file(path, pattern_to_string(pair));
}

// ---------------------------------------------------------------------------
// CSV

inline const char *sim_csv_header() { return "pattern,N,M,snr_db,trials,errors,error_prob,ci_halfwidth\n"; }

inline void write_sim_rows(std::ostream &os, const SimResult &result)
{
    for (const auto &p : result.points)
        os << result.label << ',' << result.n << ',' << result.m << ',' << format_double(p.snr_db) << ','
           << p.trials << ',' << p.errors << ',' << format_double(p.error_probability) << ','
           << format_double(p.ci_halfwidth) << '\n';
}

inline std::string sim_to_csv(const std::vector<SimResult> &results)
{
    std::ostringstream os;
    os << sim_csv_header();
    for (const auto &r : results)
        write_sim_rows(os, r);
    return os.str();
}

inline std::string trace_to_csv(const std::vector<TraceRow> &trace)
{
    std::ostringstream os;
    os << "iteration,objective,f1,f2,f3,tau\n";
    for (const auto &t : trace)
        os << t.iteration << ',' << format_double(t.objective) << ',' << format_double(t.f1) << ','
           << format_double(t.f2) << ',' << format_double(t.f3) << ',' << format_double(t.temperature) << '\n';
    return os.str();
}

inline std::string matrix_to_csv(const RealMatrix &m)
{
    std::ostringstream os;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            os << (c ? "," : "") << format_double(m(r, c));
        os << '\n';
    }
    return os.str();
}

} // namespace pbt
