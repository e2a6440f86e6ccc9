#pragma once

/// \file io.hpp
/// Snapshot CSV files, JSON encodings of decomposition results and trial
/// statistics, and atomic file replacement.
///
/// Snapshot CSV layout:
///
///     # dt=<dt> n=<channels>
///     t,ch0_re,ch0_im,ch1_re,ch1_im,...
///     0,<re>,<im>,...
///
/// One row per snapshot, `t` the integer time index, reals printed with 17
/// significant digits so that parsing restores every double exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "koopman/dmd.hpp"
#include "koopman/errors.hpp"
#include "koopman/stats.hpp"

namespace koopman {

inline constexpr int kSchemaVersion          = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

using Json = nlohmann::ordered_json;

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Shortest decimal form that parses back to `v` exactly (for labels).
inline std::string format_double_short(double v)
{
    char buf[40];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

namespace detail {

inline double parse_double(std::string_view text, std::size_t line)
{
    double value = 0.0;
    const char* first = text.data();
    const char* last  = text.data() + text.size();
    if (!text.empty() && *first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParameterError("snapshot CSV line " + std::to_string(line) + ": bad number '" + std::string(text) + "'");
    return value;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline std::string snapshot_header(Index n)
{
    std::string header = "t";
    for (Index i = 0; i < n; ++i)
        header += ",ch" + std::to_string(i) + "_re,ch" + std::to_string(i) + "_im";
    return header;
}

} // namespace detail

inline void write_snapshot_csv(std::ostream& out, const SnapshotMatrix& y)
{
    y.validate();
    out << "# dt=" << format_double(y.dt) << " n=" << y.channels() << '\n';
    out << detail::snapshot_header(y.channels()) << '\n';
    for (Index t = 0; t < y.snapshots(); ++t) {
        out << t;
        for (Index i = 0; i < y.channels(); ++i)
            out << ',' << format_double(y.data(i, t).real()) << ',' << format_double(y.data(i, t).imag());
        out << '\n';
    }
}

inline std::string snapshot_csv_string(const SnapshotMatrix& y)
{
    std::ostringstream os;
    write_snapshot_csv(os, y);
    return os.str();
}

inline SnapshotMatrix read_snapshot_csv(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw ParameterError("snapshot CSV: missing '# dt=<value> n=<value>' metadata line");

    double dt = 0.0;
    Index n   = -1;
    {
        std::istringstream meta(line.substr(2));
        std::string token;
        while (meta >> token) {
            if (token.rfind("dt=", 0) == 0)
                dt = detail::parse_double(std::string_view(token).substr(3), line_no);
            else if (token.rfind("n=", 0) == 0)
                n = static_cast<Index>(detail::parse_double(std::string_view(token).substr(2), line_no));
        }
    }
    if (!(dt > 0.0) || n < 1)
        throw ParameterError("snapshot CSV: metadata needs positive dt and n");

    ++line_no;
    if (!std::getline(in, line) || line != detail::snapshot_header(n))
        throw ParameterError("snapshot CSV: header does not match n=" + std::to_string(n));

    std::vector<Complex> values;
    Index m = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto fields = detail::split_commas(line);
        if (static_cast<Index>(fields.size()) != 1 + 2 * n)
            throw ParameterError("snapshot CSV line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(1 + 2 * n) + " fields");
        const double t = detail::parse_double(fields[0], line_no);
        if (t != static_cast<double>(m))
            throw ParameterError("snapshot CSV line " + std::to_string(line_no) + ": time index out of sequence");
        for (Index i = 0; i < n; ++i)
            values.emplace_back(detail::parse_double(fields[static_cast<std::size_t>(1 + 2 * i)], line_no),
                                detail::parse_double(fields[static_cast<std::size_t>(2 + 2 * i)], line_no));
        ++m;
    }
    if (m < 1)
        throw ParameterError("snapshot CSV: no data rows");

    SnapshotMatrix y{ComplexMatrix(n, m), dt};
    for (Index t = 0; t < m; ++t)
        for (Index i = 0; i < n; ++i)
            y.data(i, t) = values[static_cast<std::size_t>(t * n + i)];
    y.validate();
    return y;
}

inline SnapshotMatrix read_snapshot_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open snapshot file " + path.string());
    return read_snapshot_csv(in);
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ParameterError("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw ParameterError("cannot write " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ParameterError("cannot replace " + path.string());
    }
}

// JSON encodings. Complex numbers are {"re": x, "im": y}.

inline Json complex_json(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline Complex complex_from_json(const Json& j)
{
    if (j.is_number())
        return {j.get<double>(), 0.0};
    if (j.is_object() && j.contains("re"))
        return {j.at("re").get<double>(), j.value("im", 0.0)};
    throw ParameterError("expected a number or {\"re\", \"im\"} object, got " + j.dump());
}

inline Json complex_list_json(const ComplexVector& v)
{
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        out.push_back(complex_json(v[i]));
    return out;
}

inline Json dmd_result_json(const DmdOutcome& outcome, const SnapshotMatrix& input)
{
    Json modes = Json::array();
    for (Index k = 0; k < outcome.modes.cols(); ++k)
        modes.push_back(complex_list_json(outcome.modes.col(k)));
    return Json{
        {"schema_version", kSchemaVersion},
        {"version", kToolVersion},
        {"method", to_string(outcome.method)},
        {"n", input.channels()},
        {"m", input.snapshots()},
        {"dt", outcome.dt},
        {"retained_rank", outcome.retained_rank},
        {"ordering", "descending |lambda|, ties by descending Im(lambda)"},
        {"eigenvalues", complex_list_json(outcome.eigenvalues)},
        {"continuous_eigenvalues", complex_list_json(outcome.continuous_eigenvalues())},
        {"modes", std::move(modes)},
    };
}

inline Json nullable(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline Json trial_stats_json(const TrialStats& stats)
{
    Json eigen = Json::array();
    for (std::size_t k = 0; k < stats.eigen.size(); ++k) {
        const auto& e = stats.eigen[k];
        eigen.push_back(Json{
            {"index", k},
            {"truth", complex_json(e.truth)},
            {"mean", Json{{"re", nullable(e.mean.real())}, {"im", nullable(e.mean.imag())}}},
            {"re_interval", Json::array({nullable(e.re_lo), nullable(e.re_hi)})},
            {"im_interval", Json::array({nullable(e.im_lo), nullable(e.im_hi)})},
            {"truth_in_box", !e.estimates.empty() && e.inside_box(e.truth)},
            {"matched_trials", e.estimates.size()},
            {"median_relative_error", e.errors.empty() ? Json(nullptr) : Json(median(e.errors))},
        });
    }
    Json failures = Json::array();
    for (const auto& f : stats.failures)
        failures.push_back(Json{{"trial", f.trial}, {"reason", f.reason}});
    return Json{
        {"trials", stats.trials},
        {"succeeded", stats.succeeded()},
        {"failed", std::move(failures)},
        {"median_relative_error", nullable(stats.median_error())},
        {"eigenvalues", std::move(eigen)},
    };
}

/// Long-format rows (trial, eig, re, im, epsilon); `prefix` is prepended to
/// every row verbatim (for example "subspace,0.1,").
inline void append_trial_rows(std::string& out, const TrialStats& stats, std::string_view prefix = {})
{
    struct Row {
        Index trial;
        std::size_t eig;
        Complex z;
        double eps;
    };
    std::vector<Row> rows;
    for (std::size_t k = 0; k < stats.eigen.size(); ++k) {
        const auto& e = stats.eigen[k];
        for (std::size_t i = 0; i < e.estimates.size(); ++i)
            rows.push_back({e.trial[i], k, e.estimates[i], e.errors[i]});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.trial != b.trial ? a.trial < b.trial : a.eig < b.eig;
    });
    for (const auto& r : rows) {
        out += prefix;
        out += std::to_string(r.trial) + ',' + std::to_string(r.eig) + ',' + format_double(r.z.real()) + ',' +
               format_double(r.z.imag()) + ',' + format_double(r.eps) + '\n';
    }
}

} // namespace koopman
