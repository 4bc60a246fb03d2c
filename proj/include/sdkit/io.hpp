#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdkit/engine.hpp"
#include "sdkit/parser.hpp"

namespace sdkit {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Error in a CSV data file, with the offending 1-based line.
class CsvError : public IoError {
public:
    CsvError(const std::string& file, int line, const std::string& msg)
        : IoError(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Reads a two-column `t,value` series. Lines starting with '#' and blank
/// lines are skipped; the first remaining line must be the header. Times must
/// be strictly increasing.
inline std::vector<LookupPoint> parse_series_csv(std::string_view text, const std::string& origin = "<csv>") {
    std::vector<LookupPoint> points;
    bool header_seen = false;
    const auto lines = split_lines(text);
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    };
    auto number = [&](std::string_view field, int line) {
        std::string buf(trim(field));
        char* end = nullptr;
        const double v = std::strtod(buf.c_str(), &end);
        if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v))
            throw CsvError(origin, line, "'" + buf + "' is not a finite number");
        return v;
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        const std::string_view line = trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
            throw CsvError(origin, line_no, "expected exactly two comma-separated columns");
        if (!header_seen) {
            if (trim(line.substr(0, comma)) != "t" || trim(line.substr(comma + 1)) != "value")
                throw CsvError(origin, line_no, "expected header 't,value'");
            header_seen = true;
            continue;
        }
        LookupPoint p{number(line.substr(0, comma), line_no), number(line.substr(comma + 1), line_no)};
        if (!points.empty() && !(p.t > points.back().t))
            throw CsvError(origin, line_no, "times must be strictly increasing");
        points.push_back(p);
    }
    if (!header_seen) throw CsvError(origin, 1, "missing header 't,value'");
    if (points.empty()) throw CsvError(origin, static_cast<int>(lines.size()), "no data rows");
    return points;
}

inline std::vector<LookupPoint> read_series_csv(const std::filesystem::path& path) {
    return parse_series_csv(read_text_file(path), path.string());
}

inline std::string format_series_csv(const std::vector<LookupPoint>& points, std::string_view comment = {}) {
    std::string out;
    if (!comment.empty()) {
        for (auto line : split_lines(comment)) out += "# " + std::string(line) + "\n";
    }
    out += "t,value\n";
    for (const auto& p : points) out += format_real(p.t) + "," + format_real(p.value) + "\n";
    return out;
}

/// Dense result as CSV: header `t,<series>...`, one row per grid point.
inline std::string format_result_csv(const SimulationResult& r) {
    std::string out = "t";
    for (const auto& s : r.series) out += "," + s.name;
    out += '\n';
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        out += format_real(r.times[i]);
        for (const auto& s : r.series) out += "," + format_real(s.values[i]);
        out += '\n';
    }
    return out;
}

/// Failure to load a model file: the parse errors (with spans) or a lookup
/// data file problem.
class ModelLoadError : public Error {
public:
    ModelLoadError(std::string path, std::vector<ParseError> errors)
        : Error(render(path, errors)), path_(std::move(path)), errors_(std::move(errors)) {}
    ModelLoadError(std::string path, const std::string& msg) : Error(msg), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const std::vector<ParseError>& errors() const { return errors_; }

private:
    static std::string render(const std::string& path, const std::vector<ParseError>& errors) {
        std::string s;
        for (const auto& e : errors) s += (s.empty() ? "" : "\n") + format_error(path, e);
        return s;
    }
    std::string path_;
    std::vector<ParseError> errors_;
};

/// Loads the data of every file-backed lookup, resolving paths relative to
/// `base_dir`.
inline void resolve_lookups(Model& model, const std::filesystem::path& base_dir) {
    for (const auto& l : model.lookups()) {
        if (!l.source_path) continue;
        const auto path = base_dir / *l.source_path;
        model.set_lookup_table(l.name, LookupTable(read_series_csv(path)));
    }
}

/// Parses a model file and loads its lookup data.
inline Model load_model_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ModelLoadError(path.string(), e.what());
    }
    auto parsed = parse_model(text);
    if (!parsed) throw ModelLoadError(path.string(), std::move(parsed.errors));
    try {
        resolve_lookups(*parsed.value, path.parent_path());
    } catch (const IoError& e) {
        throw ModelLoadError(path.string(), e.what());
    }
    return std::move(*parsed.value);
}

}  // namespace sdkit
