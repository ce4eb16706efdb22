// csv.hpp — numeric CSV tables with '#' metadata lines and atomic file writes

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lmgsq/config.hpp"
#include "lmgsq/errors.hpp"

namespace lmgsq {

struct CsvTable {
    std::vector<std::string> meta;  // without the leading "# "
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) return k;
        }
        throw Error("no column '" + name + "'");
    }
    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

inline std::string to_csv(const CsvTable& t) {
    std::string out;
    for (const auto& m : t.meta) out += "# " + m + "\n";
    for (std::size_t k = 0; k < t.header.size(); ++k) out += (k ? "," : "") + t.header[k];
    out += "\n";
    for (const auto& r : t.rows) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k) out += ',';
            out += format_double(r[k]);
        }
        out += '\n';
    }
    return out;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.meta.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        if (!have_header) {
            t.header = detail::split(line, ',');
            have_header = true;
            continue;
        }
        std::vector<double> row;
        for (const auto& cell : detail::split(line, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != t.header.size()) throw Error("CSV row width does not match the header");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

inline CsvTable read_csv_file(const std::filesystem::path& path) { return parse_csv(read_text_file(path.string())); }

} // namespace lmgsq
