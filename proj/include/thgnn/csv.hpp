#ifndef THGNN_CSV_HPP
#define THGNN_CSV_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "thgnn/common.hpp"

namespace thgnn {

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // line numbers = index + 2

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw ParseError(path + ": missing column '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw MissingFileError("cannot open " + path.string());
    CsvTable t;
    t.path = path.string();
    std::string line;
    if (!std::getline(f, line)) throw ParseError(t.path + ": empty file");
    t.header = split_csv_line(line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != t.header.size())
            throw ParseError(t.path + " line " + std::to_string(t.rows.size() + 2) +
                             ": expected " + std::to_string(t.header.size()) + " fields");
        t.rows.push_back(std::move(fields));
    }
    return t;
}

inline int64_t parse_int(const CsvTable& t, size_t row, int col) {
    const std::string& s = t.rows[row][col];
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError(t.path + " line " + std::to_string(row + 2) + ": bad integer '" + s + "'");
    return v;
}

inline double parse_double(const CsvTable& t, size_t row, int col) {
    const std::string& s = t.rows[row][col];
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(t.path + " line " + std::to_string(row + 2) + ": bad number '" + s + "'");
    }
}

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace thgnn

#endif
