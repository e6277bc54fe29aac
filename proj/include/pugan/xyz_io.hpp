#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pugan/geometry.hpp"

namespace pugan {

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Reads the ASCII XYZ format: one point per line, three reals, '#' comments.
inline PointCloud read_xyz(std::istream& in, const std::string& source = "<stream>") {
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Point3 p;
        std::string extra;
        if (!(ls >> p.x >> p.y >> p.z)) throw ParseError(source, line_no, "expected three reals");
        if (ls >> extra) throw ParseError(source, line_no, "unexpected token '" + extra + "'");
        if (!p.finite()) throw ParseError(source, line_no, "non-finite coordinate");
        cloud.push_back(p);
    }
    return cloud;
}

inline PointCloud read_xyz(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_xyz(in, path.string());
}

inline void write_xyz(std::ostream& out, const PointCloud& cloud) {
    char buf[96];
    for (const auto& p : cloud) {
        std::snprintf(buf, sizeof(buf), "%.6g %.6g %.6g\n", p.x, p.y, p.z);
        out << buf;
    }
}

inline void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_xyz(out, cloud);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace pugan
