#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "kronprec/sampling.hpp"

namespace kronprec {

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
    throw Error(ErrorKind::ParseError, "dataset line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) parts.push_back(cur);
    if (!s.empty() && s.back() == ',') parts.emplace_back();
    return parts;
}

double parse_double(const std::string& tok, std::size_t line) {
    if (tok.empty()) parse_fail(line, "empty field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE || !std::isfinite(v)) {
        parse_fail(line, "bad number '" + tok + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& tok, std::size_t line) {
    if (tok.empty() || tok.front() == '-') parse_fail(line, "expected unsigned integer");
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || errno == ERANGE) {
        parse_fail(line, "bad integer '" + tok + "'");
    }
    return static_cast<std::uint64_t>(v);
}

bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
    std::string buf;
    buf += "kronprec-dataset " + std::to_string(kDatasetSchemaMajor) + "\n";
    buf += "n,p,q,seed\n";
    buf += std::to_string(data.n) + "," + std::to_string(data.p) + "," + std::to_string(data.q) +
           "," + std::to_string(data.seed) + "\n";
    for (const Matrix& y : data.samples) {
        for (std::size_t i = 0; i < y.rows(); ++i) {
            for (std::size_t j = 0; j < y.cols(); ++j) {
                if (j > 0) buf += ',';
                append_double(buf, y(i, j));
            }
            buf += '\n';
        }
    }
    out << buf;
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!next_line(in, line)) parse_fail(lineno, "empty input");
    {
        std::istringstream is(line);
        std::string magic;
        int major = -1;
        if (!(is >> magic >> major) || magic != "kronprec-dataset") {
            parse_fail(lineno, "missing 'kronprec-dataset <version>' header");
        }
        if (major != kDatasetSchemaMajor) {
            parse_fail(lineno, "unsupported dataset schema major version " + std::to_string(major));
        }
    }
    ++lineno;
    if (!next_line(in, line) || line != "n,p,q,seed") parse_fail(lineno, "expected 'n,p,q,seed'");
    ++lineno;
    if (!next_line(in, line)) parse_fail(lineno, "missing shape record");
    const auto head = split_commas(line);
    if (head.size() != 4) parse_fail(lineno, "shape record needs 4 fields");
    const std::uint64_t n = parse_u64(head[0], lineno);
    const std::uint64_t p = parse_u64(head[1], lineno);
    const std::uint64_t q = parse_u64(head[2], lineno);
    const std::uint64_t seed = parse_u64(head[3], lineno);
    if (n == 0 || p == 0 || q == 0) parse_fail(lineno, "n, p, q must be positive");

    std::vector<Matrix> samples;
    samples.reserve(n);
    for (std::uint64_t s = 0; s < n; ++s) {
        Matrix y(p, q);
        for (std::uint64_t i = 0; i < p; ++i) {
            ++lineno;
            if (!next_line(in, line)) parse_fail(lineno, "truncated sample block");
            const auto fields = split_commas(line);
            if (fields.size() != q) {
                parse_fail(lineno, "expected " + std::to_string(q) + " values, got " +
                                       std::to_string(fields.size()));
            }
            for (std::uint64_t j = 0; j < q; ++j) y(i, j) = parse_double(fields[j], lineno);
        }
        samples.push_back(std::move(y));
    }
    while (next_line(in, line)) {
        ++lineno;
        if (!line.empty()) parse_fail(lineno, "trailing data after last sample block");
    }
    return make_dataset(std::move(samples), seed);
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
    write_dataset(out, data);
    if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return read_dataset(in);
}

}  // namespace kronprec
