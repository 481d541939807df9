#include "stiefsteer/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "stiefsteer/error.hpp"

namespace stiefsteer {

namespace {

long parse_dim(std::string_view tok, const char* name) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || v < 1) {
    throw ParseError(std::string("matrix header: bad ") + name + " '" +
                     std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string format_double17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Matrix read_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("matrix: missing header line");
  std::istringstream hdr(line);
  std::string sd, sn, extra;
  if (!(hdr >> sd >> sn) || (hdr >> extra)) {
    throw ParseError("matrix header: expected \"d N\", got '" + line + "'");
  }
  const long d = parse_dim(sd, "d");
  const long n = parse_dim(sn, "N");

  Matrix m(d, n);
  for (long i = 0; i < d; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("matrix: expected " + std::to_string(d) +
                       " rows, got " + std::to_string(i));
    }
    std::istringstream row(line);
    for (long j = 0; j < n; ++j) {
      std::string tok;
      if (!(row >> tok)) {
        throw ParseError("matrix row " + std::to_string(i + 1) + ": expected " +
                         std::to_string(n) + " values");
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ParseError("matrix row " + std::to_string(i + 1) +
                         ": bad value '" + tok + "'");
      }
      m(i, j) = v;
    }
    std::string extra_tok;
    if (row >> extra_tok) {
      throw ParseError("matrix row " + std::to_string(i + 1) +
                       ": more than " + std::to_string(n) + " values");
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw ParseError("matrix: trailing content after last row");
    }
  }
  return m;
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file " + path.string());
  try {
    return read_matrix(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double17(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write matrix file " + path.string());
  write_matrix(out, m);
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace stiefsteer
