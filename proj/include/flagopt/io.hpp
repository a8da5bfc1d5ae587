#pragma once

#include "flagopt/objectives.hpp"
#include "flagopt/optim.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace flagopt {

namespace detail {

// Shortest decimal that round-trips a double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::vector<double> parse_csv_line(const std::string& line, const std::string& where) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t next = line.find(',', pos);
    if (next == std::string::npos) next = line.size();
    const std::string cell = line.substr(pos, next - pos);
    try {
      std::size_t used = 0;
      row.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad numeric cell '" + cell + "'");
    }
    pos = next + 1;
    if (next == line.size()) break;
  }
  return row;
}

}  // namespace detail

/// Plain-text CSV, one matrix row per line, no header; dimensions inferred.
inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_matrix_csv: cannot open " + path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw ParseError("write_matrix_csv: write failed for " + path);
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(detail::parse_csv_line(line, path));
    if (rows.size() > 1 && rows.back().size() != rows.front().size())
      throw ParseError(path + ": ragged rows");
  }
  if (rows.empty()) throw ParseError(path + ": empty matrix file");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

/// A parsed flag-point file before the orthogonality gate; used by tools that
/// want to diagnose invalid representatives rather than reject them on read.
struct RawFlagPoint {
  Matrix v;
  FlagSignature sig;
};

/// Flag point file: one header line "n;n_1,...,n_d", then the V matrix in CSV.
inline void write_flag_point(const std::string& path, const FlagPoint& p) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_flag_point: cannot open " + path);
  out << p.sig.n << ';';
  for (std::size_t i = 0; i < p.sig.dims.size(); ++i) {
    if (i) out << ',';
    out << p.sig.dims[i];
  }
  out << '\n';
  for (Index i = 0; i < p.v.rows(); ++i) {
    for (Index j = 0; j < p.v.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(p.v(i, j));
    }
    out << '\n';
  }
  if (!out) throw ParseError("write_flag_point: write failed for " + path);
}

inline RawFlagPoint read_flag_point_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_flag_point: cannot open " + path);
  std::string header;
  if (!std::getline(in, header) || header.empty())
    throw ParseError(path + ": missing signature header");
  const std::size_t semi = header.find(';');
  if (semi == std::string::npos) throw ParseError(path + ": header must be 'n;n_1,...,n_d'");
  Index n = 0;
  std::vector<Index> dims;
  try {
    n = static_cast<Index>(std::stoll(header.substr(0, semi)));
    std::stringstream ss(header.substr(semi + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(static_cast<Index>(std::stoll(tok)));
  } catch (const std::exception&) {
    throw ParseError(path + ": bad signature header");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(detail::parse_csv_line(line, path));
  }
  if (static_cast<Index>(rows.size()) != n)
    throw ParseError(path + ": V must have n rows");
  Matrix v(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw ParseError(path + ": V must be n-by-n");
    for (Index j = 0; j < n; ++j) v(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  FlagSignature sig;
  try {
    sig = flag_signature(n, std::move(dims));
  } catch (const BadSignatureError& e) {
    throw ParseError(path + ": " + e.what());
  }
  return RawFlagPoint{std::move(v), std::move(sig)};
}

inline FlagPoint read_flag_point(const std::string& path) {
  RawFlagPoint raw = read_flag_point_raw(path);
  return flag_from_basis(std::move(raw.v), std::move(raw.sig));
}

/// RunTrace CSV: header "method,iter,objective,grad_norm,elapsed_s".
inline void write_run_trace(const std::string& path, const std::string& method,
                            const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_run_trace: cannot open " + path);
  out << "method,iter,objective,grad_norm,elapsed_s\n";
  for (const TraceRecord& r : trace.records)
    out << method << ',' << r.iter << ',' << detail::format_double(r.objective) << ','
        << detail::format_double(r.grad_norm) << ',' << detail::format_double(r.elapsed_s)
        << '\n';
  if (!out) throw ParseError("write_run_trace: write failed for " + path);
}

/// Separation manifest: header "n;m_1,...,m_{d+1}" followed by one basis CSV
/// path per line, relative to the manifest location.
inline SeparationInstance read_separation_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_separation_manifest: cannot open " + path);
  std::string header;
  if (!std::getline(in, header) || header.empty())
    throw ParseError(path + ": missing header line");
  const std::size_t semi = header.find(';');
  if (semi == std::string::npos) throw ParseError(path + ": header must be 'n;m_1,...,m_k'");
  Index n = 0;
  std::vector<Index> sizes;
  try {
    n = static_cast<Index>(std::stoll(header.substr(0, semi)));
    std::stringstream ss(header.substr(semi + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(static_cast<Index>(std::stoll(tok)));
  } catch (const std::exception&) {
    throw ParseError(path + ": bad header");
  }
  std::vector<std::string> files;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) files.push_back(line);
  }
  if (files.size() != sizes.size())
    throw ParseError(path + ": expected one basis file per declared block");
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  std::vector<Matrix> bases;
  bases.reserve(files.size());
  Index total = 0;
  for (std::size_t j = 0; j < files.size(); ++j) {
    Matrix u = read_matrix_csv((dir / files[j]).string());
    if (u.rows() != n || u.cols() != sizes[j])
      throw ParseError(path + ": basis " + files[j] + " does not match declared size");
    total += u.cols();
    bases.push_back(std::move(u));
  }
  if (total != n) throw ParseError(path + ": block sizes do not sum to n");
  try {
    return separation_instance(std::move(bases));
  } catch (const BadInstanceError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace flagopt
