#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include "relaxation.hpp"

namespace qinflate {

/// Write the sparse SDPA form of the problem:
///   min c'x  s.t.  X = sum_i x_i F_i - F_0,  X ⪰ 0
/// with F_i = A_i and F_0 = -C. A maximize sense flips the exported
/// objective and is recorded in a comment our parser understands; external
/// solvers simply minimize the flipped objective. Output is deterministic:
/// one block, upper-triangle entries, row-major order, %.17g numbers.
inline void export_sdpa(const SdpProblem& p, std::ostream& os) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  if (p.sense == SdpProblem::Sense::Maximize) os << "* sense: maximize\n";
  if (p.objective_constant != 0.0) os << "* objconst: " << num(p.objective_constant) << "\n";
  if (p.lambda_var >= 0) os << "* lambda: " << p.lambda_var << "\n";
  os << p.var_count() << "\n";
  os << 1 << "\n";
  os << p.side << "\n";
  const double flip = p.sense == SdpProblem::Sense::Maximize ? -1.0 : 1.0;
  for (int i = 0; i < p.var_count(); ++i)
    os << (i ? " " : "") << num(flip * p.objective[static_cast<size_t>(i)]);
  os << "\n";
  for (int i = 0; i < p.side; ++i)
    for (int j = i; j < p.side; ++j) {
      double c = p.constant_at(i, j);
      if (c != 0.0) os << "0 1 " << i + 1 << " " << j + 1 << " " << num(-c) << "\n";
    }
  for (int v = 0; v < p.var_count(); ++v) {
    std::vector<std::pair<int32_t, double>> upper;
    for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(v)]) {
      int i = pos / p.side, j = pos % p.side;
      if (i <= j) upper.emplace_back(pos, c);
    }
    std::sort(upper.begin(), upper.end());
    for (const auto& [pos, c] : upper)
      os << v + 1 << " 1 " << pos / p.side + 1 << " " << pos % p.side + 1 << " " << num(c) << "\n";
  }
}

inline void export_sdpa(const SdpProblem& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  export_sdpa(p, f);
  if (!f.good()) throw std::runtime_error("write failure on " + path);
}

/// Parse sparse SDPA. Multiple blocks land as one block-diagonal PSD
/// matrix; negative (diagonal) block sizes are folded in the same way.
inline SdpProblem parse_sdpa(std::istream& is) {
  SdpProblem p;
  bool maximize = false;
  std::string line;
  std::vector<std::string> data_lines;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '*' || line[0] == '"') {
      if (line.find("sense: maximize") != std::string::npos) maximize = true;
      auto oc = line.find("objconst:");
      if (oc != std::string::npos) p.objective_constant = std::stod(line.substr(oc + 9));
      auto lv = line.find("lambda:");
      if (lv != std::string::npos) p.lambda_var = std::stoi(line.substr(lv + 7));
      continue;
    }
    data_lines.push_back(line);
  }
  if (data_lines.size() < 4) throw ParseError("truncated SDPA file");
  size_t ln = 0;
  auto next_tokens = [&]() {
    std::istringstream ss(data_lines.at(ln++));
    std::vector<std::string> toks;
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
  };
  int m = std::stoi(next_tokens().at(0));
  int nblocks = std::stoi(next_tokens().at(0));
  auto sizes_tok = next_tokens();
  if (static_cast<int>(sizes_tok.size()) < nblocks) throw ParseError("SDPA: missing block sizes");
  std::vector<int> block_size(static_cast<size_t>(nblocks)), block_offset(static_cast<size_t>(nblocks));
  int side = 0;
  for (int b = 0; b < nblocks; ++b) {
    int s = std::abs(std::stoi(sizes_tok[static_cast<size_t>(b)]));
    block_offset[static_cast<size_t>(b)] = side;
    block_size[static_cast<size_t>(b)] = s;
    side += s;
  }
  p.side = side;
  p.constant.assign(static_cast<size_t>(side) * side, 0.0);
  p.coeffs.assign(static_cast<size_t>(m), {});
  p.objective.assign(static_cast<size_t>(m), 0.0);
  p.var_class.assign(static_cast<size_t>(m), -1);

  auto obj_tok = next_tokens();
  if (static_cast<int>(obj_tok.size()) != m) throw ParseError("SDPA: objective length mismatch");
  const double flip = maximize ? -1.0 : 1.0;
  for (int i = 0; i < m; ++i) p.objective[static_cast<size_t>(i)] = flip * std::stod(obj_tok[static_cast<size_t>(i)]);
  p.sense = maximize ? SdpProblem::Sense::Maximize : SdpProblem::Sense::Minimize;

  while (ln < data_lines.size()) {
    auto t = next_tokens();
    if (t.size() != 5) throw ParseError("SDPA: entry line needs 5 fields");
    int matno = std::stoi(t[0]), blk = std::stoi(t[1]);
    int i = std::stoi(t[2]) - 1, j = std::stoi(t[3]) - 1;
    double v = std::stod(t[4]);
    if (blk < 1 || blk > nblocks) throw ParseError("SDPA: block out of range");
    int off = block_offset[static_cast<size_t>(blk - 1)];
    if (i < 0 || j < i || j >= block_size[static_cast<size_t>(blk - 1)])
      throw ParseError("SDPA: entry indices out of range");
    int32_t pos = static_cast<int32_t>(off + i) * side + (off + j);
    int32_t post = static_cast<int32_t>(off + j) * side + (off + i);
    if (matno == 0) {
      p.constant[static_cast<size_t>(pos)] = -v;
      p.constant[static_cast<size_t>(post)] = -v;
    } else {
      if (matno < 1 || matno > m) throw ParseError("SDPA: matrix number out of range");
      auto& cs = p.coeffs[static_cast<size_t>(matno - 1)];
      cs.emplace_back(pos, v);
      if (post != pos) cs.emplace_back(post, v);
    }
  }
  return p;
}

inline SdpProblem parse_sdpa(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return parse_sdpa(f);
}

}  // namespace qinflate
