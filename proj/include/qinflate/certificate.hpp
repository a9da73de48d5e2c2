#pragma once

#include <cstdio>

#include "solver.hpp"

namespace qinflate {

/// Polynomial incompatibility witness over observed probabilities:
/// compatible distributions obey evaluate(dist) <= bound.
struct Witness {
  FunctionalSpec functional;
  double bound = 0.0;

  double evaluate(const ObservedDistribution& dist) const { return functional.evaluate(dist); }

  nlohmann::json to_json() const {
    return {{"functional", functional.to_json()}, {"bound", bound}, {"direction", "violation-above"}};
  }
  static Witness from_json(const nlohmann::json& doc) {
    Witness w;
    w.functional = FunctionalSpec::from_json(doc.at("functional"));
    w.bound = doc.at("bound").get<double>();
    return w;
  }
};

inline double evaluate_witness(const Witness& w, const ObservedDistribution& dist) {
  return w.evaluate(dist);
}

/// Dual solution, exactly reprojected onto the dual-feasible affine
/// subspace. For the eigenvalue-shift feasibility form, bound < 0 is a
/// Farkas certificate of infeasibility.
struct Certificate {
  int side = 0;
  SdpProblem::Sense sense = SdpProblem::Sense::Maximize;
  bool feasibility = false;
  std::vector<double> dual;  // dense symmetric, PSD up to tolerance
  double bound = 0.0;
  double min_eig = 0.0;
};

inline Certificate extract_certificate(const SdpProblem& p, const SolveReport& rep) {
  Certificate cert;
  cert.side = p.side;
  cert.sense = p.sense;
  cert.feasibility = p.lambda_var >= 0;
  cert.dual = rep.Z;
  Eigen::Map<Eigen::MatrixXd> Z(cert.dual.data(), p.side, p.side);
  Eigen::MatrixXd sym = 0.5 * (Z + Z.transpose());
  Z = sym;
  detail::project_dual_exact(p, cert.dual, detail::dual_targets(p));
  cert.bound = detail::dual_bound_from(p, cert.dual);
  cert.min_eig = min_eigenvalue(p.side, cert.dual);
  return cert;
}

/// Re-check a certificate from scratch with plain matrix arithmetic: dual
/// feasibility, PSD-ness, the recomputed bound, and (for feasibility
/// problems) the strict Farkas margin.
inline bool verify_certificate(const SdpProblem& p, const Certificate& cert,
                               double margin = 1e-6, double psd_tol = 1e-8,
                               double feas_tol = 1e-7) {
  if (cert.side != p.side || cert.dual.size() != static_cast<size_t>(p.side) * p.side) return false;
  const auto targets = detail::dual_targets(p);
  for (int i = 0; i < p.var_count(); ++i) {
    double s = 0.0;
    for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)]) s += c * cert.dual[static_cast<size_t>(pos)];
    if (std::abs(s - targets[static_cast<size_t>(i)]) > feas_tol) return false;
  }
  double bound = detail::dual_bound_from(p, cert.dual);
  if (std::abs(bound - cert.bound) > 1e-7 * std::max(1.0, std::abs(bound))) return false;
  if (min_eigenvalue(p.side, cert.dual) < -psd_tol) return false;
  if (cert.feasibility && bound >= -margin) return false;  // no separation
  return true;
}

namespace detail {

inline bool rationalize(double x, int max_den, double tol, long& num, long& den) {
  // continued fractions
  double v = x;
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int it = 0; it < 32; ++it) {
    double fl = std::floor(v);
    long a = static_cast<long>(fl);
    long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    double rem = v - fl;
    if (std::abs(static_cast<double>(p1) / q1 - x) < tol) {
      num = p1;
      den = q1;
      return true;
    }
    if (rem < 1e-12) break;
    v = 1.0 / rem;
  }
  if (q1 > 0 && std::abs(static_cast<double>(p1) / q1 - x) < tol) {
    num = p1;
    den = q1;
    return true;
  }
  return false;
}

}  // namespace detail

/// Collect the dual weights sitting on known (identifiable) entries into a
/// polynomial over observed probabilities. Compatible distributions keep
/// the polynomial at or below its bound; the rejected one exceeds it.
/// Coefficients are rationalized when a small-denominator rounding passes
/// re-verification of the adjusted dual.
inline Witness render_witness(const SdpProblem& p, const MomentMatrix& mm, Algebra& alg,
                              const Certificate& cert, bool rationalize_coeffs = true) {
  if (!cert.feasibility)
    throw ValidationError("witness rendering expects a feasibility-form certificate");

  // Per-class weight: sum of the dual over that class's known positions.
  std::map<int, double> weights;
  std::map<int, std::vector<int32_t>> positions;
  for (int u = 0; u < mm.side; ++u)
    for (int v = 0; v < mm.side; ++v) {
      int32_t c = mm.at(u, v);
      if (c == kZeroClass || !mm.known.count(c)) continue;
      weights[c] += cert.dual[static_cast<size_t>(u) * mm.side + v];
      positions[c].push_back(static_cast<int32_t>(u) * mm.side + v);
    }

  double scale = 0.0;
  for (const auto& [cls, w] : weights)
    if (cls != kIdentityClass) scale = std::max(scale, std::abs(w));
  if (scale <= 0) scale = 1.0;

  // Optional small-fraction rounding, re-verified on the adjusted dual.
  std::map<int, double> rounded = weights;
  if (rationalize_coeffs) {
    std::map<int, double> cand = weights;
    bool all_ok = true;
    for (auto& [cls, w] : cand) {
      long num = 0, den = 1;
      if (detail::rationalize(w / scale, 60, 2e-4, num, den))
        w = scale * static_cast<double>(num) / static_cast<double>(den);
      else
        all_ok = false;
    }
    if (all_ok) {
      std::vector<double> adjusted = cert.dual;
      for (const auto& [cls, w] : cand) {
        const auto& pos = positions[cls];
        double delta = (w - weights[cls]) / static_cast<double>(pos.size());
        for (int32_t q : pos) adjusted[static_cast<size_t>(q)] += delta;
      }
      Certificate check = cert;
      check.dual = std::move(adjusted);
      check.bound = detail::dual_bound_from(p, check.dual);
      if (check.bound < 0 && verify_certificate(p, check, /*margin=*/0.0, /*psd_tol=*/1e-7))
        rounded = std::move(cand);
    }
  }

  const auto& group = alg.problem().group();
  auto blocks_of = [&](int cls) -> std::optional<std::vector<Algebra::Block>> {
    Monomial rep = alg.representative(cls);
    auto b = alg.identifiable_blocks(rep);
    if (b) return b;
    Monomial arep = alg.adjoint(rep);
    for (const auto& perm : group) {
      b = alg.identifiable_blocks(alg.apply_perm(rep, perm));
      if (b) return b;
      b = alg.identifiable_blocks(alg.apply_perm(arep, perm));
      if (b) return b;
    }
    return alg.identifiable_blocks(arep);
  };

  Witness w;
  w.bound = rounded.count(kIdentityClass) ? rounded[kIdentityClass] : 0.0;
  for (const auto& [cls, weight] : rounded) {
    if (cls == kIdentityClass) continue;
    if (std::abs(weight) < 1e-9 * scale) continue;
    auto blocks = blocks_of(cls);
    if (!blocks)
      throw ValidationError("dual weight on a non-identifiable entry; report the raw certificate");
    FunctionalTerm term;
    term.coeff = -weight;
    for (const auto& blk : *blocks) {
      FunctionalAtom atom;
      for (const auto& ev : blk.events)
        atom.events.emplace_back(alg.problem().scenario.parties[ev.party].name, ev.setting,
                                 ev.outcome);
      term.factors.push_back(std::move(atom));
    }
    w.functional.terms.push_back(std::move(term));
  }
  return w;
}

inline nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json doc;
  doc["side"] = cert.side;
  doc["bound"] = cert.bound;
  doc["min_eigenvalue"] = cert.min_eig;
  doc["feasibility"] = cert.feasibility;
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < cert.side; ++i)
    for (int j = i; j < cert.side; ++j) {
      double v = cert.dual[static_cast<size_t>(i) * cert.side + j];
      if (std::abs(v) > 1e-12) entries.push_back({i, j, v});
    }
  doc["dual"] = std::move(entries);
  return doc;
}

}  // namespace qinflate
