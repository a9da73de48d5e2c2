#pragma once

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "linalg.hpp"
#include "relaxation.hpp"

namespace qinflate {

struct SolveOptions {
  double eps = 1e-7;        // primal/dual residual tolerance (relative)
  double eps_gap = 1e-6;    // relative objective gap
  int max_iterations = 40000;
  int check_every = 25;
  double rho = 1.0;
  bool adaptive_rho = true;
  double over_relax = 1.6;
  double infeasibility_margin = 1e-6;
  bool stop_on_certificate = true;  // feasibility form: stop once a rounded
                                    // dual certificate verifies
  int verbose = 0;
  const std::vector<double>* warm_S = nullptr;
  const std::vector<double>* warm_Z = nullptr;
};

struct SolveReport {
  enum class Status { Optimal, InfeasibleCertified, Inaccurate, IterationLimit };
  Status status = Status::Inaccurate;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::vector<double> y;
  std::vector<double> S;  // primal matrix
  std::vector<double> Z;  // dual matrix (PSD by construction)
};

inline const char* to_string(SolveReport::Status s) {
  switch (s) {
    case SolveReport::Status::Optimal: return "optimal";
    case SolveReport::Status::InfeasibleCertified: return "infeasible-certified";
    case SolveReport::Status::Inaccurate: return "inaccurate";
    case SolveReport::Status::IterationLimit: return "iteration-limit";
  }
  return "?";
}

namespace detail {

/// Exactly reproject Z so that <A_i, Z> hits its dual-feasibility target;
/// returns the per-variable corrections applied.
inline void project_dual_exact(const SdpProblem& p, std::vector<double>& Z,
                               const std::vector<double>& targets) {
  for (int i = 0; i < p.var_count(); ++i) {
    double s = 0.0, norm2 = 0.0;
    for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)]) {
      s += c * Z[static_cast<size_t>(pos)];
      norm2 += c * c;
    }
    double delta = (targets[static_cast<size_t>(i)] - s) / norm2;
    for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)])
      Z[static_cast<size_t>(pos)] += delta * c;
  }
}

inline std::vector<double> dual_targets(const SdpProblem& p) {
  // <A_i, Z> = c_i for minimization, -c_i for maximization.
  std::vector<double> t(static_cast<size_t>(p.var_count()));
  const double sgn = p.sense == SdpProblem::Sense::Maximize ? -1.0 : 1.0;
  for (int i = 0; i < p.var_count(); ++i) t[static_cast<size_t>(i)] = sgn * p.objective[static_cast<size_t>(i)];
  return t;
}

inline double dual_bound_from(const SdpProblem& p, const std::vector<double>& Z) {
  double cz = 0.0;
  for (size_t k = 0; k < Z.size(); ++k) cz += p.constant[k] * Z[k];
  return (p.sense == SdpProblem::Sense::Maximize ? cz : -cz) + p.objective_constant;
}

}  // namespace detail

/// First-order operator-splitting solve of  optimize c'y  s.t.
/// C + sum_i y_i A_i ⪰ 0: alternate a PSD-cone projection
/// (eigendecomposition) with an affine step through a cached sparse
/// factorization of the normal matrix.
inline SolveReport solve(const SdpProblem& p, const SolveOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const int n = p.side;
  const size_t nn = static_cast<size_t>(n) * n;
  const int m = p.var_count();
  if (n <= 0 || m < 0) throw ValidationError("malformed SDP");
  if (n > 2000)
    throw ValidationError("dense cone projection capped at side 2000; export SDPA instead");

  // Internal minimization objective.
  std::vector<double> f(static_cast<size_t>(m));
  const double fsgn = p.sense == SdpProblem::Sense::Maximize ? -1.0 : 1.0;
  for (int i = 0; i < m; ++i) f[static_cast<size_t>(i)] = fsgn * p.objective[static_cast<size_t>(i)];

  // Normal matrix A'A (sparse, cached factorization).
  Eigen::SparseMatrix<double> D(m, m);
  {
    std::vector<Eigen::Triplet<double>> trips;
    std::map<int32_t, std::vector<std::pair<int, double>>> by_pos;
    for (int i = 0; i < m; ++i)
      for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)]) by_pos[pos].emplace_back(i, c);
    std::map<std::pair<int, int>, double> acc;
    for (const auto& [pos, vars] : by_pos)
      for (const auto& [i, ci] : vars)
        for (const auto& [j, cj] : vars) acc[{i, j}] += ci * cj;
    trips.reserve(acc.size());
    for (const auto& [ij, v] : acc) trips.emplace_back(ij.first, ij.second, v);
    D.setFromTriplets(trips.begin(), trips.end());
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(D);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("normal-matrix factorization failed");

  auto apply_AT = [&](const std::vector<double>& M, std::vector<double>& out) {
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)]) s += c * M[static_cast<size_t>(pos)];
      out[static_cast<size_t>(i)] = s;
    }
  };
  auto add_Ay = [&](const std::vector<double>& y, std::vector<double>& M) {
    for (int i = 0; i < m; ++i) {
      const double yi = y[static_cast<size_t>(i)];
      if (yi == 0.0) continue;
      for (const auto& [pos, c] : p.coeffs[static_cast<size_t>(i)]) M[static_cast<size_t>(pos)] += c * yi;
    }
  };

  double rho = opts.rho;
  std::vector<double> S(nn, 0.0), U(nn, 0.0), V(nn), My(nn), y(static_cast<size_t>(m), 0.0);
  std::vector<double> rhs(static_cast<size_t>(m)), aty(static_cast<size_t>(m));
  if (opts.warm_S && opts.warm_S->size() == nn) S = *opts.warm_S;
  if (opts.warm_Z && opts.warm_Z->size() == nn)
    for (size_t k = 0; k < nn; ++k) U[k] = -(*opts.warm_Z)[k] / rho;

  PsdProjector proj(n);
  SolveReport rep;
  double cnorm = 1.0;
  for (double c : p.constant) cnorm = std::max(cnorm, std::abs(c));

  std::vector<double> Sprev(nn);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    // affine step: (A'A) y = A'(S - U - C) - f/rho
    for (size_t k = 0; k < nn; ++k) V[k] = S[k] - U[k] - p.constant[k];
    apply_AT(V, rhs);
    for (int i = 0; i < m; ++i) rhs[static_cast<size_t>(i)] -= f[static_cast<size_t>(i)] / rho;
    Eigen::Map<Eigen::VectorXd>(y.data(), m) =
        ldlt.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), m));

    My = p.constant;
    add_Ay(y, My);

    // over-relaxed cone step
    Sprev.swap(S);
    const double a = opts.over_relax;
    for (size_t k = 0; k < nn; ++k) V[k] = a * My[k] + (1.0 - a) * Sprev[k] + U[k];
    S = V;
    proj.project(S);
    for (size_t k = 0; k < nn; ++k) U[k] = V[k] - S[k];

    if ((it + 1) % opts.check_every != 0 && it + 1 != opts.max_iterations) continue;

    double rp = 0.0, rd = 0.0;
    for (size_t k = 0; k < nn; ++k) rp += (My[k] - S[k]) * (My[k] - S[k]);
    rp = std::sqrt(rp) / cnorm;
    for (size_t k = 0; k < nn; ++k) V[k] = S[k] - Sprev[k];
    apply_AT(V, aty);
    for (int i = 0; i < m; ++i) rd += aty[static_cast<size_t>(i)] * aty[static_cast<size_t>(i)];
    rd = rho * std::sqrt(rd) / cnorm;

    double pobj = p.objective_constant;
    for (int i = 0; i < m; ++i) pobj += p.objective[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    std::vector<double> Z(nn);
    for (size_t k = 0; k < nn; ++k) Z[k] = -rho * U[k];
    double dobj = detail::dual_bound_from(p, Z);

    if (opts.verbose >= 2)
      std::fprintf(stderr, "  it %6d rho %.2e rp %.2e rd %.2e pobj %.8f dobj %.8f\n", it + 1, rho,
                   rp, rd, pobj, dobj);

    rep.primal_objective = pobj;
    rep.dual_objective = dobj;
    rep.primal_residual = rp;
    rep.dual_residual = rd;
    rep.iterations = it + 1;
    rep.y = y;
    rep.S = S;
    rep.Z = std::move(Z);

    if (!std::isfinite(rp) || !std::isfinite(pobj)) {
      rep.status = SolveReport::Status::Inaccurate;
      rep.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
      return rep;
    }

    const double gap = std::abs(pobj - dobj) / std::max({1.0, std::abs(pobj), std::abs(dobj)});
    if (rp < opts.eps && rd < opts.eps && gap < opts.eps_gap) {
      rep.status = SolveReport::Status::Optimal;
      rep.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
      return rep;
    }

    // Feasibility form: a rounded dual certificate can settle the question
    // long before full convergence.
    if (p.lambda_var >= 0 && opts.stop_on_certificate && dobj < -opts.infeasibility_margin) {
      std::vector<double> Zr = rep.Z;
      Eigen::Map<Eigen::MatrixXd> Zm(Zr.data(), n, n);
      Eigen::MatrixXd sym = 0.5 * (Zm + Zm.transpose());
      Zm = sym;
      detail::project_dual_exact(p, Zr, detail::dual_targets(p));
      double bound = detail::dual_bound_from(p, Zr);
      if (bound < -opts.infeasibility_margin && min_eigenvalue(n, Zr) >= -1e-8) {
        rep.status = SolveReport::Status::InfeasibleCertified;
        rep.Z = std::move(Zr);
        rep.dual_objective = bound;
        rep.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        return rep;
      }
    }

    if (opts.adaptive_rho && (it + 1) % (opts.check_every * 4) == 0 && rd > 0 && rp > 0) {
      if (rp > 10.0 * rd) {
        rho *= 2.0;
        for (size_t k = 0; k < nn; ++k) U[k] *= 0.5;
      } else if (rd > 10.0 * rp) {
        rho *= 0.5;
        for (size_t k = 0; k < nn; ++k) U[k] *= 2.0;
      }
    }
  }

  rep.status = SolveReport::Status::IterationLimit;
  rep.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return rep;
}

}  // namespace qinflate
