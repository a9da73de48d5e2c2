#pragma once

#include "certificate.hpp"
#include "dag.hpp"
#include "distribution.hpp"

namespace qinflate {
namespace corpus {

inline CausalDAG triangle() {
  CausalDAG g;
  for (auto n : {"A", "B", "C"}) g.nodes.push_back({n, NodeKind::Observed, 2});
  for (auto n : {"rhoAB", "rhoAC", "rhoBC"}) g.nodes.push_back({n, NodeKind::LatentQuantum, 0});
  g.edges = {{"rhoAB", "A"}, {"rhoAB", "B"}, {"rhoAC", "A"},
             {"rhoAC", "C"}, {"rhoBC", "B"}, {"rhoBC", "C"}};
  return g;
}

inline CausalDAG triangle_settings() {
  CausalDAG g = triangle();
  g.nodes.push_back({"X", NodeKind::Observed, 2});
  g.nodes.push_back({"Y", NodeKind::Observed, 2});
  g.nodes.push_back({"Z", NodeKind::Observed, 2});
  g.edges.emplace_back("X", "A");
  g.edges.emplace_back("Y", "B");
  g.edges.emplace_back("Z", "C");
  return g;
}

inline CausalDAG tripartite_line() {
  CausalDAG g;
  for (auto n : {"A", "B", "C"}) g.nodes.push_back({n, NodeKind::Observed, 2});
  for (auto n : {"X", "Y", "Z"}) g.nodes.push_back({n, NodeKind::Observed, 2});
  g.nodes.push_back({"rhoAB", NodeKind::LatentQuantum, 0});
  g.nodes.push_back({"rhoBC", NodeKind::LatentQuantum, 0});
  g.edges = {{"rhoAB", "A"}, {"rhoAB", "B"}, {"rhoBC", "B"}, {"rhoBC", "C"},
             {"X", "A"},     {"Y", "B"},     {"Z", "C"}};
  return g;
}

/// Eavesdropped repeater: two tripartite sources leak a share to E, who
/// joins them with a collective measurement binned to its optimal bit.
inline CausalDAG eavesdropped_repeater() {
  CausalDAG g;
  g.nodes.push_back({"A", NodeKind::Observed, 2});
  g.nodes.push_back({"B", NodeKind::Observed, 4});
  g.nodes.push_back({"C", NodeKind::Observed, 2});
  g.nodes.push_back({"E", NodeKind::Observed, 2});
  g.nodes.push_back({"X", NodeKind::Observed, 2});
  g.nodes.push_back({"Z", NodeKind::Observed, 2});
  g.nodes.push_back({"rhoABE", NodeKind::LatentQuantum, 0});
  g.nodes.push_back({"rhoBCE", NodeKind::LatentQuantum, 0});
  g.edges = {{"rhoABE", "A"}, {"rhoABE", "B"}, {"rhoABE", "E"}, {"rhoBCE", "B"},
             {"rhoBCE", "C"}, {"rhoBCE", "E"}, {"X", "A"},      {"Z", "C"}};
  return g;
}

inline CausalDAG triangle_with_signaling() {
  CausalDAG g = triangle();
  g.edges.emplace_back("A", "B");
  return g;
}

inline CausalDAG instrumental() {
  CausalDAG g;
  g.nodes.push_back({"X", NodeKind::Observed, 2});
  g.nodes.push_back({"A", NodeKind::Observed, 2});
  g.nodes.push_back({"B", NodeKind::Observed, 2});
  g.nodes.push_back({"rho", NodeKind::LatentQuantum, 0});
  g.edges = {{"X", "A"}, {"rho", "A"}, {"rho", "B"}, {"A", "B"}};
  return g;
}

inline CausalDAG scenario(const std::string& name) {
  if (name == "triangle") return triangle();
  if (name == "triangle-settings") return triangle_settings();
  if (name == "line") return tripartite_line();
  if (name == "repeater") return eavesdropped_repeater();
  if (name == "triangle-ab") return triangle_with_signaling();
  if (name == "instrumental") return instrumental();
  throw ValidationError("unknown corpus scenario: " + name);
}

// ---------------------------------------------------------------------------
// Distribution families. v = 1 is noiseless; mixing follows each source
// equation (uniform noise, except the repeater family's v² mixing).

inline ObservedDistribution w_distribution(double v = 1.0) {
  ObservedDistribution d({"A", "B", "C"}, {1, 1, 1}, {2, 2, 2});
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) d.at({a, b, c}, {0, 0, 0}) = (a + b + c == 1) ? 1.0 / 3 : 0.0;
  return d.with_visibility(v);
}

inline ObservedDistribution ghz_distribution(double v = 1.0) {
  ObservedDistribution d({"A", "B", "C"}, {1, 1, 1}, {2, 2, 2});
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        d.at({a, b, c}, {0, 0, 0}) = (a == b && b == c) ? 0.5 : 0.0;
  return d.with_visibility(v);
}

inline ObservedDistribution mermin_distribution(double v = 1.0) {
  ObservedDistribution d({"A", "B", "C"}, {2, 2, 2}, {2, 2, 2});
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
              int s = x + y + z;
              double p = 1.0 / 8;
              if (s == 1) p = (1.0 + ((a + b + c) % 2 ? -1.0 : 1.0)) / 8;
              if (s == 3) p = (1.0 - ((a + b + c) % 2 ? -1.0 : 1.0)) / 8;
              d.at({a, b, c}, {x, y, z}) = p;
            }
  return d.with_visibility(v);
}

inline ObservedDistribution two_pr_distribution(double v = 1.0) {
  ObservedDistribution d({"A", "B", "C"}, {2, 2, 2}, {2, 2, 2});
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
              d.at({a, b, c}, {x, y, z}) =
                  (1.0 + (((a + b + c + x * y + y * z) % 2) ? -1.0 : 1.0)) / 8;
  return d.with_visibility(v);
}

/// Noisy-singlet repeater statistics; the closed form carries the v²
/// mixing itself. Party order (A, B, C) with B's Bell outcome b = (b1 b0).
inline ObservedDistribution repeater_distribution(double v = 1.0) {
  ObservedDistribution d({"A", "B", "C"}, {2, 1, 2}, {2, 4, 2});
  d.known_mask = std::set<std::string>{"A", "B", "C"};
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 4; ++b)
          for (int c = 0; c < 2; ++c) {
            int b0 = b & 1, b1 = b >> 1;
            double term = ((b0 % 2) ? -1.0 : 1.0) + (((b1 + x + z) % 2) ? -1.0 : 1.0);
            double p = (2.0 + v * v * (((a + c) % 2) ? -1.0 : 1.0) * term) / 32.0;
            d.at({a, b, c}, {x, 0, z}) = p;
          }
  return d;
}

struct Family {
  std::string scenario_name;
  ObservedDistribution (*generate)(double v);
  std::string note;
};

inline Family family(const std::string& name) {
  if (name == "w") return {"triangle", &w_distribution, "all zeros except one (Eq. 12)"};
  if (name == "ghz") return {"triangle", &ghz_distribution, "perfectly correlated bits (Eq. 26)"};
  if (name == "mermin")
    return {"triangle-settings", &mermin_distribution, "Mermin-GHZ box (Eq. 13)"};
  if (name == "2pr") return {"line", &two_pr_distribution, "two-PR-box statistics (Eq. 15)"};
  if (name == "repeater")
    return {"repeater", &repeater_distribution, "noisy-singlet repeater (Eq. 27)"};
  throw ValidationError("unknown corpus family: " + name);
}

inline ObservedDistribution distribution(const std::string& name, double v = 1.0) {
  if (v < 0.0 || v > 1.0) throw ValidationError("visibility must lie in [0,1]");
  return family(name).generate(v);
}

// ---------------------------------------------------------------------------
// Fixed witnesses and functionals from the triangle analyses.

namespace detail {

inline FunctionalAtom corr(std::initializer_list<std::pair<const char*, int>> obs) {
  FunctionalAtom atom;
  atom.correlator = true;
  for (const auto& [party, setting] : obs) atom.events.emplace_back(party, setting, -1);
  return atom;
}

}  // namespace detail

/// Polynomial witness rejecting the W distribution in the quantum
/// triangle; the base terms repeat under the cyclic and anticyclic party
/// permutations. Compatible distributions stay at or below 3.
inline Witness w_witness() {
  using detail::corr;
  const char* names[3] = {"A", "B", "C"};
  Witness w;
  w.bound = 3.0;
  // shift 0 = base terms, shift 1 = cyclic A->B->C->A, shift 2 = anticyclic
  for (int perm = 0; perm < 3; ++perm) {
    auto P = [&](int i) { return names[(i + perm) % 3]; };
    const char* A = P(0);
    const char* B = P(1);
    const char* C = P(2);
    auto add = [&](double coeff, std::vector<FunctionalAtom> factors) {
      w.functional.terms.push_back({coeff, std::move(factors)});
    };
    add(+1, {corr({{A, 0}})});
    add(+1, {corr({{A, 0}}), corr({{A, 0}})});
    add(-1, {corr({{A, 0}}), corr({{A, 0}, {B, 0}})});
    add(-1, {corr({{A, 0}}), corr({{A, 0}, {C, 0}})});
    add(-2, {corr({{B, 0}, {C, 0}})});
    add(+1, {corr({{B, 0}}), corr({{C, 0}})});
    add(-1, {corr({{B, 0}, {C, 0}}), corr({{B, 0}, {C, 0}})});
    add(-1, {corr({{A, 0}}), corr({{B, 0}}), corr({{C, 0}})});
  }
  return w;
}

/// Degree-2 polynomial witness rejecting the Mermin-GHZ box in the quantum
/// triangle with settings; compatible boxes stay at or below 32.
inline Witness mermin_box_witness() {
  using detail::corr;
  auto M = [&](int x, int y, int z) {
    return corr({{"A", x}, {"B", y}, {"C", z}});
  };
  Witness w;
  w.bound = 32.0;
  auto add = [&](double coeff, FunctionalAtom f1, FunctionalAtom f2) {
    w.functional.terms.push_back({coeff, {std::move(f1), std::move(f2)}});
  };
  for (auto [x, y, z] : {std::tuple{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}})
    add(+1, M(x, y, z), M(x, y, z));
  for (auto [x, y, z] : {std::tuple{1, 1, 1}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}})
    add(+3, M(x, y, z), M(x, y, z));
  add(+2, M(0, 1, 1), M(1, 0, 1));
  add(-2, M(0, 1, 1), M(0, 0, 0));
  add(+2, M(1, 0, 1), M(1, 1, 0));
  add(-2, M(1, 0, 1), M(0, 0, 0));
  add(+2, M(1, 1, 0), M(0, 1, 1));
  add(-2, M(1, 1, 0), M(0, 0, 0));
  add(+6, M(0, 0, 1), M(1, 0, 0));
  add(-6, M(0, 0, 1), M(1, 1, 1));
  add(+6, M(0, 1, 0), M(0, 0, 1));
  add(-6, M(0, 1, 0), M(1, 1, 1));
  add(+6, M(1, 0, 0), M(0, 1, 0));
  add(-6, M(1, 0, 0), M(1, 1, 1));
  return w;
}

inline FunctionalSpec mermin_functional() {
  using detail::corr;
  FunctionalSpec f;
  f.terms.push_back({+1, {corr({{"A", 1}, {"B", 0}, {"C", 0}})}});
  f.terms.push_back({+1, {corr({{"A", 0}, {"B", 1}, {"C", 0}})}});
  f.terms.push_back({+1, {corr({{"A", 0}, {"B", 0}, {"C", 1}})}});
  f.terms.push_back({-1, {corr({{"A", 1}, {"B", 1}, {"C", 1}})}});
  return f;
}

inline FunctionalSpec svetlichny_functional() {
  FunctionalSpec f = mermin_functional();
  using detail::corr;
  f.terms.push_back({-1, {corr({{"A", 0}, {"B", 1}, {"C", 1}})}});
  f.terms.push_back({-1, {corr({{"A", 1}, {"B", 0}, {"C", 1}})}});
  f.terms.push_back({-1, {corr({{"A", 1}, {"B", 1}, {"C", 0}})}});
  f.terms.push_back({+1, {corr({{"A", 0}, {"B", 0}, {"C", 0}})}});
  return f;
}

inline FunctionalSpec functional(const std::string& name) {
  if (name == "mermin") return mermin_functional();
  if (name == "svetlichny") return svetlichny_functional();
  throw ValidationError("unknown corpus functional: " + name);
}

inline Witness witness(const std::string& name) {
  if (name == "w") return w_witness();
  if (name == "mermin-box") return mermin_box_witness();
  throw ValidationError("unknown corpus witness: " + name);
}

}  // namespace corpus
}  // namespace qinflate
