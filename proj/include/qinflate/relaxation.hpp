#pragma once

#include <atomic>
#include <cmath>
#include <set>
#include <thread>
#include <unordered_set>

#include "algebra.hpp"

namespace qinflate {

/// Level specification: union of NPA levels S<k> and local levels L<k>,
/// each optionally capped at a generating-word length with @<len>.
/// Examples: "S2", "L2@3", "S2+L1".
struct LevelSpec {
  struct Term {
    bool local = false;
    int level = 1;
    int max_len = -1;
  };
  std::vector<Term> terms;

  static LevelSpec parse(const std::string& text) {
    LevelSpec spec;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t plus = text.find('+', pos);
      if (plus == std::string::npos) plus = text.size();
      std::string tok = text.substr(pos, plus - pos);
      pos = plus + 1;
      if (tok.empty()) throw ParseError("empty level term in: " + text);
      Term t;
      int cap = -1;
      auto at = tok.find('@');
      if (at != std::string::npos) {
        cap = std::stoi(tok.substr(at + 1));
        tok = tok.substr(0, at);
      }
      char c = static_cast<char>(std::toupper(tok[0]));
      size_t digits = 1;
      if (tok.rfind("NPA", 0) == 0 || tok.rfind("npa", 0) == 0) {
        c = 'S';
        digits = 3;
      } else if (tok.size() >= 5 && (tok.rfind("LOCAL", 0) == 0 || tok.rfind("local", 0) == 0)) {
        c = 'L';
        digits = 5;
      }
      if (c != 'S' && c != 'L') throw ParseError("level term must start with S/NPA or L/LOCAL: " + tok);
      t.local = c == 'L';
      t.level = std::stoi(tok.substr(digits));
      t.max_len = cap;
      if (t.level < 0) throw ParseError("negative level: " + tok);
      spec.terms.push_back(t);
    }
    if (spec.terms.empty()) throw ParseError("empty level spec");
    return spec;
  }

  std::string str() const {
    std::string s;
    for (size_t i = 0; i < terms.size(); ++i) {
      if (i) s += "+";
      s += (terms[i].local ? "L" : "S") + std::to_string(terms[i].level);
      if (terms[i].max_len >= 0) s += "@" + std::to_string(terms[i].max_len);
    }
    return s;
  }
};

/// Generating set of canonical normal-ordered words (deduplicated as
/// words, not as symmetry classes; the symmetry enters through shared
/// entry classes). Identity is element 0.
struct MonomialSet {
  std::string spec;
  std::vector<Monomial> words;

  int side() const { return static_cast<int>(words.size()); }
};

inline MonomialSet generate_monomial_set(const Algebra& alg, const LevelSpec& spec,
                                         int size_cap = 4000) {
  const InflationProblem& p = alg.problem();
  const int L = p.letter_count();
  const int owners = p.party_count() + static_cast<int>(p.scenario.unitaries.size());

  auto encode = [](const Monomial& m) {
    std::string s;
    for (uint16_t l : m.word) {
      s.push_back(static_cast<char>(l & 0xff));
      s.push_back(static_cast<char>(l >> 8));
    }
    return s;
  };

  std::unordered_set<std::string> seen;
  std::vector<Monomial> words;
  auto add = [&](const Monomial& m) {
    if (m.zero) return false;
    auto [it, fresh] = seen.emplace(encode(m));
    if (fresh) words.push_back(m);
    return fresh;
  };
  add(Monomial{});

  for (const LevelSpec::Term& t : spec.terms) {
    int depth = t.local ? t.level * owners : t.level;
    if (t.max_len >= 0) depth = std::min(depth, t.max_len);
    std::unordered_set<std::string> local_seen{encode(Monomial{})};
    std::vector<Monomial> frontier{Monomial{}};
    for (int step = 0; step < depth; ++step) {
      std::vector<Monomial> next;
      for (const Monomial& w : frontier) {
        for (int a = 0; a < L; ++a) {
          Monomial m = alg.multiply(w, alg.letter(a));
          if (m.zero) continue;
          if (m.length() != w.length() + 1) continue;  // collapsed: already reachable shorter
          if (t.max_len >= 0 && m.length() > t.max_len) continue;
          if (t.local) {
            std::vector<int> count(static_cast<size_t>(owners), 0);
            bool ok = true;
            for (uint16_t l : m.word)
              if (++count[static_cast<size_t>(p.owner(l))] > t.level) ok = false;
            if (!ok) continue;
          }
          if (!local_seen.emplace(encode(m)).second) continue;
          add(m);
          next.push_back(m);
          if (static_cast<int>(words.size()) > size_cap)
            throw ValidationError("monomial set exceeds cap (" + std::to_string(size_cap) + ")");
        }
      }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
  }

  std::sort(words.begin(), words.end(), [](const Monomial& a, const Monomial& b) {
    if (a.word.size() != b.word.size()) return a.word.size() < b.word.size();
    return a.word < b.word;
  });
  MonomialSet set;
  set.spec = spec.str();
  set.words = std::move(words);
  return set;
}

/// Symbolic moment matrix: entries are canonical class ids; the known map
/// carries numeric values for identity, structural zeros aside, and every
/// identifiable class the distribution pins down.
struct MomentMatrix {
  int side = 0;
  std::vector<int32_t> entry;     // side*side, kZeroClass marks structural zero
  std::vector<int> classes;       // unique ids present, ascending
  std::map<int, double> known;    // class id -> value
  std::vector<int> unknown;       // ids in `classes` without a known value

  int32_t at(int u, int v) const { return entry[static_cast<size_t>(u) * side + v]; }
};

inline void assign_known_values(Algebra& alg, MomentMatrix& mm, const ObservedDistribution* dist);

inline MomentMatrix build_moment_matrix(Algebra& alg, const MonomialSet& set,
                                        const ObservedDistribution* dist = nullptr,
                                        int threads = 0) {
  MomentMatrix mm;
  mm.side = set.side();
  mm.entry.assign(static_cast<size_t>(mm.side) * mm.side, kZeroClass);

  std::vector<Monomial> adj(set.words.size());
  for (size_t u = 0; u < set.words.size(); ++u) adj[u] = alg.adjoint(set.words[u]);

  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, 8));
  std::atomic<int> next_row{0};
  auto worker = [&]() {
    while (true) {
      int u = next_row.fetch_add(1);
      if (u >= mm.side) break;
      for (int v = 0; v < mm.side; ++v) {
        Monomial prod = alg.multiply(adj[static_cast<size_t>(u)], set.words[static_cast<size_t>(v)]);
        mm.entry[static_cast<size_t>(u) * mm.side + v] = alg.classify(prod);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::set<int> ids;
  for (int32_t c : mm.entry)
    if (c != kZeroClass) ids.insert(c);
  mm.classes.assign(ids.begin(), ids.end());

  assign_known_values(alg, mm, dist);
  return mm;
}

/// (Re)assign the known/unknown split from a distribution; the symbolic
/// entries stay untouched, so one matrix serves a whole visibility sweep.
/// A class counts as known when any decomposition found in its symmetry
/// orbit (or its adjoint's) is identifiable; all valued decompositions
/// must agree.
inline void assign_known_values(Algebra& alg, MomentMatrix& mm, const ObservedDistribution* dist) {
  mm.known.clear();
  mm.unknown.clear();
  mm.known[kIdentityClass] = 1.0;
  if (dist) {
    for (int c : mm.classes) {
      if (c == kIdentityClass) continue;
      auto value = alg.class_value(c, *dist);
      if (value) mm.known[c] = *value;
    }
  }
  for (int c : mm.classes)
    if (!mm.known.count(c)) mm.unknown.push_back(c);
}

// ---------------------------------------------------------------------------
// Standard-form SDP:  M(y) = C + sum_i y_i A_i  >= 0,  optimize c'y.

struct SdpProblem {
  enum class Sense { Feasibility, Minimize, Maximize };

  int side = 0;
  std::vector<double> constant;  // dense side*side, symmetric
  // Per variable: unit-coefficient positions unless coeff given; both
  // triangles listed, diagonal once. Duplicate positions are forbidden.
  std::vector<std::vector<std::pair<int32_t, double>>> coeffs;
  std::vector<double> objective;
  double objective_constant = 0.0;
  Sense sense = Sense::Feasibility;

  // Metadata tying variables back to monomial classes.
  std::vector<int> var_class;        // class id per variable, -1 for auxiliaries
  std::map<int, int> class_to_var;
  std::map<int, double> known_values;
  int lambda_var = -1;               // eigenvalue-shift variable of feasibility form

  int var_count() const { return static_cast<int>(coeffs.size()); }

  double constant_at(int i, int j) const { return constant[static_cast<size_t>(i) * side + j]; }
};

namespace detail {

inline SdpProblem problem_from_matrix(const MomentMatrix& mm) {
  SdpProblem sdp;
  sdp.side = mm.side;
  sdp.constant.assign(static_cast<size_t>(mm.side) * mm.side, 0.0);
  sdp.known_values = mm.known;

  std::map<int, std::vector<int32_t>> positions;
  for (int u = 0; u < mm.side; ++u)
    for (int v = 0; v < mm.side; ++v) {
      int32_t c = mm.at(u, v);
      if (c == kZeroClass) continue;
      auto it = mm.known.find(c);
      if (it != mm.known.end())
        sdp.constant[static_cast<size_t>(u) * mm.side + v] = it->second;
      else
        positions[c].push_back(static_cast<int32_t>(u) * mm.side + v);
    }
  for (auto& [cls, pos] : positions) {
    sdp.class_to_var[cls] = sdp.var_count();
    sdp.var_class.push_back(cls);
    std::vector<std::pair<int32_t, double>> entries;
    entries.reserve(pos.size());
    for (int32_t p : pos) entries.emplace_back(p, 1.0);
    sdp.coeffs.push_back(std::move(entries));
    sdp.objective.push_back(0.0);
  }
  return sdp;
}

}  // namespace detail

/// Feasibility as an eigenvalue shift: maximize λ with Γ(y) − λ·1 ⪰ 0.
/// The program is infeasible at this level iff the optimum is negative.
inline SdpProblem emit_feasibility(const MomentMatrix& mm) {
  SdpProblem sdp = detail::problem_from_matrix(mm);
  sdp.sense = SdpProblem::Sense::Maximize;
  sdp.lambda_var = sdp.var_count();
  std::vector<std::pair<int32_t, double>> diag;
  diag.reserve(static_cast<size_t>(sdp.side));
  for (int i = 0; i < sdp.side; ++i)
    diag.emplace_back(static_cast<int32_t>(i) * sdp.side + i, -1.0);
  sdp.coeffs.push_back(std::move(diag));
  sdp.var_class.push_back(-1);
  sdp.objective.push_back(1.0);
  return sdp;
}

// ---------------------------------------------------------------------------
// Bell-like functionals over the original scenario.

struct FunctionalAtom {
  bool correlator = false;
  // (party, setting, outcome); outcome ignored for correlators
  std::vector<std::tuple<std::string, int, int>> events;
};

struct FunctionalTerm {
  double coeff = 1.0;
  std::vector<FunctionalAtom> factors;
};

struct FunctionalSpec {
  std::vector<FunctionalTerm> terms;

  static FunctionalSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Direct numeric evaluation against a distribution.
  double evaluate(const ObservedDistribution& dist) const {
    double total = 0.0;
    for (const auto& term : terms) {
      double prod = term.coeff;
      for (const auto& atom : factors_of(term)) prod *= atom_value(atom, dist);
      total += prod;
    }
    return total;
  }

  int degree() const {
    int d = 0;
    for (const auto& t : terms) d = std::max(d, static_cast<int>(t.factors.size()));
    return d;
  }

 private:
  static const std::vector<FunctionalAtom>& factors_of(const FunctionalTerm& t) { return t.factors; }

  static double atom_value(const FunctionalAtom& atom, const ObservedDistribution& dist) {
    if (!atom.correlator) {
      std::vector<MarginalEvent> events;
      for (const auto& [party, setting, outcome] : atom.events)
        events.push_back({dist.party_index(party), outcome, setting});
      return dist.marginal(events);
    }
    // <X Y ...> with ±1 outcomes: sum over outcome tuples with parity signs.
    double total = 0.0;
    const int k = static_cast<int>(atom.events.size());
    std::vector<int> outs(static_cast<size_t>(k), 0);
    while (true) {
      int parity = 0;
      std::vector<MarginalEvent> events;
      for (int i = 0; i < k; ++i) {
        const auto& [party, setting, outcome] = atom.events[static_cast<size_t>(i)];
        (void)outcome;
        int pi = dist.party_index(party);
        if (dist.outcomes[static_cast<size_t>(pi)] != 2)
          throw ValidationError("correlator atoms need dichotomic parties");
        parity += outs[static_cast<size_t>(i)];
        events.push_back({pi, outs[static_cast<size_t>(i)], setting});
      }
      total += (parity % 2 ? -1.0 : 1.0) * dist.marginal(events);
      int i = 0;
      while (i < k && ++outs[static_cast<size_t>(i)] == 2) outs[static_cast<size_t>(i++)] = 0;
      if (i == k) break;
    }
    return total;
  }
};

inline FunctionalSpec FunctionalSpec::from_json(const nlohmann::json& doc) {
  FunctionalSpec f;
  const nlohmann::json& list = doc.is_array() ? doc : doc.at("terms");
  auto parse_event = [](const nlohmann::json& je) {
    return std::tuple<std::string, int, int>{je.at("party").get<std::string>(),
                                             je.value("setting", 0), je.value("outcome", -1)};
  };
  auto parse_factor = [&](const nlohmann::json& jf) {
    FunctionalAtom atom;
    bool any_prob = false, any_corr = false;
    for (const auto& je : jf) {
      auto ev = parse_event(je);
      (std::get<2>(ev) >= 0 ? any_prob : any_corr) = true;
      atom.events.push_back(ev);
    }
    if (atom.events.empty()) throw ParseError("empty functional atom");
    if (any_prob && any_corr)
      throw ParseError("mixed correlator/probability events in one atom");
    atom.correlator = any_corr;
    return atom;
  };
  for (const auto& jt : list) {
    FunctionalTerm term;
    term.coeff = jt.at("coeff").get<double>();
    const auto& atoms = jt.at("atoms");
    if (!atoms.empty() && atoms.front().is_array()) {
      for (const auto& jf : atoms) term.factors.push_back(parse_factor(jf));
    } else {
      term.factors.push_back(parse_factor(atoms));
    }
    f.terms.push_back(std::move(term));
  }
  return f;
}

inline nlohmann::json FunctionalSpec::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& term : terms) {
    nlohmann::json jt;
    jt["coeff"] = term.coeff;
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& atom : term.factors) {
      nlohmann::json jf = nlohmann::json::array();
      for (const auto& [party, setting, outcome] : atom.events) {
        nlohmann::json je{{"party", party}, {"setting", setting}};
        if (!atom.correlator) je["outcome"] = outcome;
        jf.push_back(std::move(je));
      }
      atoms.push_back(std::move(jf));
    }
    jt["atoms"] = std::move(atoms);
    list.push_back(std::move(jt));
  }
  return nlohmann::json{{"terms", list}};
}

namespace detail {

// Expand a functional into an affine form over moment-matrix classes via
// the aligned-copy correspondence: factor q of a degree-q term sits at
// copy block q, last outcomes eliminated through completeness.
struct AffineForm {
  double constant = 0.0;
  std::map<int, double> by_class;
};

inline void expand_factor_events(Algebra& alg, const FunctionalAtom& atom, int copy,
                                 std::vector<std::pair<double, std::vector<int>>>& expansion) {
  const InflationProblem& p = alg.problem();
  // Expansion state: (sign, letters). Correlators expand through the ±1
  // convention; explicit outcomes through last-outcome elimination.
  std::vector<std::pair<double, std::vector<int>>> acc{{1.0, {}}};
  for (const auto& [party_name, setting, outcome] : atom.events) {
    int party = p.scenario.party_index(party_name);
    const Party& pt = p.scenario.parties[party];
    if (setting < 0 || setting >= pt.setting_cardinality())
      throw ValidationError("functional setting out of range for " + party_name);
    auto letter_of = [&](int o) {
      std::vector<SlotRef> slots = p.scenario.party_slots(party);
      LetterTemplate t;
      t.owner = party;
      for (const SlotRef& r : slots) t.spaces.push_back(SpaceFactor{r.source, copy, r.slot, r.sub}.pack());
      std::sort(t.spaces.begin(), t.spaces.end());
      t.setting = setting;
      t.outcome = o;
      t.kind = LetterKind::Projector;
      return p.letter_id(t);
    };
    std::vector<std::pair<double, std::vector<int>>> next;
    auto extend = [&](double w, int o_or_identity /* -1 = identity */) {
      for (const auto& [sign, letters] : acc) {
        auto ls = letters;
        if (o_or_identity >= 0) ls.push_back(letter_of(o_or_identity));
        next.emplace_back(sign * w, std::move(ls));
      }
    };
    if (atom.correlator) {
      if (pt.outcomes != 2) throw ValidationError("correlator atoms need dichotomic parties");
      // X = P_0 - P_1 = 2 P_0 - 1
      extend(2.0, 0);
      extend(-1.0, -1);
    } else if (outcome < pt.outcomes - 1) {
      extend(1.0, outcome);
    } else {
      // last outcome: 1 - sum of the others
      extend(1.0, -1);
      for (int o = 0; o + 1 < pt.outcomes; ++o) extend(-1.0, o);
    }
    acc = std::move(next);
  }
  for (auto& e : acc) expansion.push_back(std::move(e));
}

inline AffineForm functional_to_classes(Algebra& alg, const FunctionalSpec& f,
                                        const MomentMatrix& mm) {
  const InflationProblem& p = alg.problem();
  if (f.degree() > p.order)
    throw ValidationError("functional degree " + std::to_string(f.degree()) +
                          " needs inflation order >= that (have " + std::to_string(p.order) + ")");
  std::set<int> present(mm.classes.begin(), mm.classes.end());
  AffineForm form;
  for (const auto& term : f.terms) {
    // Multiply out the factors, one copy block per factor.
    std::vector<std::pair<double, std::vector<int>>> words{{term.coeff, {}}};
    for (size_t q = 0; q < term.factors.size(); ++q) {
      std::vector<std::pair<double, std::vector<int>>> expansion;
      expand_factor_events(alg, term.factors[q], static_cast<int>(q) + 1, expansion);
      std::vector<std::pair<double, std::vector<int>>> next;
      for (const auto& [w0, l0] : words)
        for (const auto& [w1, l1] : expansion) {
          auto ls = l0;
          ls.insert(ls.end(), l1.begin(), l1.end());
          next.emplace_back(w0 * w1, std::move(ls));
        }
      words = std::move(next);
    }
    for (const auto& [w, letters] : words) {
      if (letters.empty()) {
        form.constant += w;
        continue;
      }
      Monomial m = alg.from_letters(letters);
      int cls = alg.classify(m);
      if (cls == kZeroClass) continue;
      if (!present.count(cls))
        throw ValidationError("functional atom does not resolve to a class in the moment matrix "
                              "(raise the level or the inflation order)");
      auto it = mm.known.find(cls);
      if (it != mm.known.end())
        form.constant += w * it->second;
      else
        form.by_class[cls] += w;
    }
  }
  return form;
}

}  // namespace detail

/// Optimize a Bell-like functional over the relaxation.
inline SdpProblem emit_optimization(Algebra& alg, const MomentMatrix& mm, const FunctionalSpec& f,
                                    SdpProblem::Sense sense) {
  if (sense == SdpProblem::Sense::Feasibility)
    throw ValidationError("optimization needs a min/max sense");
  SdpProblem sdp = detail::problem_from_matrix(mm);
  sdp.sense = sense;
  detail::AffineForm form = detail::functional_to_classes(alg, f, mm);
  sdp.objective_constant = form.constant;
  for (const auto& [cls, w] : form.by_class) sdp.objective[static_cast<size_t>(sdp.class_to_var.at(cls))] += w;
  return sdp;
}

/// Total-variation bound for an eavesdropper modeled through its optimal
/// dichotomic bin: maximize <A C E>/P_AC - <E>, known entries pinned only
/// on the honest marginal.
struct TotalVariationSpec {
  std::string honest_a = "A", honest_c = "C", eavesdropper = "E";
  int a_outcome = 0, c_outcome = 0;
  int a_setting = 0, c_setting = 0;
};

inline SdpProblem emit_crypto_bound(Algebra& alg, const MomentMatrix& mm,
                                    const ObservedDistribution& known,
                                    const TotalVariationSpec& tv = {}) {
  const InflationProblem& p = alg.problem();
  double pac = known.marginal({{known.party_index(tv.honest_a), tv.a_outcome, tv.a_setting},
                               {known.party_index(tv.honest_c), tv.c_outcome, tv.c_setting}});
  if (pac <= 1e-12)
    throw ValidationError("total-variation target event has zero probability");

  auto copy1_letter = [&](const std::string& party_name, int setting, int outcome) {
    int party = p.scenario.party_index(party_name);
    LetterTemplate t;
    t.owner = party;
    for (const SlotRef& r : p.scenario.party_slots(party))
      t.spaces.push_back(SpaceFactor{r.source, 1, r.slot, r.sub}.pack());
    std::sort(t.spaces.begin(), t.spaces.end());
    t.setting = setting;
    t.outcome = outcome;
    t.kind = LetterKind::Projector;
    return p.letter_id(t);
  };

  SdpProblem sdp = detail::problem_from_matrix(mm);
  sdp.sense = SdpProblem::Sense::Maximize;
  int ace = alg.classify(alg.from_letters({copy1_letter(tv.honest_a, tv.a_setting, tv.a_outcome),
                                           copy1_letter(tv.honest_c, tv.c_setting, tv.c_outcome),
                                           copy1_letter(tv.eavesdropper, 0, 0)}));
  int e = alg.classify(alg.from_letters({copy1_letter(tv.eavesdropper, 0, 0)}));
  for (auto [cls, w] : {std::pair<int, double>{ace, 1.0 / pac}, {e, -1.0}}) {
    auto it = sdp.class_to_var.find(cls);
    if (it == sdp.class_to_var.end())
      throw ValidationError("total-variation objective class missing from the moment matrix");
    sdp.objective[static_cast<size_t>(it->second)] += w;
  }
  return sdp;
}

}  // namespace qinflate
