#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dag.hpp"

namespace qinflate {

enum class AnalysisMode { Quantum, Classical, SharedRandomness };

inline std::string to_string(AnalysisMode m) {
  switch (m) {
    case AnalysisMode::Quantum: return "quantum";
    case AnalysisMode::Classical: return "classical";
    case AnalysisMode::SharedRandomness: return "sr";
  }
  return "?";
}

inline AnalysisMode mode_from_string(const std::string& s) {
  if (s == "quantum") return AnalysisMode::Quantum;
  if (s == "classical") return AnalysisMode::Classical;
  if (s == "sr" || s == "shared-randomness") return AnalysisMode::SharedRandomness;
  throw ParseError("unknown analysis mode: " + s);
}

enum class LetterKind : uint8_t { Projector = 0, Unitary = 1, UnitaryAdjoint = 2 };

/// One Hilbert-space factor of the inflated scenario: copy `copy` of slot
/// `slot` of source `source`, possibly a channel-output subdivision.
struct SpaceFactor {
  int source = 0;
  int copy = 1;
  int slot = 0;
  int sub = -1;

  // Packed key; copy occupies the low bits so per-source relabelings touch
  // a contiguous range.
  uint32_t pack() const {
    return ((static_cast<uint32_t>(source) * 64u + static_cast<uint32_t>(slot)) * 64u +
            static_cast<uint32_t>(sub + 1)) *
               32u +
           static_cast<uint32_t>(copy);
  }
  static SpaceFactor unpack(uint32_t k) {
    SpaceFactor f;
    f.copy = static_cast<int>(k % 32u);
    k /= 32u;
    f.sub = static_cast<int>(k % 64u) - 1;
    k /= 64u;
    f.slot = static_cast<int>(k % 64u);
    f.source = static_cast<int>(k / 64u);
    return f;
  }
};

/// One noncommuting variable of the NPO problem: a projector of a party or
/// a channel unitary, with its space assignment.
struct LetterTemplate {
  int owner = 0;                  // party index; unitaries follow after parties
  std::vector<uint32_t> spaces;   // sorted packed SpaceFactor keys
  int setting = 0;
  int outcome = 0;                // -1 for unitary kinds
  LetterKind kind = LetterKind::Projector;

  bool operator==(const LetterTemplate& o) const {
    return owner == o.owner && spaces == o.spaces && setting == o.setting &&
           outcome == o.outcome && kind == o.kind;
  }
  bool operator<(const LetterTemplate& o) const {
    if (owner != o.owner) return owner < o.owner;
    if (spaces != o.spaces) return spaces < o.spaces;
    if (setting != o.setting) return setting < o.setting;
    if (outcome != o.outcome) return outcome < o.outcome;
    return kind < o.kind;
  }
};

/// The n-th order inflation of a scenario: the full letter inventory, the
/// copy-permutation symmetry group, and precomputed algebra tables.
class InflationProblem {
 public:
  NetworkScenario scenario;
  int order = 1;
  AnalysisMode mode = AnalysisMode::Quantum;
  std::vector<LetterTemplate> letters;

  InflationProblem() = default;

  int letter_count() const { return static_cast<int>(letters.size()); }
  int party_count() const { return static_cast<int>(scenario.parties.size()); }

  int letter_id(const LetterTemplate& t) const {
    auto it = index_.find(key_of(t));
    if (it == index_.end()) throw ValidationError("letter not in inventory");
    return it->second;
  }

  bool commute(int a, int b) const {
    if (mode == AnalysisMode::Classical) return true;
    return commute_bits_[static_cast<size_t>(a) * words_ + static_cast<size_t>(b / 64)] >>
               (b % 64) &
           1u;
  }

  int adjoint_letter(int a) const { return adjoint_[a]; }
  int family(int a) const { return family_[a]; }
  int owner(int a) const { return letters[a].owner; }
  bool is_projector(int a) const { return letters[a].kind == LetterKind::Projector; }
  int outcome(int a) const { return letters[a].outcome; }

  /// Copy index when every factor of letter a carries the same copy, else -1.
  int uniform_copy(int a) const { return uniform_copy_[a]; }

  bool effective_shared_randomness() const {
    return mode == AnalysisMode::SharedRandomness || scenario.shared_randomness;
  }

  long group_order() const { return group_order_; }
  bool group_materialized() const { return !group_.empty(); }
  const std::vector<std::vector<uint16_t>>& group() const { return group_; }
  const std::vector<std::vector<uint16_t>>& generators() const { return generators_; }

  /// All projector letters whose every factor sits at copy j.
  std::vector<LetterTemplate> diagonal_letters(int j) const {
    std::vector<LetterTemplate> out;
    for (int a = 0; a < letter_count(); ++a)
      if (uniform_copy_[a] == j && letters[a].kind == LetterKind::Projector)
        out.push_back(letters[a]);
    return out;
  }

  /// Human-readable letter, e.g. E^{A'1,A''2}_{0|0}.
  std::string letter_name(int a) const {
    const LetterTemplate& t = letters[a];
    std::string own = t.owner < party_count() ? scenario.parties[t.owner].name
                                              : scenario.unitaries[t.owner - party_count()].name;
    std::string s = own + "^{";
    for (size_t i = 0; i < t.spaces.size(); ++i) {
      SpaceFactor f = SpaceFactor::unpack(t.spaces[i]);
      if (i) s += ",";
      s += space_label(f);
    }
    s += "}";
    if (t.kind == LetterKind::Projector)
      s += "_{" + std::to_string(t.outcome) + "|" + std::to_string(t.setting) + "}";
    else
      s += (t.kind == LetterKind::UnitaryAdjoint ? std::string("†") : std::string()) + "_{" +
           std::to_string(t.setting) + "}";
    return s;
  }

  std::string space_label(const SpaceFactor& f) const {
    std::string consumer = scenario.sources[f.source].fed[f.slot];
    std::string primes(static_cast<size_t>(prime_rank(f)) + 1, '\'');
    std::string s = consumer + primes + std::to_string(f.copy);
    if (f.sub >= 0) s += "." + scenario.parties[f.sub].name;
    return s;
  }

  friend InflationProblem build_inflation(const NetworkScenario&, int, AnalysisMode, int, long);

 private:
  // how many-th latent slot of this consumer is (source,slot): 0 -> ', 1 -> ''
  int prime_rank(const SpaceFactor& f) const {
    const std::string& consumer = scenario.sources[f.source].fed[f.slot];
    int rank = 0;
    for (int s = 0; s < static_cast<int>(scenario.sources.size()); ++s)
      for (int k = 0; k < static_cast<int>(scenario.sources[s].fed.size()); ++k)
        if (scenario.sources[s].fed[k] == consumer) {
          if (s == f.source && k == f.slot) return rank;
          ++rank;
        }
    return rank;
  }

  static std::string key_of(const LetterTemplate& t) {
    std::string k;
    k.reserve(8 + 4 * t.spaces.size());
    auto push = [&k](uint32_t v) {
      for (int i = 0; i < 4; ++i) k.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    push(static_cast<uint32_t>(t.owner));
    push(static_cast<uint32_t>(t.setting + 1));
    push(static_cast<uint32_t>(t.outcome + 1));
    k.push_back(static_cast<char>(t.kind));
    for (uint32_t s : t.spaces) push(s);
    return k;
  }

  void finalize(int letter_cap, long group_cap);

  std::map<std::string, int> index_;
  std::vector<int> family_;
  std::vector<int> adjoint_;
  std::vector<int8_t> uniform_copy_;
  std::vector<uint64_t> commute_bits_;
  size_t words_ = 0;
  long group_order_ = 1;
  std::vector<std::vector<uint16_t>> group_;
  std::vector<std::vector<uint16_t>> generators_;
};

namespace detail {

inline bool spaces_intersect(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j])
      ++i;
    else
      ++j;
  }
  return false;
}

inline std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace detail

inline void InflationProblem::finalize(int letter_cap, long group_cap) {
  std::sort(letters.begin(), letters.end());
  if (letter_count() > letter_cap)
    throw ValidationError("letter inventory exceeds cap (" + std::to_string(letter_count()) +
                          " > " + std::to_string(letter_cap) + ")");
  index_.clear();
  for (int i = 0; i < letter_count(); ++i) index_[key_of(letters[i])] = i;

  const int L = letter_count();
  family_.assign(L, 0);
  adjoint_.assign(L, 0);
  uniform_copy_.assign(L, -1);
  std::map<std::string, int> families;
  for (int i = 0; i < L; ++i) {
    LetterTemplate f = letters[i];
    f.outcome = -2;
    f.kind = LetterKind::Projector;
    std::string fk = key_of(f);
    auto [it, fresh] = families.emplace(fk, static_cast<int>(families.size()));
    family_[i] = it->second;

    LetterTemplate adj = letters[i];
    if (adj.kind == LetterKind::Unitary)
      adj.kind = LetterKind::UnitaryAdjoint;
    else if (adj.kind == LetterKind::UnitaryAdjoint)
      adj.kind = LetterKind::Unitary;
    adjoint_[i] = index_.at(key_of(adj));

    int c = 0;  // 0 = wildcard (no factors, fits any copy block)
    bool uniform = true;
    for (uint32_t s : letters[i].spaces) {
      int copy = SpaceFactor::unpack(s).copy;
      if (c == 0)
        c = copy;
      else if (c != copy)
        uniform = false;
    }
    uniform_copy_[i] = uniform ? static_cast<int8_t>(c) : int8_t{-1};
  }

  words_ = static_cast<size_t>((L + 63) / 64);
  commute_bits_.assign(static_cast<size_t>(L) * words_, 0);
  for (int a = 0; a < L; ++a)
    for (int b = 0; b < L; ++b)
      if (!detail::spaces_intersect(letters[a].spaces, letters[b].spaces))
        commute_bits_[static_cast<size_t>(a) * words_ + b / 64] |= (1ull << (b % 64));

  // Copy-permutation group, acting independently per source.
  const int S = static_cast<int>(scenario.sources.size());
  group_order_ = 1;
  long fact = 1;
  for (int i = 2; i <= order; ++i) fact *= i;
  for (int s = 0; s < S; ++s) group_order_ *= fact;

  auto letter_perm = [&](const std::vector<std::vector<int>>& per_source) {
    std::vector<uint16_t> perm(static_cast<size_t>(L));
    for (int a = 0; a < L; ++a) {
      LetterTemplate t = letters[a];
      for (uint32_t& sp : t.spaces) {
        SpaceFactor f = SpaceFactor::unpack(sp);
        f.copy = per_source[f.source][f.copy - 1] + 1;
        sp = f.pack();
      }
      std::sort(t.spaces.begin(), t.spaces.end());
      perm[a] = static_cast<uint16_t>(index_.at(key_of(t)));
    }
    return perm;
  };

  generators_.clear();
  std::vector<std::vector<int>> identity(S);
  for (int s = 0; s < S; ++s) {
    identity[s].resize(order);
    std::iota(identity[s].begin(), identity[s].end(), 0);
  }
  for (int s = 0; s < S; ++s)
    for (int c = 0; c + 1 < order; ++c) {
      auto maps = identity;
      std::swap(maps[s][c], maps[s][c + 1]);
      generators_.push_back(letter_perm(maps));
    }

  group_.clear();
  if (group_order_ <= group_cap) {
    auto perms = detail::all_permutations(order);
    std::vector<size_t> idx(static_cast<size_t>(S), 0);
    while (true) {
      std::vector<std::vector<int>> maps(S);
      for (int s = 0; s < S; ++s) maps[s] = perms[idx[s]];
      group_.push_back(letter_perm(maps));
      int s = 0;
      while (s < S && ++idx[s] == perms.size()) idx[s++] = 0;
      if (s == S) break;
    }
  }
}

/// Enumerate the full operator inventory of the n-th order inflation:
/// per party every space assignment (copies chosen per slot), setting and
/// non-final outcome; per channel node the unitary/adjoint pairs.
inline InflationProblem build_inflation(const NetworkScenario& s, int n,
                                        AnalysisMode mode = AnalysisMode::Quantum,
                                        int letter_cap = 10000, long group_cap = 10000) {
  if (n < 1) throw ValidationError("inflation order must be >= 1");
  s.validate();
  InflationProblem p;
  p.scenario = s;
  p.order = n;
  p.mode = mode;

  // Channel-output subdivision universe per (source, slot).
  std::map<std::pair<int, int>, std::set<int>> subs;
  for (int pi = 0; pi < static_cast<int>(s.parties.size()); ++pi)
    for (const SlotRef& r : s.party_slots(pi)) subs[{r.source, r.slot}].insert(r.sub);
  for (const auto& u : s.unitaries)
    for (const auto& a : u.acted) subs[{a.source, a.slot}].insert(-1);

  auto enumerate_assignments = [&](const std::vector<SlotRef>& slots, auto&& emit) {
    std::vector<int> copies(slots.size(), 1);
    while (true) {
      std::vector<uint32_t> spaces;
      for (size_t i = 0; i < slots.size(); ++i) {
        SpaceFactor f{slots[i].source, copies[i], slots[i].slot, slots[i].sub};
        spaces.push_back(f.pack());
      }
      std::sort(spaces.begin(), spaces.end());
      emit(spaces);
      size_t i = 0;
      while (i < slots.size() && ++copies[i] > n) copies[i++] = 1;
      if (i == slots.size()) break;
    }
  };

  for (int pi = 0; pi < static_cast<int>(s.parties.size()); ++pi) {
    const Party& party = s.parties[pi];
    const auto slots = s.party_slots(pi);
    enumerate_assignments(slots, [&](const std::vector<uint32_t>& spaces) {
      for (int m = 0; m < party.setting_cardinality(); ++m)
        for (int o = 0; o + 1 < party.outcomes; ++o)
          p.letters.push_back({pi, spaces, m, o, LetterKind::Projector});
    });
  }

  for (int ui = 0; ui < static_cast<int>(s.unitaries.size()); ++ui) {
    const UnitaryNode& u = s.unitaries[ui];
    const int owner = static_cast<int>(s.parties.size()) + ui;
    // A channel letter occupies every subdivision of its acted slots.
    std::vector<SlotRef> acted = u.acted;
    enumerate_assignments(acted, [&](const std::vector<uint32_t>& raw) {
      std::vector<uint32_t> spaces;
      for (uint32_t k : raw) {
        SpaceFactor f = SpaceFactor::unpack(k);
        for (int sub : subs.at({f.source, f.slot})) {
          SpaceFactor g = f;
          g.sub = sub;
          spaces.push_back(g.pack());
        }
      }
      std::sort(spaces.begin(), spaces.end());
      for (int m = 0; m < u.control_cardinality; ++m) {
        p.letters.push_back({owner, spaces, m, -1, LetterKind::Unitary});
        p.letters.push_back({owner, spaces, m, -1, LetterKind::UnitaryAdjoint});
      }
    });
  }

  p.finalize(letter_cap, group_cap);
  return p;
}

inline nlohmann::json letters_to_json(const InflationProblem& p) {
  nlohmann::json out = nlohmann::json::array();
  for (int a = 0; a < p.letter_count(); ++a) {
    const LetterTemplate& t = p.letters[a];
    nlohmann::json j;
    j["id"] = a;
    j["name"] = p.letter_name(a);
    j["owner"] = t.owner < p.party_count()
                     ? p.scenario.parties[t.owner].name
                     : p.scenario.unitaries[t.owner - p.party_count()].name;
    j["setting"] = t.setting;
    if (t.kind == LetterKind::Projector) j["outcome"] = t.outcome;
    j["kind"] = t.kind == LetterKind::Projector
                    ? "projector"
                    : (t.kind == LetterKind::Unitary ? "unitary" : "unitary-adjoint");
    j["spaces"] = nlohmann::json::array();
    for (uint32_t k : t.spaces) {
      SpaceFactor f = SpaceFactor::unpack(k);
      j["spaces"].push_back({{"source", p.scenario.sources[f.source].name},
                             {"copy", f.copy},
                             {"slot", f.slot},
                             {"sub", f.sub}});
    }
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace qinflate
