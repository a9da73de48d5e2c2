#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "distribution.hpp"
#include "inflation.hpp"

namespace qinflate {

/// A word of inflation letters. The empty word is the identity; zero marks
/// a word that simplified to the zero operator.
struct Monomial {
  std::vector<uint16_t> word;
  bool zero = false;

  bool identity() const { return !zero && word.empty(); }
  int length() const { return static_cast<int>(word.size()); }

  bool operator==(const Monomial& o) const { return zero == o.zero && word == o.word; }
  bool operator<(const Monomial& o) const {
    if (zero != o.zero) return o.zero;  // nonzero < zero, arbitrary but fixed
    return word < o.word;
  }
};

constexpr int kZeroClass = -1;
constexpr int kIdentityClass = 0;

/// Canonical class handle: interned id plus its representative word.
struct MonomialClass {
  int id = kIdentityClass;
  Monomial representative;
};

/// Word algebra over an InflationProblem: multiplication with normal
/// ordering, adjoints, symmetry canonicalization and interning. Interning
/// is the single synchronization point; all other operations are pure.
class Algebra {
 public:
  explicit Algebra(const InflationProblem& p) : p_(&p) {
    reps_.push_back(Monomial{});  // id 0 = identity
    rep_index_.emplace(encode(Monomial{}), 0);
  }

  const InflationProblem& problem() const { return *p_; }

  Monomial one() const { return Monomial{}; }

  Monomial letter(int id) const {
    Monomial m;
    m.word.push_back(static_cast<uint16_t>(id));
    return m;
  }

  Monomial from_letters(const std::vector<int>& ids) const {
    Monomial m;
    for (int id : ids) m.word.push_back(static_cast<uint16_t>(id));
    return normal_form(m);
  }

  /// Concatenate and reduce to the normal form: commuting neighbours are
  /// sorted by the fixed letter order, repeated projectors collapse,
  /// orthogonal projectors annihilate, U·U† pairs cancel.
  Monomial multiply(const Monomial& a, const Monomial& b) const {
    if (a.zero || b.zero) return Monomial{{}, true};
    Monomial m;
    m.word.reserve(a.word.size() + b.word.size());
    m.word.insert(m.word.end(), a.word.begin(), a.word.end());
    m.word.insert(m.word.end(), b.word.begin(), b.word.end());
    return normal_form(m);
  }

  /// Reverse the word; projectors are self-adjoint, unitaries swap with
  /// their adjoints.
  Monomial adjoint(const Monomial& a) const {
    if (a.zero) return a;
    Monomial m;
    m.word.reserve(a.word.size());
    for (auto it = a.word.rbegin(); it != a.word.rend(); ++it)
      m.word.push_back(static_cast<uint16_t>(p_->adjoint_letter(*it)));
    return normal_form(m);
  }

  /// Lexicographically minimal word over the symmetry orbit of a and of
  /// adjoint(a). Pairing with the adjoint orbit keeps entry(u,v) and
  /// entry(v,u) in one class, so the moment matrix is real symmetric.
  Monomial canonical_representative(const Monomial& a) const {
    if (a.zero) return a;
    Monomial na = normal_form(a);
    Monomial best = orbit_minimum(na);
    Monomial adj = adjoint(na);
    if (!(adj == na)) {
      Monomial b2 = orbit_minimum(adj);
      if (b2 < best) best = b2;
    }
    return best;
  }

  MonomialClass canonical_form(const Monomial& a) {
    Monomial rep = canonical_representative(a);
    return {intern(rep), std::move(rep)};
  }

  /// Intern a canonical word, assigning a dense stable id.
  int intern(const Monomial& rep) {
    if (rep.zero) return kZeroClass;
    std::string key = encode(rep);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rep_index_.find(key);
    if (it != rep_index_.end()) return it->second;
    int id = static_cast<int>(reps_.size());
    reps_.push_back(rep);
    rep_index_.emplace(std::move(key), id);
    return id;
  }

  /// Canonicalize + intern with memoization on the normal-ordered word.
  int classify(const Monomial& a) {
    if (a.zero) return kZeroClass;
    Monomial na = normal_form(a);
    std::string key = encode(na);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = class_memo_.find(key);
      if (it != class_memo_.end()) return it->second;
    }
    int id = intern(orbit_adjoint_minimum(na));
    std::lock_guard<std::mutex> lock(mu_);
    class_memo_.emplace(std::move(key), id);
    return id;
  }

  // by value: the backing store may grow concurrently
  Monomial representative(int id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return reps_.at(static_cast<size_t>(id));
  }

  int class_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return static_cast<int>(reps_.size());
  }

  /// Normal form: greedy lexicographic trace normal form interleaved with
  /// collapses until a fixed point.
  Monomial normal_form(const Monomial& a) const {
    if (a.zero) return Monomial{{}, true};
    std::vector<uint16_t> w = a.word;
    while (true) {
      sort_word(w);
      int collapsed = collapse_pass(w);
      if (collapsed < 0) return Monomial{{}, true};
      if (collapsed == 0) break;
    }
    return Monomial{std::move(w), false};
  }

  /// Apply one group element (a letter permutation) and renormalize.
  Monomial apply_perm(const Monomial& a, const std::vector<uint16_t>& perm) const {
    Monomial m;
    m.zero = a.zero;
    m.word.reserve(a.word.size());
    for (uint16_t l : a.word) m.word.push_back(perm[l]);
    return normal_form(m);
  }

  /// Dump format: letters joined by a middle dot; identity prints as 1.
  std::string format(const Monomial& a) const {
    if (a.zero) return "0";
    if (a.word.empty()) return "1";
    std::string s;
    for (size_t i = 0; i < a.word.size(); ++i) {
      if (i) s += "·";
      s += p_->letter_name(a.word[i]);
    }
    return s;
  }

  // -------------------------------------------------------------------------
  // Consistency with identifiable monomials.

  struct BlockEvent {
    int party = 0;
    int setting = 0;
    int outcome = 0;
  };
  struct Block {
    int copy = 1;
    std::vector<BlockEvent> events;
    int unitary_setting = -1;       // control value when the block is bracketed
    std::string unitary_label;      // control label of the bracketing channel
  };

  /// Decompose a canonical word into aligned-copy blocks, one projector per
  /// party per block; channel descendants must appear bracketed by the
  /// channel unitary and its adjoint. Returns nothing when the word is not
  /// of the identifiable form.
  std::optional<std::vector<Block>> identifiable_blocks(const Monomial& a) const {
    if (a.zero) return std::nullopt;
    std::map<int, std::vector<uint16_t>> by_copy;
    for (uint16_t l : a.word) {
      int j = p_->uniform_copy(l);
      if (j < 0) return std::nullopt;
      if (j == 0) j = 1;  // factor-free letters join the first block
      by_copy[j].push_back(l);
    }
    std::vector<Block> blocks;
    for (auto& [j, letters] : by_copy) {
      Block blk;
      blk.copy = j;
      std::vector<uint16_t> unitaries, projectors;
      for (uint16_t l : letters)
        (p_->is_projector(l) ? projectors : unitaries).push_back(l);

      std::set<int> parties;
      for (uint16_t l : projectors) {
        if (!parties.insert(p_->owner(l)).second) return std::nullopt;
        blk.events.push_back({p_->owner(l), p_->letters[l].setting, p_->letters[l].outcome});
      }

      if (unitaries.empty()) {
        // Descendants of a channel are observable only inside its bracket.
        for (uint16_t l : projectors)
          if (is_channel_descendant(l)) return std::nullopt;
      } else {
        if (unitaries.size() != 2) return std::nullopt;
        uint16_t u1 = unitaries[0], u2 = unitaries[1];
        if (p_->family(u1) != p_->family(u2)) return std::nullopt;
        if (p_->letters[u1].kind != LetterKind::UnitaryAdjoint ||
            p_->letters[u2].kind != LetterKind::Unitary)
          return std::nullopt;
        // The block must equal U† (projectors) U up to commuting moves.
        Monomial cand;
        cand.word.push_back(u1);
        std::vector<uint16_t> ps = projectors;
        std::sort(ps.begin(), ps.end());
        cand.word.insert(cand.word.end(), ps.begin(), ps.end());
        cand.word.push_back(u2);
        Monomial lhs;
        lhs.word = letters;
        if (!(normal_form(lhs) == normal_form(cand))) return std::nullopt;
        const int uowner = p_->owner(u2) - p_->party_count();
        blk.unitary_setting = p_->letters[u2].setting;
        blk.unitary_label = p_->scenario.unitaries[uowner].control_label;
      }
      blocks.push_back(std::move(blk));
    }
    return blocks;
  }

  /// Numeric value of an identifiable monomial under dist, per the aligned
  /// copy-block product rule; degree-1 only when shared randomness is in
  /// play; blocks touching parties outside the known marginal, or failing
  /// an interruption postselection, stay unknown.
  std::optional<double> identifiable_value(const Monomial& a, const ObservedDistribution& dist) const {
    auto blocks = identifiable_blocks(a);
    if (!blocks) return std::nullopt;
    return blocks_value(*blocks, dist);
  }

  std::optional<double> blocks_value(const std::vector<Block>& blocks,
                                     const ObservedDistribution& dist) const {
    if (p_->effective_shared_randomness() && blocks.size() > 1) return std::nullopt;
    double value = 1.0;
    for (const Block& blk : blocks) {
      auto v = block_value(blk, dist);
      if (!v) return std::nullopt;
      value *= *v;
    }
    return value;
  }

  /// All distinct block decompositions reachable in the symmetry orbit of
  /// a class representative (and its adjoint). Memoized: the decomposition
  /// is distribution independent, only the numeric lookup is not.
  const std::vector<std::vector<Block>>& class_block_variants(int cls) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = blocks_memo_.find(cls);
      if (it != blocks_memo_.end()) return it->second;
    }
    std::vector<std::vector<Block>> variants;
    std::set<std::string> seen;
    auto consider = [&](const Monomial& w) {
      auto b = identifiable_blocks(w);
      if (!b) return;
      std::string sig = block_signature(*b);
      if (seen.insert(sig).second) variants.push_back(std::move(*b));
    };
    Monomial rep = representative(cls);
    Monomial arep = adjoint(rep);
    if (p_->group_materialized()) {
      for (const auto& perm : p_->group()) {
        consider(apply_perm(rep, perm));
        if (!(arep == rep)) consider(apply_perm(arep, perm));
      }
    } else {
      consider(rep);
      if (!(arep == rep)) consider(arep);
    }
    std::lock_guard<std::mutex> lock(mu_);
    return blocks_memo_.emplace(cls, std::move(variants)).first->second;
  }

  /// Value of a class under dist: first identifiable variant that the
  /// distribution pins down; all valued variants must agree.
  std::optional<double> class_value(int cls, const ObservedDistribution& dist) {
    if (cls == kIdentityClass) return 1.0;
    const auto& variants = class_block_variants(cls);
    std::optional<double> value;
    for (const auto& blocks : variants) {
      auto v = blocks_value(blocks, dist);
      if (!v) continue;
      if (value && std::abs(*value - *v) > 1e-9)
        throw ValidationError("inconsistent identifiable values within one class");
      if (!value) value = v;
    }
    return value;
  }

 private:
  static std::string block_signature(const std::vector<Block>& blocks) {
    std::vector<std::string> parts;
    for (const auto& b : blocks) {
      std::string s = "[u" + std::to_string(b.unitary_setting) + ":" + b.unitary_label;
      std::vector<std::string> evs;
      for (const auto& e : b.events)
        evs.push_back(std::to_string(e.party) + "." + std::to_string(e.setting) + "." +
                      std::to_string(e.outcome));
      std::sort(evs.begin(), evs.end());
      for (const auto& e : evs) s += ";" + e;
      parts.push_back(s + "]");
    }
    std::sort(parts.begin(), parts.end());
    std::string sig;
    for (const auto& p : parts) sig += p;
    return sig;
  }

  bool is_channel_descendant(uint16_t l) const {
    const int party = p_->owner(l);
    for (const auto& u : p_->scenario.unitaries)
      for (int sub : u.subdivisions)
        if (sub == party) return true;
    return false;
  }

  std::optional<double> block_value(const Block& blk, const ObservedDistribution& dist) const {
    std::vector<MarginalEvent> events;
    std::map<std::string, int> postselect_settings;  // root-split label -> value

    // First pass: gather outcomes and postselection requirements.
    std::map<std::string, int> required_outcome;  // kept-split party -> value
    for (const BlockEvent& ev : blk.events) {
      const Party& party = p_->scenario.parties[ev.party];
      std::vector<int> axes = party.split_setting(ev.setting);
      for (size_t ax = 0; ax < party.settings.size(); ++ax) {
        const SettingDim& dim = party.settings[ax];
        if (!dim.from_interruption) continue;
        const std::string& origin = dim.split_origin;
        if (dist.has_party(origin)) {
          auto [it, fresh] = required_outcome.emplace(origin, axes[ax]);
          if (!fresh && it->second != axes[ax]) return std::nullopt;
        } else {
          auto [it, fresh] = postselect_settings.emplace(origin, axes[ax]);
          if (!fresh && it->second != axes[ax]) return std::nullopt;
        }
      }
    }

    for (const BlockEvent& ev : blk.events) {
      const Party& party = p_->scenario.parties[ev.party];
      if (!dist.has_party(party.name)) return std::nullopt;
      if (dist.known_mask && !dist.masked_known(party.name)) return std::nullopt;
      auto it = required_outcome.find(party.name);
      if (it != required_outcome.end()) {
        if (it->second != ev.outcome) return std::nullopt;
        it->second = -1;  // satisfied
      }
      // Original setting of this party: non-interruption axes plus
      // root-split assignments, mixed-radix over sorted labels.
      std::vector<int> axes = party.split_setting(ev.setting);
      std::vector<std::pair<std::string, int>> orig;   // (label, value)
      std::map<std::string, int> card;
      for (size_t ax = 0; ax < party.settings.size(); ++ax) {
        const SettingDim& dim = party.settings[ax];
        std::string label;
        if (!dim.from_interruption)
          label = dim.label;
        else if (!dist.has_party(dim.split_origin))
          label = dim.split_origin;
        else
          continue;  // kept-split axis: handled by postselection, no setting
        orig.emplace_back(label, axes[ax]);
        card[label] = dim.cardinality;
      }
      std::sort(orig.begin(), orig.end());
      int flat = 0;
      for (const auto& [label, v] : orig) flat = flat * card.at(label) + v;
      events.push_back({dist.party_index(party.name), ev.outcome, flat});
    }
    // Every postselection target must have been matched by an outcome.
    for (const auto& [origin, v] : required_outcome)
      if (v != -1) return std::nullopt;

    std::map<std::string, int> extras = postselect_settings;
    if (blk.unitary_setting >= 0 && !blk.unitary_label.empty())
      extras[blk.unitary_label] = blk.unitary_setting;
    return dist.marginal(events, extras);
  }

  // Greedy trace-monoid lexicographic normal form: repeatedly emit the
  // smallest letter that commutes with everything still ahead of it.
  void sort_word(std::vector<uint16_t>& w) const {
    const size_t L = w.size();
    if (L < 2) return;
    std::vector<uint16_t> out;
    out.reserve(L);
    std::vector<uint16_t> rem = w;
    while (!rem.empty()) {
      size_t best = 0;
      bool have = false;
      for (size_t i = 0; i < rem.size(); ++i) {
        bool movable = true;
        for (size_t j = 0; j < i; ++j)
          if (!p_->commute(rem[i], rem[j])) {
            movable = false;
            break;
          }
        if (movable && (!have || rem[i] < rem[best])) {
          best = i;
          have = true;
        }
      }
      out.push_back(rem[best]);
      rem.erase(rem.begin() + static_cast<long>(best));
    }
    w = std::move(out);
  }

  // Adjacent collapses. Returns number of reductions, or -1 for zero.
  int collapse_pass(std::vector<uint16_t>& w) const {
    int changed = 0;
    size_t i = 0;
    while (i + 1 < w.size()) {
      uint16_t x = w[i], y = w[i + 1];
      if (p_->family(x) == p_->family(y)) {
        bool xp = p_->is_projector(x), yp = p_->is_projector(y);
        if (xp && yp) {
          if (x == y) {
            w.erase(w.begin() + static_cast<long>(i) + 1);
            ++changed;
            continue;
          }
          return -1;  // orthogonal outcomes
        }
        if (!xp && !yp && p_->adjoint_letter(x) == y && x != y) {
          w.erase(w.begin() + static_cast<long>(i), w.begin() + static_cast<long>(i) + 2);
          ++changed;
          if (i > 0) --i;
          continue;
        }
      }
      ++i;
    }
    return changed;
  }

  Monomial orbit_minimum(const Monomial& a) const {
    if (p_->group_materialized()) {
      Monomial best = a;
      for (const auto& perm : p_->group()) {
        Monomial cand = apply_perm(a, perm);
        if (cand < best) best = std::move(cand);
      }
      return best;
    }
    // Generator-based greedy descent (sound, possibly finer than orbits).
    Monomial best = a;
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto& perm : p_->generators()) {
        Monomial cand = apply_perm(best, perm);
        if (cand < best) {
          best = std::move(cand);
          improved = true;
        }
      }
    }
    return best;
  }

  Monomial orbit_adjoint_minimum(const Monomial& na) const {
    Monomial best = orbit_minimum(na);
    Monomial adj = adjoint(na);
    if (!(adj == na)) {
      Monomial b2 = orbit_minimum(adj);
      if (b2 < best) best = b2;
    }
    return best;
  }

  static std::string encode(const Monomial& m) {
    std::string s;
    s.reserve(m.word.size() * 2);
    for (uint16_t l : m.word) {
      s.push_back(static_cast<char>(l & 0xff));
      s.push_back(static_cast<char>(l >> 8));
    }
    return s;
  }

  const InflationProblem* p_;
  mutable std::mutex mu_;
  std::vector<Monomial> reps_;
  std::unordered_map<std::string, int> rep_index_;
  std::unordered_map<std::string, int> class_memo_;
  std::map<int, std::vector<std::vector<Block>>> blocks_memo_;
};

}  // namespace qinflate
