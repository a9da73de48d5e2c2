#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dag.hpp"

namespace qinflate {

struct MarginalEvent {
  int party = 0;
  int outcome = 0;
  int setting = 0;
};

/// Conditional table P(outcomes | settings) over an ordered party list.
/// Parties with several setting axes flatten them in lexicographic label
/// order, most significant first. Extra axes hold scenario-level settings
/// such as channel controls.
class ObservedDistribution {
 public:
  std::vector<std::string> parties;
  std::vector<int> settings;  // per-party m
  std::vector<int> outcomes;  // per-party d
  std::vector<std::pair<std::string, int>> extra_settings;
  std::optional<std::set<std::string>> known_mask;

  ObservedDistribution() = default;
  ObservedDistribution(std::vector<std::string> names, std::vector<int> m, std::vector<int> d,
                       std::vector<std::pair<std::string, int>> extras = {})
      : parties(std::move(names)),
        settings(std::move(m)),
        outcomes(std::move(d)),
        extra_settings(std::move(extras)) {
    table_.assign(static_cast<size_t>(setting_span()) * outcome_span(), 0.0);
  }

  int party_count() const { return static_cast<int>(parties.size()); }

  bool has_party(const std::string& name) const {
    for (const auto& p : parties)
      if (p == name) return true;
    return false;
  }

  int party_index(const std::string& name) const {
    for (size_t i = 0; i < parties.size(); ++i)
      if (parties[i] == name) return static_cast<int>(i);
    throw ValidationError("distribution has no party " + name);
  }

  bool masked_known(const std::string& name) const {
    return !known_mask || known_mask->count(name) > 0;
  }

  double& at(const std::vector<int>& outs, const std::vector<int>& sets,
             const std::vector<int>& extras = {}) {
    return table_[index(outs, sets, extras)];
  }
  double at(const std::vector<int>& outs, const std::vector<int>& sets,
            const std::vector<int>& extras = {}) const {
    return table_[index(outs, sets, extras)];
  }

  /// Joint probability of the listed events, marginalized over the other
  /// parties (their settings pinned to 0). Extras default to 0.
  double marginal(const std::vector<MarginalEvent>& events,
                  const std::map<std::string, int>& extras = {}) const {
    std::vector<int> sets(parties.size(), 0);
    std::vector<int> fixed(parties.size(), -1);
    for (const auto& ev : events) {
      if (ev.setting < 0 || ev.setting >= settings[ev.party])
        throw ValidationError("setting out of range for party " + parties[ev.party]);
      sets[ev.party] = ev.setting;
      fixed[ev.party] = ev.outcome;
    }
    std::vector<int> ex(extra_settings.size(), 0);
    for (const auto& [label, v] : extras) {
      bool found = false;
      for (size_t i = 0; i < extra_settings.size(); ++i)
        if (extra_settings[i].first == label) {
          ex[i] = v;
          found = true;
        }
      if (!found) throw ValidationError("unknown extra setting " + label);
    }
    double total = 0.0;
    std::vector<int> outs(parties.size(), 0);
    while (true) {
      bool match = true;
      for (size_t i = 0; i < parties.size(); ++i)
        if (fixed[i] >= 0 && outs[i] != fixed[i]) match = false;
      if (match) total += at(outs, sets, ex);
      size_t i = 0;
      while (i < parties.size() && ++outs[i] == outcomes[i]) outs[i++] = 0;
      if (i == parties.size()) break;
    }
    return total;
  }

  /// Mix with the uniform conditional distribution: v·P + (1-v)/prod(d).
  ObservedDistribution with_visibility(double v) const {
    ObservedDistribution out = *this;
    double uniform = 1.0;
    for (int d : outcomes) uniform /= d;
    for (double& x : out.table_) x = v * x + (1.0 - v) * uniform;
    return out;
  }

  void validate(double tol = 1e-12) const {
    std::vector<int> sets(parties.size(), 0), ex(extra_settings.size(), 0);
    while (true) {
      double sum = 0.0;
      std::vector<int> outs(parties.size(), 0);
      while (true) {
        double v = at(outs, sets, ex);
        if (v < -tol) throw ValidationError("negative probability entry");
        sum += v;
        size_t i = 0;
        while (i < parties.size() && ++outs[i] == outcomes[i]) outs[i++] = 0;
        if (i == parties.size()) break;
      }
      if (std::abs(sum - 1.0) > tol)
        throw ValidationError("setting slice does not normalize: sum = " + std::to_string(sum));
      size_t i = 0;
      while (i < parties.size() && ++sets[i] == settings[i]) sets[i++] = 0;
      if (i == parties.size()) {
        size_t j = 0;
        while (j < extra_settings.size() && ++ex[j] == extra_settings[j].second) ex[j++] = 0;
        if (j == extra_settings.size()) break;
        std::fill(sets.begin(), sets.end(), 0);
      }
    }
  }

  nlohmann::json to_json() const {
    if (!extra_settings.empty())
      throw ValidationError("extra settings are not serializable");
    nlohmann::json doc;
    doc["parties"] = parties;
    doc["settings"] = settings;
    doc["outcomes"] = outcomes;
    nlohmann::json probs = nlohmann::json::object();
    std::vector<int> sets(parties.size(), 0);
    while (true) {
      std::vector<int> outs(parties.size(), 0);
      while (true) {
        probs[key(outs, sets)] = at(outs, sets);
        size_t i = 0;
        while (i < parties.size() && ++outs[i] == outcomes[i]) outs[i++] = 0;
        if (i == parties.size()) break;
      }
      size_t i = 0;
      while (i < parties.size() && ++sets[i] == settings[i]) sets[i++] = 0;
      if (i == parties.size()) break;
    }
    doc["probabilities"] = std::move(probs);
    if (known_mask) doc["known_marginal"] = std::vector<std::string>(known_mask->begin(), known_mask->end());
    return doc;
  }

  static ObservedDistribution from_json(const nlohmann::json& doc) {
    ObservedDistribution d(doc.at("parties").get<std::vector<std::string>>(),
                           doc.at("settings").get<std::vector<int>>(),
                           doc.at("outcomes").get<std::vector<int>>());
    if (d.parties.size() != d.settings.size() || d.parties.size() != d.outcomes.size())
      throw ParseError("distribution: parties/settings/outcomes length mismatch");
    for (const auto& [k, v] : doc.at("probabilities").items()) {
      auto [outs, sets] = parse_key(k, d.party_count());
      d.at(outs, sets) = v.get<double>();
    }
    if (doc.contains("known_marginal")) {
      std::set<std::string> mask;
      for (const auto& p : doc.at("known_marginal")) mask.insert(p.get<std::string>());
      d.known_mask = std::move(mask);
    }
    return d;
  }

 private:
  static std::string key(const std::vector<int>& outs, const std::vector<int>& sets) {
    std::string s;
    for (size_t i = 0; i < outs.size(); ++i) s += (i ? "," : "") + std::to_string(outs[i]);
    s += "|";
    for (size_t i = 0; i < sets.size(); ++i) s += (i ? "," : "") + std::to_string(sets[i]);
    return s;
  }

  static std::pair<std::vector<int>, std::vector<int>> parse_key(const std::string& k, int n) {
    auto bar = k.find('|');
    if (bar == std::string::npos) throw ParseError("probability key needs 'outs|sets': " + k);
    auto split = [](const std::string& s) {
      std::vector<int> out;
      size_t pos = 0;
      while (pos <= s.size()) {
        size_t c = s.find(',', pos);
        if (c == std::string::npos) c = s.size();
        out.push_back(std::stoi(s.substr(pos, c - pos)));
        pos = c + 1;
      }
      return out;
    };
    auto outs = split(k.substr(0, bar));
    auto sets = split(k.substr(bar + 1));
    if (static_cast<int>(outs.size()) != n || static_cast<int>(sets.size()) != n)
      throw ParseError("probability key arity mismatch: " + k);
    return {outs, sets};
  }

  long setting_span() const {
    long s = 1;
    for (int m : settings) s *= m;
    for (const auto& [_, c] : extra_settings) s *= c;
    return s;
  }
  long outcome_span() const {
    long s = 1;
    for (int d : outcomes) s *= d;
    return s;
  }

  size_t index(const std::vector<int>& outs, const std::vector<int>& sets,
               const std::vector<int>& extras) const {
    long si = 0;
    for (size_t i = 0; i < parties.size(); ++i) {
      if (sets[i] < 0 || sets[i] >= settings[i]) throw ValidationError("setting out of range");
      si = si * settings[i] + sets[i];
    }
    for (size_t i = 0; i < extra_settings.size(); ++i) {
      int e = extras.empty() ? 0 : extras[i];
      si = si * extra_settings[i].second + e;
    }
    long oi = 0;
    for (size_t i = 0; i < parties.size(); ++i) {
      if (outs[i] < 0 || outs[i] >= outcomes[i]) throw ValidationError("outcome out of range");
      oi = oi * outcomes[i] + outs[i];
    }
    return static_cast<size_t>(si * outcome_span() + oi);
  }

  std::vector<double> table_;
};

}  // namespace qinflate
