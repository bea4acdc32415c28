#pragma once

// Test-only reference computations. Nothing here calls into the engine,
// analytics or dataset code it is used to check.

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "groundwork/model.hpp"

namespace groundwork::testing {

using Batches = std::vector<std::vector<ActLabel>>;

/// CGU statuses as plain sets, recomputed from the first `upto` batches.
struct OracleState {
  std::vector<std::string> created;  // creation order
  std::set<std::string> open, grounded, canceled;
  std::map<std::string, Degree> degree;
  std::map<std::string, Degree> stash;  // degree held while reopened
  std::map<std::string, int> reopens;
  std::map<std::string, std::string> initiator;
};

inline Degree oracle_degree(GroundingAct act, std::optional<Degree> override_degree) {
  static const std::map<GroundingAct, Degree> table = {
      {GroundingAct::RepeatBack, Degree::High},
      {GroundingAct::Use, Degree::Medium},
      {GroundingAct::ExplicitAck, Degree::Medium},
      {GroundingAct::MoveOn, Degree::Low},
  };
  return override_degree ? *override_degree : table.at(act);
}

inline bool oracle_acks(GroundingAct a) {
  static const std::set<GroundingAct> acks = {GroundingAct::ExplicitAck, GroundingAct::RepeatBack,
                                              GroundingAct::MoveOn, GroundingAct::Use};
  return acks.count(a) > 0;
}

inline bool oracle_reopens(GroundingAct a) {
  static const std::set<GroundingAct> r = {GroundingAct::Repair, GroundingAct::RequestRepair,
                                           GroundingAct::RequestAck};
  return r.count(a) > 0;
}

/// Applies one label to the set state. Returns false (leaving the state
/// untouched) when the label is illegal: unknown CGU, repeated Initiate, act on
/// a canceled CGU, or grounding a CGU opened by the same utterance.
inline bool oracle_step(OracleState& s, const ActLabel& l, const std::set<std::string>& opened_here) {
  if (l.act == GroundingAct::None) return true;
  const std::string& c = *l.cgu;
  const bool known = std::find(s.created.begin(), s.created.end(), c) != s.created.end();
  if (l.act == GroundingAct::Initiate) {
    if (known) return false;
    s.created.push_back(c);
    s.open.insert(c);
    return true;
  }
  if (!known || s.canceled.count(c)) return false;
  if (oracle_acks(l.act)) {
    if (opened_here.count(c)) return false;
    if (s.open.count(c)) {
      s.open.erase(c);
      s.grounded.insert(c);
      s.degree[c] = oracle_degree(l.act, l.degree_override);
    }
  } else if (oracle_reopens(l.act)) {
    if (s.grounded.count(c)) {
      s.stash[c] = s.degree[c];
      s.degree.erase(c);
      s.grounded.erase(c);
      s.open.insert(c);
      ++s.reopens[c];
    }
  } else if (l.act == GroundingAct::Cancel) {
    if (s.open.count(c) && s.stash.count(c)) {
      s.open.erase(c);
      s.grounded.insert(c);
      s.degree[c] = s.stash[c];
    } else {
      s.open.erase(c);
      s.grounded.erase(c);
      s.degree.erase(c);
      s.canceled.insert(c);
    }
  }
  return true;
}

inline OracleState oracle_state(const Batches& batches, std::size_t upto) {
  OracleState s;
  for (std::size_t i = 0; i < upto && i < batches.size(); ++i) {
    std::set<std::string> opened_here;
    for (const auto& l : batches[i]) {
      oracle_step(s, l, opened_here);
      if (l.act == GroundingAct::Initiate) opened_here.insert(*l.cgu);
    }
  }
  return s;
}

inline std::vector<std::string> oracle_open(const OracleState& s) {
  std::vector<std::string> out;
  for (const auto& c : s.created) {
    if (s.open.count(c)) out.push_back(c);
  }
  return out;
}

inline Batches batches_of(const DialogAnnotation& d) {
  Batches b(d.utterances.size());
  for (const auto& l : d.labels) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      if (d.utterances[i].id == l.utterance_id) b[i].push_back(l);
    }
  }
  return b;
}

/// Spans (grounding row - initiating row) of first groundings, found by
/// diffing the grounded set around every single label.
inline std::vector<std::size_t> oracle_spans(const DialogAnnotation& d) {
  const Batches b = batches_of(d);
  std::vector<std::size_t> spans;
  std::map<std::string, std::size_t> born;
  std::set<std::string> done;
  OracleState s;
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::set<std::string> opened_here;
    for (const auto& l : b[i]) {
      const auto before = s.grounded;
      oracle_step(s, l, opened_here);
      if (l.act == GroundingAct::Initiate) {
        opened_here.insert(*l.cgu);
        born.emplace(*l.cgu, i);
      }
      for (const auto& c : s.grounded) {
        if (!before.count(c) && done.insert(c).second) spans.push_back(i - born.at(c));
      }
    }
  }
  return spans;
}

/// Kappa from an explicit contingency table.
inline double oracle_kappa(const std::vector<GroundingAct>& a, const std::vector<GroundingAct>& b) {
  std::map<std::pair<int, int>, double> table;
  std::set<int> cats;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{static_cast<int>(a[i]), static_cast<int>(b[i])}] += 1;
    cats.insert(static_cast<int>(a[i]));
    cats.insert(static_cast<int>(b[i]));
  }
  const double n = static_cast<double>(a.size());
  double diag = 0, chance = 0;
  for (int r : cats) {
    double row = 0, col = 0;
    for (int c : cats) {
      row += table[{r, c}];
      col += table[{c, r}];
    }
    diag += table[{r, r}];
    chance += row * col;
  }
  const double po = diag / n, pe = chance / (n * n);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1 - pe);
}

struct GenConfig {
  std::size_t max_utterances = 12;
  std::size_t max_cgus = 4;
  std::size_t max_labels = 3;
  bool timestamps = true;
};

/// Random dialog whose every label is legal under the oracle rules. Covers the
/// full act alphabet, Ambiguous overrides, links and flags.
inline DialogAnnotation random_dialog(std::mt19937_64& rng, const GenConfig& cfg = {},
                                      const std::string& id = "gen") {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };

  DialogAnnotation d;
  d.dialog_id = id;
  d.corpus = CorpusTag::Other;
  OracleState state;
  double ts = 0;
  const std::size_t n = pick(cfg.max_utterances + 1);
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.id = i;
    u.speaker = chance(0.5) ? "A" : "B";
    u.text = "utterance " + std::to_string(i) + std::string(pick(4), '!');
    if (cfg.timestamps) {
      ts += static_cast<double>(pick(20));
      u.timestamp = ts;
    }
    u.flags.revised = chance(0.05);
    u.flags.overlap = chance(0.05);
    u.flags.murmur = chance(0.05);

    std::set<std::string> opened_here;
    const std::size_t k = pick(cfg.max_labels + 1);
    for (std::size_t j = 0; j < k; ++j) {
      ActLabel l;
      l.utterance_id = i;
      l.act = kAllActs[pick(kAllActs.size())];
      if (l.act == GroundingAct::Initiate) {
        if (state.created.size() >= cfg.max_cgus) continue;
        l.cgu = "c" + std::to_string(state.created.size() + 1);
      } else if (l.act != GroundingAct::None) {
        if (state.created.empty()) continue;
        l.cgu = state.created[pick(state.created.size())];
        if (oracle_acks(l.act) && chance(0.2)) l.degree_override = Degree::Ambiguous;
        if (l.act == GroundingAct::Use && chance(0.2)) l.link_cgu = state.created[pick(state.created.size())];
      }
      OracleState trial = state;
      if (!oracle_step(trial, l, opened_here)) continue;
      state = std::move(trial);
      if (l.act == GroundingAct::Initiate) opened_here.insert(*l.cgu);
      d.labels.push_back(l);
    }
    d.utterances.push_back(std::move(u));
  }
  return d;
}

}  // namespace groundwork::testing
