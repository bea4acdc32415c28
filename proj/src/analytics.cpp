#include "groundwork/analytics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "groundwork/engine.hpp"

namespace groundwork {

void ActHistogram::add(GroundingAct act, std::size_t n) {
  if (act == GroundingAct::None) return;
  counts_[act] += n;
  total_ += n;
}

std::size_t ActHistogram::count(GroundingAct act) const {
  auto it = counts_.find(act);
  return it == counts_.end() ? 0 : it->second;
}

double ActHistogram::percentage(GroundingAct act) const {
  if (total_ == 0) return 0.0;
  return 100.0 * static_cast<double>(count(act)) / static_cast<double>(total_);
}

const std::vector<GroundingAct>& table_order() {
  static const std::vector<GroundingAct> order = [] {
    std::vector<GroundingAct> acts;
    for (GroundingAct a : kAllActs) {
      if (a != GroundingAct::None && a != GroundingAct::Initiate && a != GroundingAct::Continue) {
        acts.push_back(a);
      }
    }
    std::sort(acts.begin(), acts.end(), [](GroundingAct x, GroundingAct y) {
      return canonical_name(x) < canonical_name(y);
    });
    acts.insert(acts.begin(), {GroundingAct::Initiate, GroundingAct::Continue});
    return acts;
  }();
  return order;
}

ActHistogram act_histogram(std::span<const DialogAnnotation> corpus) {
  ActHistogram hist;
  for (const auto& dialog : corpus) {
    for (const auto& label : dialog.labels) hist.add(label.act);
  }
  return hist;
}

double TrajectoryStats::max_gap() const {
  if (revisit_gaps_seconds.empty()) return 0.0;
  return *std::max_element(revisit_gaps_seconds.begin(), revisit_gaps_seconds.end());
}

std::size_t TrajectoryStats::gaps_over(double seconds) const {
  return static_cast<std::size_t>(std::count_if(revisit_gaps_seconds.begin(),
                                                revisit_gaps_seconds.end(),
                                                [&](double g) { return g > seconds; }));
}

TrajectoryStats trajectory_stats(std::span<const DialogAnnotation> corpus) {
  TrajectoryStats stats;
  for (const auto& dialog : corpus) {
    for (const auto& u : dialog.utterances) {
      stats.flag_census.revised += u.flags.revised;
      stats.flag_census.overlap += u.flags.overlap;
      stats.flag_census.murmur += u.flags.murmur;
    }

    const Replay rep = replay(dialog);
    std::unordered_map<CguId, std::size_t> initiated_at;
    std::unordered_map<CguId, std::size_t> grounded_at;  // most recent grounding row

    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const TimelineRow& row = rep.rows[i];
      for (const Transition& t : row.transitions) {
        switch (t.kind) {
          case TransitionKind::Opened:
            initiated_at.emplace(t.cgu, i);
            break;
          case TransitionKind::Reopened: {
            ++stats.revisit_count;
            const auto& then = rep.rows[grounded_at.at(t.cgu)].utterance.timestamp;
            const auto& now = row.utterance.timestamp;
            if (then && now) {
              stats.revisit_gaps_seconds.push_back(*now - *then);
            } else {
              ++stats.revisits_without_timestamps;
            }
            break;
          }
          case TransitionKind::Closed: {
            if (!grounded_at.count(t.cgu)) {
              const std::size_t span = i - initiated_at.at(t.cgu);
              stats.spans.push_back(span);
              ++stats.span_histogram[span];
              stats.max_span = std::max(stats.max_span, span);
              if (span == 1) ++stats.grounded_in_next_count;
            }
            grounded_at[t.cgu] = i;
            if (t.degree == Degree::Ambiguous) {
              bool by_override = std::any_of(row.labels.begin(), row.labels.end(), [&](const ActLabel& l) {
                return l.cgu == t.cgu && l.degree_override == Degree::Ambiguous;
              });
              if (by_override) ++stats.ambiguous_count;
            }
            break;
          }
          case TransitionKind::Canceled:
            break;
        }
      }
    }
  }
  return stats;
}

double cohen_kappa(std::span<const GroundingAct> labels_a, std::span<const GroundingAct> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw AnalyticsError(AnalyticsErrorKind::LengthMismatch,
                         "kappa: sequences differ in length (" + std::to_string(labels_a.size()) +
                             " vs " + std::to_string(labels_b.size()) + ")");
  }
  if (labels_a.empty()) throw AnalyticsError(AnalyticsErrorKind::EmptyInput, "kappa: empty input");

  constexpr std::size_t k = kAllActs.size();
  std::array<std::size_t, k> marginal_a{}, marginal_b{};
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++marginal_a[static_cast<std::size_t>(labels_a[i])];
    ++marginal_b[static_cast<std::size_t>(labels_b[i])];
    agree += labels_a[i] == labels_b[i];
  }
  const double n = static_cast<double>(labels_a.size());
  const double observed = static_cast<double>(agree) / n;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    expected += (static_cast<double>(marginal_a[c]) / n) * (static_cast<double>(marginal_b[c]) / n);
  }
  if (expected >= 1.0) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

KappaInput align_primary_acts(std::span<const DialogAnnotation> a,
                              std::span<const DialogAnnotation> b) {
  std::unordered_map<std::string, const DialogAnnotation*> by_id;
  for (const auto& d : b) by_id.emplace(d.dialog_id, &d);
  if (a.size() != b.size()) {
    throw AnalyticsError(AnalyticsErrorKind::Misaligned, "kappa: files contain different dialog counts");
  }
  KappaInput out;
  for (const auto& da : a) {
    auto it = by_id.find(da.dialog_id);
    if (it == by_id.end()) {
      throw AnalyticsError(AnalyticsErrorKind::Misaligned,
                           "kappa: dialog '" + da.dialog_id + "' missing from second file");
    }
    const DialogAnnotation& db = *it->second;
    if (da.utterances.size() != db.utterances.size()) {
      throw AnalyticsError(AnalyticsErrorKind::Misaligned,
                           "kappa: dialog '" + da.dialog_id + "' has different utterance counts");
    }
    const auto ga = labels_by_utterance(da);
    const auto gb = labels_by_utterance(db);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (da.utterances[i].id != db.utterances[i].id) {
        throw AnalyticsError(AnalyticsErrorKind::Misaligned,
                             "kappa: dialog '" + da.dialog_id + "' utterance ids differ");
      }
      out.rater_a.push_back(ga[i].empty() ? GroundingAct::None : ga[i].front().act);
      out.rater_b.push_back(gb[i].empty() ? GroundingAct::None : gb[i].front().act);
    }
  }
  return out;
}

std::map<std::size_t, double> ResponseProfile::means() const {
  std::map<std::size_t, double> out;
  for (const auto& [words, bucket] : buckets) out[words] = bucket.mean();
  return out;
}

double ResponseProfile::global_mean() const {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& [words, bucket] : buckets) {
    sum += bucket.sum;
    n += bucket.samples;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double ResponseProfile::expected(std::size_t words) const {
  auto it = buckets.find(words);
  return it != buckets.end() ? it->second.mean() : global_mean();
}

std::size_t word_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

ResponseProfile response_time_profile(std::span<const DialogAnnotation> corpus) {
  ResponseProfile profile;
  bool any_timestamp = false;
  for (const auto& dialog : corpus) {
    const auto& u = dialog.utterances;
    for (std::size_t i = 0; i < u.size(); ++i) {
      any_timestamp = any_timestamp || u[i].timestamp.has_value();
      if (i + 1 >= u.size()) continue;
      if (u[i].speaker == u[i + 1].speaker || !u[i].timestamp || !u[i + 1].timestamp) continue;
      auto& bucket = profile.buckets[word_count(u[i].text)];
      bucket.sum += *u[i + 1].timestamp - *u[i].timestamp;
      ++bucket.samples;
    }
  }
  if (!any_timestamp && !corpus.empty()) {
    throw AnalyticsError(AnalyticsErrorKind::MissingTimestamps,
                         "response-time profile needs timestamped utterances");
  }
  return profile;
}

std::vector<Finding> feasibility_check(std::span<const DialogAnnotation> corpus,
                                       const ResponseProfile& profile, double threshold_factor) {
  std::vector<Finding> out;
  if (profile.empty()) return out;
  for (const auto& dialog : corpus) {
    const Replay rep = replay(dialog);
    std::unordered_map<CguId, std::size_t> last_member;  // row of latest contribution
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const TimelineRow& row = rep.rows[i];
      if (i > 0) {
        const Utterance& prev = rep.rows[i - 1].utterance;
        const Utterance& cur = row.utterance;
        for (const ClosedCgu& closed : row.closed_here) {
          bool acknowledged = std::any_of(row.labels.begin(), row.labels.end(), [&](const ActLabel& l) {
            return l.cgu == closed.cgu && is_acknowledging(l.act);
          });
          auto it = last_member.find(closed.cgu);
          if (!acknowledged || it == last_member.end() || it->second != i - 1) continue;
          if (prev.speaker == cur.speaker || !prev.timestamp || !cur.timestamp) continue;
          const double observed = *cur.timestamp - *prev.timestamp;
          const std::size_t words = word_count(prev.text);
          const double threshold = threshold_factor * profile.expected(words);
          if (observed < threshold) {
            std::ostringstream msg;
            msg << "grounded " << observed << " s after a " << words
                << "-word utterance; expected at least " << threshold << " s";
            out.push_back({Severity::Warning,
                           std::string(warning_name(WarningKind::InfeasibleResponseTime)),
                           dialog.dialog_id, cur.id, closed.cgu, msg.str()});
          }
        }
      }
      for (const ActLabel& l : row.labels) {
        if (l.cgu) last_member[*l.cgu] = i;
      }
    }
  }
  return out;
}

}  // namespace groundwork
