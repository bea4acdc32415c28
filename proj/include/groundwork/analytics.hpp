#pragma once

// Corpus statistics, inter-rater agreement and the response-time feasibility
// heuristic for written dialog.

#include <map>
#include <span>
#include <vector>

#include "groundwork/model.hpp"
#include "groundwork/validate.hpp"

namespace groundwork {

enum class AnalyticsErrorKind { LengthMismatch, EmptyInput, MissingTimestamps, Misaligned };

class AnalyticsError : public Error {
 public:
  AnalyticsError(AnalyticsErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  AnalyticsErrorKind kind() const { return kind_; }

 private:
  AnalyticsErrorKind kind_;
};

/// Counts of every non-None act. Percentages are derived on demand so they can
/// never drift from the counts.
class ActHistogram {
 public:
  void add(GroundingAct act, std::size_t n = 1);

  std::size_t count(GroundingAct act) const;
  std::size_t total_acts() const { return total_; }
  /// 100 * count / total_acts; 0 when the histogram is empty.
  double percentage(GroundingAct act) const;
  const std::map<GroundingAct, std::size_t>& counts() const { return counts_; }

 private:
  std::map<GroundingAct, std::size_t> counts_;
  std::size_t total_ = 0;
};

/// Display order for act tables: Initiate first, Continue next to it, then the
/// remaining acts alphabetically by canonical name.
const std::vector<GroundingAct>& table_order();

ActHistogram act_histogram(std::span<const DialogAnnotation> corpus);

struct FlagCensus {
  std::size_t revised = 0;
  std::size_t overlap = 0;
  std::size_t murmur = 0;
};

struct TrajectoryStats {
  /// Utterances from a CGU's Initiate to its first grounding; 1 means the
  /// immediately following utterance grounded it.
  std::vector<std::size_t> spans;
  std::map<std::size_t, std::size_t> span_histogram;
  std::size_t grounded_in_next_count = 0;
  std::size_t max_span = 0;
  std::size_t revisit_count = 0;
  std::vector<double> revisit_gaps_seconds;  // only revisits with both timestamps
  std::size_t revisits_without_timestamps = 0;
  std::size_t ambiguous_count = 0;
  FlagCensus flag_census;

  double max_gap() const;
  std::size_t gaps_over(double seconds) const;
};

/// Replays every dialog; engine errors propagate.
TrajectoryStats trajectory_stats(std::span<const DialogAnnotation> corpus);

/// Cohen's kappa over two equally long label sequences; 1 when both raters used
/// one identical category throughout.
double cohen_kappa(std::span<const GroundingAct> labels_a, std::span<const GroundingAct> labels_b);

struct KappaInput {
  std::vector<GroundingAct> rater_a;
  std::vector<GroundingAct> rater_b;
};

/// Pairs the primary (first listed) act of every utterance across two
/// annotations of the same dialogs; unlabeled utterances count as None.
KappaInput align_primary_acts(std::span<const DialogAnnotation> a,
                              std::span<const DialogAnnotation> b);

struct ResponseProfile {
  struct Bucket {
    double sum = 0;
    std::size_t samples = 0;
    double mean() const { return samples ? sum / static_cast<double>(samples) : 0.0; }
  };
  std::map<std::size_t, Bucket> buckets;  // keyed by word count of the answered utterance

  std::map<std::size_t, double> means() const;
  double global_mean() const;
  bool empty() const { return buckets.empty(); }
  /// Bucket mean, falling back to the global mean for unseen buckets.
  double expected(std::size_t words) const;
};

std::size_t word_count(std::string_view text);

/// Mean delay before the other speaker's reply, bucketed by the length of the
/// utterance being answered. Throws MissingTimestamps when the corpus carries
/// no timestamps at all.
ResponseProfile response_time_profile(std::span<const DialogAnnotation> corpus);

/// Flags groundings that arrive faster than threshold_factor times the
/// expected response time for the utterance they answer.
std::vector<Finding> feasibility_check(std::span<const DialogAnnotation> corpus,
                                       const ResponseProfile& profile,
                                       double threshold_factor = 1.0);

}  // namespace groundwork
