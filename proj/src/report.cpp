#include "groundwork/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace groundwork {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_act_table(const ActHistogram& hist) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %10s %12s\n", "Grounding Act", "# Instances", "% Instances");
  os << line;
  for (GroundingAct act : table_order()) {
    std::snprintf(line, sizeof line, "%-16s %10zu %12s\n", std::string(canonical_name(act)).c_str(),
                  hist.count(act), fixed(hist.percentage(act), 2).c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-16s %10zu %12s\n", "Total", hist.total_acts(),
                fixed(hist.total_acts() ? 100.0 : 0.0, 2).c_str());
  os << line;
  return os.str();
}

std::string format_trajectory(const TrajectoryStats& s) {
  std::ostringstream os;
  auto row = [&](const char* name, const std::string& value) {
    char line[128];
    std::snprintf(line, sizeof line, "%-30s %s\n", name, value.c_str());
    os << line;
  };
  row("grounded CGUs", std::to_string(s.spans.size()));
  row("grounded in next utterance", std::to_string(s.grounded_in_next_count));
  row("max span (utterances)", std::to_string(s.max_span));
  row("revisits", std::to_string(s.revisit_count));
  row("revisits with gap > 10 s", std::to_string(s.gaps_over(10.0)));
  row("max revisit gap (s)", s.revisit_gaps_seconds.empty() ? "n/a" : fixed(s.max_gap(), 1));
  row("revisits without timestamps", std::to_string(s.revisits_without_timestamps));
  row("ambiguous groundings", std::to_string(s.ambiguous_count));
  row("revised utterances (*)", std::to_string(s.flag_census.revised));
  row("overlap utterances (#)", std::to_string(s.flag_census.overlap));
  row("murmur utterances", std::to_string(s.flag_census.murmur));
  return os.str();
}

nlohmann::ordered_json histogram_to_json(const ActHistogram& hist) {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (GroundingAct act : table_order()) {
    j["rows"].push_back({{"act", std::string(canonical_name(act))},
                         {"count", hist.count(act)},
                         {"percent", hist.percentage(act)}});
  }
  j["total_acts"] = hist.total_acts();
  return j;
}

nlohmann::ordered_json trajectory_to_json(const TrajectoryStats& s) {
  nlohmann::ordered_json j;
  j["grounded_cgus"] = s.spans.size();
  j["grounded_in_next_count"] = s.grounded_in_next_count;
  j["max_span"] = s.max_span;
  j["span_histogram"] = nlohmann::ordered_json::object();
  for (const auto& [span, n] : s.span_histogram) j["span_histogram"][std::to_string(span)] = n;
  j["revisit_count"] = s.revisit_count;
  j["revisits_over_10s"] = s.gaps_over(10.0);
  j["max_revisit_gap_seconds"] =
      s.revisit_gaps_seconds.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.max_gap());
  j["revisits_without_timestamps"] = s.revisits_without_timestamps;
  j["ambiguous_count"] = s.ambiguous_count;
  j["flags"] = {{"revised", s.flag_census.revised},
                {"overlap", s.flag_census.overlap},
                {"murmur", s.flag_census.murmur}};
  return j;
}

std::string percentage_note(std::span<const DialogAnnotation> corpus) {
  bool spoken = std::any_of(corpus.begin(), corpus.end(), [](const DialogAnnotation& d) {
    return d.corpus == CorpusTag::SpotTheDifference;
  });
  if (!spoken) return "";
  return "note: percentages use the total of non-None acts as denominator; the published "
         "Spot the Difference percentages imply a different, unstated denominator and will "
         "not match.\n";
}

}  // namespace groundwork
