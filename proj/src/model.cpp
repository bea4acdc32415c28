#include "groundwork/model.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace groundwork {

namespace {

// Lowercase with spaces, hyphens, underscores and dots removed.
std::string fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc) || c == '-' || c == '_' || c == '.') continue;
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

const std::unordered_map<std::string, GroundingAct>& act_aliases() {
  static const std::unordered_map<std::string, GroundingAct> aliases = {
      {"initiate", GroundingAct::Initiate},
      {"continue", GroundingAct::Continue},
      {"explicitack", GroundingAct::ExplicitAck},
      {"explicitacknowledgment", GroundingAct::ExplicitAck},
      {"explicitacknowledgement", GroundingAct::ExplicitAck},
      {"expack", GroundingAct::ExplicitAck},
      {"expacknowledgment", GroundingAct::ExplicitAck},
      {"expacknowledgement", GroundingAct::ExplicitAck},
      {"repeatback", GroundingAct::RepeatBack},
      {"move", GroundingAct::MoveOn},
      {"moveon", GroundingAct::MoveOn},
      {"use", GroundingAct::Use},
      {"repair", GroundingAct::Repair},
      {"requestrepair", GroundingAct::RequestRepair},
      {"reqrepair", GroundingAct::RequestRepair},
      {"requestack", GroundingAct::RequestAck},
      {"reqack", GroundingAct::RequestAck},
      {"requestacknowledge", GroundingAct::RequestAck},
      {"requestacknowledgment", GroundingAct::RequestAck},
      {"requestacknowledgement", GroundingAct::RequestAck},
      {"cancel", GroundingAct::Cancel},
      {"repeat", GroundingAct::Repeat},
      {"none", GroundingAct::None},
  };
  return aliases;
}

}  // namespace

std::string_view canonical_name(GroundingAct act) {
  switch (act) {
    case GroundingAct::Initiate: return "Initiate";
    case GroundingAct::Continue: return "Continue";
    case GroundingAct::ExplicitAck: return "Explicit-Ack";
    case GroundingAct::RepeatBack: return "Repeat-Back";
    case GroundingAct::MoveOn: return "Move";
    case GroundingAct::Use: return "Use";
    case GroundingAct::Repair: return "Repair";
    case GroundingAct::RequestRepair: return "Request-Repair";
    case GroundingAct::RequestAck: return "Request-Ack";
    case GroundingAct::Cancel: return "Cancel";
    case GroundingAct::Repeat: return "Repeat";
    case GroundingAct::None: return "None";
  }
  return "None";
}

GroundingAct parse_act(std::string_view label_text) {
  const auto& aliases = act_aliases();
  auto it = aliases.find(fold(label_text));
  if (it == aliases.end()) throw UnknownLabel(std::string(label_text));
  return it->second;
}

std::string_view degree_name(Degree degree) {
  switch (degree) {
    case Degree::High: return "High";
    case Degree::Medium: return "Medium";
    case Degree::Low: return "Low";
    case Degree::Ambiguous: return "Ambiguous";
  }
  return "Ambiguous";
}

Degree parse_degree(std::string_view text) {
  const std::string key = fold(text);
  for (Degree d : kAllDegrees) {
    if (fold(degree_name(d)) == key) return d;
  }
  throw UnknownLabel(std::string(text));
}

std::string_view status_name(CguStatus status) {
  switch (status) {
    case CguStatus::Open: return "Open";
    case CguStatus::Grounded: return "Grounded";
    case CguStatus::Canceled: return "Canceled";
  }
  return "Open";
}

std::string_view corpus_tag_name(CorpusTag tag) {
  switch (tag) {
    case CorpusTag::Meetup: return "Meetup";
    case CorpusTag::SpotTheDifference: return "SpotTheDifference";
    case CorpusTag::Other: return "Other";
  }
  return "Other";
}

CorpusTag parse_corpus_tag(std::string_view text) {
  const std::string key = fold(text);
  if (key == "meetup") return CorpusTag::Meetup;
  if (key == "spotthedifference" || key == "std") return CorpusTag::SpotTheDifference;
  if (key == "other" || key.empty()) return CorpusTag::Other;
  throw UnknownLabel(std::string(text));
}

std::optional<std::string> label_problem(const ActLabel& label) {
  if (label.act == GroundingAct::None && label.cgu) return "act None carries a CGU id";
  if (label.act != GroundingAct::None && !label.cgu) {
    return "act " + std::string(canonical_name(label.act)) + " has no CGU id";
  }
  if (label.cgu && label.cgu->empty()) return "empty CGU id";
  if (label.degree_override) {
    if (*label.degree_override != Degree::Ambiguous) {
      return "degree override must be Ambiguous, got " +
             std::string(degree_name(*label.degree_override));
    }
    if (!is_acknowledging(label.act)) {
      return "degree override on non-acknowledging act " +
             std::string(canonical_name(label.act));
    }
  }
  return std::nullopt;
}

void check_invariants(const DialogAnnotation& dialog) {
  const auto& utts = dialog.utterances;
  std::optional<double> last_ts;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (i > 0 && utts[i].id <= utts[i - 1].id) {
      throw InvariantViolation(dialog.dialog_id,
                               "utterance ids must strictly increase (id " +
                                   std::to_string(utts[i].id) + " follows " +
                                   std::to_string(utts[i - 1].id) + ")");
    }
    if (utts[i].timestamp) {
      if (*utts[i].timestamp < 0) {
        throw InvariantViolation(dialog.dialog_id, "negative timestamp on utterance " +
                                                       std::to_string(utts[i].id));
      }
      if (last_ts && *utts[i].timestamp < *last_ts) {
        throw InvariantViolation(dialog.dialog_id, "timestamp decreases at utterance " +
                                                       std::to_string(utts[i].id));
      }
      last_ts = utts[i].timestamp;
    }
  }

  std::size_t cursor = 0;  // index into utts; labels must move forward only
  for (const ActLabel& label : dialog.labels) {
    while (cursor < utts.size() && utts[cursor].id < label.utterance_id) ++cursor;
    if (cursor == utts.size() || utts[cursor].id != label.utterance_id) {
      bool exists = std::any_of(utts.begin(), utts.end(), [&](const Utterance& u) {
        return u.id == label.utterance_id;
      });
      throw InvariantViolation(dialog.dialog_id,
                               exists ? "labels not grouped in utterance order at utterance " +
                                            std::to_string(label.utterance_id)
                                      : "label references missing utterance " +
                                            std::to_string(label.utterance_id));
    }
    if (auto problem = label_problem(label)) {
      throw InvariantViolation(dialog.dialog_id, "utterance " +
                                                     std::to_string(label.utterance_id) +
                                                     ": " + *problem);
    }
  }

  if (!dialog.assertions.empty() && dialog.assertions.size() != utts.size()) {
    throw InvariantViolation(dialog.dialog_id, "derived-column rows do not match utterances");
  }
}

std::vector<std::vector<ActLabel>> labels_by_utterance(const DialogAnnotation& dialog) {
  std::vector<std::vector<ActLabel>> grouped(dialog.utterances.size());
  std::size_t cursor = 0;
  for (const ActLabel& label : dialog.labels) {
    while (cursor < dialog.utterances.size() &&
           dialog.utterances[cursor].id < label.utterance_id) {
      ++cursor;
    }
    if (cursor < dialog.utterances.size() && dialog.utterances[cursor].id == label.utterance_id) {
      grouped[cursor].push_back(label);
    }
  }
  return grouped;
}

}  // namespace groundwork
