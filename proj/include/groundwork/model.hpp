#pragma once

// Shared value types for grounding-act annotation: the act taxonomy, degrees
// of grounding, utterances, labels and CGU records.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace groundwork {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownLabel : public Error {
 public:
  explicit UnknownLabel(std::string text)
      : Error("unknown label: '" + text + "'"), text_(std::move(text)) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string dialog_id, const std::string& reason)
      : Error("dialog '" + dialog_id + "': " + reason), dialog_id_(std::move(dialog_id)) {}
  const std::string& dialog_id() const { return dialog_id_; }

 private:
  std::string dialog_id_;
};

enum class GroundingAct : std::uint8_t {
  Initiate,
  Continue,
  ExplicitAck,
  RepeatBack,
  MoveOn,
  Use,
  Repair,
  RequestRepair,
  RequestAck,
  Cancel,
  Repeat,
  None,
};

inline constexpr std::array<GroundingAct, 12> kAllActs = {
    GroundingAct::Initiate,    GroundingAct::Continue,      GroundingAct::ExplicitAck,
    GroundingAct::RepeatBack,  GroundingAct::MoveOn,        GroundingAct::Use,
    GroundingAct::Repair,      GroundingAct::RequestRepair, GroundingAct::RequestAck,
    GroundingAct::Cancel,      GroundingAct::Repeat,        GroundingAct::None,
};

/// Canonical spelling used on every output path.
std::string_view canonical_name(GroundingAct act);

/// Case-insensitive; accepts the canonical names and the common aliases
/// ("Explicit Ack.", "Req-Repair", "Move on", "Exp-Acknowledgment", ...).
/// Throws UnknownLabel for anything outside the taxonomy.
GroundingAct parse_act(std::string_view label_text);

/// ExplicitAck, RepeatBack, MoveOn and Use: the acts that ground an open CGU.
constexpr bool is_acknowledging(GroundingAct act) {
  return act == GroundingAct::ExplicitAck || act == GroundingAct::RepeatBack ||
         act == GroundingAct::MoveOn || act == GroundingAct::Use;
}

/// Repair, RequestRepair and RequestAck: the acts that reopen a grounded CGU.
constexpr bool is_reopening(GroundingAct act) {
  return act == GroundingAct::Repair || act == GroundingAct::RequestRepair ||
         act == GroundingAct::RequestAck;
}

enum class Degree : std::uint8_t { High, Medium, Low, Ambiguous };

inline constexpr std::array<Degree, 4> kAllDegrees = {Degree::High, Degree::Medium, Degree::Low,
                                                      Degree::Ambiguous};

std::string_view degree_name(Degree degree);
Degree parse_degree(std::string_view text);

struct UtteranceFlags {
  bool revised = false;  // '*'
  bool overlap = false;  // '#'
  bool murmur = false;

  bool any() const { return revised || overlap || murmur; }
  friend bool operator==(const UtteranceFlags&, const UtteranceFlags&) = default;
};

using UtteranceId = std::size_t;
using CguId = std::string;

struct Utterance {
  UtteranceId id = 0;
  std::string speaker;
  std::optional<double> timestamp;  // elapsed seconds
  std::string text;
  UtteranceFlags flags;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct ActLabel {
  UtteranceId utterance_id = 0;
  std::optional<CguId> cgu;  // absent iff act == None
  GroundingAct act = GroundingAct::None;
  std::optional<Degree> degree_override;  // Ambiguous only, on acknowledging acts
  std::optional<CguId> link_cgu;

  friend bool operator==(const ActLabel&, const ActLabel&) = default;
};

/// Returns a description of the first broken label invariant, or nullopt.
std::optional<std::string> label_problem(const ActLabel& label);

enum class CguStatus : std::uint8_t { Open, Grounded, Canceled };

std::string_view status_name(CguStatus status);

struct CguMember {
  UtteranceId utterance_id = 0;
  GroundingAct act = GroundingAct::None;

  friend bool operator==(const CguMember&, const CguMember&) = default;
};

struct CguRecord {
  CguId id;
  CguStatus status = CguStatus::Open;
  std::vector<CguMember> members;
  std::optional<Degree> degree;
  int reopen_count = 0;
  std::optional<Degree> prior_degree;

  friend bool operator==(const CguRecord&, const CguRecord&) = default;
};

enum class CorpusTag : std::uint8_t { Meetup, SpotTheDifference, Other };

std::string_view corpus_tag_name(CorpusTag tag);
CorpusTag parse_corpus_tag(std::string_view text);

/// Open/closed columns read from an Open/Closed CGU table. They are claims to be
/// checked against replay, never state.
struct RowAssertion {
  std::vector<CguId> open_cgus;
  std::vector<std::pair<CguId, std::optional<Degree>>> closed_cgus;

  friend bool operator==(const RowAssertion&, const RowAssertion&) = default;
};

struct DialogAnnotation {
  std::string dialog_id;
  CorpusTag corpus = CorpusTag::Other;
  std::vector<Utterance> utterances;
  std::vector<ActLabel> labels;  // grouped per utterance, file order
  std::vector<std::optional<RowAssertion>> assertions;  // empty, or one per utterance

  friend bool operator==(const DialogAnnotation&, const DialogAnnotation&) = default;
};

/// Throws InvariantViolation when ids do not strictly increase, timestamps
/// decrease, a label references a missing utterance, labels are not grouped in
/// utterance order, or a label breaks its own invariants.
void check_invariants(const DialogAnnotation& dialog);

/// Labels per utterance, aligned with dialog.utterances.
std::vector<std::vector<ActLabel>> labels_by_utterance(const DialogAnnotation& dialog);

}  // namespace groundwork
