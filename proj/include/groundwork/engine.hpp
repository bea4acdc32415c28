#pragma once

// CGU lifecycle state machine. A Session consumes labeled utterances strictly
// in order and reports the open / ground / reopen / cancel transitions each
// one causes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "groundwork/model.hpp"

namespace groundwork {

enum class EngineErrorKind {
  UnknownCgu,
  DuplicateInitiate,
  ActOnCanceled,
  OutOfOrderUtterance,
  NotAcknowledging,
  InvalidLabel,
  SelfGrounding,
};

std::string_view engine_error_name(EngineErrorKind kind);

class EngineError : public Error {
 public:
  EngineError(EngineErrorKind kind, std::string cgu, UtteranceId utterance_id,
              const std::string& detail);

  EngineErrorKind kind() const { return kind_; }
  const std::string& cgu() const { return cgu_; }
  UtteranceId utterance_id() const { return utterance_id_; }
  /// Position of the failing utterance within its dialog, set by replay().
  std::optional<std::size_t> position() const { return position_; }
  void set_position(std::size_t position) { position_ = position; }

 private:
  EngineErrorKind kind_;
  std::string cgu_;
  UtteranceId utterance_id_;
  std::optional<std::size_t> position_;
};

enum class WarningKind {
  AckOnGrounded,
  CrossSpeakerContinue,
  DerivedColumnMismatch,
  InfeasibleResponseTime,
  UnknownLink,
};

std::string_view warning_name(WarningKind kind);

struct Warning {
  WarningKind kind;
  std::string cgu;
  std::string message;

  friend bool operator==(const Warning&, const Warning&) = default;
};

enum class TransitionKind : std::uint8_t { Opened, Closed, Reopened, Canceled };

/// One status change, in the order the utterance's labels caused it.
struct Transition {
  TransitionKind kind;
  CguId cgu;
  std::optional<Degree> degree;  // Closed only

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct ClosedCgu {
  CguId cgu;
  Degree degree;

  friend bool operator==(const ClosedCgu&, const ClosedCgu&) = default;
};

struct TransitionReport {
  UtteranceId utterance_id = 0;
  std::vector<CguId> opened;
  std::vector<ClosedCgu> closed;
  std::vector<CguId> reopened;
  std::vector<CguId> canceled;
  std::vector<Warning> warnings;
  std::vector<Transition> sequence;  // the lists above, interleaved in label order

  friend bool operator==(const TransitionReport&, const TransitionReport&) = default;
};

/// RepeatBack -> High, Use / ExplicitAck -> Medium, MoveOn -> Low; an
/// Ambiguous override wins. Throws EngineError(NotAcknowledging) for other acts
/// and EngineError(InvalidLabel) for overrides other than Ambiguous.
Degree assign_degree(GroundingAct closing_act, std::optional<Degree> override_degree = {});

class Session {
 public:
  Session() = default;
  explicit Session(std::string dialog_id) : dialog_id_(std::move(dialog_id)) {}

  /// Applies the labels of one utterance in listed order. All-or-nothing: on
  /// error the session is unchanged.
  TransitionReport apply(const Utterance& utterance, std::span<const ActLabel> labels);

  const std::string& dialog_id() const { return dialog_id_; }
  std::size_t applied() const { return applied_; }
  const std::vector<CguRecord>& cgus() const { return cgus_; }  // creation order
  const CguRecord* find(const CguId& id) const;
  const std::vector<TransitionReport>& event_log() const { return event_log_; }

  /// Ids with status Open, in creation order.
  std::vector<CguId> open_cgus() const;

  friend bool operator==(const Session& a, const Session& b) {
    return a.dialog_id_ == b.dialog_id_ && a.applied_ == b.applied_ && a.cgus_ == b.cgus_ &&
           a.event_log_ == b.event_log_;
  }

 private:
  std::string dialog_id_;
  std::vector<CguRecord> cgus_;
  std::unordered_map<CguId, std::size_t> index_;
  std::vector<std::string> initiators_;  // speaker of each CGU's Initiate
  std::size_t applied_ = 0;
  std::optional<UtteranceId> last_utterance_;
  std::vector<TransitionReport> event_log_;
};

inline std::vector<CguId> open_cgus(const Session& session) { return session.open_cgus(); }

struct TimelineRow {
  Utterance utterance;
  std::vector<ActLabel> labels;
  std::vector<CguId> open_after;
  std::vector<ClosedCgu> closed_here;
  std::vector<CguId> reopened_here;
  std::vector<CguId> canceled_here;
  std::vector<Warning> warnings;
  std::vector<Transition> transitions;

  friend bool operator==(const TimelineRow&, const TimelineRow&) = default;
};

struct Replay {
  std::vector<TimelineRow> rows;
  Session session;

  friend bool operator==(const Replay&, const Replay&) = default;
};

/// Feeds every utterance of the dialog through a fresh Session. Engine errors
/// propagate with their utterance position set.
Replay replay(const DialogAnnotation& dialog);

}  // namespace groundwork
