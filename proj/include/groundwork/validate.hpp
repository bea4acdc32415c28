#pragma once

#include <optional>
#include <string>
#include <vector>

#include "groundwork/engine.hpp"
#include "groundwork/model.hpp"

namespace groundwork {

enum class Severity { Error, Warning };

struct Finding {
  Severity severity = Severity::Error;
  std::string code;
  std::string dialog_id;
  std::optional<UtteranceId> utterance_id;
  std::string cgu;
  std::string message;

  friend bool operator==(const Finding&, const Finding&) = default;
};

std::string format_finding(const Finding& finding);

struct ResponseProfile;

struct ValidateOptions {
  /// Response-time profile for the feasibility check; when null and the dialog
  /// carries timestamps, a profile is computed from the dialog itself.
  const ResponseProfile* profile = nullptr;
  double threshold_factor = 1.0;
  bool check_feasibility = true;
};

/// Checks a dialog against the coding rules without throwing. Errors: label on
/// an unknown CGU, first act of a CGU not Initiate, duplicate Initiate, act on a
/// canceled CGU, malformed labels (including overrides other than Ambiguous),
/// grounding in the initiating utterance. Warnings: cross-speaker Continue,
/// acknowledgment of a grounded CGU, derived-column mismatches, infeasible
/// response times.
std::vector<Finding> validate(const DialogAnnotation& dialog, const ValidateOptions& options = {});

}  // namespace groundwork
