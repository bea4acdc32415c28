#include "groundwork/validate.hpp"

#include <set>
#include <sstream>

#include "groundwork/analytics.hpp"

namespace groundwork {

namespace {

std::string join_ids(const std::vector<CguId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ";";
    out += id;
  }
  return out;
}

std::string error_code(const EngineError& e, bool first_mention) {
  if (e.kind() == EngineErrorKind::UnknownCgu && first_mention) return "FirstActNotInitiate";
  return std::string(engine_error_name(e.kind()));
}

void check_assertion(const DialogAnnotation& dialog, const RowAssertion& asserted,
                     const TimelineRow& row, std::vector<Finding>& findings) {
  auto mismatch = [&](const std::string& what) {
    findings.push_back({Severity::Warning, std::string(warning_name(WarningKind::DerivedColumnMismatch)),
                        dialog.dialog_id, row.utterance.id, "", what});
  };
  if (asserted.open_cgus != row.open_after) {
    mismatch("open CGUs column says [" + join_ids(asserted.open_cgus) + "], replay gives [" +
             join_ids(row.open_after) + "]");
  }
  std::vector<CguId> asserted_closed, replay_closed;
  for (const auto& [id, degree] : asserted.closed_cgus) asserted_closed.push_back(id);
  for (const auto& c : row.closed_here) replay_closed.push_back(c.cgu);
  if (asserted_closed != replay_closed) {
    mismatch("closed CGUs column says [" + join_ids(asserted_closed) + "], replay gives [" +
             join_ids(replay_closed) + "]");
    return;
  }
  for (std::size_t k = 0; k < row.closed_here.size(); ++k) {
    const auto& claimed = asserted.closed_cgus[k].second;
    if (claimed && *claimed != row.closed_here[k].degree) {
      mismatch("degree column says " + std::string(degree_name(*claimed)) + " for " +
               row.closed_here[k].cgu + ", replay gives " +
               std::string(degree_name(row.closed_here[k].degree)));
    }
  }
}

}  // namespace

std::string format_finding(const Finding& f) {
  std::ostringstream os;
  os << (f.severity == Severity::Error ? "error" : "warning") << ": " << f.dialog_id;
  if (f.utterance_id) os << ":" << *f.utterance_id;
  os << ": " << f.code;
  if (!f.cgu.empty()) os << " [" << f.cgu << "]";
  if (!f.message.empty()) os << ": " << f.message;
  return os.str();
}

std::vector<Finding> validate(const DialogAnnotation& dialog, const ValidateOptions& options) {
  std::vector<Finding> findings;
  auto error = [&](std::string code, std::optional<UtteranceId> uid, std::string cgu,
                   std::string message) {
    findings.push_back(
        {Severity::Error, std::move(code), dialog.dialog_id, uid, std::move(cgu), std::move(message)});
  };

  // Structural checks that do not need the state machine.
  const auto& utts = dialog.utterances;
  for (std::size_t i = 1; i < utts.size(); ++i) {
    if (utts[i].id <= utts[i - 1].id) {
      error("UtteranceOrder", utts[i].id, "", "utterance ids must strictly increase");
    }
    if (utts[i].timestamp && utts[i - 1].timestamp && *utts[i].timestamp < *utts[i - 1].timestamp) {
      error("TimestampOrder", utts[i].id, "", "timestamp decreases");
    }
  }
  if (!findings.empty()) return findings;

  const auto grouped = labels_by_utterance(dialog);
  std::size_t grouped_count = 0;
  for (const auto& g : grouped) grouped_count += g.size();
  if (grouped_count != dialog.labels.size()) {
    error("OrphanLabel", std::nullopt, "", "labels reference missing utterances or are out of order");
  }

  Session session(dialog.dialog_id);
  std::set<CguId> mentioned;
  std::vector<TimelineRow> rows;
  rows.reserve(utts.size());

  for (std::size_t i = 0; i < utts.size(); ++i) {
    const Utterance& utt = utts[i];
    std::vector<ActLabel> accepted;
    TransitionReport report;
    try {
      report = session.apply(utt, grouped[i]);
      accepted = grouped[i];
    } catch (const EngineError&) {
      // Find the offending labels one at a time and apply the rest.
      for (const ActLabel& label : grouped[i]) {
        Session probe = session;
        auto attempt = accepted;
        attempt.push_back(label);
        try {
          probe.apply(utt, attempt);
          accepted.push_back(label);
        } catch (const EngineError& e) {
          bool first = label.cgu && !mentioned.count(*label.cgu);
          error(error_code(e, first), utt.id, label.cgu.value_or(""), e.what());
        }
        if (label.cgu) mentioned.insert(*label.cgu);
      }
      report = session.apply(utt, accepted);
    }
    for (const ActLabel& label : accepted) {
      if (label.cgu) mentioned.insert(*label.cgu);
    }
    for (const Warning& w : report.warnings) {
      findings.push_back({Severity::Warning, std::string(warning_name(w.kind)), dialog.dialog_id,
                          utt.id, w.cgu, w.message});
    }

    TimelineRow row;
    row.utterance = utt;
    row.labels = accepted;
    row.open_after = session.open_cgus();
    row.closed_here = report.closed;
    row.reopened_here = report.reopened;
    row.canceled_here = report.canceled;
    row.transitions = report.sequence;
    if (!dialog.assertions.empty() && i < dialog.assertions.size() && dialog.assertions[i]) {
      check_assertion(dialog, *dialog.assertions[i], row, findings);
    }
    rows.push_back(std::move(row));
  }

  bool has_errors = false;
  for (const auto& f : findings) has_errors = has_errors || f.severity == Severity::Error;
  if (options.check_feasibility && !has_errors) {
    bool timed = false;
    for (const auto& u : utts) timed = timed || u.timestamp.has_value();
    if (timed) {
      std::vector<DialogAnnotation> single{dialog};
      ResponseProfile own;
      const ResponseProfile* profile = options.profile;
      if (!profile) {
        try {
          own = response_time_profile(single);
        } catch (const AnalyticsError&) {
        }
        profile = &own;
      }
      for (auto& f : feasibility_check(single, *profile, options.threshold_factor)) {
        findings.push_back(std::move(f));
      }
    }
  }
  return findings;
}

}  // namespace groundwork
