#include "groundwork/engine.hpp"

#include <algorithm>
#include <map>

namespace groundwork {

std::string_view engine_error_name(EngineErrorKind kind) {
  switch (kind) {
    case EngineErrorKind::UnknownCgu: return "UnknownCgu";
    case EngineErrorKind::DuplicateInitiate: return "DuplicateInitiate";
    case EngineErrorKind::ActOnCanceled: return "ActOnCanceled";
    case EngineErrorKind::OutOfOrderUtterance: return "OutOfOrderUtterance";
    case EngineErrorKind::NotAcknowledging: return "NotAcknowledging";
    case EngineErrorKind::InvalidLabel: return "InvalidLabel";
    case EngineErrorKind::SelfGrounding: return "SelfGrounding";
  }
  return "EngineError";
}

EngineError::EngineError(EngineErrorKind kind, std::string cgu, UtteranceId utterance_id,
                         const std::string& detail)
    : Error(std::string(engine_error_name(kind)) + " at utterance " +
            std::to_string(utterance_id) + (cgu.empty() ? "" : " (" + cgu + ")") +
            (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      cgu_(std::move(cgu)),
      utterance_id_(utterance_id) {}

std::string_view warning_name(WarningKind kind) {
  switch (kind) {
    case WarningKind::AckOnGrounded: return "AckOnGrounded";
    case WarningKind::CrossSpeakerContinue: return "CrossSpeakerContinue";
    case WarningKind::DerivedColumnMismatch: return "DerivedColumnMismatch";
    case WarningKind::InfeasibleResponseTime: return "InfeasibleResponseTime";
    case WarningKind::UnknownLink: return "UnknownLink";
  }
  return "Warning";
}

Degree assign_degree(GroundingAct closing_act, std::optional<Degree> override_degree) {
  if (!is_acknowledging(closing_act)) {
    throw EngineError(EngineErrorKind::NotAcknowledging, "", 0,
                      std::string(canonical_name(closing_act)) + " cannot ground a CGU");
  }
  if (override_degree) {
    if (*override_degree != Degree::Ambiguous) {
      throw EngineError(EngineErrorKind::InvalidLabel, "", 0,
                        "only Ambiguous may override a degree");
    }
    return Degree::Ambiguous;
  }
  switch (closing_act) {
    case GroundingAct::RepeatBack: return Degree::High;
    case GroundingAct::Use:
    case GroundingAct::ExplicitAck: return Degree::Medium;
    default: return Degree::Low;  // MoveOn
  }
}

const CguRecord* Session::find(const CguId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &cgus_[it->second];
}

std::vector<CguId> Session::open_cgus() const {
  std::vector<CguId> out;
  for (const CguRecord& rec : cgus_) {
    if (rec.status == CguStatus::Open) out.push_back(rec.id);
  }
  return out;
}

TransitionReport Session::apply(const Utterance& utterance, std::span<const ActLabel> labels) {
  const UtteranceId uid = utterance.id;
  if (last_utterance_ && uid <= *last_utterance_) {
    throw EngineError(EngineErrorKind::OutOfOrderUtterance, "", uid,
                      "expected an utterance after " + std::to_string(*last_utterance_));
  }

  // Changes are staged and committed only once every label has applied.
  std::map<std::size_t, CguRecord> touched;
  std::vector<CguRecord> created;
  std::vector<CguId> opened_here;

  auto lookup = [&](const CguId& id) -> CguRecord* {
    if (auto it = index_.find(id); it != index_.end()) {
      auto [slot, fresh] = touched.try_emplace(it->second);
      if (fresh) slot->second = cgus_[it->second];
      return &slot->second;
    }
    for (CguRecord& rec : created) {
      if (rec.id == id) return &rec;
    }
    return nullptr;
  };
  auto initiator_of = [&](const CguRecord& rec) -> const std::string& {
    auto it = index_.find(rec.id);
    return it == index_.end() ? utterance.speaker : initiators_[it->second];
  };

  TransitionReport report;
  report.utterance_id = uid;

  for (const ActLabel& label : labels) {
    if (label.utterance_id != uid) {
      throw EngineError(EngineErrorKind::InvalidLabel, label.cgu.value_or(""), uid,
                        "label belongs to utterance " + std::to_string(label.utterance_id));
    }
    if (auto problem = label_problem(label)) {
      throw EngineError(EngineErrorKind::InvalidLabel, label.cgu.value_or(""), uid, *problem);
    }
    if (label.act == GroundingAct::None) continue;

    const CguId& id = *label.cgu;
    CguRecord* rec = lookup(id);

    if (label.act == GroundingAct::Initiate) {
      if (rec) throw EngineError(EngineErrorKind::DuplicateInitiate, id, uid, "");
      CguRecord fresh;
      fresh.id = id;
      fresh.members.push_back({uid, label.act});
      created.push_back(std::move(fresh));
      opened_here.push_back(id);
      report.opened.push_back(id);
      report.sequence.push_back({TransitionKind::Opened, id, std::nullopt});
      continue;
    }

    if (!rec) throw EngineError(EngineErrorKind::UnknownCgu, id, uid, "");
    if (rec->status == CguStatus::Canceled) {
      throw EngineError(EngineErrorKind::ActOnCanceled, id, uid,
                        std::string(canonical_name(label.act)));
    }
    rec->members.push_back({uid, label.act});

    if (label.link_cgu && !lookup(*label.link_cgu)) {
      report.warnings.push_back({WarningKind::UnknownLink, id,
                                 "link to unknown CGU '" + *label.link_cgu + "'"});
    }

    if (is_acknowledging(label.act)) {
      if (std::find(opened_here.begin(), opened_here.end(), id) != opened_here.end()) {
        throw EngineError(EngineErrorKind::SelfGrounding, id, uid,
                          "an utterance cannot both initiate and ground a CGU");
      }
      if (rec->status == CguStatus::Grounded) {
        report.warnings.push_back({WarningKind::AckOnGrounded, id,
                                   std::string(canonical_name(label.act)) +
                                       " on an already grounded CGU"});
        continue;
      }
      rec->status = CguStatus::Grounded;
      rec->degree = assign_degree(label.act, label.degree_override);
      report.closed.push_back({id, *rec->degree});
      report.sequence.push_back({TransitionKind::Closed, id, rec->degree});
      continue;
    }

    switch (label.act) {
      case GroundingAct::Repair:
      case GroundingAct::RequestRepair:
      case GroundingAct::RequestAck:
        if (rec->status == CguStatus::Grounded) {
          rec->prior_degree = rec->degree;
          rec->degree.reset();
          rec->status = CguStatus::Open;
          ++rec->reopen_count;
          report.reopened.push_back(id);
          report.sequence.push_back({TransitionKind::Reopened, id, std::nullopt});
        }
        break;
      case GroundingAct::Cancel:
        if (rec->status == CguStatus::Open && rec->prior_degree) {
          // Canceling the repair of a reopened CGU grounds it again.
          rec->status = CguStatus::Grounded;
          rec->degree = rec->prior_degree;
          report.closed.push_back({id, *rec->degree});
          report.sequence.push_back({TransitionKind::Closed, id, rec->degree});
        } else {
          // Never grounded, or grounded and now revoked by its proposer.
          rec->status = CguStatus::Canceled;
          rec->degree.reset();
          report.canceled.push_back(id);
          report.sequence.push_back({TransitionKind::Canceled, id, std::nullopt});
        }
        break;
      case GroundingAct::Continue:
        if (utterance.speaker != initiator_of(*rec)) {
          report.warnings.push_back(
              {WarningKind::CrossSpeakerContinue, id,
               "Continue by '" + utterance.speaker + "' on a CGU initiated by '" +
                   initiator_of(*rec) + "'"});
        }
        break;
      default:  // Repeat
        break;
    }
  }

  for (auto& [pos, rec] : touched) cgus_[pos] = std::move(rec);
  for (CguRecord& rec : created) {
    index_.emplace(rec.id, cgus_.size());
    cgus_.push_back(std::move(rec));
    initiators_.push_back(utterance.speaker);
  }
  ++applied_;
  last_utterance_ = uid;
  event_log_.push_back(report);
  return report;
}

Replay replay(const DialogAnnotation& dialog) {
  Replay out;
  out.session = Session(dialog.dialog_id);
  const auto grouped = labels_by_utterance(dialog);
  out.rows.reserve(dialog.utterances.size());
  for (std::size_t i = 0; i < dialog.utterances.size(); ++i) {
    const Utterance& utt = dialog.utterances[i];
    TransitionReport report;
    try {
      report = out.session.apply(utt, grouped[i]);
    } catch (EngineError& e) {
      e.set_position(i);
      throw;
    }
    TimelineRow row;
    row.utterance = utt;
    row.labels = grouped[i];
    row.open_after = out.session.open_cgus();
    row.closed_here = std::move(report.closed);
    row.reopened_here = std::move(report.reopened);
    row.canceled_here = std::move(report.canceled);
    row.warnings = std::move(report.warnings);
    row.transitions = std::move(report.sequence);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace groundwork
