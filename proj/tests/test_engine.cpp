#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "groundwork/engine.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace groundwork;
using namespace groundwork::testing;
using A = GroundingAct;

namespace {

Utterance utt(UtteranceId id, std::string speaker = "A") { return {id, std::move(speaker), std::nullopt, "u", {}}; }

ActLabel lab(UtteranceId id, A act, std::optional<CguId> cgu = std::nullopt) { return {id, std::move(cgu), act, {}, {}}; }

TransitionReport step(Session& s, UtteranceId id, std::vector<ActLabel> labels, std::string speaker = "A") {
  return s.apply(utt(id, std::move(speaker)), labels);
}

EngineErrorKind error_kind(Session& s, UtteranceId id, std::vector<ActLabel> labels) {
  try {
    step(s, id, std::move(labels));
  } catch (const EngineError& e) {
    return e.kind();
  }
  FAIL("expected EngineError");
  return EngineErrorKind::InvalidLabel;
}

}  // namespace

TEST_CASE("degree assignment") {
  CHECK(assign_degree(A::RepeatBack) == Degree::High);
  CHECK(assign_degree(A::Use) == Degree::Medium);
  CHECK(assign_degree(A::ExplicitAck) == Degree::Medium);
  CHECK(assign_degree(A::MoveOn) == Degree::Low);
  for (auto act : {A::RepeatBack, A::Use, A::ExplicitAck, A::MoveOn}) {
    CHECK(assign_degree(act, Degree::Ambiguous) == Degree::Ambiguous);
  }
  CHECK_THROWS(assign_degree(A::Repair));
}

TEST_CASE("initiate then acknowledge") {
  Session s("d");
  auto r0 = step(s, 0, {lab(0, A::Initiate, "c1")});
  CHECK(r0.opened == std::vector<CguId>{"c1"});
  CHECK(s.open_cgus() == std::vector<CguId>{"c1"});
  auto r1 = step(s, 1, {lab(1, A::RepeatBack, "c1")}, "B");
  CHECK(r1.closed == std::vector<ClosedCgu>{{"c1", Degree::High}});
  CHECK(s.open_cgus().empty());
  CHECK(s.find("c1")->status == CguStatus::Grounded);
  CHECK(s.find("c1")->members.size() == 2);
}

TEST_CASE("fig1 fixture") {
  const Replay r = replay(load_dialog("fig1.jsonl"));
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].open_after == std::vector<CguId>{"CGU 1"});
  CHECK(r.rows[1].open_after == std::vector<CguId>{"CGU 1"});
  CHECK(r.rows[2].open_after == std::vector<CguId>{"CGU 1"});
  CHECK(r.rows[3].closed_here == std::vector<ClosedCgu>{{"CGU 1", Degree::Medium}});
  CHECK(r.session.open_cgus().empty());
}

TEST_CASE("fig4 fixture: reopen then cancel restores the earlier degree") {
  const Replay r = replay(load_dialog("fig4.jsonl"));
  const CguRecord* c1 = r.session.find("CGU 1");
  REQUIRE(c1);
  CHECK(c1->status == CguStatus::Grounded);
  CHECK(c1->degree == Degree::Medium);
  CHECK(c1->reopen_count == 1);
  CHECK(r.session.find("CGU 2")->status == CguStatus::Grounded);
  bool canceled = false;
  for (const auto& row : r.rows) canceled |= !row.canceled_here.empty();
  CHECK_FALSE(canceled);
}

TEST_CASE("reopen and re-ground by a fresh acknowledgment") {
  Session s("d");
  step(s, 0, {lab(0, A::Initiate, "c1")});
  step(s, 1, {lab(1, A::MoveOn, "c1")}, "B");
  auto r = step(s, 2, {lab(2, A::RequestAck, "c1")});
  CHECK(r.reopened == std::vector<CguId>{"c1"});
  CHECK(s.find("c1")->prior_degree == Degree::Low);
  step(s, 3, {lab(3, A::RepeatBack, "c1")}, "B");
  CHECK(s.find("c1")->degree == Degree::High);
  CHECK(s.find("c1")->reopen_count == 1);
}

TEST_CASE("cancel") {
  Session s("d");
  step(s, 0, {lab(0, A::Initiate, "c1"), lab(0, A::Initiate, "c2")});
  auto r = step(s, 1, {lab(1, A::Cancel, "c1")});
  CHECK(r.canceled == std::vector<CguId>{"c1"});
  CHECK(s.find("c1")->status == CguStatus::Canceled);
  CHECK(error_kind(s, 2, {lab(2, A::Use, "c1")}) == EngineErrorKind::ActOnCanceled);

  SUBCASE("a grounded CGU can be revoked") {
    step(s, 2, {lab(2, A::ExplicitAck, "c2")}, "B");
    step(s, 3, {lab(3, A::Cancel, "c2")});
    CHECK(s.find("c2")->status == CguStatus::Canceled);
    CHECK_FALSE(s.find("c2")->degree);
  }
}

TEST_CASE("warnings") {
  Session s("d");
  step(s, 0, {lab(0, A::Initiate, "c1")});
  auto cont = step(s, 1, {lab(1, A::Continue, "c1")}, "B");
  REQUIRE(cont.warnings.size() == 1);
  CHECK(cont.warnings[0].kind == WarningKind::CrossSpeakerContinue);
  step(s, 2, {lab(2, A::ExplicitAck, "c1")}, "B");
  auto again = step(s, 3, {lab(3, A::Use, "c1")}, "B");
  REQUIRE(again.warnings.size() == 1);
  CHECK(again.warnings[0].kind == WarningKind::AckOnGrounded);
  CHECK(s.find("c1")->degree == Degree::Medium);
}

TEST_CASE("engine errors leave the session untouched") {
  Session s("d");
  step(s, 0, {lab(0, A::Initiate, "c1")});
  const Session before = s;
  CHECK(error_kind(s, 1, {lab(1, A::Initiate, "c2"), lab(1, A::Use, "zz")}) == EngineErrorKind::UnknownCgu);
  CHECK(s == before);
  CHECK(error_kind(s, 1, {lab(1, A::Initiate, "c1")}) == EngineErrorKind::DuplicateInitiate);
  CHECK(error_kind(s, 1, {lab(1, A::Initiate, "c9"), lab(1, A::Use, "c9")}) == EngineErrorKind::SelfGrounding);
  CHECK(error_kind(s, 0, {}) == EngineErrorKind::OutOfOrderUtterance);
  CHECK(error_kind(s, 1, {lab(1, A::Initiate)}) == EngineErrorKind::InvalidLabel);
  CHECK(error_kind(s, 1, {lab(2, A::None)}) == EngineErrorKind::InvalidLabel);
  CHECK(s == before);
  CHECK(s.applied() == 1);
}

TEST_CASE("replay reports the failing position") {
  DialogAnnotation d = load_dialog("first_act_ack.jsonl");
  try {
    replay(d);
    FAIL("expected EngineError");
  } catch (const EngineError& e) {
    CHECK(e.kind() == EngineErrorKind::UnknownCgu);
    CHECK(e.position() == 0u);
  }
}

TEST_CASE("replay is deterministic and matches incremental application") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const DialogAnnotation d = random_dialog(rng);
    const Replay a = replay(d), b = replay(d);
    CHECK(a == b);
    Session s(d.dialog_id);
    const auto grouped = labels_by_utterance(d);
    for (std::size_t k = 0; k < d.utterances.size(); ++k) {
      const auto rep = s.apply(d.utterances[k], grouped[k]);
      CHECK(rep.closed == a.rows[k].closed_here);
      CHECK(s.open_cgus() == a.rows[k].open_after);
    }
    CHECK(s == a.session);
    CHECK(s.event_log().size() == d.utterances.size());
  }
}

TEST_CASE("every CGU has an Initiate as its first member and a degree iff grounded") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const Replay r = replay(random_dialog(rng));
    for (const auto& c : r.session.cgus()) {
      REQUIRE_FALSE(c.members.empty());
      CHECK(c.members.front().act == A::Initiate);
      CHECK(c.degree.has_value() == (c.status == CguStatus::Grounded));
      for (std::size_t k = 1; k < c.members.size(); ++k) {
        CHECK(c.members[k - 1].utterance_id <= c.members[k].utterance_id);
      }
    }
  }
}

TEST_CASE("closing rows per CGU match grounding episodes") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Replay r = replay(random_dialog(rng));
    std::map<CguId, int> closes;
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      for (const auto& c : r.rows[k].closed_here) ++closes[c.cgu];
    }
    for (const auto& c : r.session.cgus()) {
      // Each reopen cycle ends in a re-grounding, a revocation, or is still open.
      if (c.status == CguStatus::Grounded) CHECK(closes[c.id] == 1 + c.reopen_count);
      if (c.status == CguStatus::Open) CHECK(closes[c.id] == c.reopen_count);
      if (c.reopen_count > 0) CHECK(c.prior_degree.has_value());
    }
  }
}

TEST_CASE("state partition and reopen monotonicity hold at every step") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const DialogAnnotation d = random_dialog(rng);
    Session s(d.dialog_id);
    const auto grouped = labels_by_utterance(d);
    std::map<CguId, int> reopens;
    for (std::size_t k = 0; k < d.utterances.size(); ++k) {
      s.apply(d.utterances[k], grouped[k]);
      std::set<CguId> ids;
      for (const auto& c : s.cgus()) {
        CHECK(ids.insert(c.id).second);
        CHECK(c.reopen_count >= reopens[c.id]);
        reopens[c.id] = c.reopen_count;
      }
      const auto open = s.open_cgus();
      for (const auto& id : open) CHECK(s.find(id)->status == CguStatus::Open);
    }
  }
}
