#include <doctest.h>

#include "groundwork/model.hpp"

using namespace groundwork;

TEST_CASE("canonical names round-trip through the parser") {
  for (auto act : kAllActs) CHECK(parse_act(canonical_name(act)) == act);
}

TEST_CASE("parser accepts common spellings") {
  CHECK(parse_act("Explicit Ack.") == GroundingAct::ExplicitAck);
  CHECK(parse_act("explicit acknowledgment") == GroundingAct::ExplicitAck);
  CHECK(parse_act("Request-Ack.") == GroundingAct::RequestAck);
  CHECK(parse_act("request_repair") == GroundingAct::RequestRepair);
  CHECK(parse_act("Move-On") == GroundingAct::MoveOn);
  CHECK(parse_act("MOVE") == GroundingAct::MoveOn);
  CHECK(parse_act("repeat back") == GroundingAct::RepeatBack);
  CHECK_THROWS_AS(parse_act("Acknowledge-ish"), UnknownLabel);
  CHECK_THROWS_AS(parse_act(""), UnknownLabel);
}

TEST_CASE("act classes") {
  int acks = 0, reopens = 0;
  for (auto act : kAllActs) {
    acks += is_acknowledging(act);
    reopens += is_reopening(act);
    CHECK_FALSE((is_acknowledging(act) && is_reopening(act)));
  }
  CHECK(acks == 4);
  CHECK(reopens == 3);
  CHECK(is_reopening(GroundingAct::RequestAck));
  CHECK_FALSE(is_acknowledging(GroundingAct::Cancel));
}

TEST_CASE("degrees and corpus tags parse") {
  CHECK(parse_degree("ambiguous") == Degree::Ambiguous);
  CHECK(parse_degree(degree_name(Degree::High)) == Degree::High);
  CHECK_THROWS(parse_degree("Huge"));
  CHECK(parse_corpus_tag("Meetup") == CorpusTag::Meetup);
  CHECK(parse_corpus_tag(corpus_tag_name(CorpusTag::SpotTheDifference)) == CorpusTag::SpotTheDifference);
}

TEST_CASE("label_problem") {
  ActLabel none{0, std::nullopt, GroundingAct::None, {}, {}};
  CHECK_FALSE(label_problem(none));
  none.cgu = "c1";
  CHECK(label_problem(none));

  ActLabel init{0, std::nullopt, GroundingAct::Initiate, {}, {}};
  CHECK(label_problem(init));
  init.cgu = "c1";
  CHECK_FALSE(label_problem(init));
  init.degree_override = Degree::Ambiguous;
  CHECK(label_problem(init));

  ActLabel ack{0, "c1", GroundingAct::ExplicitAck, Degree::Ambiguous, {}};
  CHECK_FALSE(label_problem(ack));
  ack.degree_override = Degree::High;
  CHECK(label_problem(ack));
}

TEST_CASE("check_invariants") {
  DialogAnnotation d;
  d.dialog_id = "d";
  d.utterances = {{0, "A", std::nullopt, "hi", {}}, {1, "B", std::nullopt, "yo", {}}};
  d.labels = {{0, "c1", GroundingAct::Initiate, {}, {}}, {1, "c1", GroundingAct::ExplicitAck, {}, {}}};
  CHECK_NOTHROW(check_invariants(d));

  SUBCASE("labels must follow utterance order") {
    std::swap(d.labels[0], d.labels[1]);
    CHECK_THROWS_AS(check_invariants(d), InvariantViolation);
  }
  SUBCASE("labels must name a known utterance") {
    d.labels[1].utterance_id = 7;
    CHECK_THROWS_AS(check_invariants(d), InvariantViolation);
  }
  SUBCASE("utterance ids are unique") {
    d.utterances[1].id = 0;
    CHECK_THROWS_AS(check_invariants(d), InvariantViolation);
  }
}

TEST_CASE("labels_by_utterance groups in file order") {
  DialogAnnotation d;
  d.utterances = {{0, "A", {}, "a", {}}, {1, "B", {}, "b", {}}, {2, "A", {}, "c", {}}};
  d.labels = {{0, "c1", GroundingAct::Initiate, {}, {}},
              {2, "c1", GroundingAct::Use, {}, {}},
              {2, "c2", GroundingAct::Initiate, {}, {}}};
  const auto g = labels_by_utterance(d);
  REQUIRE(g.size() == 3);
  CHECK(g[0].size() == 1);
  CHECK(g[1].empty());
  REQUIRE(g[2].size() == 2);
  CHECK(g[2][1].cgu == "c2");
}
