#include <doctest.h>

#include <random>

#include "groundwork/analytics.hpp"
#include "groundwork/validate.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace groundwork;
using namespace groundwork::testing;

namespace {

std::size_t count(const std::vector<Finding>& fs, Severity sev, const std::string& code = "") {
  std::size_t n = 0;
  for (const auto& f : fs) n += f.severity == sev && (code.empty() || f.code == code);
  return n;
}

}  // namespace

TEST_CASE("clean fixtures produce no findings") {
  for (const char* name : {"fig1.jsonl", "fig4.jsonl", "fig4.tsv", "fig7.jsonl"}) {
    CAPTURE(name);
    CHECK(validate(load_dialog(name)).empty());
  }
}

TEST_CASE("first act must be Initiate") {
  const auto fs = validate(load_dialog("first_act_ack.jsonl"));
  REQUIRE(count(fs, Severity::Error) == 1);
  CHECK(fs[0].code == "FirstActNotInitiate");
  CHECK(fs[0].utterance_id == 0u);
  CHECK(fs[0].cgu == "CGU 1");
}

TEST_CASE("cross-speaker continue is a warning") {
  const auto fs = validate(load_dialog("cross_speaker_continue.jsonl"));
  CHECK(count(fs, Severity::Error) == 0);
  REQUIRE(count(fs, Severity::Warning) == 1);
  CHECK(fs[0].code == "CrossSpeakerContinue");
  CHECK(fs[0].utterance_id == 1u);
}

TEST_CASE("derived column mismatch is a warning") {
  const auto fs = validate(load_dialog("fig4_mismatch.tsv"));
  CHECK(count(fs, Severity::Error) == 0);
  CHECK(count(fs, Severity::Warning, "DerivedColumnMismatch") == 1);
}

TEST_CASE("errors are reported and validation continues past them") {
  DialogAnnotation d = load_dialog("fig1.jsonl");
  // Act on a canceled CGU, then an unknown CGU, then a valid act.
  d.utterances.push_back({4, "User1", std::nullopt, "never mind", {}});
  d.utterances.push_back({5, "User2", std::nullopt, "what?", {}});
  d.utterances.push_back({6, "User1", std::nullopt, "again", {}});
  d.utterances.push_back({7, "User2", std::nullopt, "ok", {}});
  d.labels.push_back({4, "CGU 1", GroundingAct::Cancel, {}, {}});
  d.labels.push_back({5, "CGU 1", GroundingAct::RequestRepair, {}, {}});
  d.labels.push_back({6, "CGU 9", GroundingAct::Use, {}, {}});
  d.labels.push_back({6, "CGU 2", GroundingAct::Initiate, {}, {}});
  d.labels.push_back({7, "CGU 2", GroundingAct::ExplicitAck, {}, {}});
  const auto fs = validate(d);
  CHECK(count(fs, Severity::Error, "ActOnCanceled") == 1);
  CHECK(count(fs, Severity::Error, "FirstActNotInitiate") == 1);
  CHECK(count(fs, Severity::Error) == 2);
}

TEST_CASE("invalid degree override is an error") {
  DialogAnnotation d = load_dialog("fig1.jsonl");
  d.labels.back().degree_override = Degree::High;
  const auto fs = validate(d);
  CHECK(count(fs, Severity::Error) >= 1);
}

TEST_CASE("acknowledging a grounded CGU is a warning") {
  DialogAnnotation d = load_dialog("fig1.jsonl");
  d.utterances.push_back({4, "User1", std::nullopt, "great", {}});
  d.labels.push_back({4, "CGU 1", GroundingAct::Use, {}, {}});
  const auto fs = validate(d);
  CHECK(count(fs, Severity::Error) == 0);
  CHECK(count(fs, Severity::Warning, "AckOnGrounded") == 1);
}

TEST_CASE("infeasibly fast grounding is flagged when timestamps exist") {
  DialogAnnotation d;
  d.dialog_id = "fast";
  d.utterances = {{0, "A", 0.0, "there is a long red sofa near the window", {}},
                  {1, "B", 0.2, "ok", {}}};
  d.labels = {{0, "c1", GroundingAct::Initiate, {}, {}}, {1, "c1", GroundingAct::ExplicitAck, {}, {}}};
  ResponseProfile profile;
  profile.buckets[9] = {50.0, 10};  // mean 5 s
  ValidateOptions opts;
  opts.profile = &profile;
  const auto fs = validate(d, opts);
  CHECK(count(fs, Severity::Warning, "InfeasibleResponseTime") == 1);
  opts.check_feasibility = false;
  CHECK(validate(d, opts).empty());
}

TEST_CASE("generated legal dialogs validate without errors") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto fs = validate(random_dialog(rng));
    CHECK(count(fs, Severity::Error) == 0);
  }
}

TEST_CASE("findings format on one line") {
  Finding f{Severity::Warning, "AckOnGrounded", "d1", 3, "c1", "already grounded"};
  const std::string s = format_finding(f);
  CHECK(s.find('\n') == std::string::npos);
  CHECK(s.find("AckOnGrounded") != std::string::npos);
  CHECK(s.find("d1:3") != std::string::npos);
}
