#include <doctest.h>

#include "groundwork/report.hpp"
#include "support/fixtures.hpp"

using namespace groundwork;
using namespace groundwork::testing;

TEST_CASE("act table layout") {
  const std::vector<DialogAnnotation> c{load_dialog("fig1.jsonl")};
  const std::string t = format_act_table(act_histogram(c));
  CHECK(t.rfind("Grounding Act", 0) == 0);
  CHECK(t.find("# Instances") != std::string::npos);
  CHECK(t.find("% Instances") != std::string::npos);
  CHECK(t.find("25.00") != std::string::npos);
  CHECK(t.find("Total") != std::string::npos);
  CHECK(t.find("100.00") != std::string::npos);
}

TEST_CASE("histogram JSON") {
  const std::vector<DialogAnnotation> c{load_dialog("fig1.jsonl")};
  const auto j = histogram_to_json(act_histogram(c));
  CHECK(j.at("total_acts") == 4);
  REQUIRE(j.at("rows").size() == 11);
  for (const auto& row : j.at("rows")) {
    const std::string act = row.at("act");
    const bool present = act == "Initiate" || act == "Request-Repair" || act == "Repair" || act == "Explicit-Ack";
    CHECK(row.at("count") == (present ? 1 : 0));
    CHECK(row.at("percent").get<double>() == doctest::Approx(present ? 25.0 : 0.0));
  }
}

TEST_CASE("trajectory JSON and text") {
  const std::vector<DialogAnnotation> c{load_dialog("fig4.jsonl")};
  const auto stats = trajectory_stats(c);
  const auto j = trajectory_to_json(stats);
  CHECK(j.at("revisit_count") == 1);
  CHECK(format_trajectory(stats).find("revisits") != std::string::npos);
}

TEST_CASE("percentage note only for spot-the-difference corpora") {
  const std::vector<DialogAnnotation> meetup{load_dialog("fig4.jsonl")};
  CHECK(percentage_note(meetup).empty());
  const std::vector<DialogAnnotation> std_corpus{load_dialog("fig1.jsonl")};
  CHECK_FALSE(percentage_note(std_corpus).empty());
}
