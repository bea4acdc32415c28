#pragma once

// Text and JSON renderings of corpus statistics, shared by the CLI and the
// annotation service.

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "groundwork/analytics.hpp"

namespace groundwork {

/// Act / count / percent rows in table_order(), then the total.
std::string format_act_table(const ActHistogram& hist);
std::string format_trajectory(const TrajectoryStats& stats);

nlohmann::ordered_json histogram_to_json(const ActHistogram& hist);
nlohmann::ordered_json trajectory_to_json(const TrajectoryStats& stats);

/// Note printed alongside act tables of Spot-the-Difference data, whose
/// published percentages use a denominator other than the act total.
std::string percentage_note(std::span<const DialogAnnotation> corpus);

}  // namespace groundwork
