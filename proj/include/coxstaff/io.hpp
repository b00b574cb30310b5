#pragma once

// File formats: model JSON, counts CSV, moment/schedule/simulation CSV and
// the JSON records for schedules, fits and simulation results.

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "coxstaff/arrival_model.hpp"
#include "coxstaff/estimation.hpp"
#include "coxstaff/infinite_server.hpp"
#include "coxstaff/simulator.hpp"
#include "coxstaff/staffing.hpp"

namespace coxstaff {

using json = nlohmann::json;

/// Pattern plus busyness parameters, as stored in a model document.
struct ModelSpec {
  DailyPattern pattern;
  BusynessParams params;

  void validate() const;
};

/// {"delta", "rates", "alpha", "lag", "var_w", "w_dist"}
json model_to_json(const ModelSpec& model);
ModelSpec model_from_json(const json& doc);
ModelSpec read_model(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// "slot,m_inf,v_inf"
void write_moments_csv(std::ostream& out, const MomentCurve& curve);

/// "slot,servers"
void write_schedule_csv(std::ostream& out, const StaffingSchedule& schedule);
StaffingSchedule read_schedule_csv(std::istream& in);
/// {"epsilon", "beta", "rule", "gamma", "total"}
json schedule_metadata(const StaffingSchedule& schedule);

/// Header "slot_0,...,slot_{N-1}", one row of counts per day.
ArrivalCounts read_counts_csv(std::istream& in, double delta = 1.0);

/// Array of {"lag", "alpha", "var_w", "mse_star", "mse", "gain"}; absent
/// values (baseline lag, lag-0 alpha) are null.
json fit_results_json(std::span<const FitResult> rows);

json simulation_to_json(const SimulationResult& result);
/// "slot,delay_prob,exceedance_prob,occ_mean,occ_var"
void write_simulation_csv(std::ostream& out, const SimulationResult& result);

json delay_summary_json(const DelaySummary& summary);

/// Two-column CSV "t,survival" describing a tabulated service time.
ServiceSpec read_survival_csv(std::istream& in);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace coxstaff
