#pragma once

// File formats: the start/stop/event patient CSV, the model JSON document and
// time values with unit suffixes.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phrec/heart_model.hpp"
#include "phrec/stage_model.hpp"
#include "json.hpp"

namespace phrec {

struct HeartData {
  std::vector<PatientRecord> patients;  // in order of first appearance
  std::array<int, 4> scenario_counts{};  // indexed by Scenario
};

// Header `id,start,stop,event,transplant,age,year,surgery`; one row per
// patient, or two when the patient was transplanted.
HeartData read_heart_csv(std::istream& in);
HeartData read_heart_csv(const std::filesystem::path& path);

nlohmann::json model_to_json(const StageModel& model);
StageModel model_from_json(const nlohmann::json& doc);
StageModel read_model(const std::filesystem::path& path);
void write_model(const StageModel& model, const std::filesystem::path& path);

// Days per unit: day 1, month 30, year 365.
double days_per(const std::string& unit);

// Parses "30d", "6m", "1y" or a bare number (already in target units) and
// returns the value in `target_unit`.
double parse_duration(const std::string& text, const std::string& target_unit);

}  // namespace phrec
