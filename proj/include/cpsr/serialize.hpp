#pragma once

#include <json.hpp>
#include <string>

#include "cpsr/learner.hpp"
#include "cpsr/planner.hpp"
#include "cpsr/trajectory.hpp"

namespace cpsr {

// On-disk formats. Corpora are line-delimited: a JSON header line followed by
// one JSON record per trajectory. Models and policies are single-document
// versioned containers with a format tag, version number, named sections, and
// a content hash over everything but the hash itself. All emission is
// deterministic (sorted keys, shortest round-trip numbers), so re-running a
// command with identical inputs reproduces identical bytes.
//
// Error taxonomy: unreadable/unwritable files and corrupted payloads raise
// IoError; a well-formed file of the wrong kind or version raises UsageError.

// FNV-1a hash of the canonical dump, as 16 lowercase hex digits.
std::string content_hash_hex(const nlohmann::json& body);

// ---- configuration <-> JSON ------------------------------------------------

nlohmann::json projection_spec_to_json(const ProjectionSpec& spec);
ProjectionSpec projection_spec_from_json(const nlohmann::json& j);

nlohmann::json learner_config_to_json(const LearnerConfig& config);
LearnerConfig learner_config_from_json(const nlohmann::json& j);

nlohmann::json planner_config_to_json(const PlannerConfig& config);
PlannerConfig planner_config_from_json(const nlohmann::json& j);

// ---- corpora ---------------------------------------------------------------

// Header fields: format, version, episodes, content_hash (over the record
// lines), meta (the caller's resolved config and seeds).
void save_corpus(const std::string& path, const TrajectorySet& corpus,
                 const nlohmann::json& meta);
TrajectorySet load_corpus(const std::string& path, nlohmann::json* header = nullptr);

// ---- models ----------------------------------------------------------------

// Stores the learner config and the model's defining pieces (SVD factors,
// history mass vector, weights, scale, per-symbol operators); derived vectors
// are recomputed on load, which reproduces them bit for bit.
void save_model(const std::string& path, const CpsrModel& model, const nlohmann::json& meta);
CpsrModel load_model(const std::string& path, nlohmann::json* meta = nullptr);

// ---- policies --------------------------------------------------------------

void save_policy(const std::string& path, const Policy& policy, const nlohmann::json& meta);
Policy load_policy(const std::string& path, nlohmann::json* meta = nullptr);

// ---- metrics ---------------------------------------------------------------

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // every row matches columns in size
};

// Writes a CSV with a header row, and a JSON mirror of the same table (plus
// the caller's meta block and a content hash) next to it: the mirror path is
// the CSV path with its .csv suffix replaced by .json (or .json appended).
void save_metrics(const std::string& csv_path, const MetricsTable& table,
                  const nlohmann::json& meta);
MetricsTable load_metrics_json(const std::string& json_path, nlohmann::json* meta = nullptr);

}  // namespace cpsr
