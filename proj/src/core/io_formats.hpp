#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "core/evaluation.hpp"
#include "core/inference.hpp"
#include "core/observations.hpp"
#include "core/synthetic.hpp"
#include "core/tracker.hpp"

// All text formats are line-oriented JSON carrying the schema version
// "camot/1": single-object files embed a "schema" field, JSONL files start
// with a header line. Depth and flow maps are binary with a one-line ASCII
// header.

namespace camot {

inline constexpr const char* kSchemaVersion = "camot/1";

struct Params {
  ObservationParams observations;
  TrackerParams tracker;
  InferenceParams inference;
};

// Full track output row; one JSONL line per (frame, id).
struct TrackRow {
  int frame = 0;
  int64_t id = 0;
  RleMask mask;
  BBox2i box;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();      // world frame
  Eigen::Vector3d pos_cam = Eigen::Vector3d::Zero();  // camera frame
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  double score = 0.0;  // selection strength (-unary)
  std::optional<std::string> label;
  bool predicted = false;
};

struct FrameDiagnostics {
  int frame = 0;
  size_t raw_proposals = 0;
  std::vector<RejectionRecord> rejections;
  bool height_filter_skipped = false;
  size_t observations = 0;
  size_t live_hypotheses = 0;
  bool exhaustive_solver = false;
  double energy = 0.0;
  std::string selection_bits;
  std::vector<int64_t> selected_ids;
  std::vector<std::string> warnings;
};

// --- masks ---------------------------------------------------------------
nlohmann::json mask_to_json(const RleMask& mask);
RleMask mask_from_json(const nlohmann::json& j);

// --- parameters ----------------------------------------------------------
nlohmann::json params_to_json(const Params& params);
Params params_from_json(const nlohmann::json& j);
void write_params(const std::filesystem::path& path, const Params& params);
Params read_params(const std::filesystem::path& path);
// Applies dotted-path overrides such as {"inference.w_min": 2.0}.
Params apply_overrides(const Params& base,
                       const std::map<std::string, double>& overrides);

// --- sequence directories ------------------------------------------------
// Layout: calibration.json, egomotion.jsonl, observations/NNNNNN.jsonl,
// optional depth/NNNNNN.depth, flow/NNNNNN.flow, gt.jsonl.
void write_sequence(const std::filesystem::path& dir,
                    const SequenceBundle& bundle);
SequenceBundle read_sequence(const std::filesystem::path& dir);

void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const FlowMap& flow);
FlowMap read_flow(const std::filesystem::path& path);

// --- ground truth, tracks, diagnostics ------------------------------------
void write_ground_truth(const std::filesystem::path& path,
                        const std::vector<GroundTruthBox>& gt);
std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& path);

void write_tracks(const std::filesystem::path& path,
                  const std::vector<TrackRow>& rows);
std::vector<TrackRow> read_tracks(const std::filesystem::path& path);

void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<FrameDiagnostics>& rows);

// --- evaluation ------------------------------------------------------------
EvalConfig read_eval_config(const std::filesystem::path& path);
nlohmann::json report_to_json(const MotReport& report);
std::string report_to_table(const MotReport& report);
void write_report_csv(const std::filesystem::path& path,
                      const MotReport& report);

// --- scenarios --------------------------------------------------------------
ScenarioSpec read_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

}  // namespace camot
