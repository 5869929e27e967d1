#pragma once

#include <filesystem>

#include "core/io_formats.hpp"

namespace camot {

struct RunResult {
  std::vector<TrackRow> tracks;
  std::vector<FrameDiagnostics> diagnostics;
  size_t peak_live_hypotheses = 0;
};

// Captures, per frame, the ranking strength and recent boxes of every live
// hypothesis; feeds the stage-1 tuning objective.
struct CoverageCollector {
  int window = 5;
  std::vector<std::vector<HypothesisTrace>> frames;
};

// Runs preprocessing (plane fit + observation building, parallel over
// frames) followed by the sequential track/select loop. Deterministic for
// fixed inputs and parameters, independent of the worker count.
RunResult run_sequence(const SequenceBundle& bundle, const Params& params,
                       int workers = 1, CoverageCollector* collector = nullptr);

// Directory-based wrapper: loads the sequence, runs it and writes the track
// (and optionally diagnostics) JSONL files.
RunResult run_sequence_dir(const std::filesystem::path& dir,
                           const Params& params,
                           const std::filesystem::path& tracks_out,
                           const std::optional<std::filesystem::path>& diagnostics_out,
                           int workers = 1);

std::vector<TrackReportRow> to_report_rows(const std::vector<TrackRow>& rows);

// Two-stage hyperparameter training. Stage 1 scores hypothesis generation by
// temporal coverage; stage 2 scores the inference weights by MOTA (summed
// over categories when configured).
struct TuneSpec {
  int stage = 1;
  int trials = 1;
  uint64_t seed = 1;
  std::vector<std::filesystem::path> sequences;
  std::map<std::string, std::pair<double, double>> ranges;
  std::optional<std::vector<std::string>> categories;
  int k_best = 100;          // stage 1: hypotheses eligible per frame
  double lambda = 4.0;       // stage 1: coverage decay
  double iou_threshold = 0.5;  // stage 2: match threshold
  Params base;
  int workers = 1;
};

TuneSpec read_tune_spec(const std::filesystem::path& path);

struct TrialRecord {
  int trial = 0;
  double objective = 0.0;
  std::map<std::string, double> values;
};

struct TuneResult {
  Params best_params;
  double best_objective = 0.0;
  int best_trial = -1;
  std::vector<TrialRecord> log;
};

// Proposal/feedback contract for the parameter optimizer, so the random
// search below can be swapped for something smarter.
class ParameterSearch {
 public:
  virtual ~ParameterSearch() = default;
  virtual std::map<std::string, double> propose(int trial) = 0;
  virtual void observe(int trial, double objective) = 0;
};

class RandomSearch : public ParameterSearch {
 public:
  RandomSearch(std::map<std::string, std::pair<double, double>> ranges,
               uint64_t seed);
  std::map<std::string, double> propose(int trial) override;
  void observe(int trial, double objective) override;

 private:
  std::map<std::string, std::pair<double, double>> ranges_;
  uint64_t seed_;
};

// Objective of one parameter set under a tune spec; exposed so logged values
// can be replayed.
double tune_objective(const TuneSpec& spec,
                      const std::vector<SequenceBundle>& sequences,
                      const Params& params);

TuneResult tune(const TuneSpec& spec);
void write_trial_log(const std::filesystem::path& path,
                     const TuneResult& result);

// Writes one PPM overlay image per frame: depth-shaded background, mask
// tinted per track id, box outline.
void render_overlays(const SequenceBundle& bundle,
                     const std::vector<TrackRow>& rows,
                     const std::filesystem::path& out_dir);

}  // namespace camot
