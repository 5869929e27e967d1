// camot command-line front end. All functionality lives behind the C API of
// the shared library; this binary only parses arguments and reports errors.
//
// Exit codes: 0 success, 1 input error, 2 internal invariant violation.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "camot/camot.h"

namespace {

int exit_code(camot_status status) {
  switch (status) {
    case CAMOT_OK: return 0;
    case CAMOT_ERROR_INVALID_ARGUMENT:
    case CAMOT_ERROR_IO: return 1;
    case CAMOT_ERROR_INTERNAL: return 2;
  }
  return 2;
}

int finish(camot_status status) {
  if (status != CAMOT_OK)
    std::fprintf(stderr, "camot: %s: %s\n", camot_status_name(status),
                 camot_last_error());
  return exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-agnostic multi-object tracking engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(camot_version()));

  // track
  std::string in_dir, params_file, out_file, diagnostics_file;
  int workers = 1;
  auto* track = app.add_subcommand("track", "track a sequence directory");
  track->add_option("--in", in_dir, "sequence directory")->required();
  track->add_option("--params", params_file, "parameter file (JSON)");
  track->add_option("--out", out_file, "tracks output (JSONL)")->required();
  track->add_option("--diagnostics", diagnostics_file,
                    "per-frame diagnostics output (JSONL)");
  track->add_option("--workers", workers, "preprocessing worker threads");

  // eval
  std::string tracks_file, gt_file, config_file, report_file, csv_file;
  auto* eval = app.add_subcommand("eval", "evaluate tracks against ground truth");
  eval->add_option("--tracks", tracks_file, "tracks file (JSONL)")->required();
  eval->add_option("--gt", gt_file, "ground-truth file (JSONL)")->required();
  eval->add_option("--config", config_file, "evaluation config (JSON)");
  eval->add_option("--out", report_file, "report output (JSON)");

  // tune
  std::string spec_file, tune_out, trial_log;
  auto* tune = app.add_subcommand("tune", "random-search hyperparameter training");
  tune->add_option("--spec", spec_file, "tune spec (JSON)")->required();
  tune->add_option("--out", tune_out, "best parameter file output")->required();
  tune->add_option("--log", trial_log, "trial log output (JSONL)");

  // synth
  std::string scenario, synth_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
  synth->add_option("--scenario", scenario,
                    "catalog name or scenario JSON file")->required();
  synth->add_option("--out", synth_dir, "output sequence directory")->required();

  // render
  std::string render_in, render_tracks, render_out;
  auto* render = app.add_subcommand("render", "write mask-overlay images");
  render->add_option("--in", render_in, "sequence directory")->required();
  render->add_option("--tracks", render_tracks, "tracks file (JSONL)")->required();
  render->add_option("--out", render_out, "output image directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (track->parsed()) {
    camot_params* params = nullptr;
    if (!params_file.empty()) {
      const camot_status st = camot_params_load(params_file.c_str(), &params);
      if (st != CAMOT_OK) return finish(st);
    }
    const camot_status st = camot_track(
        in_dir.c_str(), params, out_file.c_str(),
        diagnostics_file.empty() ? nullptr : diagnostics_file.c_str(), workers);
    camot_params_destroy(params);
    return finish(st);
  }

  if (eval->parsed()) {
    char* report_json = nullptr;
    camot_status st = camot_evaluate(
        tracks_file.c_str(), gt_file.c_str(),
        config_file.empty() ? nullptr : config_file.c_str(),
        report_file.empty() ? nullptr : report_file.c_str(), &report_json);
    if (st != CAMOT_OK) return finish(st);
    char* table = nullptr;
    st = camot_report_table(report_json, &table);
    if (st == CAMOT_OK) std::fputs(table, stdout);
    camot_string_free(table);
    camot_string_free(report_json);
    return finish(st);
  }

  if (tune->parsed()) {
    return finish(camot_tune(spec_file.c_str(), tune_out.c_str(),
                             trial_log.empty() ? nullptr : trial_log.c_str()));
  }

  if (synth->parsed()) {
    return finish(camot_synth(scenario.c_str(), synth_dir.c_str()));
  }

  if (render->parsed()) {
    return finish(camot_render(render_in.c_str(), render_tracks.c_str(),
                               render_out.c_str()));
  }

  return 1;
}
