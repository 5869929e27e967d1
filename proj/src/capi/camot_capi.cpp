#include "camot/camot.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "core/errors.hpp"
#include "core/pipeline.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

camot_status fail(camot_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename Fn>
camot_status guarded(Fn&& body) {
  try {
    body();
    g_last_error.clear();
    return CAMOT_OK;
  } catch (const camot::InputError& e) {
    return fail(CAMOT_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const camot::InternalError& e) {
    return fail(CAMOT_ERROR_INTERNAL, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(CAMOT_ERROR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(CAMOT_ERROR_INTERNAL, e.what());
  }
}

camot_status require(bool ok, const char* what) {
  return ok ? CAMOT_OK : fail(CAMOT_ERROR_INVALID_ARGUMENT, what);
}

}  // namespace

struct camot_params {
  camot::Params value;
};

extern "C" {

const char* camot_version(void) { return "1.0.0"; }

const char* camot_status_name(camot_status status) {
  switch (status) {
    case CAMOT_OK: return "ok";
    case CAMOT_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case CAMOT_ERROR_IO: return "io error";
    case CAMOT_ERROR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* camot_last_error(void) { return g_last_error.c_str(); }

void camot_string_free(char* s) { std::free(s); }

camot_status camot_params_create(camot_params** out) {
  if (const auto st = require(out != nullptr, "out must not be null"); st)
    return st;
  *out = new camot_params{};
  return CAMOT_OK;
}

camot_status camot_params_load(const char* path, camot_params** out) {
  if (const auto st = require(path && out, "path and out must not be null"); st)
    return st;
  return guarded([&] { *out = new camot_params{camot::read_params(path)}; });
}

camot_status camot_params_save(const camot_params* params, const char* path) {
  if (const auto st = require(params && path, "params and path must not be null");
      st)
    return st;
  return guarded([&] { camot::write_params(path, params->value); });
}

camot_status camot_params_override(camot_params* params,
                                   const char* json_overrides) {
  if (const auto st =
          require(params && json_overrides, "params and overrides required");
      st)
    return st;
  return guarded([&] {
    json j;
    try {
      j = json::parse(json_overrides);
    } catch (const json::exception& e) {
      throw camot::InputError(std::string("overrides: ") + e.what());
    }
    if (!j.is_object())
      throw camot::InputError("overrides must be a JSON object");
    std::map<std::string, double> overrides;
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number())
        throw camot::InputError("override " + key + " must be a number");
      overrides[key] = value.get<double>();
    }
    params->value = camot::apply_overrides(params->value, overrides);
  });
}

camot_status camot_params_to_json(const camot_params* params,
                                  char** json_out) {
  if (const auto st = require(params && json_out, "params and out required"); st)
    return st;
  return guarded(
      [&] { *json_out = dup_string(camot::params_to_json(params->value).dump(2)); });
}

void camot_params_destroy(camot_params* params) { delete params; }

camot_status camot_track(const char* sequence_dir, const camot_params* params,
                         const char* tracks_out, const char* diagnostics_out,
                         int workers) {
  if (const auto st = require(sequence_dir && tracks_out,
                              "sequence_dir and tracks_out required");
      st)
    return st;
  return guarded([&] {
    const camot::Params p = params ? params->value : camot::Params{};
    std::optional<std::filesystem::path> diag;
    if (diagnostics_out) diag = diagnostics_out;
    camot::run_sequence_dir(sequence_dir, p, tracks_out, diag,
                            std::max(1, workers));
  });
}

camot_status camot_evaluate(const char* tracks_path, const char* gt_path,
                            const char* config_path, const char* report_out,
                            char** report_json_out) {
  if (const auto st = require(tracks_path && gt_path && report_json_out,
                              "tracks, gt and report output required");
      st)
    return st;
  return guarded([&] {
    const auto tracks = camot::read_tracks(tracks_path);
    const auto gt = camot::read_ground_truth(gt_path);
    camot::EvalConfig cfg;
    if (config_path) cfg = camot::read_eval_config(config_path);
    const camot::MotReport report =
        camot::clear_mot(camot::to_report_rows(tracks), gt, cfg);
    const json j = camot::report_to_json(report);
    if (report_out) {
      std::ofstream out(report_out, std::ios::binary);
      if (!out)
        throw camot::InputError(std::string("cannot write ") + report_out);
      out << j.dump(2) << "\n";
    }
    *report_json_out = dup_string(j.dump(2));
  });
}

camot_status camot_report_table(const char* report_json, char** table_out) {
  if (const auto st = require(report_json && table_out,
                              "report_json and table_out required");
      st)
    return st;
  return guarded([&] {
    json j;
    try {
      j = json::parse(report_json);
    } catch (const json::exception& e) {
      throw camot::InputError(std::string("report: ") + e.what());
    }
    camot::MotReport report;
    auto counts_from = [](const json& c) {
      camot::MotCounts out;
      out.gt = c.at("gt").get<int64_t>();
      out.tp = c.at("tp").get<int64_t>();
      out.fp = c.at("fp").get<int64_t>();
      out.fn = c.at("fn").get<int64_t>();
      out.idsw = c.at("idsw").get<int64_t>();
      return out;
    };
    report.overall = counts_from(j.at("overall"));
    for (const json& b : j.at("bins")) {
      camot::DistanceBin bin;
      bin.lo = b.at("lo").get<double>();
      if (!b.at("hi").is_null()) bin.hi = b.at("hi").get<double>();
      bin.counts = counts_from(b);
      report.bins.push_back(std::move(bin));
    }
    if (j.contains("per_category"))
      for (const auto& [cat, c] : j["per_category"].items())
        report.per_category[cat] = counts_from(c);
    *table_out = dup_string(camot::report_to_table(report));
  });
}

camot_status camot_tune(const char* spec_path, const char* params_out,
                        const char* trial_log_out) {
  if (const auto st =
          require(spec_path && params_out, "spec and params output required");
      st)
    return st;
  return guarded([&] {
    const camot::TuneSpec spec = camot::read_tune_spec(spec_path);
    const camot::TuneResult result = camot::tune(spec);
    camot::write_params(params_out, result.best_params);
    if (trial_log_out) camot::write_trial_log(trial_log_out, result);
  });
}

camot_status camot_synth(const char* scenario, const char* out_dir) {
  if (const auto st = require(scenario && out_dir,
                              "scenario and out_dir required");
      st)
    return st;
  return guarded([&] {
    camot::ScenarioSpec spec;
    if (std::filesystem::exists(scenario) &&
        std::filesystem::is_regular_file(scenario))
      spec = camot::read_scenario(scenario);
    else
      spec = camot::named_scenario(scenario);
    camot::write_sequence(out_dir, camot::generate(spec));
  });
}

camot_status camot_render(const char* sequence_dir, const char* tracks_path,
                          const char* out_dir) {
  if (const auto st = require(sequence_dir && tracks_path && out_dir,
                              "sequence_dir, tracks and out_dir required");
      st)
    return st;
  return guarded([&] {
    const camot::SequenceBundle bundle = camot::read_sequence(sequence_dir);
    const auto rows = camot::read_tracks(tracks_path);
    camot::render_overlays(bundle, rows, out_dir);
  });
}

}  // extern "C"
