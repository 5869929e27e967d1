#include "core/io_formats.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "core/errors.hpp"

namespace camot {

using nlohmann::json;

namespace {

json vec3_to_json(const Eigen::Vector3d& v) {
  return json::array({v.x(), v.y(), v.z()});
}

json vec2_to_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw InputError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw InputError("expected a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

json parse_line(const std::string& line, const std::filesystem::path& path,
                size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ":" + std::to_string(line_no) + ": " +
                     e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void check_schema(const json& j, const std::filesystem::path& path) {
  if (!j.contains("schema") || j["schema"] != kSchemaVersion)
    throw InputError(path.string() + ": missing or unsupported schema (want " +
                     std::string(kSchemaVersion) + ")");
}

// Reads a JSONL file: validates the header line and returns the record lines
// parsed.
std::vector<json> read_jsonl(const std::filesystem::path& path,
                             const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  std::vector<json> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, path, line_no);
    if (line_no == 1) {
      check_schema(j, path);
      if (!j.contains("kind") || j["kind"] != kind)
        throw InputError(path.string() + ": expected kind '" + kind + "'");
      continue;
    }
    records.push_back(std::move(j));
  }
  if (line_no == 0) throw InputError(path.string() + ": empty file");
  return records;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // \n endings everywhere
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_jsonl_header(std::ofstream& out, const std::string& kind,
                        json extra = json::object()) {
  extra["schema"] = kSchemaVersion;
  extra["kind"] = kind;
  out << extra.dump() << "\n";
}

std::string frame_name(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame);
  return buf;
}

json rigid_to_json(const RigidTransform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation()(r, c));
  return json{{"rotation", rot},
              {"translation", vec3_to_json(t.translation_vector())}};
}

RigidTransform rigid_from_json(const json& j) {
  const json& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 9)
    throw InputError("rotation must have 9 row-major values");
  Eigen::Matrix3d r;
  for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = rot[i].get<double>();
  return RigidTransform(r, vec3_from_json(j.at("translation")));
}

}  // namespace

json mask_to_json(const RleMask& mask) {
  return json{{"size", {mask.height(), mask.width()}},
              {"counts", mask.runs()}};
}

RleMask mask_from_json(const json& j) {
  const json& size = j.at("size");
  if (!size.is_array() || size.size() != 2)
    throw InputError("mask size must be [height, width]");
  std::vector<uint32_t> runs;
  for (const auto& c : j.at("counts")) runs.push_back(c.get<uint32_t>());
  return RleMask(size[0].get<uint32_t>(), size[1].get<uint32_t>(),
                 std::move(runs));
}

json params_to_json(const Params& p) {
  return json{
      {"schema", kSchemaVersion},
      {"kind", "params"},
      {"observations",
       {{"nms_iou_threshold", p.observations.nms_iou_threshold},
        {"height_min", p.observations.height_min},
        {"height_max", p.observations.height_max},
        {"top_k", p.observations.top_k},
        {"min_depth_pixels", p.observations.min_depth_pixels}}},
      {"tracker",
       {{"tau", p.tracker.tau},
        {"nms_similarity", p.tracker.nms_similarity},
        {"gate", p.tracker.gate},
        {"max_misses", p.tracker.max_misses},
        {"backward_window", p.tracker.backward_window},
        {"init_pos_var", p.tracker.init_pos_var},
        {"init_vel_var", p.tracker.init_vel_var},
        {"process_noise_pos", p.tracker.process_noise_pos},
        {"process_noise_vel", p.tracker.process_noise_vel},
        {"obs_noise_var", p.tracker.obs_noise_var}}},
      {"inference",
       {{"lambda", p.inference.lambda},
        {"w_min", p.inference.w_min},
        {"w_sim", p.inference.w_sim},
        {"w_seg", p.inference.w_seg},
        {"w_sem", p.inference.w_sem},
        {"c_min", p.inference.c_min},
        {"exhaustive_limit", p.inference.exhaustive_limit},
        {"branch_width", p.inference.branch_width}}}};
}

Params params_from_json(const json& j) {
  Params p;
  if (j.contains("observations")) {
    const json& o = j["observations"];
    p.observations.nms_iou_threshold =
        o.value("nms_iou_threshold", p.observations.nms_iou_threshold);
    p.observations.height_min = o.value("height_min", p.observations.height_min);
    p.observations.height_max = o.value("height_max", p.observations.height_max);
    p.observations.top_k = o.value("top_k", p.observations.top_k);
    p.observations.min_depth_pixels =
        o.value("min_depth_pixels", p.observations.min_depth_pixels);
  }
  if (j.contains("tracker")) {
    const json& t = j["tracker"];
    p.tracker.tau = t.value("tau", p.tracker.tau);
    p.tracker.nms_similarity = t.value("nms_similarity", p.tracker.nms_similarity);
    p.tracker.gate = t.value("gate", p.tracker.gate);
    p.tracker.max_misses = t.value("max_misses", p.tracker.max_misses);
    p.tracker.backward_window =
        t.value("backward_window", p.tracker.backward_window);
    p.tracker.init_pos_var = t.value("init_pos_var", p.tracker.init_pos_var);
    p.tracker.init_vel_var = t.value("init_vel_var", p.tracker.init_vel_var);
    p.tracker.process_noise_pos =
        t.value("process_noise_pos", p.tracker.process_noise_pos);
    p.tracker.process_noise_vel =
        t.value("process_noise_vel", p.tracker.process_noise_vel);
    p.tracker.obs_noise_var = t.value("obs_noise_var", p.tracker.obs_noise_var);
  }
  if (j.contains("inference")) {
    const json& i = j["inference"];
    p.inference.lambda = i.value("lambda", p.inference.lambda);
    p.inference.w_min = i.value("w_min", p.inference.w_min);
    p.inference.w_sim = i.value("w_sim", p.inference.w_sim);
    p.inference.w_seg = i.value("w_seg", p.inference.w_seg);
    p.inference.w_sem = i.value("w_sem", p.inference.w_sem);
    p.inference.c_min = i.value("c_min", p.inference.c_min);
    p.inference.exhaustive_limit =
        i.value("exhaustive_limit", p.inference.exhaustive_limit);
    p.inference.branch_width = i.value("branch_width", p.inference.branch_width);
  }
  return p;
}

void write_params(const std::filesystem::path& path, const Params& params) {
  auto out = open_out(path);
  out << params_to_json(params).dump(2) << "\n";
}

Params read_params(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  check_schema(j, path);
  return params_from_json(j);
}

Params apply_overrides(const Params& base,
                       const std::map<std::string, double>& overrides) {
  json j = params_to_json(base);
  for (const auto& [path, value] : overrides) {
    const size_t dot = path.find('.');
    if (dot == std::string::npos)
      throw InputError("parameter path must be section.key: " + path);
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    if (!j.contains(section) || !j[section].contains(key))
      throw InputError("unknown parameter: " + path);
    if (j[section][key].is_number_integer())
      j[section][key] = int64_t(std::llround(value));
    else
      j[section][key] = value;
  }
  return params_from_json(j);
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  auto out = open_out(path);
  out << "DEPTH " << depth.height() << " " << depth.width() << "\n";
  out.write(reinterpret_cast<const char*>(depth.data().data()),
            std::streamsize(depth.data().size() * sizeof(float)));
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string magic;
  uint32_t h = 0, w = 0;
  in >> magic >> h >> w;
  if (magic != "DEPTH" || h == 0 || w == 0)
    throw InputError(path.string() + ": bad depth header");
  in.ignore(1);  // newline
  std::vector<float> data(size_t(h) * w);
  in.read(reinterpret_cast<char*>(data.data()),
          std::streamsize(data.size() * sizeof(float)));
  if (!in) throw InputError(path.string() + ": truncated depth data");
  return DepthMap(h, w, std::move(data));
}

void write_flow(const std::filesystem::path& path, const FlowMap& flow) {
  auto out = open_out(path);
  out << "FLOW " << flow.height() << " " << flow.width() << "\n";
  out.write(reinterpret_cast<const char*>(flow.data().data()),
            std::streamsize(flow.data().size() * sizeof(float)));
}

FlowMap read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string magic;
  uint32_t h = 0, w = 0;
  in >> magic >> h >> w;
  if (magic != "FLOW" || h == 0 || w == 0)
    throw InputError(path.string() + ": bad flow header");
  in.ignore(1);
  std::vector<float> data(2 * size_t(h) * w);
  in.read(reinterpret_cast<char*>(data.data()),
          std::streamsize(data.size() * sizeof(float)));
  if (!in) throw InputError(path.string() + ": truncated flow data");
  return FlowMap(h, w, std::move(data));
}

void write_sequence(const std::filesystem::path& dir,
                    const SequenceBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  fs::create_directories(dir / "observations");

  {
    auto out = open_out(dir / "calibration.json");
    out << json{{"schema", kSchemaVersion},
                {"kind", "calibration"},
                {"fx", bundle.intrinsics.fx},
                {"fy", bundle.intrinsics.fy},
                {"cx", bundle.intrinsics.cx},
                {"cy", bundle.intrinsics.cy},
                {"width", bundle.image_width},
                {"height", bundle.image_height}}
               .dump(2)
        << "\n";
  }
  {
    auto out = open_out(dir / "egomotion.jsonl");
    write_jsonl_header(out, "egomotion");
    for (const FrameContext& ctx : bundle.contexts) {
      json row = rigid_to_json(ctx.ego_motion);
      row["frame"] = ctx.frame;
      out << row.dump() << "\n";
    }
  }
  bool any_depth = false, any_flow = false;
  for (const FrameContext& ctx : bundle.contexts) {
    if (ctx.depth) any_depth = true;
    if (ctx.flow) any_flow = true;
  }
  if (any_depth) fs::create_directories(dir / "depth");
  if (any_flow) fs::create_directories(dir / "flow");

  for (size_t t = 0; t < bundle.contexts.size(); ++t) {
    const FrameContext& ctx = bundle.contexts[t];
    const std::string name = frame_name(ctx.frame);
    {
      auto out = open_out(dir / "observations" / (name + ".jsonl"));
      write_jsonl_header(out, "observations", json{{"frame", ctx.frame}});
      for (const RawProposal& p : bundle.proposals[t]) {
        json row{{"mask", mask_to_json(p.mask)}, {"score", p.score}};
        if (p.pos) row["pos"] = vec3_to_json(*p.pos);
        if (p.vel) row["vel"] = vec2_to_json(*p.vel);
        if (!p.class_scores.empty()) row["class_scores"] = p.class_scores;
        out << row.dump() << "\n";
      }
    }
    if (ctx.depth) write_depth(dir / "depth" / (name + ".depth"), *ctx.depth);
    if (ctx.flow) write_flow(dir / "flow" / (name + ".flow"), *ctx.flow);
  }
  if (!bundle.ground_truth.empty())
    write_ground_truth(dir / "gt.jsonl", bundle.ground_truth);
}

SequenceBundle read_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw InputError("not a sequence directory: " + dir.string());

  SequenceBundle bundle;
  {
    const json j = read_json_file(dir / "calibration.json");
    check_schema(j, dir / "calibration.json");
    bundle.intrinsics.fx = j.at("fx").get<double>();
    bundle.intrinsics.fy = j.at("fy").get<double>();
    bundle.intrinsics.cx = j.at("cx").get<double>();
    bundle.intrinsics.cy = j.at("cy").get<double>();
    bundle.image_width = j.at("width").get<uint32_t>();
    bundle.image_height = j.at("height").get<uint32_t>();
    if (bundle.intrinsics.fx <= 0 || bundle.intrinsics.fy <= 0)
      throw InputError("calibration: focal lengths must be positive");
  }

  std::map<int, RigidTransform> ego;
  for (const json& row : read_jsonl(dir / "egomotion.jsonl", "egomotion"))
    ego.emplace(row.at("frame").get<int>(), rigid_from_json(row));

  RigidTransform world_to_cam;  // identity at frame 0
  for (int frame = 0;; ++frame) {
    const fs::path obs_path =
        dir / "observations" / (frame_name(frame) + ".jsonl");
    if (!fs::exists(obs_path)) {
      if (frame == 0)
        throw InputError("no observation files under " + dir.string());
      break;
    }
    FrameContext ctx;
    ctx.frame = frame;
    ctx.intrinsics = bundle.intrinsics;
    ctx.image_width = bundle.image_width;
    ctx.image_height = bundle.image_height;
    const auto it = ego.find(frame);
    if (it == ego.end())
      throw InputError(dir.string() + ": missing ego-motion for frame " +
                       std::to_string(frame));
    ctx.ego_motion = it->second;
    if (frame > 0) world_to_cam = ctx.ego_motion.compose(world_to_cam);
    ctx.camera_to_world = world_to_cam.inverse();

    std::vector<RawProposal> props;
    for (const json& row : read_jsonl(obs_path, "observations")) {
      RawProposal p;
      p.mask = mask_from_json(row.at("mask"));
      if (p.mask.height() != bundle.image_height ||
          p.mask.width() != bundle.image_width)
        throw InputError(obs_path.string() + ": mask does not match image size");
      p.score = row.at("score").get<double>();
      if (p.score < 0.0 || p.score > 1.0)
        throw InputError(obs_path.string() + ": score out of [0,1]");
      if (row.contains("pos")) p.pos = vec3_from_json(row["pos"]);
      if (row.contains("vel")) p.vel = vec2_from_json(row["vel"]);
      if (row.contains("class_scores"))
        p.class_scores =
            row["class_scores"].get<std::map<std::string, double>>();
      props.push_back(std::move(p));
    }

    const fs::path depth_path = dir / "depth" / (frame_name(frame) + ".depth");
    if (fs::exists(depth_path))
      ctx.depth = std::make_shared<DepthMap>(read_depth(depth_path));
    const fs::path flow_path = dir / "flow" / (frame_name(frame) + ".flow");
    if (fs::exists(flow_path))
      ctx.flow = std::make_shared<FlowMap>(read_flow(flow_path));

    bundle.contexts.push_back(std::move(ctx));
    bundle.proposals.push_back(std::move(props));
  }

  if (fs::exists(dir / "gt.jsonl"))
    bundle.ground_truth = read_ground_truth(dir / "gt.jsonl");
  return bundle;
}

void write_ground_truth(const std::filesystem::path& path,
                        const std::vector<GroundTruthBox>& gt) {
  auto out = open_out(path);
  write_jsonl_header(out, "ground_truth");
  for (const GroundTruthBox& g : gt) {
    json row{{"frame", g.frame},
             {"id", g.id},
             {"label", g.label},
             {"bbox", {g.box.x, g.box.y, g.box.w, g.box.h}}};
    if (g.pos) row["pos"] = vec3_to_json(*g.pos);
    out << row.dump() << "\n";
  }
}

std::vector<GroundTruthBox> read_ground_truth(
    const std::filesystem::path& path) {
  std::vector<GroundTruthBox> gt;
  for (const json& row : read_jsonl(path, "ground_truth")) {
    GroundTruthBox g;
    g.frame = row.at("frame").get<int>();
    g.id = row.at("id").get<int64_t>();
    g.label = row.value("label", std::string{});
    const json& b = row.at("bbox");
    g.box = {b.at(0).get<double>(), b.at(1).get<double>(),
             b.at(2).get<double>(), b.at(3).get<double>()};
    if (row.contains("pos")) g.pos = vec3_from_json(row["pos"]);
    gt.push_back(std::move(g));
  }
  return gt;
}

void write_tracks(const std::filesystem::path& path,
                  const std::vector<TrackRow>& rows) {
  auto out = open_out(path);
  write_jsonl_header(out, "tracks");
  for (const TrackRow& r : rows) {
    json row{{"frame", r.frame},
             {"id", r.id},
             {"mask", mask_to_json(r.mask)},
             {"bbox", {r.box.x, r.box.y, r.box.w, r.box.h}},
             {"pos", vec3_to_json(r.pos)},
             {"pos_cam", vec3_to_json(r.pos_cam)},
             {"vel", vec2_to_json(r.vel)},
             {"score", r.score},
             {"label", r.label ? json(*r.label) : json(nullptr)},
             {"predicted", r.predicted}};
    out << row.dump() << "\n";
  }
}

std::vector<TrackRow> read_tracks(const std::filesystem::path& path) {
  std::vector<TrackRow> rows;
  for (const json& row : read_jsonl(path, "tracks")) {
    TrackRow r;
    r.frame = row.at("frame").get<int>();
    r.id = row.at("id").get<int64_t>();
    r.mask = mask_from_json(row.at("mask"));
    const json& b = row.at("bbox");
    r.box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
             b.at(3).get<int>()};
    r.pos = vec3_from_json(row.at("pos"));
    r.pos_cam = vec3_from_json(row.at("pos_cam"));
    r.vel = vec2_from_json(row.at("vel"));
    r.score = row.value("score", 0.0);
    if (row.contains("label") && !row["label"].is_null())
      r.label = row["label"].get<std::string>();
    r.predicted = row.value("predicted", false);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<FrameDiagnostics>& rows) {
  auto out = open_out(path);
  write_jsonl_header(out, "diagnostics");
  for (const FrameDiagnostics& d : rows) {
    json rej = json::array();
    for (const RejectionRecord& r : d.rejections)
      rej.push_back({{"proposal", r.proposal_index}, {"reason", r.reason}});
    out << json{{"frame", d.frame},
                {"raw_proposals", d.raw_proposals},
                {"rejections", rej},
                {"height_filter_skipped", d.height_filter_skipped},
                {"observations", d.observations},
                {"live_hypotheses", d.live_hypotheses},
                {"solver", d.exhaustive_solver ? "exhaustive" : "multibranch"},
                {"energy", d.energy},
                {"selection", d.selection_bits},
                {"selected_ids", d.selected_ids},
                {"warnings", d.warnings}}
               .dump()
        << "\n";
  }
}

EvalConfig read_eval_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  check_schema(j, path);
  EvalConfig cfg;
  cfg.iou_threshold = j.value("iou_threshold", cfg.iou_threshold);
  if (j.contains("bin_edges"))
    cfg.bin_edges = j["bin_edges"].get<std::vector<double>>();
  if (j.contains("categories"))
    cfg.categories = j["categories"].get<std::vector<std::string>>();
  cfg.lambda = j.value("lambda", cfg.lambda);
  return cfg;
}

namespace {

json counts_to_json(const MotCounts& c) {
  return json{{"gt", c.gt},           {"tp", c.tp},
              {"fp", c.fp},           {"fn", c.fn},
              {"idsw", c.idsw},       {"mota", c.mota()},
              {"moda", c.moda()},     {"recall", c.recall()},
              {"precision", c.precision()}};
}

}  // namespace

nlohmann::json report_to_json(const MotReport& report) {
  json bins = json::array();
  for (const DistanceBin& b : report.bins) {
    json jb = counts_to_json(b.counts);
    jb["lo"] = b.lo;
    jb["hi"] = b.hi ? json(*b.hi) : json(nullptr);
    bins.push_back(std::move(jb));
  }
  json j{{"schema", kSchemaVersion},
         {"kind", "eval_report"},
         {"overall", counts_to_json(report.overall)},
         {"bins", bins}};
  if (!report.per_category.empty()) {
    json cats = json::object();
    for (const auto& [cat, counts] : report.per_category)
      cats[cat] = counts_to_json(counts);
    j["per_category"] = std::move(cats);
  }
  return j;
}

std::string report_to_table(const MotReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  auto row = [&](const std::string& name, const MotCounts& c) {
    os << std::left << std::setw(14) << name << std::right << std::setw(7)
       << c.gt << std::setw(7) << c.tp << std::setw(7) << c.fp << std::setw(7)
       << c.fn << std::setw(7) << c.idsw << std::setw(9) << c.mota()
       << std::setw(9) << c.moda() << std::setw(9) << c.recall()
       << std::setw(9) << c.precision() << "\n";
  };
  os << std::left << std::setw(14) << "range" << std::right << std::setw(7)
     << "gt" << std::setw(7) << "tp" << std::setw(7) << "fp" << std::setw(7)
     << "fn" << std::setw(7) << "idsw" << std::setw(9) << "MOTA"
     << std::setw(9) << "MODA" << std::setw(9) << "recall" << std::setw(9)
     << "prec" << "\n";
  row("overall", report.overall);
  for (const DistanceBin& b : report.bins) {
    std::ostringstream name;
    name << b.lo << "-" << (b.hi ? std::to_string(int(*b.hi)) : "inf") << "m";
    row(name.str(), b.counts);
  }
  for (const auto& [cat, counts] : report.per_category) row(cat, counts);
  return os.str();
}

void write_report_csv(const std::filesystem::path& path,
                      const MotReport& report) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,gt,tp,fp,fn,idsw,mota,moda,recall,precision\n";
  auto row = [&](const std::string& lo, const std::string& hi,
                 const MotCounts& c) {
    out << lo << "," << hi << "," << c.gt << "," << c.tp << "," << c.fp << ","
        << c.fn << "," << c.idsw << "," << c.mota() << "," << c.moda() << ","
        << c.recall() << "," << c.precision() << "\n";
  };
  for (const DistanceBin& b : report.bins)
    row(std::to_string(b.lo), b.hi ? std::to_string(*b.hi) : "", b.counts);
  row("", "", report.overall);
}

ScenarioSpec read_scenario(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  check_schema(j, path);
  ScenarioSpec spec;
  spec.seed = j.value("seed", spec.seed);
  spec.frames = j.value("frames", spec.frames);
  spec.image_width = j.value("image_width", spec.image_width);
  spec.image_height = j.value("image_height", spec.image_height);
  if (j.contains("intrinsics")) {
    const json& k = j["intrinsics"];
    spec.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                       k.at("cx").get<double>(), k.at("cy").get<double>()};
  }
  if (j.contains("camera")) {
    const json& c = j["camera"];
    if (c.contains("velocity")) spec.camera.velocity = vec3_from_json(c["velocity"]);
    spec.camera.yaw_rate_deg = c.value("yaw_rate_deg", 0.0);
  }
  spec.camera_height = j.value("camera_height", spec.camera_height);
  if (j.contains("objects")) {
    spec.objects.clear();
    for (const json& o : j["objects"]) {
      ObjectSpec obj;
      obj.label = o.value("label", obj.label);
      obj.width = o.value("width", obj.width);
      obj.height = o.value("height", obj.height);
      if (o.contains("start")) obj.start = vec2_from_json(o["start"]);
      if (o.contains("velocity")) obj.velocity = vec2_from_json(o["velocity"]);
      if (o.contains("velocity_changes"))
        for (const json& vc : o["velocity_changes"])
          obj.velocity_changes.push_back(
              {vc.at(0).get<int>(), vec2_from_json(vc.at(1))});
      if (o.contains("occluded_spans"))
        for (const json& s : o["occluded_spans"])
          obj.occluded_spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
      spec.objects.push_back(std::move(obj));
    }
  }
  spec.p_oversplit = j.value("p_oversplit", spec.p_oversplit);
  spec.p_merge = j.value("p_merge", spec.p_merge);
  spec.p_dropout = j.value("p_dropout", spec.p_dropout);
  spec.clutter_per_frame = j.value("clutter_per_frame", spec.clutter_per_frame);
  spec.mask_jitter_px = j.value("mask_jitter_px", spec.mask_jitter_px);
  spec.pos_noise_sigma = j.value("pos_noise_sigma", spec.pos_noise_sigma);
  spec.emit_depth = j.value("emit_depth", spec.emit_depth);
  spec.emit_flow = j.value("emit_flow", spec.emit_flow);
  spec.emit_pos_vel = j.value("emit_pos_vel", spec.emit_pos_vel);
  return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  json objects = json::array();
  for (const ObjectSpec& o : spec.objects) {
    json vc = json::array();
    for (const auto& [frame, v] : o.velocity_changes)
      vc.push_back({frame, vec2_to_json(v)});
    json spans = json::array();
    for (const auto& [lo, hi] : o.occluded_spans) spans.push_back({lo, hi});
    objects.push_back(json{{"label", o.label},
                           {"width", o.width},
                           {"height", o.height},
                           {"start", vec2_to_json(o.start)},
                           {"velocity", vec2_to_json(o.velocity)},
                           {"velocity_changes", vc},
                           {"occluded_spans", spans}});
  }
  return json{{"schema", kSchemaVersion},
              {"kind", "scenario"},
              {"seed", spec.seed},
              {"frames", spec.frames},
              {"image_width", spec.image_width},
              {"image_height", spec.image_height},
              {"intrinsics",
               {{"fx", spec.intrinsics.fx},
                {"fy", spec.intrinsics.fy},
                {"cx", spec.intrinsics.cx},
                {"cy", spec.intrinsics.cy}}},
              {"camera",
               {{"velocity", vec3_to_json(spec.camera.velocity)},
                {"yaw_rate_deg", spec.camera.yaw_rate_deg}}},
              {"camera_height", spec.camera_height},
              {"objects", objects},
              {"p_oversplit", spec.p_oversplit},
              {"p_merge", spec.p_merge},
              {"p_dropout", spec.p_dropout},
              {"clutter_per_frame", spec.clutter_per_frame},
              {"mask_jitter_px", spec.mask_jitter_px},
              {"pos_noise_sigma", spec.pos_noise_sigma},
              {"emit_depth", spec.emit_depth},
              {"emit_flow", spec.emit_flow},
              {"emit_pos_vel", spec.emit_pos_vel}};
}

}  // namespace camot
