#include "abduct/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "abduct/errors.hpp"

namespace abduct {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec2(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string_view edge_mode_name(EdgeMode m) { return m == EdgeMode::kChain ? "chain" : "full"; }
EdgeMode edge_mode_from(const std::string& s) {
  if (s == "chain") return EdgeMode::kChain;
  if (s == "full") return EdgeMode::kFull;
  throw InputError("unknown edge_mode '" + s + "'");
}

json header(const std::string& kind) { return {{"format_version", kFormatVersion}, {"kind", kind}}; }

void check_header(const json& h, const std::string& kind, const std::string& source) {
  if (!h.is_object() || !h.contains("format_version") || !h.contains("kind"))
    throw InputError(source + ":1: missing format_version/kind header");
  if (h.at("format_version") != kFormatVersion)
    throw InputError(source + ":1: unsupported format_version " + h.at("format_version").dump());
  if (h.at("kind") != kind) throw InputError(source + ":1: expected kind '" + kind + "', found " + h.at("kind").dump());
}

// Calls on_header(json) once, then f(line_number, json) for each record line.
template <class H, class F>
void for_each_record(const std::string& text, const std::string& kind, const std::string& source, H on_header,
                     F f) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  json head;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(source + ":" + std::to_string(number) + ": invalid JSON (" + e.what() + ")");
    }
    if (head.is_null()) {
      check_header(j, kind, source);
      head = std::move(j);
      on_header(head);
      continue;
    }
    try {
      f(number, j);
    } catch (const json::exception& e) {
      throw InputError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  if (head.is_null()) throw InputError(source + ": empty file");
}

void no_header(const json&) {}

std::string line_error(const std::string& source, int line, const std::string& what) {
  return source + ":" + std::to_string(line) + ": " + what;
}

// Every key of `user` must exist in `defaults` (recursively); values replace defaults.
void merge_checked(json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) throw InputError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw InputError("unknown config key '" + where + "'");
    json& slot = defaults[key];
    if (slot.is_object() && value.is_object())
      merge_checked(slot, value, where);
    else
      slot = value;
  }
}

}  // namespace

// ---- config -------------------------------------------------------------

void PipelineConfig::validate() const {
  dataset.validate();
  train.validate();
  if (threads < 0) throw InputError("threads must be non-negative");
  if (linear.steps < 0 || linear.eval_every < 1 || linear.patience < 1 || !(linear.learning_rate > 0.0))
    throw InputError("invalid linear baseline settings");
}

json config_to_json(const PipelineConfig& c) {
  const auto& w = c.dataset.label.world;
  const auto& th = c.dataset.label.thresholds;
  const auto& m = c.train.model;
  json j = header("pipeline_config");
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["write_trajectories"] = c.write_trajectories;
  j["dataset"] = {{"n_videos", c.dataset.n_videos},
                  {"seed", c.dataset.seed},
                  {"layouts", c.dataset.layouts},
                  {"placement_retries", c.dataset.placement_retries},
                  {"min_usable_videos", c.dataset.min_usable_videos}};
  j["world"] = {{"gravity", w.gravity},
                {"restitution_dynamic", w.restitution_dynamic},
                {"restitution_static", w.restitution_static},
                {"friction", w.friction},
                {"dt", w.dt},
                {"duration", w.duration},
                {"bounce_threshold", w.bounce_threshold},
                {"speed_cap", w.speed_cap},
                {"contact_tolerance", w.contact_tolerance},
                {"solver_iterations", w.solver_iterations}};
  j["thresholds"] = {{"delta_speed", th.delta_speed},
                     {"heading_degrees", th.heading_degrees},
                     {"proximity_window", th.proximity_window},
                     {"slide_min_steps", th.slide_min_steps},
                     {"slide_tangential_speed", th.slide_tangential_speed},
                     {"min_speed", th.min_speed}};
  j["labeling"] = {{"match_time", c.dataset.label.tolerances.time},
                   {"match_space", c.dataset.label.tolerances.space},
                   {"max_paths", c.dataset.label.max_paths},
                   {"edge_mode", edge_mode_name(c.dataset.label.edge_mode)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"lr_decay", c.train.lr_decay},
                {"seed", c.train.seed},
                {"patience", c.train.patience},
                {"positive_weight", c.train.positive_weight},
                {"parallel", c.train.exec == Execution::kParallel}};
  j["model"] = {{"layers", m.layers},
                {"temporal_only", m.temporal_only},
                {"semantic_only", m.semantic_only},
                {"message_skip", m.message_skip},
                {"layer_skip", m.layer_skip},
                {"distance_penalty", m.distance_penalty},
                {"premise_window", m.premise.window ? json(*m.premise.window) : json(nullptr)}};
  j["linear"] = {{"steps", c.linear.steps},
                 {"learning_rate", c.linear.learning_rate},
                 {"eval_every", c.linear.eval_every},
                 {"patience", c.linear.patience}};
  return j;
}

PipelineConfig config_from_json(const json& user) {
  json j = config_to_json(PipelineConfig{});
  merge_checked(j, user, "");
  check_header(j, "pipeline_config", "config");
  PipelineConfig c;
  try {
    c.output_dir = j.at("output_dir").get<std::string>();
    c.threads = j.at("threads").get<int>();
    c.write_trajectories = j.at("write_trajectories").get<bool>();
    const json& d = j.at("dataset");
    c.dataset.n_videos = d.at("n_videos").get<int>();
    c.dataset.seed = d.at("seed").get<std::uint64_t>();
    c.dataset.layouts = d.at("layouts").get<std::vector<int>>();
    c.dataset.placement_retries = d.at("placement_retries").get<int>();
    c.dataset.min_usable_videos = d.at("min_usable_videos").get<int>();
    auto& w = c.dataset.label.world;
    const json& jw = j.at("world");
    w.gravity = jw.at("gravity").get<double>();
    w.restitution_dynamic = jw.at("restitution_dynamic").get<double>();
    w.restitution_static = jw.at("restitution_static").get<double>();
    w.friction = jw.at("friction").get<double>();
    w.dt = jw.at("dt").get<double>();
    w.duration = jw.at("duration").get<double>();
    w.bounce_threshold = jw.at("bounce_threshold").get<double>();
    w.speed_cap = jw.at("speed_cap").get<double>();
    w.contact_tolerance = jw.at("contact_tolerance").get<double>();
    w.solver_iterations = jw.at("solver_iterations").get<int>();
    auto& th = c.dataset.label.thresholds;
    const json& jt = j.at("thresholds");
    th.delta_speed = jt.at("delta_speed").get<double>();
    th.heading_degrees = jt.at("heading_degrees").get<double>();
    th.proximity_window = jt.at("proximity_window").get<int>();
    th.slide_min_steps = jt.at("slide_min_steps").get<int>();
    th.slide_tangential_speed = jt.at("slide_tangential_speed").get<double>();
    th.min_speed = jt.at("min_speed").get<double>();
    const json& jl = j.at("labeling");
    c.dataset.label.tolerances.time = jl.at("match_time").get<double>();
    c.dataset.label.tolerances.space = jl.at("match_space").get<double>();
    c.dataset.label.max_paths = jl.at("max_paths").get<std::size_t>();
    c.dataset.label.edge_mode = edge_mode_from(jl.at("edge_mode").get<std::string>());
    const json& jr = j.at("train");
    c.train.epochs = jr.at("epochs").get<int>();
    c.train.batch_size = jr.at("batch_size").get<int>();
    c.train.learning_rate = jr.at("learning_rate").get<double>();
    c.train.lr_decay = jr.at("lr_decay").get<double>();
    c.train.seed = jr.at("seed").get<std::uint64_t>();
    c.train.patience = jr.at("patience").get<int>();
    c.train.positive_weight = jr.at("positive_weight").get<double>();
    c.train.exec = jr.at("parallel").get<bool>() ? Execution::kParallel : Execution::kSerial;
    const json& jm = j.at("model");
    auto& m = c.train.model;
    m.layers = jm.at("layers").get<int>();
    m.temporal_only = jm.at("temporal_only").get<bool>();
    m.semantic_only = jm.at("semantic_only").get<bool>();
    m.message_skip = jm.at("message_skip").get<bool>();
    m.layer_skip = jm.at("layer_skip").get<bool>();
    m.distance_penalty = jm.at("distance_penalty").get<bool>();
    if (!jm.at("premise_window").is_null()) m.premise.window = jm.at("premise_window").get<double>();
    const json& jn = j.at("linear");
    c.linear.steps = jn.at("steps").get<int>();
    c.linear.learning_rate = jn.at("learning_rate").get<double>();
    c.linear.eval_every = jn.at("eval_every").get<int>();
    c.linear.patience = jn.at("patience").get<int>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  return config_from_json(j);
}

std::string config_fingerprint(const PipelineConfig& config) { return fingerprint(config_to_json(config).dump()); }

// ---- records ------------------------------------------------------------

json scene_to_json(const SceneSpec& s) {
  json objects = json::array();
  for (const auto& o : s.dynamic_objects)
    objects.push_back({{"id", o.object_id},
                       {"shape", to_string(o.shape)},
                       {"size", to_string(o.size)},
                       {"color", o.color},
                       {"position", vec2(o.init_position)},
                       {"velocity", vec2(o.init_velocity)},
                       {"mass", o.mass}});
  json statics = json::array();
  for (const auto& e : s.static_elements) {
    json parts = json::array();
    for (const auto& poly : e.parts) {
      json verts = json::array();
      for (Vec2 v : poly.vertices) verts.push_back(vec2(v));
      parts.push_back(std::move(verts));
    }
    statics.push_back({{"id", e.element_id}, {"kind", to_string(e.kind)}, {"parts", std::move(parts)}});
  }
  return {{"layout_id", s.layout_id},          {"seed", s.seed},          {"width", s.world_width},
          {"height", s.world_height},          {"objects", std::move(objects)}, {"static", std::move(statics)}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  s.layout_id = j.at("layout_id").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.world_width = j.at("width").get<double>();
  s.world_height = j.at("height").get<double>();
  for (const auto& o : j.at("objects")) {
    DynamicObjectSpec d;
    d.object_id = o.at("id").get<int>();
    d.shape = shape_from_string(o.at("shape").get<std::string>());
    d.size = size_from_string(o.at("size").get<std::string>());
    d.color = o.at("color").get<int>();
    d.init_position = vec2_from(o.at("position"));
    d.init_velocity = vec2_from(o.at("velocity"));
    d.mass = o.at("mass").get<double>();
    s.dynamic_objects.push_back(d);
  }
  for (const auto& e : j.at("static")) {
    StaticElement el;
    el.element_id = e.at("id").get<int>();
    el.kind = element_from_string(e.at("kind").get<std::string>());
    for (const auto& part : e.at("parts")) {
      ConvexPolygon poly;
      for (const auto& v : part) poly.vertices.push_back(vec2_from(v));
      el.parts.push_back(std::move(poly));
    }
    s.static_elements.push_back(std::move(el));
  }
  return s;
}

json event_to_json(int video_id, const Event& e) {
  json j = {{"video_id", video_id},
            {"event_id", e.event_id},
            {"main_object_id", e.main_object_id},
            {"partner_id", e.partner_id},
            {"type", to_string(e.type)},
            {"ts", e.ts},
            {"te", e.te},
            {"main_position", vec2(e.main_position)},
            {"features", e.features}};
  if (!e.label.empty()) j["label"] = e.label;
  return j;
}

json pair_to_json(const TriggerTargetPair& p) {
  return {{"video_id", p.video_id},
          {"target_event_id", p.target_event_id},
          {"trigger_event_ids", p.trigger_event_ids},
          {"affecting_object_ids", p.affecting_object_ids},
          {"path_cap_hit", p.path_cap_hit}};
}

TriggerTargetPair pair_from_json(const json& j) {
  TriggerTargetPair p;
  p.video_id = j.at("video_id").get<int>();
  p.target_event_id = j.at("target_event_id").get<int>();
  p.trigger_event_ids = j.at("trigger_event_ids").get<std::vector<int>>();
  if (j.contains("affecting_object_ids")) p.affecting_object_ids = j.at("affecting_object_ids").get<std::vector<int>>();
  if (j.contains("path_cap_hit")) p.path_cap_hit = j.at("path_cap_hit").get<bool>();
  return p;
}

std::string scenes_jsonl(const Dataset& ds) {
  std::string out = header("scenes").dump() + "\n";
  for (const auto& v : ds.videos) out += json{{"video_id", v.video_id}, {"scene", scene_to_json(v.scene)}}.dump() + "\n";
  return out;
}

std::string events_jsonl(const Dataset& ds) {
  json h = header("events");
  h["feature_dim"] = ds.feature_dim;
  std::string out = h.dump() + "\n";
  for (const auto& v : ds.videos)
    for (const auto& e : v.events) out += event_to_json(v.video_id, e).dump() + "\n";
  return out;
}

std::string pairs_jsonl(const Dataset& ds) {
  std::string out = header("pairs").dump() + "\n";
  for (const auto& v : ds.videos)
    for (const auto& p : v.pairs) out += pair_to_json(p).dump() + "\n";
  return out;
}

std::string trajectories_jsonl(int video_id, const SimulationResult& sim) {
  json objects = json::array();
  for (const auto& t : sim.trajectories) {
    std::vector<double> px, py, vx, vy;
    for (const auto& s : t.states) {
      px.push_back(s.position.x);
      py.push_back(s.position.y);
      vx.push_back(s.velocity.x);
      vy.push_back(s.velocity.y);
    }
    objects.push_back({{"id", t.object_id}, {"px", px}, {"py", py}, {"vx", vx}, {"vy", vy}});
  }
  return json{{"video_id", video_id}, {"objects", std::move(objects)}}.dump() + "\n";
}

std::string manifest_json(const Dataset& ds, const PipelineConfig& config) {
  json j = header("manifest");
  j["config"] = config_to_json(config);
  j["config_fingerprint"] = config_fingerprint(config);
  j["feature_dim"] = ds.feature_dim;
  j["stats"] = {{"attempted", ds.stats.attempted},
                {"usable", ds.stats.usable},
                {"discarded_no_pairs", ds.stats.discarded_no_pairs},
                {"discarded_diverged", ds.stats.discarded_diverged},
                {"placement_retries", ds.stats.placement_retries},
                {"path_cap_hits", ds.stats.path_cap_hits}};
  json splits, counts;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const std::string name(to_string(s));
    splits[name] = ds.splits.of(s);
    counts[name] = {{"videos", ds.splits.of(s).size()}, {"pairs", ds.pair_count(s)}};
  }
  j["splits"] = std::move(splits);
  j["counts"] = std::move(counts);
  return j.dump(1) + "\n";
}

std::vector<std::pair<int, SceneSpec>> parse_scenes_jsonl(const std::string& text, const std::string& source) {
  std::vector<std::pair<int, SceneSpec>> out;
  for_each_record(text, "scenes", source, no_header, [&](int, const json& j) {
    out.emplace_back(j.at("video_id").get<int>(), scene_from_json(j.at("scene")));
  });
  return out;
}

ParsedEvents parse_events_jsonl(const std::string& text, const std::string& source) {
  ParsedEvents out;
  std::map<int, std::vector<Event>> by_video;
  std::map<int, std::set<int>> seen;
  int dim = 0;
  auto on_header = [&](const json& h) {
    if (!h.contains("feature_dim") || !h.at("feature_dim").is_number_integer() || h.at("feature_dim").get<int>() < 1)
      throw InputError(line_error(source, 1, "header needs a positive integer feature_dim"));
    dim = h.at("feature_dim").get<int>();
  };
  for_each_record(text, "events", source, on_header, [&](int line, const json& j) {
    Event e;
    const int video = j.at("video_id").get<int>();
    e.event_id = j.at("event_id").get<int>();
    e.ts = j.at("ts").get<double>();
    e.te = j.at("te").get<double>();
    if (!(e.te >= e.ts)) throw InputError(line_error(source, line, "te precedes ts"));
    e.features = j.at("features").get<std::vector<double>>();
    if (static_cast<int>(e.features.size()) != dim)
      throw InputError(line_error(source, line, "expected " + std::to_string(dim) + " features, found " +
                                                    std::to_string(e.features.size())));
    if (j.contains("main_object_id")) e.main_object_id = j.at("main_object_id").get<int>();
    if (j.contains("partner_id")) e.partner_id = j.at("partner_id").get<int>();
    if (j.contains("type")) e.type = interaction_from_string(j.at("type").get<std::string>());
    if (j.contains("main_position")) e.main_position = vec2_from(j.at("main_position"));
    if (j.contains("label")) e.label = j.at("label").get<std::string>();
    if (!seen[video].insert(e.event_id).second)
      throw InputError(line_error(source, line, "duplicate event id " + std::to_string(e.event_id) + " in video " +
                                                    std::to_string(video)));
    by_video[video].push_back(std::move(e));
  });
  out.feature_dim = dim;
  for (auto& [video, events] : by_video) out.videos.emplace_back(video, std::move(events));
  return out;
}

std::vector<TriggerTargetPair> parse_pairs_jsonl(const std::string& text, const std::string& source) {
  std::vector<TriggerTargetPair> out;
  for_each_record(text, "pairs", source, no_header, [&](int line, const json& j) {
    TriggerTargetPair p = pair_from_json(j);
    if (p.trigger_event_ids.empty()) throw InputError(line_error(source, line, "pair without triggers"));
    out.push_back(std::move(p));
  });
  return out;
}

// ---- directories --------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

void write_dataset(const Dataset& ds, const PipelineConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  const bool has_scenes = std::any_of(ds.videos.begin(), ds.videos.end(),
                                      [](const VideoRecord& v) { return !v.scene.dynamic_objects.empty(); });
  if (has_scenes) write_text(dir / "scenes.jsonl", scenes_jsonl(ds));
  write_text(dir / "events.jsonl", events_jsonl(ds));
  write_text(dir / "pairs.jsonl", pairs_jsonl(ds));
  write_text(dir / "manifest.json", manifest_json(ds, config));
}

namespace {

// Attaches events and pairs to records; rejects dangling or misordered pairs.
void attach_pairs(std::map<int, VideoRecord>& videos, const std::vector<TriggerTargetPair>& pairs,
                  const std::string& source) {
  for (const auto& p : pairs) {
    auto it = videos.find(p.video_id);
    if (it == videos.end())
      throw InputError(source + ": pair refers to video " + std::to_string(p.video_id) + " with no events");
    const auto& events = it->second.events;
    auto find = [&](int id) -> const Event* {
      for (const auto& e : events)
        if (e.event_id == id) return &e;
      return nullptr;
    };
    const Event* target = find(p.target_event_id);
    if (!target)
      throw InputError(source + ": video " + std::to_string(p.video_id) + " has no event " +
                       std::to_string(p.target_event_id));
    for (int t : p.trigger_event_ids) {
      const Event* trig = find(t);
      if (!trig || !precedes(trig->timed(), target->timed()))
        throw InputError(source + ": trigger " + std::to_string(t) + " of video " + std::to_string(p.video_id) +
                         " is missing or does not precede target " + std::to_string(p.target_event_id));
    }
    it->second.pairs.push_back(p);
  }
}

}  // namespace

Dataset read_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw InputError((dir / "manifest.json").string() + ": invalid JSON (" + e.what() + ")");
  }
  check_header(manifest, "manifest", (dir / "manifest.json").string());
  Dataset ds;
  std::map<int, VideoRecord> videos;
  try {
    ds.feature_dim = manifest.at("feature_dim").get<int>();
    const json& st = manifest.at("stats");
    ds.stats.attempted = st.at("attempted").get<int>();
    ds.stats.usable = st.at("usable").get<int>();
    ds.stats.discarded_no_pairs = st.at("discarded_no_pairs").get<int>();
    ds.stats.discarded_diverged = st.at("discarded_diverged").get<int>();
    ds.stats.placement_retries = st.at("placement_retries").get<int>();
    ds.stats.path_cap_hits = st.at("path_cap_hits").get<int>();
    const json& sp = manifest.at("splits");
    ds.splits.train = sp.at("train").get<std::vector<int>>();
    ds.splits.val = sp.at("val").get<std::vector<int>>();
    ds.splits.test = sp.at("test").get<std::vector<int>>();
    config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw InputError((dir / "manifest.json").string() + ": " + e.what());
  }
  const std::string events_src = (dir / "events.jsonl").string();
  ParsedEvents parsed = parse_events_jsonl(read_text(dir / "events.jsonl"), events_src);
  if (parsed.feature_dim != ds.feature_dim)
    throw InputError(events_src + ": feature_dim " + std::to_string(parsed.feature_dim) + " disagrees with manifest " +
                     std::to_string(ds.feature_dim));
  for (auto& [id, events] : parsed.videos) {
    VideoRecord& v = videos[id];
    v.video_id = id;
    v.events = std::move(events);
  }
  if (fs::exists(dir / "scenes.jsonl"))
    for (auto& [id, scene] : parse_scenes_jsonl(read_text(dir / "scenes.jsonl"), (dir / "scenes.jsonl").string())) {
      auto it = videos.find(id);
      if (it == videos.end()) throw InputError("scene for video " + std::to_string(id) + " has no events");
      it->second.scene = std::move(scene);
    }
  const std::string pairs_src = (dir / "pairs.jsonl").string();
  attach_pairs(videos, parse_pairs_jsonl(read_text(dir / "pairs.jsonl"), pairs_src), pairs_src);

  std::set<int> listed;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest})
    for (int id : ds.splits.of(s))
      if (!listed.insert(id).second || !videos.count(id))
        throw InputError("manifest split lists video " + std::to_string(id) + " twice or without events");
  for (auto& [id, v] : videos) {
    if (!listed.count(id)) throw InputError("video " + std::to_string(id) + " is not assigned to a split");
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

Dataset ingest_external(const fs::path& events_path, const fs::path& pairs_path, std::uint64_t split_seed) {
  if (!fs::exists(pairs_path)) throw InputError("missing pairs file " + pairs_path.string());
  ParsedEvents parsed = parse_events_jsonl(read_text(events_path), events_path.string());
  std::map<int, VideoRecord> videos;
  for (auto& [id, events] : parsed.videos) {
    VideoRecord& v = videos[id];
    v.video_id = id;
    v.events = std::move(events);
  }
  attach_pairs(videos, parse_pairs_jsonl(read_text(pairs_path), pairs_path.string()), pairs_path.string());
  Dataset ds;
  ds.feature_dim = parsed.feature_dim;
  ds.stats.attempted = static_cast<int>(videos.size());
  std::vector<int> usable;
  for (auto& [id, v] : videos) {
    if (v.pairs.empty()) {
      ++ds.stats.discarded_no_pairs;
      continue;
    }
    for (const auto& p : v.pairs) ds.stats.path_cap_hits += p.path_cap_hit;
    usable.push_back(id);
    ds.videos.push_back(std::move(v));
  }
  if (usable.empty()) throw InputError("no video in " + events_path.string() + " has a trigger-target pair");
  ds.stats.usable = static_cast<int>(usable.size());
  ds.splits = split_videos(usable, split_seed);
  return ds;
}

// ---- reports ------------------------------------------------------------

int PositionHistogram::distinct_trigger_positions() const {
  return static_cast<int>(std::count_if(triggers.begin(), triggers.end(), [](int c) { return c > 0; }));
}

double PositionHistogram::trigger_share_at(int index) const {
  long total = 0;
  for (int c : triggers) total += c;
  if (total == 0 || index < 0 || index >= static_cast<int>(triggers.size())) return 0.0;
  return static_cast<double>(triggers[index]) / static_cast<double>(total);
}

PositionHistogram position_histogram(const Dataset& ds) {
  PositionHistogram h;
  auto bump = [](std::vector<int>& v, int i) {
    if (static_cast<int>(v.size()) <= i) v.resize(i + 1, 0);
    ++v[i];
  };
  for (const auto& v : ds.videos) {
    std::vector<const Event*> order;
    for (const auto& e : v.events) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](const Event* a, const Event* b) { return precedes(a->timed(), b->timed()); });
    std::map<int, int> position;
    for (int i = 0; i < static_cast<int>(order.size()); ++i) position[order[i]->event_id] = i;
    for (const auto& p : v.pairs) {
      bump(h.targets, position.at(p.target_event_id));
      for (int t : p.trigger_event_ids) bump(h.triggers, position.at(t));
    }
  }
  const std::size_t n = std::max(h.triggers.size(), h.targets.size());
  h.triggers.resize(n, 0);
  h.targets.resize(n, 0);
  return h;
}

std::string histogram_csv(const PositionHistogram& h) {
  std::string out = "position,triggers,targets\n";
  for (std::size_t i = 0; i < h.triggers.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(h.triggers[i]) + "," + std::to_string(h.targets[i]) + "\n";
  return out;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

constexpr double kW = 640, kH = 360, kPad = 48;

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + fmt(kW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n"
         "<line x1=\"" + fmt(kPad) + "\" y1=\"" + fmt(kH - kPad) + "\" x2=\"" + fmt(kW - kPad / 2) + "\" y2=\"" +
         fmt(kH - kPad) + "\" stroke=\"black\"/>\n<line x1=\"" + fmt(kPad) + "\" y1=\"" + fmt(kPad) + "\" x2=\"" +
         fmt(kPad) + "\" y2=\"" + fmt(kH - kPad) + "\" stroke=\"black\"/>\n";
}

std::string y_label(double value, double y) {
  return "<text x=\"" + fmt(kPad - 4) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" + fmt(value) + "</text>\n";
}

}  // namespace

std::string histogram_svg(const PositionHistogram& h) {
  std::string s = svg_open("Trigger (blue) and target (orange) positions");
  const std::size_t n = std::max<std::size_t>(1, h.triggers.size());
  int top = 1;
  for (std::size_t i = 0; i < h.triggers.size(); ++i) top = std::max({top, h.triggers[i], h.targets[i]});
  const double slot = (kW - 1.5 * kPad) / static_cast<double>(n);
  const double plot_h = kH - 2 * kPad;
  for (std::size_t i = 0; i < h.triggers.size(); ++i) {
    const double x = kPad + slot * static_cast<double>(i);
    const double ht = plot_h * h.triggers[i] / top;
    const double hg = plot_h * h.targets[i] / top;
    s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(kH - kPad - ht) + "\" width=\"" + fmt(slot / 2) + "\" height=\"" +
         fmt(ht) + "\" fill=\"#3b6fb6\"/>\n";
    s += "<rect x=\"" + fmt(x + slot / 2) + "\" y=\"" + fmt(kH - kPad - hg) + "\" width=\"" + fmt(slot / 2) +
         "\" height=\"" + fmt(hg) + "\" fill=\"#e08a2c\"/>\n";
  }
  s += y_label(top, kPad) + y_label(0, kH - kPad);
  s += "<text x=\"" + fmt(kW / 2) + "\" y=\"" + fmt(kH - 12) + "\" text-anchor=\"middle\">event index (0.." +
       std::to_string(n - 1) + ")</text>\n</svg>\n";
  return s;
}

std::string accuracy_svg(const std::vector<EvalReport>& reports) {
  std::string s = svg_open("Top-1 trigger accuracy (%)");
  const std::size_t n = std::max<std::size_t>(1, reports.size());
  const double slot = (kW - 1.5 * kPad) / static_cast<double>(n);
  const double plot_h = kH - 2 * kPad;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double x = kPad + slot * static_cast<double>(i) + slot * 0.15;
    const double hgt = plot_h * std::clamp(reports[i].accuracy, 0.0, 100.0) / 100.0;
    s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(kH - kPad - hgt) + "\" width=\"" + fmt(slot * 0.7) + "\" height=\"" +
         fmt(hgt) + "\" fill=\"#3b6fb6\"/>\n";
    s += "<text x=\"" + fmt(x + slot * 0.35) + "\" y=\"" + fmt(kH - kPad - hgt - 4) + "\" text-anchor=\"middle\">" +
         fmt(reports[i].accuracy) + "</text>\n";
    s += "<text x=\"" + fmt(x + slot * 0.35) + "\" y=\"" + fmt(kH - kPad + 14) + "\" text-anchor=\"middle\">" +
         reports[i].model + "/" + reports[i].split + "</text>\n";
  }
  s += y_label(100, kPad) + y_label(0, kH - kPad) + "</svg>\n";
  return s;
}

std::string loss_curve_svg(const std::vector<EpochRecord>& curve) {
  std::string s = svg_open("Training loss (blue) and validation accuracy / 100 (orange)");
  if (curve.empty()) return s + "</svg>\n";
  double top = 1e-12;
  for (const auto& r : curve) top = std::max({top, r.train_loss, r.val_accuracy / 100.0});
  const double plot_w = kW - 1.5 * kPad, plot_h = kH - 2 * kPad;
  auto point = [&](std::size_t i, double v) {
    const double x = kPad + (curve.size() == 1 ? 0.0 : plot_w * static_cast<double>(i) / (curve.size() - 1));
    return fmt(x) + "," + fmt(kH - kPad - plot_h * v / top) + " ";
  };
  std::string loss, acc;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    loss += point(i, curve[i].train_loss);
    acc += point(i, curve[i].val_accuracy / 100.0);
  }
  s += "<polyline fill=\"none\" stroke=\"#3b6fb6\" points=\"" + loss + "\"/>\n";
  s += "<polyline fill=\"none\" stroke=\"#e08a2c\" points=\"" + acc + "\"/>\n";
  s += y_label(top, kPad) + y_label(0, kH - kPad);
  s += "<text x=\"" + fmt(kW / 2) + "\" y=\"" + fmt(kH - 12) + "\" text-anchor=\"middle\">epoch 1.." +
       std::to_string(curve.back().epoch) + "</text>\n</svg>\n";
  return s;
}

std::vector<EpochRecord> parse_loss_curve_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<EpochRecord> out;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1) {
      if (line.rfind("epoch,train_loss,val_accuracy", 0) != 0) throw InputError(source + ":1: not a loss curve");
      continue;
    }
    if (line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &r.epoch, &r.train_loss, &r.val_accuracy, &r.learning_rate) != 4)
      throw InputError(line_error(source, number, "malformed loss-curve row"));
    out.push_back(r);
  }
  return out;
}

}  // namespace abduct
