// Command-line front end. Every subcommand reads an optional JSON config
// (--config) whose keys match the flags with dashes turned into
// underscores; flags given on the command line win.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgrkit/coverage/coverage.hpp"
#include "cgrkit/decision/model.hpp"
#include "cgrkit/geometry/mesh_io.hpp"
#include "cgrkit/pipeline/pipeline.hpp"
#include "cgrkit/scene/annotation.hpp"
#include "cgrkit/scene/scene.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cgrkit;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string flag_of(const std::string& key) {
  std::string f = "--" + key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return f;
}

// Config keys of one subcommand, filled from the config file and then the flags.
class Settings {
 public:
  void declare(CLI::App* app, const std::string& key, const std::string& help) {
    app->add_option(flag_of(key), flags_[key], help);
  }
  void declare_flag(CLI::App* app, const std::string& key, const std::string& help) {
    app->add_flag(flag_of(key), switches_[key], help);
  }
  void add_config(CLI::App* app) { app->add_option("--config", config_, "JSON config file"); }

  void resolve() {
    if (!config_.empty()) {
      std::ifstream is(config_);
      if (!is) throw Error("cannot open config " + config_);
      try {
        values_ = json::parse(is);
      } catch (const json::exception& e) {
        throw Error("config " + config_ + ": " + e.what());
      }
      if (!values_.is_object()) throw Error("config " + config_ + ": expected an object");
      for (const auto& [k, v] : values_.items())
        if (!flags_.count(k) && !switches_.count(k)) throw UsageError("config key '" + k + "' is not known here");
    }
    for (const auto& [k, v] : flags_)
      if (v) values_[k] = *v;
    for (const auto& [k, v] : switches_)
      if (v) values_[k] = true;
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::string str(const std::string& key) const {
    if (!has(key)) throw UsageError("missing required option " + flag_of(key));
    const auto& v = values_.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

  double num(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values_.at(key);
    if (v.is_number()) return v.get<double>();
    const std::string s = str(key);
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw UsageError(flag_of(key) + " expects a number, got '" + s + "'");
    return d;
  }
  long long integer(const std::string& key, long long fallback) const {
    const double d = num(key, static_cast<double>(fallback));
    if (d != std::floor(d)) throw UsageError(flag_of(key) + " expects an integer");
    return static_cast<long long>(d);
  }
  bool boolean(const std::string& key) const {
    if (!has(key)) return false;
    const auto& v = values_.at(key);
    if (v.is_boolean()) return v.get<bool>();
    const std::string s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw UsageError(flag_of(key) + " expects true or false");
  }

 private:
  std::string config_;
  std::map<std::string, std::optional<std::string>> flags_;
  std::map<std::string, bool> switches_;
  json values_ = json::object();
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  return os;
}

// One path per line, relative to the list file; blank lines and lines
// starting with '#' are skipped.
std::vector<fs::path> read_list(const fs::path& list) {
  std::ifstream is(list);
  if (!is) throw Error("cannot open list " + list.string());
  std::vector<fs::path> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    const fs::path p = line.substr(b, e - b + 1);
    out.push_back(p.is_absolute() ? p : list.parent_path() / p);
  }
  if (out.empty()) throw Error("list " + list.string() + " is empty");
  return out;
}

std::vector<NamedObject> load_objects(const fs::path& list) {
  std::vector<NamedObject> out;
  for (const auto& p : read_list(list)) out.push_back({p.stem().string(), load_mesh(p)});
  return out;
}

SamplingParams preset(const std::string& name) {
  if (name == "dense") return SamplingParams::dense();
  if (name == "sparse") return SamplingParams::sparse();
  throw UsageError("--preset must be dense or sparse, got '" + name + "'");
}

AnnotationParams annotation_params(const Settings& s, AnnotationParams p) {
  p.voxel_size = s.num("voxel_size", p.voxel_size);
  p.directions = static_cast<int>(s.integer("directions", p.directions));
  p.cylinder_radius = s.num("cylinder_radius", p.cylinder_radius);
  p.cylinder_length = s.num("cylinder_length", p.cylinder_length);
  p.filter_density = s.num("filter_density", p.filter_density);
  return p;
}

void declare_annotation(Settings& s, CLI::App* app) {
  s.declare(app, "voxel_size", "surface voxel size in meters");
  s.declare(app, "directions", "approach directions per surface point");
  s.declare(app, "cylinder_radius", "approach filter cylinder radius");
  s.declare(app, "cylinder_length", "approach filter cylinder length");
  s.declare(app, "filter_density", "filter samples per square meter");
}

DetectionConfig detection_config(const Settings& s) {
  DetectionConfig d;
  d.top_cgr = static_cast<int>(s.integer("top_cgr", d.top_cgr));
  d.top_candidates = static_cast<int>(s.integer("top_candidates", d.top_candidates));
  d.decision_threshold = s.num("threshold", d.decision_threshold);
  d.collision_voxel = s.num("collision_voxel", d.collision_voxel);
  d.cloud_density = s.num("cloud_density", d.cloud_density);
  d.annotation = annotation_params(s, d.annotation);
  d.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
  return d;
}

void declare_detection(Settings& s, CLI::App* app) {
  s.declare(app, "top_cgr", "CGRs kept by antipodal score (K1)");
  s.declare(app, "top_candidates", "candidates kept by score before the collision filter (K2)");
  s.declare(app, "threshold", "decision score threshold");
  s.declare(app, "collision_voxel", "hand voxel size for collision checks");
  s.declare(app, "cloud_density", "scene cloud samples per square meter");
  s.declare(app, "seed", "tie-break and sampling seed");
  declare_annotation(s, app);
}

SceneGenParams scene_params(const Settings& s) {
  SceneGenParams p;
  p.min_objects = static_cast<int>(s.integer("min_objects", p.min_objects));
  p.max_objects = static_cast<int>(s.integer("max_objects", p.max_objects));
  p.half_extent = s.num("half_extent", p.half_extent);
  return p;
}

void declare_scene_gen(Settings& s, CLI::App* app) {
  s.declare(app, "scene_list", "list of scene files (instead of generated scenes)");
  s.declare(app, "scene_count", "number of generated scenes");
  s.declare(app, "scene_seed", "seed of the first generated scene");
  s.declare(app, "min_objects", "fewest objects per generated scene");
  s.declare(app, "max_objects", "most objects per generated scene");
  s.declare(app, "half_extent", "generated objects stay within +-half_extent of the origin");
}

std::vector<Scene> scenes_from(const Settings& s, int default_count) {
  std::vector<Scene> out;
  if (s.has("scene_list")) {
    for (const auto& p : read_list(s.str("scene_list"))) out.push_back(compose_scene(p));
    return out;
  }
  const int count = static_cast<int>(s.integer("scene_count", default_count));
  for (auto& g : generate_scenes(scene_params(s), count, static_cast<std::uint64_t>(s.integer("scene_seed", 0))))
    out.push_back(std::move(g.scene));
  return out;
}

int run_annotate(const Settings& s) {
  const Scene scene = compose_scene(s.str("scene"));
  const auto params = annotation_params(s, AnnotationParams{});
  const auto ds = annotate_scene(scene, params, static_cast<std::uint32_t>(s.integer("scene_id", 0)),
                                 static_cast<std::uint64_t>(s.integer("seed", 0)));
  auto os = open_out(s.str("out"));
  write_dataset(os, ds);
  std::size_t valid = 0;
  for (const auto& r : ds.records) valid += r.valid;
  std::cout << ds.records.size() << " records, " << valid << " valid\n";
  return 0;
}

int run_coverage(const Settings& s) {
  const auto train = load_objects(s.str("train"));
  const auto test = load_objects(s.str("test"));
  SamplingParams train_params = preset(s.str("preset", "dense"));
  SamplingParams test_params = preset(s.str("test_preset", "dense"));
  if (s.has("grasp_spacing")) train_params.grasp_spacing = test_params.grasp_spacing = s.num("grasp_spacing", 0);
  const auto rows = coverage_curve(train, test, train_params, test_params, s.num("tau", 0.001),
                                   static_cast<std::uint64_t>(s.integer("seed", 0)));
  auto os = open_out(s.str("out"));
  write_coverage_csv(os, rows);
  std::size_t covered = 0, total = 0;
  for (const auto& r : rows) {
    covered += r.covered_count;
    total += r.patch_count;
  }
  std::cout << covered << " of " << total << " test patches covered\n";
  return 0;
}

int run_collect(const Settings& s) {
  const HandSpec hand = load_hand_spec(s.str("hand"));
  const fs::path out = s.str("out");
  CollectionConfig cfg;
  cfg.target = static_cast<int>(s.integer("target", cfg.target));
  cfg.friction_min = s.num("friction_min", cfg.friction_min);
  cfg.friction_max = s.num("friction_max", cfg.friction_max);
  cfg.min_antipodal_score = s.num("min_antipodal_score", cfg.min_antipodal_score);
  cfg.detection = detection_config(s);
  cfg.seed = cfg.detection.seed;
  cfg.scenes = scene_params(s);
  const auto scenes = scenes_from(s, cfg.scene_count);
  cfg.scene_count = static_cast<int>(scenes.size());
  const auto trials = collect(cfg, hand, scenes);
  write_trials(out, trials, cfg.detection.annotation.grid);
  std::size_t ok = 0;
  for (const auto& t : trials) ok += t.success;
  std::cout << trials.size() << " trials, " << ok << " successful\n";
  return 0;
}

int run_train(const Settings& s) {
  const HandSpec hand = load_hand_spec(s.str("hand"));
  const auto trials = read_trials(s.str("trials"));
  const fs::path out = s.str("out");
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(s.integer("epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(s.integer("batch_size", cfg.batch_size));
  cfg.learning_rate = s.num("learning_rate", cfg.learning_rate);
  cfg.shape.width = static_cast<int>(s.integer("width", cfg.shape.width));
  cfg.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
  std::map<int, TrainResult> results;
  const auto bank = train_bank(hand.name, trials_by_type(trials, hand), cfg, &results);
  write_bank(out, bank);
  if (s.has("log_dir")) {
    const fs::path dir = s.str("log_dir");
    fs::create_directories(dir);
    for (const auto& [type, r] : results) {
      auto os = open_out(dir / ("type_" + std::to_string(type) + ".csv"));
      write_train_log_csv(os, r.log);
    }
  }
  for (const auto& [type, r] : results)
    for (const auto& w : r.warnings) std::cerr << "warning: grasp type " << type << ": " << w << '\n';
  std::cout << bank.models.size() << " sub-models written\n";
  return 0;
}

int run_detect(const Settings& s) {
  const Scene scene = compose_scene(s.str("scene"));
  const HandSpec hand = load_hand_spec(s.str("hand"));
  const fs::path out = s.str("out");
  const DetectionConfig cfg = detection_config(s);
  std::vector<GraspCandidate> grasps;
  if (s.boolean("baseline")) {
    grasps = detect_baseline(scene, hand, cfg);
  } else {
    const DecisionBank bank = read_bank(fs::path(s.str("bank")));
    grasps = detect(scene, hand, bank, cfg);
  }
  auto os = open_out(out);
  write_grasps_csv(os, grasps);
  std::cout << grasps.size() << " grasps\n";
  return 0;
}

int run_eval(const Settings& s) {
  const HandSpec hand = load_hand_spec(s.str("hand"));
  const std::string policy = s.str("policy", "learned");
  if (policy != "learned" && policy != "baseline") throw UsageError("--policy must be learned or baseline");
  std::optional<DecisionBank> bank;
  if (policy == "learned") bank = read_bank(fs::path(s.str("bank")));
  EvalConfig cfg;
  cfg.friction = s.num("friction", cfg.friction);
  cfg.max_attempts_per_object = static_cast<int>(s.integer("max_attempts_per_object", cfg.max_attempts_per_object));
  cfg.detection = detection_config(s);
  const auto scenes = scenes_from(s, 20);
  const auto report = evaluate(policy == "learned" ? Policy::learned : Policy::baseline, scenes, hand,
                               bank ? &*bank : nullptr, cfg);
  if (s.has("out")) {
    auto os = open_out(s.str("out"));
    write_eval_report(os, report);
  }
  write_eval_report(std::cout, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cgrkit: contact-centric grasp representation toolkit"};
  app.require_subcommand(1);
  std::map<std::string, Settings> settings;
  std::map<std::string, int (*)(const Settings&)> runners;

  auto sub = [&](const std::string& name, const std::string& help, int (*run)(const Settings&)) {
    CLI::App* c = app.add_subcommand(name, help);
    settings[name].add_config(c);
    runners[name] = run;
    return c;
  };

  auto* annotate = sub("annotate", "annotate a scene file into a CGR dataset", run_annotate);
  settings["annotate"].declare(annotate, "scene", "scene file");
  settings["annotate"].declare(annotate, "out", "dataset output path");
  settings["annotate"].declare(annotate, "seed", "direction and filter seed");
  settings["annotate"].declare(annotate, "scene_id", "scene id stored with every record");
  declare_annotation(settings["annotate"], annotate);

  auto* coverage = sub("coverage", "local-geometry coverage of test objects by training objects", run_coverage);
  settings["coverage"].declare(coverage, "train", "list of training meshes");
  settings["coverage"].declare(coverage, "test", "list of test meshes");
  settings["coverage"].declare(coverage, "preset", "training sampling preset: dense or sparse");
  settings["coverage"].declare(coverage, "test_preset", "test sampling preset: dense or sparse");
  settings["coverage"].declare(coverage, "grasp_spacing", "grasp point spacing for both presets");
  settings["coverage"].declare(coverage, "tau", "chamfer threshold in meters");
  settings["coverage"].declare(coverage, "seed", "sampling seed");
  settings["coverage"].declare(coverage, "out", "coverage CSV output path");

  auto* collect_cmd = sub("collect", "oracle-labelled trial-and-error data collection", run_collect);
  settings["collect"].declare(collect_cmd, "hand", "hand file");
  settings["collect"].declare(collect_cmd, "out", "trial file output path");
  settings["collect"].declare(collect_cmd, "target", "number of trials to record");
  settings["collect"].declare(collect_cmd, "friction_min", "lowest sampled friction");
  settings["collect"].declare(collect_cmd, "friction_max", "highest sampled friction");
  settings["collect"].declare(collect_cmd, "min_antipodal_score", "lowest antipodal score of a sampled CGR");
  declare_scene_gen(settings["collect"], collect_cmd);
  declare_detection(settings["collect"], collect_cmd);

  auto* train_cmd = sub("train", "train one decision sub-model per grasp type", run_train);
  settings["train"].declare(train_cmd, "hand", "hand file");
  settings["train"].declare(train_cmd, "trials", "trial file");
  settings["train"].declare(train_cmd, "out", "bank output path");
  settings["train"].declare(train_cmd, "epochs", "training epochs");
  settings["train"].declare(train_cmd, "batch_size", "mini-batch size");
  settings["train"].declare(train_cmd, "learning_rate", "initial learning rate");
  settings["train"].declare(train_cmd, "width", "hidden layer width");
  settings["train"].declare(train_cmd, "seed", "initialization and shuffle seed");
  settings["train"].declare(train_cmd, "log_dir", "directory for per-type training logs");

  auto* detect_cmd = sub("detect", "ranked grasps for a scene", run_detect);
  settings["detect"].declare(detect_cmd, "scene", "scene file");
  settings["detect"].declare(detect_cmd, "hand", "hand file");
  settings["detect"].declare(detect_cmd, "bank", "decision bank");
  settings["detect"].declare(detect_cmd, "out", "grasp CSV output path");
  settings["detect"].declare_flag(detect_cmd, "baseline", "rank by antipodal score only (no bank)");
  declare_detection(settings["detect"], detect_cmd);

  auto* eval_cmd = sub("eval", "scene-clearing success statistics", run_eval);
  settings["eval"].declare(eval_cmd, "hand", "hand file");
  settings["eval"].declare(eval_cmd, "bank", "decision bank (learned policy)");
  settings["eval"].declare(eval_cmd, "policy", "learned or baseline");
  settings["eval"].declare(eval_cmd, "friction", "evaluation friction");
  settings["eval"].declare(eval_cmd, "max_attempts_per_object", "attempt cap per initial object");
  settings["eval"].declare(eval_cmd, "out", "report output path");
  declare_scene_gen(settings["eval"], eval_cmd);
  declare_detection(settings["eval"], eval_cmd);

  if (argc > 1 && argv[1][0] != '-' && !runners.count(argv[1])) {
    std::cerr << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  Settings& s = settings.at(name);
  try {
    s.resolve();
    return runners.at(name)(s);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
