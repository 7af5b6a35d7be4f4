#include "cgrkit/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "cgrkit/binary_io.hpp"

namespace cgrkit {
namespace {

constexpr io::Magic kTrialMagic = io::make_magic("CGRKTR1");

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
}

// Resting orientations of a primitive before yaw.
std::vector<Mat3> resting_rotations(const MeshSource& source) {
  const Mat3 x90 = axis_angle(Vec3::UnitX(), kPi / 2);
  const Mat3 y90 = axis_angle(Vec3::UnitY(), kPi / 2);
  if (source.kind == "box") return {Mat3::Identity(), x90, y90};
  if (source.kind == "cylinder") return {Mat3::Identity(), x90};
  return {Mat3::Identity()};
}

struct Footprint {
  Vec3 offset;  // added to the placement point so the object rests on z = 0
  double radius = 0.0;
};

Footprint footprint(const TriangleMesh& mesh, const Mat3& r) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : mesh.vertices()) {
    const Vec3 p = r * v;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 c(0.5 * (lo.x() + hi.x()), 0.5 * (lo.y() + hi.y()), lo.z());
  double radius = 0.0;
  for (const auto& v : mesh.vertices()) radius = std::max(radius, (r * v - c).head<2>().norm());
  return {-c, radius};
}

struct Pool {
  MeshRegistry meshes;
  std::map<std::string, MeshSource> sources;
};

Pool build_pool(const SceneGenParams& params) {
  Pool pool;
  for (const auto& t : params.pool) {
    if (pool.meshes.count(t.id)) throw Error("scene generator: duplicate object id '" + t.id + "'");
    pool.meshes.emplace(t.id, std::make_shared<const TriangleMesh>(primitive_mesh(t.source)));
    pool.sources.emplace(t.id, t.source);
  }
  return pool;
}

GeneratedScene place_objects(const SceneGenParams& params, const Pool& pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int span = params.max_objects - params.min_objects + 1;
  const int count = params.min_objects + static_cast<int>(below(rng, static_cast<std::size_t>(span)));
  std::vector<Instance> instances;
  std::vector<std::pair<Vec3, double>> placed;  // center, radius
  for (int k = 0; k < count; ++k) {
    const auto& t = params.pool[below(rng, params.pool.size())];
    const auto rests = resting_rotations(t.source);
    const Mat3 r = rot_z(2.0 * kPi * unit(rng)) * rests[below(rng, rests.size())];
    const Footprint fp = footprint(*pool.meshes.at(t.id), r);
    const double room = std::max(0.0, params.half_extent - fp.radius);
    for (int attempt = 0; attempt < params.placement_tries; ++attempt) {
      const Vec3 c((2.0 * unit(rng) - 1.0) * room, (2.0 * unit(rng) - 1.0) * room, 0.0);
      const bool free = std::all_of(placed.begin(), placed.end(), [&](const auto& other) {
        return (c - other.first).norm() >= fp.radius + other.second + params.clearance;
      });
      if (!free) continue;
      placed.emplace_back(c, fp.radius);
      instances.push_back({t.id, RigidTransform(r, c + fp.offset, 1e-9)});
      break;
    }
  }
  return {Scene(pool.meshes, std::move(instances), TablePlane{}), pool.sources};
}

}  // namespace

std::vector<ObjectTemplate> default_object_pool() {
  return {
      {"box_block", {"box", {0.04, 0.04, 0.08}}},   {"box_flat", {"box", {0.09, 0.06, 0.03}}},
      {"box_long", {"box", {0.03, 0.05, 0.14}}},    {"cube", {"box", {0.05, 0.05, 0.05}}},
      {"box_wide", {"box", {0.075, 0.04, 0.10}}},   {"cyl_thin", {"cylinder", {0.015, 0.12, 32}}},
      {"cyl_mid", {"cylinder", {0.025, 0.10, 32}}}, {"cyl_can", {"cylinder", {0.033, 0.08, 32}}},
      {"ball", {"sphere", {0.03, 2}}},              {"ball_small", {"sphere", {0.02, 2}}},
  };
}

void SceneGenParams::validate() const {
  if (pool.empty()) throw Error("scene generator: object pool is empty");
  if (min_objects < 0 || max_objects < min_objects)
    throw Error("scene generator: need 0 <= min_objects <= max_objects");
  if (!(half_extent > 0)) throw Error("scene generator: half_extent must be positive");
  if (!(clearance >= 0)) throw Error("scene generator: clearance must be non-negative");
  if (placement_tries < 1) throw Error("scene generator: placement_tries must be positive");
  for (const auto& t : pool)
    if (t.source.kind != "box" && t.source.kind != "cylinder" && t.source.kind != "sphere")
      throw Error("scene generator: object '" + t.id + "' is not a primitive");
}

GeneratedScene generate_scene(const SceneGenParams& params, std::uint64_t seed) {
  return generate_scenes(params, 1, seed).front();
}

std::vector<GeneratedScene> generate_scenes(const SceneGenParams& params, int count, std::uint64_t seed) {
  params.validate();
  if (count < 0) throw Error("scene generator: count must be non-negative");
  const Pool pool = build_pool(params);
  std::vector<GeneratedScene> out;
  for (int k = 0; k < count; ++k) out.push_back(place_objects(params, pool, seed + static_cast<std::uint64_t>(k)));
  return out;
}

// ---- shared grasp machinery ----

AnnotationParams DetectionConfig::desk_annotation() {
  AnnotationParams p;
  p.voxel_size = 0.01;
  p.directions = 40;
  p.filter_density = 20000.0;
  return p;
}

void DetectionConfig::validate() const {
  if (top_cgr <= 0) throw Error("detection: top_cgr must be positive");
  if (top_candidates <= 0) throw Error("detection: top_candidates must be positive");
  if (!(decision_threshold >= 0 && decision_threshold <= 1)) throw Error("detection: threshold must lie in [0, 1]");
  if (!(collision_voxel > 0)) throw Error("detection: collision_voxel must be positive");
  if (!(cloud_density > 0)) throw Error("detection: cloud_density must be positive");
  annotation.validate();
}

void warm_cache(ObjectCgrCache& cache, const std::vector<Scene>& scenes, const AnnotationParams& params) {
  std::vector<std::shared_ptr<const TriangleMesh>> todo;
  for (const auto& s : scenes)
    for (const auto& inst : s.instances()) {
      const auto& m = s.meshes().at(inst.mesh_id);
      if (!cache.count(m) && std::find(todo.begin(), todo.end(), m) == todo.end()) todo.push_back(m);
    }
  for (const auto& m : todo) cache.emplace(m, annotate_object(*m, params, 0));
}

SceneState::SceneState(Scene scene, const DetectionConfig& config, std::uint32_t scene_id,
                       ObjectCgrCache* shared_cache)
    : scene_(std::move(scene)), config_(config), scene_id_(scene_id) {
  config_.validate();
  if (!shared_cache) own_cache_ = std::make_shared<ObjectCgrCache>();
  cache_ = shared_cache ? shared_cache : own_cache_.get();
  refresh();
}

void SceneState::refresh() {
  annotation_ = annotate_scene(scene_, config_.annotation, scene_id_, 0, cache_);
  mesh_ = scene_.instances().empty() ? SceneMesh{TriangleMesh(), {0}} : scene_.merged();
  cloud_ = PointCloud{};
  if (!scene_.instances().empty()) cloud_.points = sample_scene(scene_, config_.cloud_density, config_.seed).points;
  first_record_.assign(1, 0);
  for (const auto& inst : scene_.instances())
    first_record_.push_back(first_record_.back() + cache_->at(scene_.meshes().at(inst.mesh_id)).size());
  graspable_.clear();
  for (std::size_t i = 0; i < annotation_.records.size(); ++i) {
    const auto& rec = annotation_.records[i];
    if (!rec.valid) continue;
    const double s = max_antipodal_score(antipodal_rep(rec.cgr));
    if (s > 0) graspable_.emplace_back(i, s);
  }
}

std::size_t SceneState::instance_of_record(std::size_t record) const {
  if (record >= first_record_.back()) throw Error("scene state: record index out of range");
  return static_cast<std::size_t>(std::upper_bound(first_record_.begin(), first_record_.end(), record) -
                                  first_record_.begin()) - 1;
}

void SceneState::remove(std::size_t instance) {
  if (instance >= scene_.instances().size()) throw Error("scene state: no instance " + std::to_string(instance));
  scene_ = scene_.without(instance);
  refresh();
}

bool candidate_collides(const GraspCandidate& candidate, const HandSpec& hand, const SceneState& state,
                        double voxel_size) {
  const auto& gt = hand.grasp_types.at(static_cast<std::size_t>(candidate.grasp_type));
  const auto& table = state.scene().table();
  return hand_plane_collision(candidate, gt, table.point, table.normal) ||
         hand_scene_collision(candidate, gt, state.cloud(), voxel_size);
}

TrialOutcome execute_grasp(const GraspCandidate& candidate, const HandSpec& hand, const SceneState& state,
                           double friction) {
  TrialOutcome out;
  if (state.scene().instances().empty()) return out;
  const auto& gt = hand.grasp_types.at(static_cast<std::size_t>(candidate.grasp_type));
  out.contacts = fingertip_contacts(candidate, gt, state.mesh().mesh);
  if (out.contacts.size() < 2) return out;
  const std::size_t owner = state.mesh().instance_of(out.contacts.front().triangle);
  for (const auto& c : out.contacts)
    if (state.mesh().instance_of(c.triangle) != owner) return out;
  std::vector<Contact> contacts;
  for (const auto& c : out.contacts) contacts.push_back(c.contact);
  ForceClosureParams fc;
  fc.friction = friction;
  out.closure = force_closure(contacts, fc);
  out.success = out.closure.closure;
  if (out.success) out.instance = owner;
  return out;
}

// ---- data collection ----

void CollectionConfig::validate() const {
  if (target <= 0) throw Error("collection: target must be positive");
  if (scene_count <= 0) throw Error("collection: scene_count must be positive");
  if (!(friction_min > 0 && friction_min <= friction_max && friction_max <= 2))
    throw Error("collection: friction range must lie in (0, 2]");
  if (!(min_antipodal_score > 0 && min_antipodal_score <= 1))
    throw Error("collection: min_antipodal_score must lie in (0, 1]");
  if (max_tries_per_record <= 0) throw Error("collection: max_tries_per_record must be positive");
  scenes.validate();
  detection.validate();
}

std::vector<TrialRecord> collect(const CollectionConfig& config, const HandSpec& hand) {
  config.validate();
  std::vector<Scene> scenes;
  for (auto& g : generate_scenes(config.scenes, config.scene_count, config.seed)) scenes.push_back(std::move(g.scene));
  return collect(config, hand, scenes);
}

std::vector<TrialRecord> collect(const CollectionConfig& config, const HandSpec& hand,
                                 const std::vector<Scene>& scenes, ObjectCgrCache* shared_cache) {
  config.validate();
  if (hand.grasp_types.empty()) throw Error("collection: hand has no grasp types");
  ObjectCgrCache local;
  ObjectCgrCache& cache = shared_cache ? *shared_cache : local;
  warm_cache(cache, scenes, config.detection.annotation);
  std::vector<std::optional<SceneState>> states(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t k) {
    DetectionConfig dc = config.detection;
    dc.seed = config.seed + k;
    states[k].emplace(scenes[k], dc, static_cast<std::uint32_t>(k), &cache);
  });
  std::vector<std::size_t> usable;
  std::vector<std::vector<std::size_t>> pick(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (const auto& [record, score] : states[k]->graspable())
      if (score >= config.min_antipodal_score) pick[k].push_back(record);
    if (!pick[k].empty()) usable.push_back(k);
  }
  if (usable.empty()) throw Error("collection: no graspable CGR in any scene");

  const std::size_t types = hand.grasp_types.size();
  const int quota = (config.target + static_cast<int>(types) - 1) / static_cast<int>(types);
  std::vector<int> per_type(types, 0);
  std::mt19937_64 rng(config.seed);
  std::vector<TrialRecord> out;
  int misses = 0;
  while (static_cast<int>(out.size()) < config.target) {
    const std::size_t k = usable[below(rng, usable.size())];
    const SceneState& st = *states[k];
    const std::size_t record = pick[k][below(rng, pick[k].size())];
    std::vector<std::size_t> open;
    for (std::size_t q = 0; q < types; ++q)
      if (per_type[q] < quota) open.push_back(q);
    const std::size_t q = open[below(rng, open.size())];
    const Cgr& cgr = st.annotation().records[record].cgr;
    GraspCandidate cand = candidates_from_cgr(cgr, hand, record)[q];
    if (candidate_collides(cand, hand, st, config.detection.collision_voxel)) {
      if (++misses > config.max_tries_per_record)
        throw Error("collection: " + std::to_string(misses) + " consecutive sampled grasps collide");
      continue;
    }
    misses = 0;
    const double friction = config.friction_min + (config.friction_max - config.friction_min) * unit(rng);
    const TrialOutcome res = execute_grasp(cand, hand, st, friction);
    out.push_back({cgr, cand.pose, static_cast<int>(q), res.success, friction, res.closure});
    ++per_type[q];
  }
  return out;
}

void write_trials(std::ostream& os, const std::vector<TrialRecord>& trials, const CgrGridParams& params) {
  params.validate();
  io::Writer w(os);
  w.magic(kTrialMagic);
  write_grid_params(w, params);
  w.u64(trials.size());
  for (const auto& t : trials) {
    if (!(t.cgr.params() == params)) throw Error("trials: record grid does not match params");
    if (t.grasp_type < 0 || t.grasp_type > 0xFFFF) throw Error("trials: grasp type out of range");
    write_cgr_record(w, t.cgr);
    write_frame(w, t.pose);
    w.u16(static_cast<std::uint16_t>(t.grasp_type));
    w.u8(t.success ? 1 : 0);
    w.f32(t.friction);
  }
  w.check();
}

std::vector<TrialRecord> read_trials(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kTrialMagic);
  const CgrGridParams params = read_grid_params(r);
  const std::uint64_t n = r.u64();
  std::vector<TrialRecord> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    Cgr cgr = read_cgr_record(r, params);
    const RigidTransform pose = read_frame(r);
    const int type = r.u16();
    const std::uint8_t outcome = r.u8();
    if (outcome > 1) throw Error("trials: outcome must be 0 or 1");
    const float friction = r.f32();
    if (!std::isfinite(friction)) throw Error("trials: non-finite friction");
    out.push_back({std::move(cgr), pose, type, outcome == 1, friction, {}});
  }
  return out;
}

void write_trials(const std::filesystem::path& path, const std::vector<TrialRecord>& trials,
                  const CgrGridParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_trials(os, trials, params);
}

std::vector<TrialRecord> read_trials(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_trials(is);
}

std::map<int, LabeledSet> trials_by_type(const std::vector<TrialRecord>& trials, const HandSpec& hand) {
  std::map<int, LabeledSet> out;
  for (const auto& gt : hand.grasp_types) out[gt.id].dim = CgrGridParams{}.flat_size();
  for (const auto& t : trials) {
    auto it = out.find(t.grasp_type);
    if (it == out.end()) throw Error("trials: grasp type " + std::to_string(t.grasp_type) + " not in hand");
    const auto flat = t.cgr.flatten();
    it->second.dim = static_cast<int>(flat.size());
    it->second.append(flat, t.success);
  }
  return out;
}

// ---- detection ----

std::vector<GraspCandidate> generate_candidates(const SceneState& state, const HandSpec& hand,
                                                const DetectionConfig& config) {
  config.validate();
  const auto& pool = state.graspable();
  std::mt19937_64 rng(config.seed);
  std::vector<std::uint64_t> key(pool.size());
  for (auto& k : key) k = rng();
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pool[a].second != pool[b].second) return pool[a].second > pool[b].second;
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(config.top_cgr)));
  std::vector<GraspCandidate> out;
  out.reserve(order.size() * hand.grasp_types.size());
  for (std::size_t i : order) {
    const std::size_t record = pool[i].first;
    const auto c = candidates_from_cgr(state.annotation().records[record].cgr, hand, record);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

namespace {

std::vector<GraspCandidate> top_without_collisions(const std::vector<GraspCandidate>& cands,
                                                   std::vector<std::size_t> order, const HandSpec& hand,
                                                   const SceneState& state, const DetectionConfig& config) {
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(config.top_candidates)));
  std::vector<char> clear(order.size());
  parallel_for(order.size(), [&](std::size_t i) {
    clear[i] = !candidate_collides(cands[order[i]], hand, state, config.collision_voxel);
  });
  std::vector<GraspCandidate> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (clear[i]) out.push_back(cands[order[i]]);
  return out;
}

}  // namespace

std::vector<GraspCandidate> detect(const SceneState& state, const HandSpec& hand, const DecisionBank& bank,
                                   const DetectionConfig& config) {
  auto cands = generate_candidates(state, hand, config);
  std::map<int, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < cands.size(); ++i) by_type[cands[i].grasp_type].push_back(i);
  for (const auto& [type, idx] : by_type) {
    std::vector<const Cgr*> cgrs;
    for (std::size_t i : idx) cgrs.push_back(&state.annotation().records[cands[i].source].cgr);
    const auto p = decide_batch(bank, type, cgrs);
    for (std::size_t k = 0; k < idx.size(); ++k) cands[idx[k]].decision_score = p[k];
  }
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (*cands[a].decision_score != *cands[b].decision_score) return *cands[a].decision_score > *cands[b].decision_score;
    if (cands[a].antipodal_score != cands[b].antipodal_score) return cands[a].antipodal_score > cands[b].antipodal_score;
    return a < b;
  });
  auto out = top_without_collisions(cands, std::move(order), hand, state, config);
  const bool any_confident = std::any_of(out.begin(), out.end(), [&](const GraspCandidate& c) {
    return *c.decision_score >= config.decision_threshold;
  });
  if (any_confident)
    std::erase_if(out, [&](const GraspCandidate& c) { return *c.decision_score < config.decision_threshold; });
  return out;
}

std::vector<GraspCandidate> detect(const Scene& scene, const HandSpec& hand, const DecisionBank& bank,
                                   const DetectionConfig& config) {
  return detect(SceneState(scene, config), hand, bank, config);
}

std::vector<GraspCandidate> detect_baseline(const SceneState& state, const HandSpec& hand,
                                            const DetectionConfig& config) {
  const auto cands = generate_candidates(state, hand, config);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::uint64_t> key(cands.size());
  for (auto& k : key) k = rng();
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cands[a].antipodal_score != cands[b].antipodal_score) return cands[a].antipodal_score > cands[b].antipodal_score;
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });
  return top_without_collisions(cands, std::move(order), hand, state, config);
}

std::vector<GraspCandidate> detect_baseline(const Scene& scene, const HandSpec& hand, const DetectionConfig& config) {
  return detect_baseline(SceneState(scene, config), hand, config);
}

void write_grasps_csv(std::ostream& os, const std::vector<GraspCandidate>& grasps) {
  os << "rank,type,decision_score,antipodal_score,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
  os << std::setprecision(9);
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const auto& g = grasps[i];
    os << i << ',' << g.grasp_type << ',';
    if (g.decision_score)
      os << *g.decision_score;
    else
      os << "n/a";
    os << ',' << g.antipodal_score;
    const Mat3& r = g.pose.rotation();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) os << ',' << r(a, b);
    for (int a = 0; a < 3; ++a) os << ',' << g.pose.translation()[a];
    os << '\n';
  }
}

// ---- evaluation ----

std::optional<double> EvalReport::success_rate() const {
  if (attempts == 0) return std::nullopt;
  return static_cast<double>(successes) / attempts;
}

std::map<int, double> EvalReport::type_frequencies() const {
  std::map<int, double> out;
  if (attempts == 0) return out;
  for (const auto& [type, s] : per_type) out[type] = static_cast<double>(s.attempts) / attempts;
  return out;
}

void EvalReport::merge(const EvalReport& other) {
  scenes += other.scenes;
  objects += other.objects;
  attempts += other.attempts;
  successes += other.successes;
  cleared += other.cleared;
  for (const auto& [type, s] : other.per_type) {
    per_type[type].attempts += s.attempts;
    per_type[type].successes += s.successes;
  }
}

namespace {

EvalReport clear_scene(Policy policy, const Scene& scene, std::uint32_t scene_id, const HandSpec& hand,
                       const DecisionBank* bank, const EvalConfig& config, ObjectCgrCache& cache) {
  DetectionConfig dc = config.detection;
  dc.seed = config.detection.seed + scene_id;
  EvalReport rep;
  rep.scenes = 1;
  rep.objects = static_cast<int>(scene.instances().size());
  if (scene.instances().empty()) return rep;
  SceneState state(scene, dc, scene_id, &cache);
  const int max_attempts = config.max_attempts_per_object * rep.objects;
  std::vector<GraspCandidate> ranked;
  std::size_t next = 0;
  bool stale = true;
  while (rep.attempts < max_attempts && !state.scene().instances().empty()) {
    if (stale) {
      ranked = policy == Policy::learned ? detect(state, hand, *bank, dc) : detect_baseline(state, hand, dc);
      next = 0;
      stale = false;
    }
    // a failed grasp leaves the scene as it was, so the next one in line follows
    if (next >= ranked.size()) break;
    const GraspCandidate& g = ranked[next++];
    const TrialOutcome res = execute_grasp(g, hand, state, config.friction);
    ++rep.attempts;
    auto& t = rep.per_type[g.grasp_type];
    ++t.attempts;
    if (!res.success) continue;
    ++rep.successes;
    ++t.successes;
    ++rep.cleared;
    state.remove(*res.instance);
    stale = true;
  }
  return rep;
}

}  // namespace

EvalReport evaluate(Policy policy, const std::vector<Scene>& scenes, const HandSpec& hand, const DecisionBank* bank,
                    const EvalConfig& config, ObjectCgrCache* shared_cache) {
  if (!(config.friction > 0 && config.friction <= 2)) throw Error("evaluate: friction must lie in (0, 2]");
  if (config.max_attempts_per_object < 1) throw Error("evaluate: max_attempts_per_object must be positive");
  config.detection.validate();
  if (policy == Policy::learned && !bank) throw Error("evaluate: the learned policy needs a decision bank");
  ObjectCgrCache local;
  ObjectCgrCache& cache = shared_cache ? *shared_cache : local;
  warm_cache(cache, scenes, config.detection.annotation);
  std::vector<EvalReport> per_scene(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t k) {
    per_scene[k] = clear_scene(policy, scenes[k], static_cast<std::uint32_t>(k), hand, bank, config, cache);
  });
  EvalReport total;
  for (const auto& r : per_scene) total.merge(r);
  return total;
}

void write_eval_report(std::ostream& os, const EvalReport& report) {
  os << "scenes " << report.scenes << '\n';
  os << "objects " << report.objects << '\n';
  os << "cleared " << report.cleared << '\n';
  os << "attempts " << report.attempts << '\n';
  os << "successes " << report.successes << '\n';
  os << "success_rate ";
  if (const auto r = report.success_rate())
    os << std::setprecision(6) << *r << '\n';
  else
    os << "n/a\n";
  const auto freq = report.type_frequencies();
  for (const auto& [type, s] : report.per_type) {
    os << "type " << type << " attempts " << s.attempts << " successes " << s.successes << " frequency ";
    if (freq.count(type))
      os << std::setprecision(6) << freq.at(type) << '\n';
    else
      os << "n/a\n";
  }
}

}  // namespace cgrkit
