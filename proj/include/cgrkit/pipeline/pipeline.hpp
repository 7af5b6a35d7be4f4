#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgrkit/contact/force_closure.hpp"
#include "cgrkit/decision/model.hpp"
#include "cgrkit/hand/hand.hpp"
#include "cgrkit/scene/annotation.hpp"
#include "cgrkit/scene/scene.hpp"

namespace cgrkit {

// ---- synthetic scenes ----

struct ObjectTemplate {
  std::string id;
  MeshSource source;  // primitive
};

/// Boxes, cylinders and spheres sized for the bundled hands.
std::vector<ObjectTemplate> default_object_pool();

struct SceneGenParams {
  std::vector<ObjectTemplate> pool = default_object_pool();
  int min_objects = 3;
  int max_objects = 5;
  double half_extent = 0.12;  // objects are placed in [-h, h]^2 on the z = 0 table
  double clearance = 0.01;    // gap between footprint circles
  int placement_tries = 200;

  void validate() const;
};

struct GeneratedScene {
  Scene scene;
  std::map<std::string, MeshSource> sources;
};

/// Objects drawn from the pool, resting on the table on a random face (or
/// side, for cylinders) with random yaw, footprints disjoint. Objects that
/// find no free spot are dropped. Deterministic under seed.
GeneratedScene generate_scene(const SceneGenParams& params, std::uint64_t seed);
/// Scene k uses seed + k. All scenes share one mesh per pool entry, so an
/// ObjectCgrCache carries over between them.
std::vector<GeneratedScene> generate_scenes(const SceneGenParams& params, int count, std::uint64_t seed);

// ---- shared grasp machinery ----

struct DetectionConfig {
  int top_cgr = 100;          // K1
  int top_candidates = 200;   // K2
  double decision_threshold = 0.9;
  double collision_voxel = 0.005;
  double cloud_density = 40000.0;  // scene cloud samples per square meter
  AnnotationParams annotation = desk_annotation();
  std::uint64_t seed = 0;

  /// Coarser than the full annotation defaults so a scene annotates in about
  /// a second.
  static AnnotationParams desk_annotation();
  void validate() const;
};

/// Annotates every distinct mesh of the scenes not yet in the cache, so the
/// cache can afterwards be shared read-only.
void warm_cache(ObjectCgrCache& cache, const std::vector<Scene>& scenes, const AnnotationParams& params);

/// A scene with its annotation and collision cloud, refreshed after every
/// object removal. Object-frame CGRs are computed with annotation seed 0 and
/// kept in the cache (a private one unless shared_cache is given).
class SceneState {
 public:
  SceneState(Scene scene, const DetectionConfig& config, std::uint32_t scene_id = 0,
             ObjectCgrCache* shared_cache = nullptr);

  const Scene& scene() const { return scene_; }
  const CgrDataset& annotation() const { return annotation_; }
  const SceneMesh& mesh() const { return mesh_; }
  const PointCloud& cloud() const { return cloud_; }
  /// Valid records with a positive antipodal score and that score.
  const std::vector<std::pair<std::size_t, double>>& graspable() const { return graspable_; }
  /// Owning instance of an annotation record.
  std::size_t instance_of_record(std::size_t record) const;

  void remove(std::size_t instance);

 private:
  void refresh();

  Scene scene_;
  DetectionConfig config_;
  std::uint32_t scene_id_;
  std::shared_ptr<ObjectCgrCache> own_cache_;
  ObjectCgrCache* cache_;
  CgrDataset annotation_;
  SceneMesh mesh_;
  PointCloud cloud_;
  std::vector<std::pair<std::size_t, double>> graspable_;
  std::vector<std::size_t> first_record_;
};

/// True when the posed hand meets the scene cloud or reaches the table.
bool candidate_collides(const GraspCandidate& candidate, const HandSpec& hand, const SceneState& state,
                        double voxel_size);

struct TrialOutcome {
  bool success = false;
  std::vector<FingerContact> contacts;
  ForceClosureResult closure;
  std::optional<std::size_t> instance;  // grasped object on success
};

/// Force-closure stand-in for executing a grasp: the fingertip contacts must
/// all lie on one object and reach closure at the given friction.
TrialOutcome execute_grasp(const GraspCandidate& candidate, const HandSpec& hand, const SceneState& state,
                           double friction);

// ---- data collection ----

struct TrialRecord {
  Cgr cgr;
  RigidTransform pose;  // hand frame in world
  int grasp_type = 0;
  bool success = false;
  double friction = 0.0;
  ForceClosureResult diagnostics;  // in memory only
};

struct CollectionConfig {
  int target = 400;  // K
  SceneGenParams scenes;
  int scene_count = 10;  // scenes generated and cycled through
  double friction_min = 0.2;
  double friction_max = 0.8;
  /// Only CGRs whose best antipodal score reaches this are sampled, the same
  /// cut graspness uses to count an antipodal pose.
  double min_antipodal_score = 0.5;
  DetectionConfig detection;
  int max_tries_per_record = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Trial-and-error loop: sample a graspable CGR (uniformly over scenes, then
/// over the scene's CGRs scoring at least min_antipodal_score) and a grasp type, skip the
/// trial on collision, otherwise execute it at a friction drawn from
/// [friction_min, friction_max] and record the outcome. Grasp types are
/// drawn from those below their share ceil(K / types), so every type gets
/// K / types trials. Scenes are never cleared.
std::vector<TrialRecord> collect(const CollectionConfig& config, const HandSpec& hand);
std::vector<TrialRecord> collect(const CollectionConfig& config, const HandSpec& hand,
                                 const std::vector<Scene>& scenes, ObjectCgrCache* shared_cache = nullptr);

void write_trials(std::ostream& os, const std::vector<TrialRecord>& trials, const CgrGridParams& params);
std::vector<TrialRecord> read_trials(std::istream& is);
void write_trials(const std::filesystem::path& path, const std::vector<TrialRecord>& trials,
                  const CgrGridParams& params);
std::vector<TrialRecord> read_trials(const std::filesystem::path& path);

/// Per grasp type, flattened CGRs labelled by outcome.
std::map<int, LabeledSet> trials_by_type(const std::vector<TrialRecord>& trials, const HandSpec& hand);

// ---- detection ----

/// Candidates from the top-K1 graspable CGRs, one per grasp type, in
/// CGR-major order. Flat faces give many exact score ties; they are broken
/// by a permutation seeded with config.seed so the picks spread over objects.
std::vector<GraspCandidate> generate_candidates(const SceneState& state, const HandSpec& hand,
                                                const DetectionConfig& config);

/// Learned policy: score all candidates with the bank, keep the top K2,
/// drop colliding ones and those under the threshold (unless none reach it)
/// and sort by decision score, then antipodal score, then candidate index.
std::vector<GraspCandidate> detect(const SceneState& state, const HandSpec& hand, const DecisionBank& bank,
                                   const DetectionConfig& config);
std::vector<GraspCandidate> detect(const Scene& scene, const HandSpec& hand, const DecisionBank& bank,
                                   const DetectionConfig& config);

/// Baseline: the same candidates ranked by antipodal score alone; grasp
/// types sharing a score are ordered at random under config.seed.
std::vector<GraspCandidate> detect_baseline(const SceneState& state, const HandSpec& hand,
                                            const DetectionConfig& config);
std::vector<GraspCandidate> detect_baseline(const Scene& scene, const HandSpec& hand, const DetectionConfig& config);

/// rank, type id, decision score, antipodal score, 12 pose values (row-major
/// rotation, then translation).
void write_grasps_csv(std::ostream& os, const std::vector<GraspCandidate>& grasps);

// ---- evaluation ----

enum class Policy { learned, baseline };

struct EvalConfig {
  double friction = 0.5;
  int max_attempts_per_object = 2;
  DetectionConfig detection;
};

struct TypeStats {
  int attempts = 0;
  int successes = 0;
};

struct EvalReport {
  int scenes = 0;
  int objects = 0;
  int attempts = 0;
  int successes = 0;
  int cleared = 0;  // objects removed
  std::map<int, TypeStats> per_type;

  std::optional<double> success_rate() const;
  /// Share of attempts that used each grasp type; empty without attempts.
  std::map<int, double> type_frequencies() const;
  void merge(const EvalReport& other);
};

/// Clears each scene: take the policy's top grasp, judge it at the fixed
/// friction, remove the object on success. A failed grasp is excluded from
/// later picks in the same scene since the scene did not change. Stops when
/// the scene is empty, nothing is returned, or after max_attempts_per_object
/// times the initial object count. Scene k uses seed config.detection.seed + k.
EvalReport evaluate(Policy policy, const std::vector<Scene>& scenes, const HandSpec& hand, const DecisionBank* bank,
                    const EvalConfig& config, ObjectCgrCache* shared_cache = nullptr);

/// Human-readable summary; the rate reads "n/a" without attempts.
void write_eval_report(std::ostream& os, const EvalReport& report);

}  // namespace cgrkit
