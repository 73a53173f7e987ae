#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "planfactory/augment.hpp"
#include "planfactory/smooth.hpp"

namespace planfactory {

enum class FilterStatus : std::uint8_t { kept = 0, length = 1, workspace = 2 };

const char* to_string(FilterStatus s);

struct DatasetRecord {
  std::uint64_t seed = 0;        // factory seed; also seeds the observation
  std::uint64_t scene_seed = 0;
  bool reversed = false;
  bool relabeled = false;
  /// The planner stopped short of the original goal.
  bool approximate = false;
  PlanningProblem problem;
  Trajectory trajectory;
  PointCloud observation;
  FilterStatus status = FilterStatus::kept;

  /// "reversed", "relabeled" or "expert", in that order of precedence.
  std::string tag() const;
  bool operator==(const DatasetRecord& o) const;
};

struct ObservationOptions {
  std::size_t robot_points = 2048;
  std::size_t goal_points = 2048;
  std::size_t max_obstacle_points = 4096;
  double surface_density = 2000.0;  // samples per m² before processing
  WorkspaceBox crop{Vec3(-1.6, -1.6, -0.3), Vec3(1.6, 1.6, 2.0)};
  ProcessOptions process;
  double segment_eps = 0.01;
};

/// Robot surface samples at q: points on the sphere model's outer surface
/// plus, when an object is held, its surface (labelled in_hand unless the
/// cloud is a goal cloud). The split follows surface area. Same seed and q
/// give the same cloud.
PointCloud sample_robot_cloud(const RobotBody& body, const JointConfig& q, std::size_t n, std::uint64_t seed,
                              PointLabel label);

/// Scene surface samples after process_cloud, capped by uniform subsampling.
PointCloud scene_obstacle_cloud(const Scene& scene, const ObservationOptions& opts, std::uint64_t seed);

/// Everything needed to rebuild a record's observation.
struct ObservationContext {
  const KinematicChain& chain;
  const SphereModel& model;
  /// Processed obstacle cloud of the record's scene (scene_obstacle_cloud).
  const PointCloud& obstacles;
  ObservationOptions options;
};

/// Robot cloud at q0, goal cloud at g, obstacle points with the robot at q0
/// segmented out. Deterministic in `seed`.
PointCloud assemble_observation(const ObservationContext& ctx, const JointConfig& q0, const JointConfig& g,
                                const std::optional<InHandObject>& in_hand, std::uint64_t seed);

/// Goal := final waypoint, goal cloud rebuilt. No-op for exact records.
DatasetRecord relabel_hindsight(const DatasetRecord& record, const ObservationContext& ctx);

/// Waypoints reversed, deltas recomputed, start and goal swapped and the
/// observation rebuilt. Applying it twice gives the original back.
DatasetRecord reverse_augment(const DatasetRecord& record, const ObservationContext& ctx);

/// Σ‖EE_{i+1} − EE_i‖₂ by forward kinematics.
double task_space_length(const KinematicChain& chain, const Trajectory& traj);

struct FilterStats {
  double mean_length = 0.0;
  double std_length = 0.0;  // population
  double length_threshold = 0.0;
  WorkspaceBox workspace;
  std::size_t considered = 0;
  std::size_t pruned_length = 0;
  std::size_t pruned_workspace = 0;

  std::size_t pruned() const { return pruned_length + pruned_workspace; }
};

struct FilterResult {
  std::vector<DatasetRecord> kept;
  std::vector<DatasetRecord> pruned;
  FilterStats stats;
};

/// Indices of lengths above mean + num_std·σ (population σ). Sums run over
/// the sorted values, so the result does not depend on input order.
std::vector<std::size_t> length_outliers(const std::vector<double>& lengths, double num_std, FilterStats* stats = nullptr);

/// Prunes records whose task-space length exceeds mean + 2σ over the set.
/// The statistics are summed in sorted order, so the outcome does not depend
/// on record order.
FilterResult filter_length(std::vector<DatasetRecord> records, const KinematicChain& chain, double num_std = 2.0);

/// Prunes records whose end effector leaves the box at any waypoint.
FilterResult filter_workspace(std::vector<DatasetRecord> records, const KinematicChain& chain,
                              const WorkspaceBox& box);

/// Length then workspace; every record comes back with its status set, in
/// the original order.
std::vector<DatasetRecord> apply_filters(std::vector<DatasetRecord> records, const KinematicChain& chain,
                                         const WorkspaceBox& box, FilterStats& stats);

struct FactoryConfig {
  GenConfig scenes;
  ProblemConfig problems = ProblemConfig::from(scenes);
  PlannerConfig planner = [] {
    PlannerConfig p;
    p.budget.reset();  // iteration budgets only, so reruns are identical
    return p;
  }();
  SmoothOptions smoothing;
  Limits limits = Limits::panda();
  ObservationOptions observation;
  AugmentConfig augment;
  WorkspaceBox workspace{Vec3(-0.9, -1.0, -0.05), Vec3(1.2, 1.0, 1.5)};
  bool reverse = false;
  bool relabel = false;
  /// Problems tried per seed (each on a fresh scene) before the seed is given up.
  int attempts_per_seed = 8;
  /// Scene draws per problem attempt while looking for requested tight endpoints.
  int scene_draws = 40;
  int workers = 0;  // 0: all logical cores

  /// Scene table sections plus a [Factory] section.
  static FactoryConfig parse(std::string_view text);
  static FactoryConfig load(const std::filesystem::path& path);
  /// parse(dump()) reproduces every setting.
  std::string dump() const;
  void validate() const;
};

/// Why a seed produced no record, or what it ran into on the way.
struct SeedLog {
  std::uint64_t seed = 0;
  int scenes = 0;
  int unsampleable = 0;
  int plan_failures = 0;
  int too_long = 0;
  int smooth_failures = 0;
  int audit_failures = 0;
  bool produced = false;
  std::string error;
};

struct FactoryStats {
  std::size_t seeds = 0;
  std::size_t seeds_without_record = 0;
  std::size_t scenes = 0;
  std::size_t unsampleable = 0;
  std::size_t plan_failures = 0;
  std::size_t too_long = 0;
  std::size_t smooth_failures = 0;
  std::size_t audit_failures = 0;
  std::size_t records = 0;
  std::size_t kept = 0;
  std::size_t tight_endpoints = 0;
  std::size_t endpoints = 0;
  /// Placement push iterations over every scene drawn, count per value.
  std::map<int, std::size_t> push_histogram;
  FilterStats filters;
};

/// Records of one seed before filtering (the expert record, and its reversal
/// when enabled), with the scene that produced them.
struct SeedOutput {
  std::vector<DatasetRecord> records;
  std::optional<Scene> scene;
  SeedLog log;
  std::vector<int> push_iterations;
};

SeedOutput run_seed(const FactoryConfig& cfg, const KinematicChain& chain, const SphereModel& model,
                    std::uint64_t seed);

struct FactoryOutput {
  std::vector<DatasetRecord> records;  // raw pool with filter status, seed order
  FactoryStats stats;
  std::vector<SeedLog> logs;
};

FactoryOutput run_factory(const FactoryConfig& cfg, const KinematicChain& chain, const SphereModel& model,
                          const std::vector<std::uint64_t>& seeds);

/// Dataset file: header (magic, version, chain hash, dof, counts) and
/// length-prefixed records, little-endian, float32 values.
struct DatasetHeader {
  std::uint32_t version = 1;
  std::uint64_t chain_hash = 0;
  std::uint32_t dof = 0;
  std::uint32_t records = 0;
  std::uint32_t kept = 0;
  std::uint32_t pruned_length = 0;
  std::uint32_t pruned_workspace = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

std::string encode_dataset(const KinematicChain& chain, const std::vector<DatasetRecord>& records);
Dataset decode_dataset(std::string_view bytes);
void write_dataset(const std::filesystem::path& path, const KinematicChain& chain,
                   const std::vector<DatasetRecord>& records);
Dataset read_dataset(const std::filesystem::path& path);

/// Rounds every stored value to float32 so that a write/read round trip is
/// exact. Trajectories must already sit on the storage grid.
void round_for_storage(DatasetRecord& record);

/// One JSON object per line: a summary line, then one line per record.
std::string sidecar_text(const FactoryStats& stats, const std::vector<DatasetRecord>& records,
                         const KinematicChain& chain);

/// Statistics recomputed from a dataset file alone.
struct DatasetSummary {
  std::size_t records = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> by_tag;
  std::size_t pruned_length = 0;
  std::size_t pruned_workspace = 0;
  /// Filters re-run on the stored pool; equal to the stored statuses when
  /// the file is consistent.
  std::size_t recount_length = 0;
  std::size_t recount_workspace = 0;
  double tight_fraction = 0.0;  // over expert endpoints
  double mean_length = 0.0;     // task space, kept records
  double mean_joint_cost = 0.0;
  std::vector<double> lengths;  // task space, every record
};

DatasetSummary summarize(const Dataset& data, const KinematicChain& chain, const WorkspaceBox& workspace);

}  // namespace planfactory
