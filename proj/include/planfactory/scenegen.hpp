#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "planfactory/collision.hpp"
#include "planfactory/config.hpp"
#include "planfactory/geometry.hpp"

namespace planfactory {

enum class AssetCategory : std::uint8_t { table, shelf, open_box, cubby, microwave, dishwasher, cabinet, base_table };

const char* to_string(AssetCategory c);
AssetCategory category_from_string(std::string_view name);

/// The categories generate_scene samples from (everything but the base table).
inline constexpr std::array<AssetCategory, 7> kSampledCategories = {
    AssetCategory::table,     AssetCategory::shelf,      AssetCategory::open_box, AssetCategory::cubby,
    AssetCategory::microwave, AssetCategory::dishwasher, AssetCategory::cabinet};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const { return lo == hi ? lo : uniform(rng, lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Scene-generation hyper-parameters. Stored as the raw hyper-parameter
/// table (section -> row -> numbers) so files can use the original row names;
/// typed accessors validate shape and ordering.
class GenConfig {
 public:
  /// The built-in table values.
  GenConfig();
  /// Built-in values overridden by whatever the file provides. Unknown rows
  /// are rejected, as are malformed or reversed ranges.
  static GenConfig parse(std::string_view text);
  static GenConfig load(const std::filesystem::path& path);
  /// Full table in the key-value format; parse(dump()) is the identity.
  std::string dump() const;

  const std::vector<double>& values(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::vector<double> v);

  Range range(const std::string& section, const std::string& key) const;
  /// `[nominal, spread]` rows read as nominal ± spread.
  Range centered(const std::string& section, const std::string& key) const;
  /// Integer count range.
  std::pair<int, int> count(const std::string& section, const std::string& key) const;
  double scalar(const std::string& section, const std::string& key) const;
  /// Rows of the form [[a, b], [c, d], ...].
  std::vector<Range> ranges(const std::string& section, const std::string& key) const;

  /// Section holding the parameters of a category ("Shelf Parameters", ...).
  static std::string section_of(AssetCategory c);
  /// Range of the per-scene count for a category.
  std::pair<int, int> category_count(AssetCategory c) const;
  int max_objects() const;
  int max_push_iterations() const;
  double collision_tolerance() const;
  double tight_ratio() const;
  InHandConfig in_hand() const;
  std::optional<std::filesystem::path> mesh_dir() const { return mesh_dir_; }
  void set_mesh_dir(std::optional<std::filesystem::path> dir) { mesh_dir_ = std::move(dir); }

  /// Throws InvalidInput when any row the generator reads is malformed.
  void validate() const;

 private:
  struct Row {
    std::string key;
    std::vector<double> values;
    int group = 0;  // numbers per inner bracket for nested rows, 0 when flat
  };
  struct Section {
    std::string name;
    std::vector<Row> rows;
  };
  const Row* find(const std::string& section, const std::string& key) const;
  Row* find(const std::string& section, const std::string& key);
  void add(const std::string& section, const std::string& key, std::vector<double> v, int group = 0);

  std::vector<Section> sections_;
  std::optional<std::filesystem::path> mesh_dir_;
};

/// Where clutter and tight-space goals may be placed: an oriented box plus
/// the direction the gripper should approach from (world frame).
struct SamplingRegion {
  Cuboid box;
  Vec3 approach = Vec3::UnitX();
  bool tight = true;
};

/// Single revolute joint of an articulated asset (door hinge).
struct Articulation {
  Vec3 hinge_point = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double value = 0.0;
  Range limits;
};

struct AssetInstance {
  AssetCategory category = AssetCategory::table;
  /// Sampled shape parameters, by hyper-parameter row name.
  std::vector<std::pair<std::string, double>> params;
  /// Asset frame in the world (yaw only).
  Pose pose;
  std::vector<Cuboid> cuboids;
  std::vector<Articulation> articulations;
  std::vector<SamplingRegion> regions;

  /// Shift everything by a world-frame offset.
  void translate(const Vec3& d);
  /// Tightest box in the asset frame enclosing every cuboid.
  Cuboid bounding_box() const;
  std::optional<double> param(std::string_view name) const;
};

struct ClutterInstance {
  std::string source;
  TriMesh mesh;
  Pose pose;

  Cuboid bounding_box() const;
  /// Mesh vertex in the world frame.
  Vec3 world_vertex(std::size_t i) const { return pose.isometry() * mesh.vertex(i); }
};

struct PlacementLog {
  std::vector<int> push_iterations;  // one entry per placed item
  int dropped_assets = 0;
  int dropped_clutter = 0;
};

struct Scene {
  std::uint64_t seed = 0;
  AssetInstance table;
  std::vector<AssetInstance> assets;
  std::vector<ClutterInstance> clutter;
  /// Region around the robot base kept free of assets.
  Cuboid keep_out;
  PlacementLog log;

  std::vector<const SamplingRegion*> regions(bool tight_only) const;
  /// All cuboids the robot must avoid (base table and assets).
  std::vector<Cuboid> obstacle_cuboids() const;
};

/// Builds one asset with parameters drawn from the configuration. The pose
/// is the category's nominal placement resting on a support plane at z = 0.
AssetInstance generate_asset(AssetCategory category, const GenConfig& cfg, Rng& rng);

/// Distance between two yaw-only boxes (0 when they overlap).
double box_distance(const Cuboid& a, const Cuboid& b);

/// Minimal horizontal translation moving `a` to separation `gap` from `b`,
/// or nullopt when the boxes are already `gap` apart.
std::optional<Vec3> separating_push(const Cuboid& a, const Cuboid& b, double gap);

/// Obstacles already in the scene, as seen by the placement loop.
struct PlacementWorld {
  std::vector<std::vector<Cuboid>> items;  // one list of cuboids per placed item
  double tolerance = 0.01;

  bool collides(const std::vector<Cuboid>& shape) const;
};

/// Something that can be shifted: the cuboids used for collision, the
/// bounding box used for the push direction.
struct Placeable {
  std::vector<Cuboid> shape;
  Cuboid bounds;
  void translate(const Vec3& d);
};

/// The normal-push loop: while the item collides, sum the push directions
/// from every colliding item, step by max(depth, 2 cm) and retry. Returns the
/// number of shifts, or nullopt when max_iters shifts did not free it.
std::optional<int> place_with_normal_push(const PlacementWorld& world, Placeable& item, int max_iters, Rng& rng);

/// Same for an asset; the asset is translated in place on success.
std::optional<int> place_with_normal_push(const PlacementWorld& world, AssetInstance& asset, int max_iters, Rng& rng);

Scene generate_scene(const GenConfig& cfg, std::uint64_t seed);

/// Pairwise clearance over placed items (base table, assets, clutter
/// bounding boxes) from exact yaw-only box distances. The keep-out box is
/// checked against assets and clutter only.
struct AuditResult {
  double min_distance = std::numeric_limits<double>::infinity();
  int violations = 0;
};
AuditResult audit_scene(const Scene& scene, double tolerance);

/// Obstacles for the robot: base table and asset cuboids analytically,
/// clutter as surface samples at `density` points per square meter.
CollisionWorld scene_world(const Scene& scene, double eps = CollisionWorld::kDefaultEps, double density = 10000.0);

/// Dense surface samples of every obstacle (observation source).
PointCloud scene_surface_cloud(const Scene& scene, double density, Rng& rng);

std::string serialize_scene(const Scene& scene);
Scene parse_scene(std::string_view text);
void write_scene(const std::filesystem::path& path, const Scene& scene);
Scene read_scene(const std::filesystem::path& path);

/// The built-in clutter shapes used when no mesh directory is configured.
std::vector<std::pair<std::string, TriMesh>> builtin_mesh_pool();
std::vector<std::pair<std::string, TriMesh>> load_mesh_pool(const std::filesystem::path& dir);

}  // namespace planfactory
