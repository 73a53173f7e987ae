#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "planfactory/common.hpp"

namespace planfactory {

enum class PointLabel : std::uint8_t { robot = 0, goal_robot = 1, obstacle = 2, in_hand = 3 };

const char* to_string(PointLabel label);

/// Labeled 3D points, stored as parallel arrays.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<PointLabel> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void push_back(const Vec3& p, PointLabel l) {
    points.push_back(p);
    labels.push_back(l);
  }
  void append(const PointCloud& other);
  std::size_t count(PointLabel l) const;
  /// Throws InvalidInput on length mismatch or non-finite coordinates.
  void validate() const;
  /// Rounds every coordinate to float32, the precision used on disk.
  void round_to_float();

  static PointCloud uniform_label(std::vector<Vec3> pts, PointLabel l);
};

/// Oriented box given by half-extents and a pose.
struct Cuboid {
  Vec3 half_extents = Vec3::Constant(0.5);
  Pose pose;

  /// Exact signed distance (negative inside).
  double sdf(const Vec3& p) const;
  Vec3 to_local(const Vec3& p) const;
  std::array<Vec3, 8> corners() const;
  double surface_area() const;
};

/// Triangle mesh in its own frame, uniformly scaled by `scale`.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  double scale = 1.0;

  /// Removes zero-area faces and checks indices; throws InvalidInput on bad indices.
  void prune_degenerate();
  double surface_area() const;
  /// Scaled vertex bounds.
  WorkspaceBox bounds() const;
  Vec3 vertex(std::size_t i) const { return vertices[i] * scale; }
};

TriMesh load_mesh(const std::filesystem::path& path);
TriMesh parse_off(std::string_view text);
TriMesh parse_obj(std::string_view text);

TriMesh make_box_mesh(const Vec3& half_extents);
TriMesh make_cylinder_mesh(double radius, double height, int segments = 16);
TriMesh make_icosphere(double radius, int subdivisions = 1);

/// Unsigned distance from a point to a triangle.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

PointCloud sample_surface(const Cuboid& box, std::size_t n, Rng& rng,
                          PointLabel label = PointLabel::obstacle);
/// Samples in the mesh frame (scale applied, no pose).
PointCloud sample_surface(const TriMesh& mesh, std::size_t n, Rng& rng,
                          PointLabel label = PointLabel::obstacle);

/// Uniform hash grid over a point set. Cells are cubes of side `cell`.
class SpatialHash {
 public:
  SpatialHash() = default;
  SpatialHash(const std::vector<Vec3>& points, double cell);

  double cell() const { return cell_; }
  bool empty() const { return cells_.empty(); }
  /// Calls f(index) for every point whose cell intersects the ball's AABB.
  template <typename F>
  void for_each_near(const Vec3& center, double radius, F&& f) const {
    if (cells_.empty()) return;
    const auto lo = key_of(center - Vec3::Constant(radius));
    const auto hi = key_of(center + Vec3::Constant(radius));
    for (auto x = lo[0]; x <= hi[0]; ++x)
      for (auto y = lo[1]; y <= hi[1]; ++y)
        for (auto z = lo[2]; z <= hi[2]; ++z) {
          auto it = cells_.find(pack({x, y, z}));
          if (it == cells_.end()) continue;
          for (std::uint32_t k = it->second.first; k < it->second.second; ++k) f(order_[k]);
        }
  }

  template <typename F>
  void for_each_in_cell(const std::array<std::int64_t, 3>& key, F&& f) const {
    auto it = cells_.find(pack(key));
    if (it == cells_.end()) return;
    for (std::uint32_t k = it->second.first; k < it->second.second; ++k) f(order_[k]);
  }

  std::array<std::int64_t, 3> key_of(const Vec3& p) const;
  static std::uint64_t pack(const std::array<std::int64_t, 3>& key);

 private:
  double cell_ = 1.0;
  std::vector<std::uint32_t> order_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> cells_;
};

/// Mean distance from each point to its k nearest neighbours (excluding itself).
std::vector<double> mean_knn_distance(const std::vector<Vec3>& points, std::size_t k);

struct ProcessOptions {
  double voxel = 0.005;
  std::size_t k_neighbors = 20;
  double std_ratio = 2.0;
};

/// Crop to the workspace, replace each occupied voxel by its centroid, then
/// drop points whose mean k-NN distance exceeds the cloud mean by more than
/// `std_ratio` standard deviations (one pass).
PointCloud process_cloud(const PointCloud& cloud, const WorkspaceBox& ws,
                         const ProcessOptions& opts = {});

PointCloud crop(const PointCloud& cloud, const WorkspaceBox& ws);
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);
PointCloud remove_statistical_outliers(const PointCloud& cloud, std::size_t k, double std_ratio);

/// Exactly n points: uniform without replacement when the cloud is large
/// enough, otherwise every point once plus uniform draws with replacement.
PointCloud subsample(const PointCloud& cloud, std::size_t n, Rng& rng);

/// Binary interchange: u32 count, then per point 3×f32 + u8 label.
std::string encode_cloud(const PointCloud& cloud);
PointCloud decode_cloud(std::string_view bytes);
void write_cloud(const std::string& path, const PointCloud& cloud);
PointCloud read_cloud(const std::string& path);

/// Row-major depth image in meters; 0 marks an invalid pixel.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  bool operator==(const DepthMap&) const = default;
};

}  // namespace planfactory
