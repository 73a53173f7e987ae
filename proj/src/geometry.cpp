#include "planfactory/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "planfactory/binary_io.hpp"

namespace planfactory {

const char* to_string(PointLabel label) {
  switch (label) {
    case PointLabel::robot: return "robot";
    case PointLabel::goal_robot: return "goal_robot";
    case PointLabel::obstacle: return "obstacle";
    case PointLabel::in_hand: return "in_hand";
  }
  return "unknown";
}

void PointCloud::append(const PointCloud& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

std::size_t PointCloud::count(PointLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

void PointCloud::validate() const {
  if (points.size() != labels.size()) throw InvalidInput("point cloud labels/points length mismatch");
  for (const auto& p : points)
    if (!p.allFinite()) throw InvalidInput("point cloud has non-finite coordinates");
}

void PointCloud::round_to_float() {
  for (auto& p : points)
    for (int i = 0; i < 3; ++i) {
      // volatile: g++ 11 at -O3 can drop the float round trip when vectorizing.
      volatile float f = static_cast<float>(p[i]);
      p[i] = static_cast<double>(f);
    }
}

PointCloud PointCloud::uniform_label(std::vector<Vec3> pts, PointLabel l) {
  PointCloud c;
  c.labels.assign(pts.size(), l);
  c.points = std::move(pts);
  return c;
}

Vec3 Cuboid::to_local(const Vec3& p) const {
  return pose.orientation.conjugate() * (p - pose.position);
}

double Cuboid::sdf(const Vec3& p) const {
  Vec3 q = to_local(p).cwiseAbs() - half_extents;
  double outside = q.cwiseMax(0.0).norm();
  double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

std::array<Vec3, 8> Cuboid::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[static_cast<std::size_t>(i)] = pose.position + pose.orientation * s.cwiseProduct(half_extents);
  }
  return out;
}

double Cuboid::surface_area() const {
  const Vec3& h = half_extents;
  return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
}

void TriMesh::prune_degenerate() {
  const auto nv = static_cast<int>(vertices.size());
  std::vector<std::array<int, 3>> kept;
  kept.reserve(faces.size());
  for (const auto& f : faces) {
    for (int idx : f)
      if (idx < 0 || idx >= nv) throw InvalidInput("mesh face index out of range");
    Vec3 a = vertices[static_cast<std::size_t>(f[0])];
    Vec3 b = vertices[static_cast<std::size_t>(f[1])];
    Vec3 c = vertices[static_cast<std::size_t>(f[2])];
    if ((b - a).cross(c - a).norm() > 1e-14) kept.push_back(f);
  }
  faces = std::move(kept);
}

double TriMesh::surface_area() const {
  double area = 0.0;
  for (const auto& f : faces) {
    Vec3 a = vertex(static_cast<std::size_t>(f[0]));
    Vec3 b = vertex(static_cast<std::size_t>(f[1]));
    Vec3 c = vertex(static_cast<std::size_t>(f[2]));
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

WorkspaceBox TriMesh::bounds() const {
  WorkspaceBox b;
  if (vertices.empty()) return b;
  b.min = b.max = vertex(0);
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    b.min = b.min.cwiseMin(vertex(i));
    b.max = b.max.cwiseMax(vertex(i));
  }
  return b;
}

namespace {

void add_polygon(TriMesh& mesh, const std::vector<int>& poly) {
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
}

}  // namespace

TriMesh parse_off(std::string_view text) {
  std::string stripped;
  for (std::size_t pos = 0; pos < text.size();) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    stripped.append(line.substr(0, line.find('#')));
    stripped.push_back('\n');
    pos = eol + 1;
  }
  std::istringstream in{stripped};
  std::string header;
  in >> header;
  if (header != "OFF") throw IoError("OFF mesh: missing OFF header");
  std::size_t nv = 0, nf = 0, ne = 0;
  if (!(in >> nv >> nf >> ne)) throw IoError("OFF mesh: bad counts line");
  TriMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices)
    if (!(in >> v.x() >> v.y() >> v.z())) throw IoError("OFF mesh: truncated vertex list");
  for (std::size_t i = 0; i < nf; ++i) {
    std::size_t k = 0;
    if (!(in >> k)) throw IoError("OFF mesh: truncated face list");
    std::vector<int> poly(k);
    for (auto& idx : poly)
      if (!(in >> idx)) throw IoError("OFF mesh: truncated face");
    add_polygon(mesh, poly);
  }
  mesh.prune_degenerate();
  return mesh;
}

TriMesh parse_obj(std::string_view text) {
  std::istringstream in{std::string(text)};
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw IoError("OBJ mesh: bad vertex line");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        int idx = std::stoi(tok.substr(0, tok.find('/')));
        idx = idx < 0 ? static_cast<int>(mesh.vertices.size()) + idx : idx - 1;
        poly.push_back(idx);
      }
      add_polygon(mesh, poly);
    }
  }
  mesh.prune_degenerate();
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::string text = read_file(path.string());
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return parse_off(text);
  if (ext == ".obj") return parse_obj(text);
  throw IoError("unsupported mesh format: " + path.string());
}

TriMesh make_box_mesh(const Vec3& h) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) add_polygon(m, {q[0], q[1], q[2], q[3]});
  return m;
}

TriMesh make_cylinder_mesh(double radius, double height, int segments) {
  TriMesh m;
  const double hz = 0.5 * height;
  for (int i = 0; i < segments; ++i) {
    double a = 2.0 * M_PI * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -hz);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), hz);
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, -hz);
  m.vertices.emplace_back(0, 0, hz);
  for (int i = 0; i < segments; ++i) {
    int j = (i + 1) % segments;
    m.faces.push_back({2 * i, 2 * j, 2 * j + 1});
    m.faces.push_back({2 * i, 2 * j + 1, 2 * i + 1});
    m.faces.push_back({bottom, 2 * j, 2 * i});
    m.faces.push_back({bottom + 1, 2 * i + 1, 2 * j + 1});
  }
  return m;
}

TriMesh make_icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::vector<std::array<int, 3>> next;
    std::unordered_map<std::uint64_t, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      m.vertices.push_back(0.5 * (m.vertices[static_cast<std::size_t>(a)] + m.vertices[static_cast<std::size_t>(b)]));
      int idx = static_cast<int>(m.vertices.size()) - 1;
      mid.emplace(key, idx);
      return idx;
    };
    for (const auto& f : m.faces) {
      int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) v = v.normalized() * radius;
  return m;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Closest-point-on-triangle by Voronoi region.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

PointCloud sample_surface(const Cuboid& box, std::size_t n, Rng& rng, PointLabel label) {
  PointCloud out;
  if (n == 0) return out;
  if (!(box.half_extents.array() > 0.0).all()) throw InvalidInput("cuboid half-extents must be positive");
  const Vec3& h = box.half_extents;
  const double axis_area[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
  std::discrete_distribution<int> pick_face(
      {axis_area[0], axis_area[0], axis_area[1], axis_area[1], axis_area[2], axis_area[2]});
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int face = pick_face(rng);
    int axis = face / 2;
    Vec3 local;
    for (int k = 0; k < 3; ++k) local[k] = uniform(rng, -h[k], h[k]);
    local[axis] = (face % 2 == 0) ? h[axis] : -h[axis];
    out.points.push_back(box.pose.position + box.pose.orientation * local);
  }
  out.labels.assign(n, label);
  return out;
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, Rng& rng, PointLabel label) {
  PointCloud out;
  if (n == 0) return out;
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    Vec3 a = mesh.vertex(static_cast<std::size_t>(f[0]));
    total += 0.5 * (mesh.vertex(static_cast<std::size_t>(f[1])) - a)
                       .cross(mesh.vertex(static_cast<std::size_t>(f[2])) - a)
                       .norm();
    cumulative.push_back(total);
  }
  if (mesh.faces.empty() || !(total > 0.0)) throw InvalidInput("cannot sample an empty mesh");
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = uniform(rng, 0.0, total);
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                        cumulative.begin());
    idx = std::min(idx, cumulative.size() - 1);
    const auto& f = mesh.faces[idx];
    double r1 = std::sqrt(uniform(rng, 0.0, 1.0));
    double r2 = uniform(rng, 0.0, 1.0);
    out.points.push_back((1.0 - r1) * mesh.vertex(static_cast<std::size_t>(f[0])) +
                         r1 * (1.0 - r2) * mesh.vertex(static_cast<std::size_t>(f[1])) +
                         r1 * r2 * mesh.vertex(static_cast<std::size_t>(f[2])));
  }
  out.labels.assign(n, label);
  return out;
}

std::array<std::int64_t, 3> SpatialHash::key_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

std::uint64_t SpatialHash::pack(const std::array<std::int64_t, 3>& key) {
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  return (static_cast<std::uint64_t>(key[0]) & mask) | ((static_cast<std::uint64_t>(key[1]) & mask) << 21) |
         ((static_cast<std::uint64_t>(key[2]) & mask) << 42);
}

SpatialHash::SpatialHash(const std::vector<Vec3>& points, double cell) : cell_(cell) {
  if (!(cell > 0.0)) throw InvalidInput("spatial hash cell size must be positive");
  std::vector<std::uint64_t> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) keys[i] = pack(key_of(points[i]));
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) { return keys[a] < keys[b]; });
  std::uint32_t begin = 0;
  for (std::uint32_t i = 1; i <= order_.size(); ++i) {
    if (i == order_.size() || keys[order_[i]] != keys[order_[begin]]) {
      cells_.emplace(keys[order_[begin]], std::make_pair(begin, i));
      begin = i;
    }
  }
}

std::vector<double> mean_knn_distance(const std::vector<Vec3>& points, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<double> out(n, 0.0);
  if (n < 2 || k == 0) return out;
  const std::size_t kk = std::min(k, n - 1);

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double extent = std::max((hi - lo).maxCoeff(), 1e-9);
  double cell = extent / std::cbrt(static_cast<double>(n));
  SpatialHash grid(points, cell);
  constexpr int kMaxRing = 6;

  for (std::size_t i = 0; i < n; ++i) {
    std::priority_queue<double> best;  // max-heap of squared distances
    auto offer = [&](std::uint32_t j) {
      if (j == i) return;
      double d2 = (points[j] - points[i]).squaredNorm();
      if (best.size() < kk) best.push(d2);
      else if (d2 < best.top()) {
        best.pop();
        best.push(d2);
      }
    };
    const auto ki = grid.key_of(points[i]);
    bool done = false;
    for (int r = 0; r <= kMaxRing && !done; ++r) {
      // Ring r = cells at Chebyshev distance exactly r from the query cell.
      for (std::int64_t dx = -r; dx <= r; ++dx)
        for (std::int64_t dy = -r; dy <= r; ++dy)
          for (std::int64_t dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            grid.for_each_in_cell({ki[0] + dx, ki[1] + dy, ki[2] + dz}, offer);
          }
      if (best.size() == kk && best.top() <= (r * cell) * (r * cell)) done = true;
    }
    if (!done) {
      best = {};
      for (std::uint32_t j = 0; j < n; ++j) offer(j);
    }
    double sum = 0.0;
    while (!best.empty()) {
      sum += std::sqrt(best.top());
      best.pop();
    }
    out[i] = sum / static_cast<double>(kk);
  }
  return out;
}

PointCloud crop(const PointCloud& cloud, const WorkspaceBox& ws) {
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (ws.contains(cloud.points[i])) out.push_back(cloud.points[i], cloud.labels[i]);
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw InvalidInput("voxel size must be positive");
  struct Entry {
    std::array<std::int64_t, 3> key;
    std::size_t index;
  };
  std::vector<Entry> entries(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    entries[i] = {{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                   static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                   static_cast<std::int64_t>(std::floor(p.z() / voxel))},
                  i};
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
  PointCloud out;
  for (std::size_t b = 0; b < entries.size();) {
    std::size_t e = b;
    Vec3 sum = Vec3::Zero();
    std::array<std::size_t, 4> votes{};
    while (e < entries.size() && entries[e].key == entries[b].key) {
      sum += cloud.points[entries[e].index];
      ++votes[static_cast<std::size_t>(cloud.labels[entries[e].index])];
      ++e;
    }
    auto label = static_cast<PointLabel>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    out.push_back(e - b == 1 ? cloud.points[entries[b].index] : sum / static_cast<double>(e - b), label);
    b = e;
  }
  return out;
}

PointCloud remove_statistical_outliers(const PointCloud& cloud, std::size_t k, double std_ratio) {
  if (cloud.size() < 2) return cloud;
  auto stat = mean_knn_distance(cloud.points, k);
  const double n = static_cast<double>(stat.size());
  double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / n;
  double var = 0.0;
  for (double d : stat) var += (d - mean) * (d - mean);
  double sd = std::sqrt(var / n);
  // Relative slack keeps rounding noise on perfectly regular clouds from
  // registering as spread.
  double threshold = mean + std_ratio * sd + 1e-9 * mean;
  PointCloud kept;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (stat[i] <= threshold) kept.push_back(cloud.points[i], cloud.labels[i]);
  return kept;
}

PointCloud process_cloud(const PointCloud& cloud, const WorkspaceBox& ws, const ProcessOptions& opts) {
  cloud.validate();
  if (!ws.valid()) throw InvalidInput("workspace box must satisfy min < max");
  PointCloud out = voxel_downsample(crop(cloud, ws), opts.voxel);
  return remove_statistical_outliers(out, opts.k_neighbors, opts.std_ratio);
}

PointCloud subsample(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (n == 0) throw InvalidInput("subsample size must be positive");
  if (cloud.empty()) throw InvalidInput("cannot subsample an empty cloud");
  PointCloud out;
  out.points.reserve(n);
  out.labels.reserve(n);
  const std::size_t size = cloud.size();
  if (size >= n) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), n, rng);
    for (auto i : chosen) out.push_back(cloud.points[i], cloud.labels[i]);
    return out;
  }
  out = cloud;
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);
  while (out.size() < n) {
    auto i = pick(rng);
    out.push_back(cloud.points[i], cloud.labels[i]);
  }
  return out;
}

std::string encode_cloud(const PointCloud& cloud) {
  cloud.validate();
  ByteWriter w;
  w.put(static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.put_f32(cloud.points[i][k]);
    w.put(static_cast<std::uint8_t>(cloud.labels[i]));
  }
  return w.take();
}

PointCloud decode_cloud(std::string_view bytes) {
  ByteReader r(bytes);
  auto n = r.get<std::uint32_t>();
  if (r.remaining() != static_cast<std::size_t>(n) * 13) throw IoError("point cloud: size does not match count");
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = r.get_f32();
    auto l = r.get<std::uint8_t>();
    if (l > 3) throw IoError("point cloud: unknown label " + std::to_string(l));
    cloud.push_back(p, static_cast<PointLabel>(l));
  }
  return cloud;
}

void write_cloud(const std::string& path, const PointCloud& cloud) { write_file(path, encode_cloud(cloud)); }

PointCloud read_cloud(const std::string& path) { return decode_cloud(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace planfactory
