#include <cmath>
#include <sstream>

#include "planfactory/scenegen.hpp"

namespace planfactory {

namespace {

const char* const kGeneral = "General Motion Planning Parameters";
const char* const kObstacles = "General Obstacle Parameters";
const char* const kMeshes = "Objaverse Mesh Parameters";
const char* const kGeneration = "Generation";

int bracket_group(std::string_view value) {
  // "[[a, b], [c, d]]" -> 2; flat rows -> 0.
  auto first = value.find('[');
  if (first == std::string_view::npos || value.find('[', first + 1) == std::string_view::npos) return 0;
  auto open = value.find('[', first + 1);
  auto close = value.find(']', open);
  return static_cast<int>(parse_numbers(value.substr(open, close - open)).size());
}

std::string format_row(const std::vector<double>& v, int group) {
  std::string out;
  auto flat = [&](std::size_t from, std::size_t n) {
    std::string s = "[";
    for (std::size_t i = 0; i < n; ++i) s += (i ? ", " : "") + format_double(v[from + i]);
    return s + "]";
  };
  if (v.size() == 1) return format_double(v[0]);
  if (group <= 0) return flat(0, v.size());
  out = "[";
  for (std::size_t i = 0; i < v.size(); i += static_cast<std::size_t>(group))
    out += (i ? ", " : "") + flat(i, static_cast<std::size_t>(group));
  return out + "]";
}

}  // namespace

GenConfig::GenConfig() {
  add(kGeneral, "collision checking distance", {0.01});
  add(kGeneral, "tight space configuration ratio", {0.5});
  add(kGeneral, "dataset size", {1e6});
  add(kGeneral, "minimum motion planning time", {20});
  add(kGeneral, "maximum motion planning time", {80});

  add(kObstacles, "in hand object ratio", {0.5});
  add(kObstacles, "in hand object size range", {0.03, 0.03, 0.03, 0.3, 0.3, 0.3}, 3);
  add(kObstacles, "in hand object xyz range", {-0.05, -0.05, 0.0, 0.05, 0.05, 0.05}, 3);
  add(kObstacles, "min obstacle size", {0.1});
  add(kObstacles, "max obstacle size", {0.3});
  add(kObstacles, "table dim ranges", {0.6, 1, 1.0, 1.5, 0.05, 0.15}, 2);
  add(kObstacles, "table height range", {-0.3, 0.3});
  add(kObstacles, "num shelves range", {0, 3});
  add(kObstacles, "num open boxes range", {0, 3});
  add(kObstacles, "num cubbys range", {0, 1});
  add(kObstacles, "num microwaves range", {0, 3});
  add(kObstacles, "num dishwashers range", {0, 3});
  add(kObstacles, "num cabinets range", {0, 3});

  add(kMeshes, "scale range", {0.2, 0.4});
  add(kMeshes, "x pos range", {0.2, 0.4});
  add(kMeshes, "y pos range", {-0.4, 0.4});
  add(kMeshes, "number of mesh objects per programmatic asset", {0, 3});
  add(kMeshes, "number of mesh objects on the table", {0, 5});

  const std::string table = "Table Parameters";
  add(table, "width range", {0.8, 1.2});
  add(table, "depth range", {0.4, 0.6});
  add(table, "height range", {0.35, 0.5});
  add(table, "thickness range", {0.03, 0.07});
  add(table, "leg thickness range", {0.03, 0.07});
  add(table, "leg margin range", {0.05, 0.15});
  add(table, "position range", {0, 0.8, -0.6, 0.6}, 2);
  add(table, "z axis rotation range", {0, 3.14});

  const std::string shelf = "Shelf Parameters";
  add(shelf, "width range", {0.5, 1});
  add(shelf, "depth range", {0.2, 0.5});
  add(shelf, "height range", {0.5, 1.2});
  add(shelf, "num boards range", {3, 5});
  add(shelf, "board thickness range", {0.02, 0.05});
  add(shelf, "backboard thickness range", {0.0, 0.05});
  add(shelf, "num vertical boards range", {0, 3});
  add(shelf, "num side columns range", {0, 4});
  add(shelf, "column thickness range", {0.02, 0.05});
  add(shelf, "position range", {0, 0.8, -0.6, 0.6}, 2);
  add(shelf, "z axis rotation range", {-1.57, 0});

  const std::string box = "Open Box Parameters";
  add(box, "width range", {0.2, 0.7});
  add(box, "depth range", {0.2, 0.7});
  add(box, "height range", {0.3, 0.5});
  add(box, "thickness range", {0.02, 0.06});
  add(box, "front scale range", {0.6, 1});
  add(box, "position range", {0.0, 0.8, -0.6, 0.6}, 2);
  add(box, "z axis rotation range", {-1.57, 0.0});

  const std::string cubby = "Cubby Parameters";
  add(cubby, "cubby left range", {0.4, 0.1});
  add(cubby, "cubby right range", {-0.4, 0.1});
  add(cubby, "cubby top range", {0.85, 0.35});
  add(cubby, "cubby bottom range", {0.0, 0.1});
  add(cubby, "cubby front range", {0.8, 0.1});
  add(cubby, "cubby width range", {0.35, 0.2});
  add(cubby, "cubby horizontal middle board z axis shift range", {0.45, 0.1});
  add(cubby, "cubby vertical middle board y axis shift range", {0.0, 0.1});
  add(cubby, "board thickness range", {0.02, 0.01});
  add(cubby, "external rotation range", {0, 1.57});
  add(cubby, "internal rotation range", {0, 0.5});
  add(cubby, "num shelves range", {3, 5});

  const std::string micro = "Microwave Parameters";
  add(micro, "width range", {0.3, 0.6});
  add(micro, "depth range", {0.3, 0.6});
  add(micro, "height range", {0.3, 0.6});
  add(micro, "thickness range", {0.01, 0.02});
  add(micro, "display panel width range", {0.05, 0.15});
  add(micro, "distance range", {0.5, 0.8});
  add(micro, "external z axis rotation range", {-2.36, -0.79});
  add(micro, "internal z axis rotation range", {-0.15, 0.15});

  const std::string dish = "Dishwasher Parameters";
  add(dish, "width range", {0.4, 0.6});
  add(dish, "depth range", {0.3, 0.4});
  add(dish, "height range", {0.5, 0.7});
  add(dish, "control panel height range", {0.1, 0.2});
  add(dish, "foot panel height range", {0.1, 0.2});
  add(dish, "wall thickness range", {0.01, 0.02});
  add(dish, "opening angle range", {0.5, 1.57});
  add(dish, "distance range", {0.6, 1.0});
  add(dish, "external z axis rotation range", {-2.36, -0.79});
  add(dish, "internal z axis rotation range", {-0.15, 0.15});

  const std::string cab = "Cabinet Parameters";
  add(cab, "width range", {0.5, 0.8});
  add(cab, "depth range", {0.25, 0.4});
  add(cab, "height range", {0.6, 1.0});
  add(cab, "wall thickness range", {0.01, 0.02});
  add(cab, "left opening angle range", {0.7, 1.57});
  add(cab, "right opening angle range", {0.7, 1.57});
  add(cab, "distance range", {0.6, 1.0});
  add(cab, "external z axis rotation range", {-2.36, -0.79});
  add(cab, "internal z axis rotation range", {-0.15, 0.15});

  // Knobs the hyper-parameter table does not cover.
  add(kGeneration, "max objects per scene", {5});
  add(kGeneration, "num tables range", {0, 1});
  add(kGeneration, "max push iterations", {50});
  add(kGeneration, "base table front distance", {0.25});
  add(kGeneration, "robot keep out half extents", {0.25, 0.25, 1.5});
  add(kGeneration, "scene radius", {1.6});
}

void GenConfig::add(const std::string& section, const std::string& key, std::vector<double> v, int group) {
  Section* sec = nullptr;
  for (auto& s : sections_)
    if (s.name == section) sec = &s;
  if (!sec) sec = &sections_.emplace_back(Section{section, {}});
  sec->rows.push_back(Row{key, std::move(v), group});
}

const GenConfig::Row* GenConfig::find(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_)
    if (s.name == section)
      for (const auto& r : s.rows)
        if (r.key == key) return &r;
  return nullptr;
}

GenConfig::Row* GenConfig::find(const std::string& section, const std::string& key) {
  return const_cast<Row*>(static_cast<const GenConfig*>(this)->find(section, key));
}

const std::vector<double>& GenConfig::values(const std::string& section, const std::string& key) const {
  const Row* r = find(section, key);
  if (!r) throw InvalidInput("unknown configuration row: [" + section + "] " + key);
  return r->values;
}

void GenConfig::set(const std::string& section, const std::string& key, std::vector<double> v) {
  Row* r = find(section, key);
  if (!r) throw InvalidInput("unknown configuration row: [" + section + "] " + key);
  if (r->group > 0 && v.size() % static_cast<std::size_t>(r->group) != 0)
    throw InvalidInput("row [" + section + "] " + key + " needs groups of " + std::to_string(r->group));
  r->values = std::move(v);
}

GenConfig GenConfig::parse(std::string_view text) {
  GenConfig cfg;
  auto file = KeyValueFile::parse(text);
  for (const auto& sec : file.sections()) {
    for (const auto& [key, value] : sec.entries) {
      if (sec.name == kGeneration && key == "mesh directory") {
        cfg.mesh_dir_ = value.empty() ? std::nullopt : std::optional<std::filesystem::path>(value);
        continue;
      }
      Row* r = cfg.find(sec.name, key);
      if (!r) throw InvalidInput("unknown configuration row: [" + sec.name + "] " + key);
      auto numbers = parse_numbers(value);
      int group = bracket_group(value);
      if (r->group != group && !(r->group == 0 && group == 0))
        throw InvalidInput("row [" + sec.name + "] " + key + " has the wrong shape: " + value);
      if (numbers.size() != r->values.size())
        throw InvalidInput("row [" + sec.name + "] " + key + " expects " + std::to_string(r->values.size()) +
                           " numbers: " + value);
      r->values = std::move(numbers);
    }
  }
  cfg.validate();
  return cfg;
}

GenConfig GenConfig::load(const std::filesystem::path& path) {
  auto file = KeyValueFile::load(path);
  return parse(file.dump());
}

std::string GenConfig::dump() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    if (i) out << '\n';
    out << '[' << sections_[i].name << "]\n";
    for (const auto& r : sections_[i].rows) out << r.key << " = " << format_row(r.values, r.group) << '\n';
    if (sections_[i].name == kGeneration && mesh_dir_) out << "mesh directory = " << mesh_dir_->string() << '\n';
  }
  return out.str();
}

Range GenConfig::range(const std::string& section, const std::string& key) const {
  const auto& v = values(section, key);
  if (v.size() != 2) throw InvalidInput("row [" + section + "] " + key + " is not a [lo, hi] range");
  if (!(v[0] <= v[1])) throw InvalidInput("row [" + section + "] " + key + " has lo > hi");
  return {v[0], v[1]};
}

Range GenConfig::centered(const std::string& section, const std::string& key) const {
  const auto& v = values(section, key);
  if (v.size() != 2) throw InvalidInput("row [" + section + "] " + key + " is not a [nominal, spread] pair");
  if (!(v[1] >= 0)) throw InvalidInput("row [" + section + "] " + key + " has a negative spread");
  return {v[0] - v[1], v[0] + v[1]};
}

std::pair<int, int> GenConfig::count(const std::string& section, const std::string& key) const {
  Range r = range(section, key);
  if (r.lo < 0 || r.lo != std::floor(r.lo) || r.hi != std::floor(r.hi))
    throw InvalidInput("row [" + section + "] " + key + " must hold non-negative integers");
  return {static_cast<int>(r.lo), static_cast<int>(r.hi)};
}

double GenConfig::scalar(const std::string& section, const std::string& key) const {
  const auto& v = values(section, key);
  if (v.size() != 1) throw InvalidInput("row [" + section + "] " + key + " must be a single number");
  return v[0];
}

std::vector<Range> GenConfig::ranges(const std::string& section, const std::string& key) const {
  const auto& v = values(section, key);
  std::vector<Range> out;
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
    if (!(v[i] <= v[i + 1])) throw InvalidInput("row [" + section + "] " + key + " has lo > hi");
    out.push_back({v[i], v[i + 1]});
  }
  return out;
}

std::string GenConfig::section_of(AssetCategory c) {
  switch (c) {
    case AssetCategory::table: return "Table Parameters";
    case AssetCategory::shelf: return "Shelf Parameters";
    case AssetCategory::open_box: return "Open Box Parameters";
    case AssetCategory::cubby: return "Cubby Parameters";
    case AssetCategory::microwave: return "Microwave Parameters";
    case AssetCategory::dishwasher: return "Dishwasher Parameters";
    case AssetCategory::cabinet: return "Cabinet Parameters";
    case AssetCategory::base_table: return kObstacles;
  }
  return {};
}

std::pair<int, int> GenConfig::category_count(AssetCategory c) const {
  switch (c) {
    case AssetCategory::table: return count(kGeneration, "num tables range");
    case AssetCategory::shelf: return count(kObstacles, "num shelves range");
    case AssetCategory::open_box: return count(kObstacles, "num open boxes range");
    case AssetCategory::cubby: return count(kObstacles, "num cubbys range");
    case AssetCategory::microwave: return count(kObstacles, "num microwaves range");
    case AssetCategory::dishwasher: return count(kObstacles, "num dishwashers range");
    case AssetCategory::cabinet: return count(kObstacles, "num cabinets range");
    case AssetCategory::base_table: return {1, 1};
  }
  return {0, 0};
}

int GenConfig::max_objects() const {
  double k = scalar(kGeneration, "max objects per scene");
  if (k < 1 || k != std::floor(k)) throw InvalidInput("max objects per scene must be an integer >= 1");
  return static_cast<int>(k);
}

int GenConfig::max_push_iterations() const {
  double k = scalar(kGeneration, "max push iterations");
  if (k < 0 || k != std::floor(k)) throw InvalidInput("max push iterations must be a non-negative integer");
  return static_cast<int>(k);
}

double GenConfig::collision_tolerance() const {
  double t = scalar(kGeneral, "collision checking distance");
  if (!(t > 0)) throw InvalidInput("collision checking distance must be positive");
  return t;
}

double GenConfig::tight_ratio() const {
  double r = scalar(kGeneral, "tight space configuration ratio");
  if (!(r >= 0 && r <= 1)) throw InvalidInput("tight space configuration ratio must lie in [0, 1]");
  return r;
}

InHandConfig GenConfig::in_hand() const {
  InHandConfig c;
  c.ratio = scalar(kObstacles, "in hand object ratio");
  if (!(c.ratio >= 0 && c.ratio <= 1)) throw InvalidInput("in hand object ratio must lie in [0, 1]");
  const auto& size = values(kObstacles, "in hand object size range");
  const auto& xyz = values(kObstacles, "in hand object xyz range");
  if (size.size() != 6 || xyz.size() != 6) throw InvalidInput("in hand ranges need [[x, y, z], [x, y, z]]");
  for (int i = 0; i < 3; ++i) {
    c.size_lo[i] = size[static_cast<std::size_t>(i)];
    c.size_hi[i] = size[static_cast<std::size_t>(i + 3)];
    c.offset_lo[i] = xyz[static_cast<std::size_t>(i)];
    c.offset_hi[i] = xyz[static_cast<std::size_t>(i + 3)];
  }
  if (!(c.size_lo.array() > 0).all() || !(c.size_lo.array() <= c.size_hi.array()).all() ||
      !(c.offset_lo.array() <= c.offset_hi.array()).all())
    throw InvalidInput("in hand ranges must be ordered and sizes positive");
  return c;
}

void GenConfig::validate() const {
  collision_tolerance();
  tight_ratio();
  in_hand();
  max_objects();
  max_push_iterations();
  for (auto c : kSampledCategories) {
    auto [lo, hi] = category_count(c);
    (void)lo;
    (void)hi;
  }
  auto dims = ranges(kObstacles, "table dim ranges");
  if (dims.size() != 3 || dims[0].lo <= 0 || dims[1].lo <= 0 || dims[2].lo <= 0)
    throw InvalidInput("table dim ranges needs three positive ranges");
  range(kObstacles, "table height range");
  Range scale = range(kMeshes, "scale range");
  if (scale.lo <= 0) throw InvalidInput("mesh scale range must be positive");
  range(kMeshes, "x pos range");
  range(kMeshes, "y pos range");
  count(kMeshes, "number of mesh objects per programmatic asset");
  count(kMeshes, "number of mesh objects on the table");
  scalar(kGeneration, "base table front distance");
  if (values(kGeneration, "robot keep out half extents").size() != 3)
    throw InvalidInput("robot keep out half extents needs three numbers");
  if (!(scalar(kGeneration, "scene radius") > 0)) throw InvalidInput("scene radius must be positive");

  // Per-category rows: dry-run the builders' reads.
  const std::string cubby = section_of(AssetCategory::cubby);
  for (const auto& sec : sections_) {
    bool is_category = false;
    for (auto c : kSampledCategories) is_category |= section_of(c) == sec.name;
    if (!is_category) continue;
    for (const auto& row : sec.rows) {
      if (row.group > 0) {
        if (ranges(sec.name, row.key).size() != 2) throw InvalidInput("position range needs [[x lo, x hi], [y lo, y hi]]");
      } else if (sec.name == cubby && row.key.rfind("cubby ", 0) == 0) {
        centered(sec.name, row.key);
      } else if (sec.name == cubby && row.key == "board thickness range") {
        Range t = centered(sec.name, row.key);
        if (t.lo <= 0) throw InvalidInput("cubby board thickness must stay positive");
      } else {
        Range r = range(sec.name, row.key);
        bool is_count = row.key.rfind("num ", 0) == 0;
        bool may_be_zero = is_count || row.key.find("rotation") != std::string::npos ||
                           row.key.find("backboard") != std::string::npos;
        if (is_count) count(sec.name, row.key);
        if (!may_be_zero && r.lo <= 0) throw InvalidInput("row [" + sec.name + "] " + row.key + " must be positive");
      }
    }
  }
}

}  // namespace planfactory
