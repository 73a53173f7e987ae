#include "planfactory/augment.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "planfactory/binary_io.hpp"
#include "planfactory/config.hpp"

namespace planfactory {

namespace {

void check_map(const DepthMap& d) {
  if (d.height < 0 || d.width < 0 ||
      d.data.size() != static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width))
    throw InvalidInput("depth map size does not match its dimensions");
}

}  // namespace

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(std::string(what) + " must lie in [0, 1]");
  };
  prob(edge_shift_prob, "edge shift probability");
  prob(hole_prob, "hole probability");
  if (!(edge_shift_std >= 0)) throw InvalidInput("edge shift std must be non-negative");
  if (blur_kernel_min < 1 || blur_kernel_min % 2 == 0 || blur_kernel_max % 2 == 0 || blur_kernel_max < blur_kernel_min)
    throw InvalidInput("blur kernel sizes must be odd with min <= max");
  if (!(blur_std_min > 0 && blur_std_min <= blur_std_max)) throw InvalidInput("blur std range must be positive and ordered");
  if (!(hole_threshold_min >= 0 && hole_threshold_min <= hole_threshold_max && hole_threshold_max <= 1.0))
    throw InvalidInput("hole threshold range must be ordered within [0, 1]");
  if (!(max_depth > 0)) throw InvalidInput("max depth must be positive");
}

AugmentConfig AugmentConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  AugmentConfig c;
  auto one = [](const std::string& key, const std::string& value) {
    const auto v = parse_numbers(value);
    if (v.size() != 1) throw InvalidInput("[Depth Augmentation] " + key + " expects one number");
    return v[0];
  };
  auto range = [](const std::string& key, const std::string& value) {
    const auto v = parse_numbers(value);
    if (v.size() != 2) throw InvalidInput("[Depth Augmentation] " + key + " expects [min, max]");
    return std::pair{v[0], v[1]};
  };
  auto odd = [](const std::string& key, double v) {
    if (v != std::floor(v)) throw InvalidInput("[Depth Augmentation] " + key + " must be whole numbers");
    return static_cast<int>(v);
  };
  for (const auto& [key, value] : entries) {
    if (key == "edge shift std") {
      c.edge_shift_std = one(key, value);
    } else if (key == "edge shift probability") {
      c.edge_shift_prob = one(key, value);
    } else if (key == "blur kernel") {
      const auto [a, b] = range(key, value);
      c.blur_kernel_min = odd(key, a);
      c.blur_kernel_max = odd(key, b);
    } else if (key == "blur std") {
      std::tie(c.blur_std_min, c.blur_std_max) = range(key, value);
    } else if (key == "hole threshold") {
      std::tie(c.hole_threshold_min, c.hole_threshold_max) = range(key, value);
    } else if (key == "hole probability") {
      c.hole_prob = one(key, value);
    } else if (key == "max depth") {
      c.max_depth = one(key, value);
    } else {
      throw InvalidInput("unknown configuration row: [Depth Augmentation] " + key);
    }
  }
  c.validate();
  return c;
}

std::string AugmentConfig::dump() const {
  std::string s = "[Depth Augmentation]\n";
  s += "edge shift std = " + format_double(edge_shift_std) + "\n";
  s += "edge shift probability = " + format_double(edge_shift_prob) + "\n";
  s += "blur kernel = [" + std::to_string(blur_kernel_min) + ", " + std::to_string(blur_kernel_max) + "]\n";
  s += "blur std = [" + format_double(blur_std_min) + ", " + format_double(blur_std_max) + "]\n";
  s += "hole threshold = [" + format_double(hole_threshold_min) + ", " + format_double(hole_threshold_max) + "]\n";
  s += "hole probability = " + format_double(hole_prob) + "\n";
  s += "max depth = " + format_double(max_depth) + "\n";
  return s;
}

ShiftField sample_shift_field(int height, int width, const AugmentConfig& cfg, Rng& rng) {
  if (height < 2 || width < 2) throw InvalidInput("edge noise needs at least a 2x2 map");
  ShiftField f;
  f.height = height;
  f.width = width;
  const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  f.dr.assign(n, 0.0f);
  f.dc.assign(n, 0.0f);
  std::normal_distribution<double> g(0.0, cfg.edge_shift_std);
  for (std::size_t i = 0; i < n; ++i) {
    if (!bernoulli(rng, cfg.edge_shift_prob)) continue;
    f.dr[i] = static_cast<float>(g(rng));
    f.dc[i] = static_cast<float>(g(rng));
    ++f.shifted;
  }
  return f;
}

DepthMap warp(const DepthMap& depth, const ShiftField& field) {
  check_map(depth);
  if (field.height != depth.height || field.width != depth.width) throw InvalidInput("shift field size mismatch");
  DepthMap out(depth.height, depth.width);
  const double rmax = depth.height - 1, cmax = depth.width - 1;
  for (int r = 0; r < depth.height; ++r)
    for (int c = 0; c < depth.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * depth.width + c;
      const double y = std::clamp(r + static_cast<double>(field.dr[i]), 0.0, rmax);
      const double x = std::clamp(c + static_cast<double>(field.dc[i]), 0.0, cmax);
      const int r0 = std::min(static_cast<int>(std::floor(y)), depth.height - 2);
      const int c0 = std::min(static_cast<int>(std::floor(x)), depth.width - 2);
      const double fy = y - r0, fx = x - c0;
      const double w[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
      const float v[4] = {depth.at(r0, c0), depth.at(r0, c0 + 1), depth.at(r0 + 1, c0), depth.at(r0 + 1, c0 + 1)};
      double acc = 0.0;
      bool invalid = false;
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        if (v[k] == 0.0f) invalid = true;
        acc += w[k] * v[k];
      }
      out.at(r, c) = invalid ? 0.0f : static_cast<float>(acc);
    }
  return out;
}

DepthMap edge_noise(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng, std::size_t* shifted) {
  check_map(depth);
  const ShiftField f = sample_shift_field(depth.height, depth.width, cfg, rng);
  if (shifted) *shifted = f.shifted;
  return warp(depth, f);
}

std::vector<double> gaussian_blur(const std::vector<double>& image, int height, int width, int kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("blur kernel must be odd");
  if (!(sigma > 0)) throw InvalidInput("blur sigma must be positive");
  const int h = kernel / 2;
  std::vector<double> k(static_cast<std::size_t>(kernel));
  double sum = 0.0;
  for (int i = -h; i <= h; ++i) sum += k[static_cast<std::size_t>(i + h)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  auto at = [&](const std::vector<double>& img, int r, int c) {
    r = std::clamp(r, 0, height - 1);
    c = std::clamp(c, 0, width - 1);
    return img[static_cast<std::size_t>(r) * width + c];
  };
  std::vector<double> tmp(image.size()), out(image.size());
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -h; i <= h; ++i) acc += k[static_cast<std::size_t>(i + h)] * at(image, r, c + i);
      tmp[static_cast<std::size_t>(r) * width + c] = acc;
    }
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -h; i <= h; ++i) acc += k[static_cast<std::size_t>(i + h)] * at(tmp, r + i, c);
      out[static_cast<std::size_t>(r) * width + c] = acc;
    }
  return out;
}

std::vector<double> hole_mask(int height, int width, int kernel, double sigma, Rng& rng) {
  std::vector<double> noise(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (auto& v : noise) v = uniform(rng, 0.0, 1.0);
  auto mask = gaussian_blur(noise, height, width, kernel, sigma);
  if (mask.empty()) return mask;
  const auto [lo, hi] = std::minmax_element(mask.begin(), mask.end());
  const double a = *lo, span = *hi - *lo;
  for (auto& v : mask) v = span > 0 ? (v - a) / span : 0.0;
  return mask;
}

DepthMap random_holes(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng, HoleInfo* info) {
  check_map(depth);
  HoleInfo local;
  HoleInfo& hi = info ? *info : local;
  hi = HoleInfo{};
  if (!bernoulli(rng, cfg.hole_prob)) return depth;
  hi.applied = true;
  const int steps = (cfg.blur_kernel_max - cfg.blur_kernel_min) / 2;
  hi.kernel = cfg.blur_kernel_min + 2 * uniform_int(rng, 0, steps);
  hi.sigma = uniform(rng, cfg.blur_std_min, cfg.blur_std_max);
  hi.threshold = uniform(rng, cfg.hole_threshold_min, cfg.hole_threshold_max);
  if (depth.data.empty()) return depth;
  const auto mask = hole_mask(depth.height, depth.width, hi.kernel, hi.sigma, rng);
  DepthMap out = depth;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] > hi.threshold) {
      out.data[i] = 0.0f;
      ++hi.zeroed;
    }
  return out;
}

DepthMap clamp_normalize(const DepthMap& depth, double max_depth) {
  check_map(depth);
  if (!(max_depth > 0)) throw InvalidInput("max depth must be positive");
  DepthMap out = depth;
  for (auto& v : out.data)
    v = std::isfinite(v) && v > 0.0f ? static_cast<float>(std::min(static_cast<double>(v), max_depth) / max_depth) : 0.0f;
  return out;
}

DepthMap augment_depth(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  return clamp_normalize(random_holes(edge_noise(depth, cfg, rng), cfg, rng), cfg.max_depth);
}

std::string encode_depth(const DepthMap& depth) {
  check_map(depth);
  ByteWriter w;
  w.put(kDepthMagic);
  w.put(static_cast<std::uint32_t>(depth.height));
  w.put(static_cast<std::uint32_t>(depth.width));
  for (float v : depth.data) w.put(v);
  return w.take();
}

DepthMap decode_depth(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.get<std::uint32_t>() != kDepthMagic) throw IoError("not a depth map (bad magic)");
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  if (h > (1u << 16) || w > (1u << 16)) throw IoError("depth map dimensions are implausible");
  if (static_cast<std::uint64_t>(h) * w * 4 != r.remaining()) throw IoError("depth map payload has the wrong size");
  DepthMap d(static_cast<int>(h), static_cast<int>(w));
  for (auto& v : d.data) {
    v = r.get<float>();
    if (!std::isfinite(v)) throw IoError("depth map holds a non-finite value");
  }
  return d;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  write_file(path.string(), encode_depth(depth));
}

DepthMap read_depth(const std::filesystem::path& path) { return decode_depth(read_file(path.string())); }

}  // namespace planfactory
