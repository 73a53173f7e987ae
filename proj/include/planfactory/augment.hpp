#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "planfactory/geometry.hpp"

namespace planfactory {

struct AugmentConfig {
  double edge_shift_std = 0.5;   // px
  double edge_shift_prob = 0.8;  // per grid node
  int blur_kernel_min = 3;       // odd
  int blur_kernel_max = 27;      // odd
  double blur_std_min = 1.0;
  double blur_std_max = 7.0;
  double hole_threshold_min = 0.7;
  double hole_threshold_max = 0.9;
  double hole_prob = 0.5;
  double max_depth = 0.30;  // m

  void validate() const;
  /// Rows of a [Depth Augmentation] section; unset rows keep their defaults.
  static AugmentConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
  /// The section, header included.
  std::string dump() const;
};

/// Per-pixel sampling offsets (rows then columns, in pixels).
struct ShiftField {
  int height = 0;
  int width = 0;
  std::vector<float> dr;
  std::vector<float> dc;
  std::size_t shifted = 0;  // nodes that drew a shift
};

/// Each node is shifted with probability edge_shift_prob by N(0, std) px
/// along both axes.
ShiftField sample_shift_field(int height, int width, const AugmentConfig& cfg, Rng& rng);

/// Bilinear resample at the shifted coordinates, clamped to the image. A
/// pixel whose stencil touches an invalid (0) pixel with nonzero weight is 0.
DepthMap warp(const DepthMap& depth, const ShiftField& field);

/// sample_shift_field then warp. `shifted`, if given, receives the number of
/// shifted nodes.
DepthMap edge_noise(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng, std::size_t* shifted = nullptr);

struct HoleInfo {
  bool applied = false;
  int kernel = 0;
  double sigma = 0.0;
  double threshold = 0.0;
  std::size_t zeroed = 0;  // mask pixels above the threshold
};

/// Separable Gaussian blur, odd kernel, border pixels repeated.
std::vector<double> gaussian_blur(const std::vector<double>& image, int height, int width, int kernel, double sigma);

/// Hole mask: uniform noise, blurred, min-max normalized to [0, 1]. A
/// constant mask normalizes to 0 everywhere.
std::vector<double> hole_mask(int height, int width, int kernel, double sigma, Rng& rng);

/// With probability hole_prob: pixels whose mask value exceeds a uniform
/// threshold are zeroed. Never creates a nonzero value.
DepthMap random_holes(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng, HoleInfo* info = nullptr);

/// min(depth, max) / max. Zero, negative and non-finite depths are invalid
/// and come out as 0.
DepthMap clamp_normalize(const DepthMap& depth, double max_depth = 0.30);

/// Edge noise, then holes, then clamp-normalize.
DepthMap augment_depth(const DepthMap& depth, const AugmentConfig& cfg, Rng& rng);

/// Depth file: u32 magic, u32 height, u32 width, then float32 row-major,
/// little-endian.
inline constexpr std::uint32_t kDepthMagic = 0x48545044;  // "DPTH"
std::string encode_depth(const DepthMap& depth);
DepthMap decode_depth(std::string_view bytes);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

}  // namespace planfactory
