#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcdm/grid.hpp"

namespace fcdm::phantom {

/// One ellipse of an additive phantom, in normalized coordinates where the
/// inscribed circle has radius 1 and y points up.
struct Ellipse {
  double intensity;
  double semi_x;
  double semi_y;
  double center_x;
  double center_y;
  double angle_deg;
};

/// The modified (high-contrast) 10-ellipse Shepp-Logan table.
std::span<const Ellipse> shepp_logan_table();

/// Renders an ellipse sum at pixel centres, clipped to [0, 1]. `rotation_deg`
/// rotates the whole phantom about the image centre.
Image render_ellipses(std::size_t size, std::span<const Ellipse> ellipses, double rotation_deg = 0.0);

Image shepp_logan(std::size_t size);

enum class ShapeKind { circle, rectangle, triangle };

/// Geometry in pixel units relative to the image centre (y up).
/// circle: (cx, cy, radius); rectangle: (cx, cy, half_w, half_h, angle);
/// triangle: three vertices.
struct Shape {
  ShapeKind kind = ShapeKind::circle;
  double intensity = 1.0;
  double cx = 0, cy = 0;
  double radius = 0;
  double half_w = 0, half_h = 0, angle = 0;
  double vx[3] = {0, 0, 0};
  double vy[3] = {0, 0, 0};
};

/// Anti-aliased rendering (4x4 supersampling per pixel), shapes composited
/// by maximum, then clipped to the inscribed circle.
Image render_shapes(std::size_t size, std::span<const Shape> shapes);

/// Draws 1..max_shapes random shapes with intensities in [0.2, 1.0].
std::vector<Shape> draw_shapes(std::size_t size, std::uint64_t seed, std::size_t max_shapes);
Image random_shapes(std::size_t size, std::uint64_t seed, std::size_t max_shapes);

enum class DatasetKind { shepp, shapes };
DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

/// Per-sample Shepp-Logan variant: every ellipse intensity scaled by a
/// factor in [0.9, 1.1], whole phantom rotated by an angle in [-5, 5] deg.
Image perturbed_shepp_logan(std::size_t size, std::uint64_t seed);

/// Sample i of a dataset, seeded with mix_seed(seed, i).
Image dataset_sample(DatasetKind kind, std::size_t size, std::uint64_t seed, std::size_t index,
                     std::size_t max_shapes = 6);

struct DatasetManifest {
  DatasetKind kind = DatasetKind::shepp;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> images;
};

/// Writes `count` image tensor files plus manifest.json into out_dir.
DatasetManifest gen_dataset(DatasetKind kind, std::size_t count, std::size_t size, std::uint64_t seed,
                            const std::filesystem::path& out_dir);

}  // namespace fcdm::phantom
