#include "fcdm/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>

#include "fcdm/error.hpp"
#include "fcdm/rng.hpp"
#include "fcdm/tensor_io.hpp"

namespace fcdm::phantom {
namespace {

constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

void check_size(std::size_t size) {
  if (size < 16 || size % 2 != 0) {
    throw ContractViolation("phantom size must be even and >= 16, got " + std::to_string(size));
  }
}

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

bool inside(const Shape& s, double x, double y) {
  switch (s.kind) {
    case ShapeKind::circle: {
      const double dx = x - s.cx, dy = y - s.cy;
      return dx * dx + dy * dy <= s.radius * s.radius;
    }
    case ShapeKind::rectangle: {
      const double c = std::cos(s.angle), sn = std::sin(s.angle);
      const double dx = x - s.cx, dy = y - s.cy;
      const double u = c * dx + sn * dy, v = -sn * dx + c * dy;
      return std::abs(u) <= s.half_w && std::abs(v) <= s.half_h;
    }
    case ShapeKind::triangle: {
      auto edge = [&](int a, int b) {
        return (s.vx[b] - s.vx[a]) * (y - s.vy[a]) - (s.vy[b] - s.vy[a]) * (x - s.vx[a]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      const bool has_neg = e0 < 0 || e1 < 0 || e2 < 0;
      const bool has_pos = e0 > 0 || e1 > 0 || e2 > 0;
      return !(has_neg && has_pos);
    }
  }
  return false;
}

}  // namespace

std::span<const Ellipse> shepp_logan_table() { return kSheppLogan; }

Image render_ellipses(std::size_t size, std::span<const Ellipse> ellipses, double rotation_deg) {
  check_size(size);
  Image img(size);
  const double half = static_cast<double>(size) / 2.0;
  const double c0 = (static_cast<double>(size) - 1.0) / 2.0;
  const double rc = std::cos(deg2rad(rotation_deg)), rs = std::sin(deg2rad(rotation_deg));
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double px = (static_cast<double>(c) - c0) / half;
      const double py = (c0 - static_cast<double>(r)) / half;
      // Undo the phantom rotation on the sample point.
      const double x = rc * px + rs * py;
      const double y = -rs * px + rc * py;
      double v = 0.0;
      for (const Ellipse& e : ellipses) {
        const double ca = std::cos(deg2rad(e.angle_deg)), sa = std::sin(deg2rad(e.angle_deg));
        const double dx = x - e.center_x, dy = y - e.center_y;
        const double u = (ca * dx + sa * dy) / e.semi_x;
        const double w = (-sa * dx + ca * dy) / e.semi_y;
        if (u * u + w * w <= 1.0) v += e.intensity;
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

Image shepp_logan(std::size_t size) { return render_ellipses(size, kSheppLogan); }

Image perturbed_shepp_logan(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::array<Ellipse, 10> table = kSheppLogan;
  for (Ellipse& e : table) e.intensity *= rng.uniform(0.9, 1.1);
  const double rotation = rng.uniform(-5.0, 5.0);
  return render_ellipses(size, table, rotation);
}

Image render_shapes(std::size_t size, std::span<const Shape> shapes) {
  check_size(size);
  constexpr int kSub = 4;
  Image img(size);
  const double c0 = (static_cast<double>(size) - 1.0) / 2.0;
  const double radius = static_cast<double>(size) / 2.0;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double px = static_cast<double>(c) - c0;
      const double py = c0 - static_cast<double>(r);
      if (px * px + py * py >= (radius - 0.5) * (radius - 0.5)) continue;
      double v = 0.0;
      for (const Shape& s : shapes) {
        int hits = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            const double x = px - 0.5 + (sx + 0.5) / kSub;
            const double y = py - 0.5 + (sy + 0.5) / kSub;
            hits += inside(s, x, y) ? 1 : 0;
          }
        }
        v = std::max(v, s.intensity * hits / double(kSub * kSub));
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<Shape> draw_shapes(std::size_t size, std::uint64_t seed, std::size_t max_shapes) {
  check_size(size);
  if (max_shapes < 1 || max_shapes > 16) {
    throw ContractViolation("max_shapes must be in [1, 16], got " + std::to_string(max_shapes));
  }
  Rng rng(seed);
  const double R = static_cast<double>(size) / 2.0;
  const std::size_t count = 1 + rng.below(max_shapes);
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < count; ++i) {
    Shape s;
    s.kind = static_cast<ShapeKind>(rng.below(3));
    s.intensity = rng.uniform(0.2, 1.0);
    const double rho = 0.5 * R * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.cx = rho * std::cos(phi);
    s.cy = rho * std::sin(phi);
    switch (s.kind) {
      case ShapeKind::circle:
        s.radius = rng.uniform(0.08, 0.35) * R;
        break;
      case ShapeKind::rectangle:
        s.half_w = rng.uniform(0.08, 0.3) * R;
        s.half_h = rng.uniform(0.08, 0.3) * R;
        s.angle = rng.uniform(0.0, std::numbers::pi);
        break;
      case ShapeKind::triangle:
        for (int v = 0; v < 3; ++v) {
          const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
          const double d = rng.uniform(0.1, 0.35) * R;
          s.vx[v] = s.cx + d * std::cos(a);
          s.vy[v] = s.cy + d * std::sin(a);
        }
        break;
    }
    shapes.push_back(s);
  }
  return shapes;
}

Image random_shapes(std::size_t size, std::uint64_t seed, std::size_t max_shapes) {
  const auto shapes = draw_shapes(size, seed, max_shapes);
  return render_shapes(size, shapes);
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "shepp") return DatasetKind::shepp;
  if (name == "shapes") return DatasetKind::shapes;
  throw ContractViolation("unknown dataset kind '" + name + "' (expected shepp|shapes)");
}

std::string to_string(DatasetKind kind) { return kind == DatasetKind::shepp ? "shepp" : "shapes"; }

Image dataset_sample(DatasetKind kind, std::size_t size, std::uint64_t seed, std::size_t index,
                     std::size_t max_shapes) {
  const std::uint64_t s = mix_seed(seed, index);
  return kind == DatasetKind::shepp ? perturbed_shepp_logan(size, s) : random_shapes(size, s, max_shapes);
}

DatasetManifest gen_dataset(DatasetKind kind, std::size_t count, std::size_t size, std::uint64_t seed,
                            const std::filesystem::path& out_dir) {
  check_size(size);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest{kind, size, seed, {}};
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "image_%05zu.sint", i);
    io::write_tensor(out_dir / name, to_tensor(dataset_sample(kind, size, seed, i)));
    manifest.images.emplace_back(name);
  }

  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["size"] = size;
  j["seed"] = seed;
  j["count"] = count;
  j["images"] = manifest.images;
  io::write_text(out_dir / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

}  // namespace fcdm::phantom
