#include "fcdm/baselines.hpp"

#include <cmath>
#include <string>

#include "fcdm/error.hpp"

namespace fcdm::baselines {
namespace {

void check(const Sinogram& masked, const masking::MaskSpec& mask) {
  if (mask.n_angles != masked.n_angles) {
    throw ContractViolation("baseline: mask covers " + std::to_string(mask.n_angles) + " angles, sinogram has " +
                            std::to_string(masked.n_angles));
  }
  if (mask.masked.size() >= masked.n_angles) {
    throw ContractViolation("baseline: every angle is masked, nothing to interpolate from");
  }
}

}  // namespace

Sinogram linear_interp_inpaint(const Sinogram& masked, const masking::MaskSpec& mask) {
  check(masked, mask);
  const auto flags = masking::row_flags(mask);
  const std::size_t A = masked.n_angles, D = masked.n_detectors;
  Sinogram out = masked;
  std::size_t a = 0;
  while (a < A) {
    if (!flags[a]) {
      ++a;
      continue;
    }
    std::size_t end = a;
    while (end < A && flags[end]) ++end;
    // Gap [a, end); neighbours a - 1 and end when they exist.
    const bool has_lo = a > 0, has_hi = end < A;
    for (std::size_t r = a; r < end; ++r) {
      for (std::size_t d = 0; d < D; ++d) {
        if (has_lo && has_hi) {
          const double t = static_cast<double>(r - (a - 1)) / static_cast<double>(end - (a - 1));
          out.at(r, d) = (1.0 - t) * masked.at(a - 1, d) + t * masked.at(end, d);
        } else {
          out.at(r, d) = has_lo ? masked.at(a - 1, d) : masked.at(end, d);
        }
      }
    }
    a = end;
  }
  return out;
}

double total_variation(const Sinogram& s) {
  const std::size_t A = s.n_angles, D = s.n_detectors;
  double tv = 0.0;
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t d = 0; d < D; ++d) {
      const double dy = a + 1 < A ? s.at(a + 1, d) - s.at(a, d) : 0.0;
      const double dx = d + 1 < D ? s.at(a, d + 1) - s.at(a, d) : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

TvResult tv_inpaint_detailed(const Sinogram& masked, const masking::MaskSpec& mask, std::size_t iterations,
                             double step) {
  check(masked, mask);
  if (iterations < 1) throw ContractViolation("tv_inpaint: iterations must be >= 1");
  if (!(step > 0.0) || step * step * 8.0 > 1.0) {
    throw ContractViolation("tv_inpaint: step must satisfy 0 < step <= 1/sqrt(8)");
  }
  const std::size_t A = masked.n_angles, D = masked.n_detectors;
  const auto flags = masking::row_flags(mask);

  Sinogram u = linear_interp_inpaint(masked, mask);
  Sinogram bar = u;
  std::vector<double> px(A * D, 0.0), py(A * D, 0.0);

  TvResult result{u, {total_variation(u)}, 0};
  if (mask.masked.empty()) return result;
  double best = result.accepted_objectives.front();

  for (std::size_t it = 1; it <= iterations; ++it) {
    // Dual ascent on p, projected onto the pointwise unit ball.
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t i = a * D + d;
        const double gy = a + 1 < A ? bar.at(a + 1, d) - bar.at(a, d) : 0.0;
        const double gx = d + 1 < D ? bar.at(a, d + 1) - bar.at(a, d) : 0.0;
        const double qx = px[i] + step * gx, qy = py[i] + step * gy;
        const double norm = std::max(1.0, std::sqrt(qx * qx + qy * qy));
        px[i] = qx / norm;
        py[i] = qy / norm;
      }
    }
    // Primal descent along div p on masked rows only (known rows are the
    // projection onto the data constraint).
    Sinogram next = u;
    for (std::size_t a : mask.masked) {
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t i = a * D + d;
        double div = 0.0;
        div += (d + 1 < D ? px[i] : 0.0) - (d > 0 ? px[i - 1] : 0.0);
        div += (a + 1 < A ? py[i] : 0.0) - (a > 0 ? py[i - D] : 0.0);
        next.at(a, d) = u.at(a, d) + step * div;
      }
    }
    for (std::size_t a = 0; a < A; ++a) {
      if (!flags[a]) continue;
      for (std::size_t d = 0; d < D; ++d) bar.at(a, d) = 2.0 * next.at(a, d) - u.at(a, d);
    }
    u = std::move(next);

    const double obj = total_variation(u);
    if (!std::isfinite(obj)) throw NumericalError("tv_inpaint: non-finite objective at iteration " + std::to_string(it));
    if (obj < best) {
      best = obj;
      result.sinogram = u;
      result.best_iteration = it;
      result.accepted_objectives.push_back(obj);
    }
  }
  return result;
}

Sinogram tv_inpaint(const Sinogram& masked, const masking::MaskSpec& mask, std::size_t iterations, double step) {
  return tv_inpaint_detailed(masked, mask, iterations, step).sinogram;
}

}  // namespace fcdm::baselines
