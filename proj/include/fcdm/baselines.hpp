#pragma once

#include <cstddef>
#include <vector>

#include "fcdm/grid.hpp"
#include "fcdm/masking.hpp"

// Classical sinogram completion used as comparison floors.
namespace fcdm::baselines {

/// Each masked row is interpolated per detector bin between the nearest
/// known rows above and below; gaps at either end copy the nearest known
/// row. Throws when every row is masked.
Sinogram linear_interp_inpaint(const Sinogram& masked, const masking::MaskSpec& mask);

struct TvResult {
  Sinogram sinogram;
  /// Isotropic TV of every iterate that improved on the best so far,
  /// starting with the linear-interpolation fill.
  std::vector<double> accepted_objectives;
  std::size_t best_iteration = 0;
};

/// Isotropic total variation sum_ij |grad u|_2 with forward differences and
/// replicated borders.
double total_variation(const Sinogram& s);

/// Minimizes isotropic TV over the masked rows with known rows held fixed,
/// using primal-dual projected steps (dual iterate projected onto the unit
/// ball, primal iterate projected onto the known data), both with step
/// `step` (needs step^2 * 8 <= 1). Starts from the linear fill and keeps
/// the iterate with the lowest objective.
TvResult tv_inpaint_detailed(const Sinogram& masked, const masking::MaskSpec& mask, std::size_t iterations,
                             double step);

Sinogram tv_inpaint(const Sinogram& masked, const masking::MaskSpec& mask, std::size_t iterations = 200,
                    double step = 0.1);

}  // namespace fcdm::baselines
