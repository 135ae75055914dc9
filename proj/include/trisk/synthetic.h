#pragma once

#include "trisk/marginal.h"
#include "trisk/rng.h"
#include "trisk/triangles.h"

#include <vector>

namespace trisk {

/// Observed triangle drawn from a model: per accident semester the
/// decorrelated innovations `u` (row-major over the upper set) are coloured
/// with the AR(1) Cholesky factor and mapped through the Tweedie quantile.
LossTriangle synthesize_line(const MarginalModel& truth, std::vector<double> premiums,
                             const std::vector<double>& u, int table_intervals = 256);

/// Same with independent standard normal innovations.
LossTriangle synthesize_line(const MarginalModel& truth, std::vector<double> premiums, Engine& rng,
                             int table_intervals = 256);

}  // namespace trisk
