#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedcascade {

struct SweepAxis {
  std::string name;
  std::vector<nlohmann::json> values;
};

struct SweepCell {
  std::vector<nlohmann::json> coords;  // one value per axis
  std::vector<double> metrics;         // one per seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single seed
  bool failed = false;
  std::string error;
};

/// Evaluates one cell for one seed and returns its metric.
using CellFn = std::function<double(const std::vector<nlohmann::json>& coords, std::uint64_t seed)>;

/// Runs every cell of the grid in row-major order (last axis fastest) for each
/// seed. A cell whose closure throws is marked failed; the sweep carries on.
/// Throws std::invalid_argument for empty axes or no seeds.
std::vector<SweepCell> grid_sweep(const std::vector<SweepAxis>& axes, const std::vector<std::uint64_t>& seeds,
                                  const CellFn& fn, int jobs = 1);

/// Header: axis names, then mean,std,n,status. Failed cells have empty
/// metric columns and status "failed: <message>".
std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepCell>& cells);

}  // namespace pedcascade
