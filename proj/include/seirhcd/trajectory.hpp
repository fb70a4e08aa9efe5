#pragma once

#include "seirhcd/model.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace seirhcd {

/// Snapshots of a spatial run. Daily snapshots plus t = 0 unless full resolution was requested.
struct Trajectory {
  std::vector<double> times;
  std::vector<StateField> snapshots;
  std::size_t clamp_count = 0;  // densities reset to 0 after going negative

  /// Snapshot whose time is within half a step of `t`, if any.
  const StateField* find(double t, double tolerance = 1e-6) const;
};

/// Long-format CSV: header `t,x,s,e,i,r,h,c,d` (with a leading `solver` column when given).
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::optional<std::string>& solver = std::nullopt);

}  // namespace seirhcd
