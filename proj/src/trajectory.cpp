#include "seirhcd/trajectory.hpp"

#include <cmath>
#include <fmt/format.h>

namespace seirhcd {

const StateField* Trajectory::find(double t, double tolerance) const
{
  for (std::size_t n = 0; n < times.size(); ++n)
    if (std::abs(times[n] - t) <= tolerance) return &snapshots[n];
  return nullptr;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::optional<std::string>& solver)
{
  if (solver) out << "solver,";
  out << "t,x,s,e,i,r,h,c,d\n";
  for (std::size_t n = 0; n < traj.times.size(); ++n) {
    const StateField& f = traj.snapshots[n];
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (solver) out << *solver << ',';
      out << fmt::format("{:.17g},{:.17g}", traj.times[n], k * f.h());
      for (const auto& arr : f.u) out << fmt::format(",{:.17g}", arr[k]);
      out << '\n';
    }
  }
}

}  // namespace seirhcd
