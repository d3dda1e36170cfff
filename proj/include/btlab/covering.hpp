#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "btlab/currents.hpp"
#include "btlab/geometry.hpp"

namespace btlab {

struct NullSetCover {
  std::vector<Ball> balls;
  /// How centres were chosen; any covering works, this one is recorded.
  std::string center_rule = "greedy: one open ball centred at each point";
  int perturbation_attempts = 0;
  double radius_sum = 0.0;
  double restricted_alpha_mass = 0.0;      // of T on the closed union
  double restricted_alpha_mass_opt = 0.0;  // of T_opt on the closed union
};

/// Covers the finite set A by open balls with sum of radii < eps such that
/// both paths carry alpha-mass < eps on the closed union and no atom of
/// `boundary_atoms` sits on any sphere (radii perturbed by factors in
/// (1, 1 + 1e-6], at most 64 tries per ball).
NullSetCover cover_null_set(std::span<const Point> A, const TrafficPath& T,
                            const TrafficPath& T_opt,
                            std::span<const AtomicMeasure> boundary_atoms, double eps,
                            double alpha, std::uint64_t seed = 0);

BallRegion closed_union(std::span<const Ball> balls);

}  // namespace btlab
