#pragma once

#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "btlab/currents.hpp"

namespace btlab {

/// Polyline curve parametrized by arclength. A single waypoint is the
/// constant (empty) curve produced by degenerate restrictions.
struct Curve {
  std::vector<Point> waypoints;

  bool empty() const { return waypoints.size() < 2; }
  const Point& start() const { return waypoints.front(); }
  const Point& end() const { return waypoints.back(); }
  double length() const;
  Point at(double t) const;
  /// Injective trace: no repeated waypoint, non-constant.
  bool simple() const;
};

struct WeightedCurve {
  Curve curve;
  double weight = 0.0;
};

/// Finite weighted family of curves; the discrete good decomposition.
struct PathMeasure {
  std::vector<WeightedCurve> entries;

  double total_weight() const;
  /// Sum of weight * delta_start.
  AtomicMeasure start_measure() const;
  /// Sum of weight * delta_end.
  AtomicMeasure end_measure() const;
  PathMeasure scaled(double s) const;
};

inline constexpr double kNeverLeaves = std::numeric_limits<double>::infinity();

/// Cancels directed cycles of the support digraph (bottleneck subtraction).
TrafficPath remove_cycles(const TrafficPath& T);
bool is_acyclic(const TrafficPath& T);

/// Greedy source-to-sink path extraction with lexicographically smallest
/// next head. Requires an acyclic, balanced path.
PathMeasure good_decomposition(const TrafficPath& T);

/// Overlay of the weighted curve currents.
TrafficPath reconstruct(const PathMeasure& pi);

/// Measured residuals of the good-decomposition identities.
struct DecompositionCheck {
  double mass_residual = 0.0;      // |M(T) - sum w len|
  double boundary_residual = 0.0;  // |M(dT) - 2 sum w|
  double density_residual = 0.0;   // max over edges |theta - sum of traversing w|
  double reconstruction_residual = 0.0;  // M(reconstruct(pi) - T)
  bool endpoints_ok = true;        // starts on d_-T atoms, ends on d_+T atoms
  bool curves_simple = true;

  bool ok(double tol) const {
    return mass_residual <= tol && boundary_residual <= tol && density_residual <= tol &&
           reconstruction_residual <= tol && endpoints_ok && curves_simple;
  }
};
DecompositionCheck check_good_decomposition(const TrafficPath& T, const PathMeasure& pi);

/// inf{t : c(t) not in region}; kNeverLeaves if the curve stays inside.
double first_exit(const Curve& c, const BallRegion& region);
/// sup{t : c(t) not in region}; 0 if the curve is always inside.
double last_entry(const Curve& c, const BallRegion& region);

/// The part of c on [a, b] (b clamped to the length). a == b gives an
/// empty curve.
Curve restrict_curve(const Curve& c, double a, double b);

/// A restriction domain together with the ball whose exit/entry time cuts
/// the curves assigned to it.
struct Cell {
  BallRegion region;
  Ball parent;
};

enum class CutMode { kStartToFirstExit, kLastEntryToEnd };

/// Assigns each curve to the first cell containing its start (resp. end)
/// and keeps [0, first_exit(parent)] (resp. [last_entry(parent), end]).
/// Curves outside every cell are dropped. Returns the cut decomposition
/// and, per kept entry, the index of its cell.
struct CutResult {
  PathMeasure pi;
  std::vector<std::size_t> cell_of;
};
CutResult cut_decomposition(const PathMeasure& pi, std::span<const Cell> cells, CutMode mode);
TrafficPath cut_paths(const PathMeasure& pi, std::span<const Cell> cells, CutMode mode);

using CurvePredicate = std::function<bool(const Curve&)>;
CurvePredicate starts_in(BallRegion region);
CurvePredicate ends_in(BallRegion region);
CurvePredicate both(CurvePredicate a, CurvePredicate b);

std::pair<PathMeasure, TrafficPath> sub_decomposition(const PathMeasure& pi,
                                                      const CurvePredicate& keep);

/// sum over edges of min(theta, w)^alpha * length: the bound on any
/// sub-collection of total weight w.
double sub_decomposition_bound(const TrafficPath& T, double kept_weight, double alpha);

}  // namespace btlab
