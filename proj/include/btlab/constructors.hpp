#pragma once

#include <vector>

#include "btlab/currents.hpp"
#include "btlab/decomposition.hpp"

namespace btlab {

/// Wraps the disk B^2(0, pi r) onto the sphere of `sphere` (d = 3): the
/// centre goes to the antipode of `puncture`, radial lines to meridians
/// (geodesic distance = disk radius), the boundary circle to the puncture.
/// 1-Lipschitz, injective off the boundary circle.
struct SphereWrapMap {
  Ball sphere;
  Point puncture;
  Point pole;    // antipode of the puncture, image of the disk centre
  Point e1, e2;  // orthonormal tangent frame at the pole

  SphereWrapMap(const Ball& s, const Point& puncture_point);
  double disk_radius() const;
  Point apply(const Point& disk_point) const;
  /// Inverse on the sphere minus the puncture.
  Point inverse(const Point& on_sphere) const;
  LipschitzMap as_map() const;
};

/// Puncture for a wrap of `sphere`: among a fixed spiral of candidates, the
/// one farthest from every atom.
Point choose_puncture(const Ball& sphere, std::span<const Point> avoid);

/// Hierarchical 2^d-tree transport of a single source atom onto `target`.
/// Each cell centre ships the mass of each nonempty child to the child's
/// centre; a cell holding one atom location ships straight to it.
TrafficPath dyadic_irrigation(const AtomicMeasure& source, const AtomicMeasure& target, double alpha);

/// Transport along the sphere boundary between atoms lying on it.
/// d = 2: flows on circular arcs (the cheapest cut arc), polygonised with
/// `segments_per_circle` chords per full turn. d = 3: wrap map + dyadic
/// irrigation in the disk + push-forward.
TrafficPath sphere_transport(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, const Ball& sphere,
                             double alpha, int segments_per_circle = 32);

/// Star through `apex`.
TrafficPath cone_transport(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, const Point& apex,
                           double alpha);

/// alpha_mass(T) / (M^alpha * scale): the measured constant of a bound of
/// the form C M^alpha L.
double measured_constant(const TrafficPath& T, double total_mass, double alpha, double scale);

struct SubtransportReport {
  TrafficPath path;
  double cost = 0.0;
  bool within_eps = false;
  double r = 0.0;  // a third of the distance between the boundary supports
  std::vector<Ball> covers_minus, covers_plus;
  std::vector<Point> y_minus, y_plus;
  AtomicMeasure sigma_minus, sigma_plus;
  double cost_cut_minus = 0.0, cost_conn_minus = 0.0, cost_graph = 0.0, cost_conn_plus = 0.0,
         cost_cut_plus = 0.0;
  // sum over edges of min(theta, nu mass)^alpha len, bounding each cut piece
  double cut_bound = 0.0;
};

/// A transport from nu_minus to nu_plus built from a good decomposition of
/// T: reweighted curves are cut at the boundary of covers of the two
/// supports, joined on the spheres to one point per ball, and the two point
/// sets bridged by a cone.
SubtransportReport cheap_subtransport(const TrafficPath& T, const PathMeasure& pi, const AtomicMeasure& nu_minus,
                                      const AtomicMeasure& nu_plus, double eps, const Config& cfg);

}  // namespace btlab
