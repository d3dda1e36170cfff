#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "btlab/geometry.hpp"

namespace btlab {

/// Multiplicities (and atom masses) at or below this are treated as zero.
inline constexpr double kZeroTheta = 1e-12;

struct Atom {
  Point at;
  double mass = 0.0;
};

/// Finite signed atomic measure on R^d.
///
/// `normalized()` merges atoms closer than kGeomTol and drops atoms whose
/// |mass| <= kZeroTheta; every operation returning a measure normalizes.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(std::vector<Atom> atoms);
  static AtomicMeasure dirac(const Point& p, double mass = 1.0);

  const std::vector<Atom>& atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }

  AtomicMeasure positive_part() const;
  AtomicMeasure negative_part() const;  // returned with nonnegative masses
  double total() const;                 // signed total
  double total_variation() const;       // mass of the measure
  double mass_at(const Point& p, double tol = kGeomTol) const;
  double measure_of(const BallRegion& region) const;
  AtomicMeasure restricted(const BallRegion& region) const;
  std::vector<Point> support() const;

  AtomicMeasure operator+(const AtomicMeasure& o) const;
  AtomicMeasure operator-(const AtomicMeasure& o) const;
  AtomicMeasure operator*(double s) const;

 private:
  std::vector<Atom> atoms_;
};

/// True iff every atom of a - b has |mass| <= tol.
bool approx_equal(const AtomicMeasure& a, const AtomicMeasure& b, double tol = 1e-9);

struct Edge {
  std::size_t tail = 0;
  std::size_t head = 0;
  double theta = 0.0;
};

/// Embedded weighted digraph: a rectifiable 1-current whose edges are
/// straight segments carrying positive multiplicity.
struct TrafficPath {
  std::vector<Point> vertices;
  std::vector<Edge> edges;

  static TrafficPath segment(const Point& a, const Point& b, double theta = 1.0);
  static TrafficPath polyline(std::span<const Point> pts, double theta = 1.0);

  bool empty() const { return edges.empty(); }
  int dim() const { return vertices.empty() ? 2 : vertices.front().dim; }
  double length(const Edge& e) const { return distance(vertices[e.tail], vertices[e.head]); }

  /// Geometric overlay of its own edges: coincident vertices merged,
  /// collinear overlaps split and summed, zero multiplicity dropped,
  /// negative multiplicity reversed.
  TrafficPath normalized() const;
  /// Throws DomainError when an invariant is broken.
  void validate(double ambient_radius = 0.0) const;
};

/// alpha-mass exponent, dimension and ambient radius.
struct Config {
  double alpha = 0.5;
  int dimension = 2;
  double ambient_radius = 10.0;

  void validate() const;
  /// alpha > 1 - 1/(d-1), the range in which limits of optima stay optimal.
  bool above_stability_threshold() const;
};

AtomicMeasure boundary(const TrafficPath& T);
double mass(const TrafficPath& T);
/// Sum of theta^alpha * length; alpha in [0, 1], with 0^0 taken as 0.
double alpha_mass(const TrafficPath& T, double alpha);

TrafficPath add(const TrafficPath& a, const TrafficPath& b);
TrafficPath subtract(const TrafficPath& a, const TrafficPath& b);
/// Multiplies every multiplicity by s; s < 0 reverses orientation.
TrafficPath scaled(const TrafficPath& T, double s);
/// Sum of many paths in one overlay pass.
TrafficPath sum(std::span<const TrafficPath> parts);

/// Equality as currents: mass(a - b) <= tol.
bool equivalent(const TrafficPath& a, const TrafficPath& b, double tol = 1e-9);

/// Edges split at every sphere of the region; sub-edges kept iff their
/// midpoint lies in the region.
TrafficPath restrict(const TrafficPath& T, const BallRegion& region);

/// Keeps only edges with theta > threshold.
TrafficPath restrict_multiplicity_above(const TrafficPath& T, double threshold);

/// A Lipschitz map with a known constant. `kind` names it for reporting.
struct LipschitzMap {
  std::string kind;
  double lipschitz = 1.0;
  int target_dim = 2;
  /// Nonlinear maps need edges refined before mapping vertices.
  bool nonlinear = false;
  std::function<Point(const Point&)> apply;

  static LipschitzMap identity(int dim);
  static LipschitzMap ball_projection(double radius, int dim);
  /// p -> A p + b, A row-major d x d; the constant is the spectral norm of A.
  static LipschitzMap affine(std::vector<double> matrix, const Point& offset);
  /// kind in {"identity", "ball_projection", "affine", "scaling"}.
  static LipschitzMap named(const std::string& kind, std::span<const double> params, int dim);
};

/// Maps vertices and re-embeds edges as segments. Nonlinear maps first
/// split each edge into pieces no longer than `max_piece` (0 = map's default).
TrafficPath push_forward(const TrafficPath& T, const LipschitzMap& f, double max_piece = 0.0);

/// One elementary piece of a multi-channel overlay: a segment and the signed
/// multiplicity each input contributes along the a -> b direction.
struct OverlayPiece {
  Point a, b;
  std::vector<double> theta;
};

/// Overlays several paths, splitting collinear overlaps, keeping track of
/// each input's share.
std::vector<OverlayPiece> overlay_channels(std::span<const TrafficPath> parts);

}  // namespace btlab
