#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btlab {

/// Tolerance for on-sphere and coincidence tests (length units).
inline constexpr double kGeomTol = 1e-9;

/// Raised when inputs violate a documented precondition.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point of R^d, d in {2, 3}. Unused trailing coordinates stay zero.
struct Point {
  std::array<double, 3> x{0.0, 0.0, 0.0};
  int dim = 2;

  Point() = default;
  Point(double a, double b) : x{a, b, 0.0}, dim(2) {}
  Point(double a, double b, double c) : x{a, b, c}, dim(3) {}

  static Point zero(int d) {
    Point p;
    p.dim = d;
    return p;
  }
  static Point from(std::span<const double> coords);

  double operator[](std::size_t i) const { return x[i]; }
  double& operator[](std::size_t i) { return x[i]; }

  Point& operator+=(const Point& o) {
    for (int i = 0; i < 3; ++i) x[i] += o.x[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    for (int i = 0; i < 3; ++i) x[i] -= o.x[i];
    return *this;
  }
  Point& operator*=(double s) {
    for (auto& v : x) v *= s;
    return *this;
  }

  double dot(const Point& o) const { return x[0] * o.x[0] + x[1] * o.x[1] + x[2] * o.x[2]; }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  bool finite() const;

  /// Lexicographic order on coordinates; used for deterministic tie-breaks.
  friend bool operator<(const Point& a, const Point& b) { return a.x < b.x; }
  friend bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.dim == b.dim; }
};

inline Point operator+(Point a, const Point& b) { return a += b; }
inline Point operator-(Point a, const Point& b) { return a -= b; }
inline Point operator*(Point a, double s) { return a *= s; }
inline Point operator*(double s, Point a) { return a *= s; }
inline Point operator-(Point a) { return a *= -1.0; }

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }
inline bool near(const Point& a, const Point& b, double tol = kGeomTol) {
  return distance(a, b) <= tol;
}
/// Linear interpolation a + t (b - a).
inline Point lerp(const Point& a, const Point& b, double t) { return a + (b - a) * t; }

std::string to_string(const Point& p);

struct Ball {
  Point center;
  double radius = 0.0;
  bool closed = false;

  Ball() = default;
  Ball(Point c, double r, bool is_closed = false);

  bool contains(const Point& p) const;
  bool on_sphere(const Point& p, double tol = kGeomTol) const;
};

/// Boolean combination of balls: (union of `include`) minus (union of
/// `exclude`, always taken open), optionally complemented.
///
/// A cell C_i = B_i \ (B_1 u ... u B_{i-1}) is `difference_cell`.
/// The empty region is `{}`; the whole space is `whole()`.
struct BallRegion {
  std::vector<Ball> include;
  std::vector<Ball> exclude;
  bool complement = false;

  static BallRegion whole();
  static BallRegion ball(const Ball& b);
  static BallRegion union_of(std::vector<Ball> balls);
  /// Cell i of the set-difference chain over `balls` (0-based).
  static BallRegion difference_cell(std::span<const Ball> balls, std::size_t i);

  bool contains(const Point& p) const;
  BallRegion complemented() const;
  /// Every ball whose sphere can change membership.
  std::vector<Ball> spheres() const;
};

/// Parameters t in (0, 1) at which a + t (b - a) crosses the sphere of `ball`,
/// sorted ascending. Tangential touches are reported once.
std::vector<double> segment_sphere_crossings(const Point& a, const Point& b, const Ball& ball);

/// Closest-point projection onto the closed ball of radius R centred at 0.
Point project_to_ball(const Point& p, double ambient_radius);

/// Covering of a finite set K by balls centred in K of radius r/4 (< r/3)
/// whose radius-r/20 shrinks are pairwise disjoint (greedy Vitali selection).
std::vector<Ball> cover_compact(std::span<const Point> K, double r, double ambient_radius);

/// Volume bound on the number of disjoint radius-r/20 balls inside the
/// r-neighbourhood of the ambient ball: floor(((R + r) / (r / 20))^d).
double vitali_packing_bound(double r, double ambient_radius, int dim);

}  // namespace btlab
