#include "btlab/geometry.hpp"

#include <algorithm>
#include <cstdio>

namespace btlab {

Point Point::from(std::span<const double> coords) {
  if (coords.size() != 2 && coords.size() != 3)
    throw DomainError("point must have 2 or 3 coordinates, got " + std::to_string(coords.size()));
  Point p;
  p.dim = static_cast<int>(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) p.x[i] = coords[i];
  if (!p.finite()) throw DomainError("point has non-finite coordinates");
  return p;
}

bool Point::finite() const {
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

std::string to_string(const Point& p) {
  char buf[96];
  if (p.dim == 3)
    std::snprintf(buf, sizeof buf, "(%.12g, %.12g, %.12g)", p.x[0], p.x[1], p.x[2]);
  else
    std::snprintf(buf, sizeof buf, "(%.12g, %.12g)", p.x[0], p.x[1]);
  return buf;
}

Ball::Ball(Point c, double r, bool is_closed) : center(c), radius(r), closed(is_closed) {
  if (!(r > 0.0)) throw DomainError("ball radius must be positive");
}

bool Ball::contains(const Point& p) const {
  const double d = distance(p, center);
  return closed ? d <= radius : d < radius;
}

bool Ball::on_sphere(const Point& p, double tol) const {
  return std::abs(distance(p, center) - radius) <= tol;
}

BallRegion BallRegion::whole() {
  BallRegion r;
  r.complement = true;
  return r;
}

BallRegion BallRegion::ball(const Ball& b) { return union_of({b}); }

BallRegion BallRegion::union_of(std::vector<Ball> balls) {
  BallRegion r;
  r.include = std::move(balls);
  return r;
}

BallRegion BallRegion::difference_cell(std::span<const Ball> balls, std::size_t i) {
  BallRegion r;
  r.include.push_back(balls[i]);
  for (std::size_t j = 0; j < i; ++j) {
    Ball open = balls[j];
    open.closed = false;
    r.exclude.push_back(open);
  }
  return r;
}

bool BallRegion::contains(const Point& p) const {
  bool in = std::any_of(include.begin(), include.end(), [&](const Ball& b) { return b.contains(p); });
  if (in)
    in = std::none_of(exclude.begin(), exclude.end(), [&](const Ball& b) { return b.contains(p); });
  return in != complement;
}

BallRegion BallRegion::complemented() const {
  BallRegion r = *this;
  r.complement = !complement;
  return r;
}

std::vector<Ball> BallRegion::spheres() const {
  std::vector<Ball> out = include;
  out.insert(out.end(), exclude.begin(), exclude.end());
  return out;
}

std::vector<double> segment_sphere_crossings(const Point& a, const Point& b, const Ball& ball) {
  // |a - c + t (b - a)|^2 = r^2  ->  A t^2 + 2 B t + C = 0
  const Point d = b - a;
  const Point f = a - ball.center;
  const double A = d.norm2();
  if (A == 0.0) return {};
  const double B = f.dot(d);
  const double C = f.norm2() - ball.radius * ball.radius;
  double disc = B * B - A * C;
  std::vector<double> ts;
  if (disc < 0.0) {
    // Near-tangent: accept when the closest approach is within tolerance.
    const double t = -B / A;
    const double closest = (f + d * t).norm();
    if (std::abs(closest - ball.radius) <= kGeomTol && t > 0.0 && t < 1.0) ts.push_back(t);
    return ts;
  }
  const double s = std::sqrt(disc);
  // Numerically stable roots.
  const double q = -(B + std::copysign(s, B));
  double t1, t2;
  if (q != 0.0) {
    t1 = q / A;
    t2 = C / q;
  } else {
    t1 = t2 = 0.0;
  }
  if (t1 > t2) std::swap(t1, t2);
  for (double t : {t1, t2})
    if (t > 0.0 && t < 1.0 && (ts.empty() || t != ts.back())) ts.push_back(t);
  return ts;
}

Point project_to_ball(const Point& p, double ambient_radius) {
  const double n = p.norm();
  if (n <= ambient_radius) return p;
  return p * (ambient_radius / n);
}

std::vector<Ball> cover_compact(std::span<const Point> K, double r, double ambient_radius) {
  if (K.empty()) throw DomainError("empty compact set");
  if (!(r > 0.0)) throw DomainError("covering scale r must be positive");
  for (const Point& p : K)
    if (p.norm() > ambient_radius + kGeomTol)
      throw DomainError("point " + to_string(p) + " lies outside the ambient ball");
  // A point not yet covered by an open radius-r/4 ball becomes a new centre,
  // so chosen centres are >= r/4 apart and their r/20 balls are disjoint.
  const double rho = r / 4.0;
  std::vector<Ball> balls;
  for (const Point& p : K) {
    const bool covered =
        std::any_of(balls.begin(), balls.end(), [&](const Ball& b) { return b.contains(p); });
    if (!covered) balls.emplace_back(p, rho, false);
  }
  return balls;
}

double vitali_packing_bound(double r, double ambient_radius, int dim) {
  return std::floor(std::pow((ambient_radius + r) / (r / 20.0), dim));
}

}  // namespace btlab
