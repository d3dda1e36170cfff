#include "btlab/constructors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace btlab {

namespace {

constexpr double kPi = std::numbers::pi;

Point cross(const Point& a, const Point& b) {
  return Point(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

void require_balanced(const AtomicMeasure& minus, const AtomicMeasure& plus) {
  const double a = minus.total(), b = plus.total();
  if (std::abs(a - b) > 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b))))
    throw DomainError("unbalanced masses");
}

void require_nonnegative(const AtomicMeasure& m) {
  for (const Atom& a : m.atoms())
    if (a.mass < 0) throw DomainError("marginals must be nonnegative");
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
}

}  // namespace

// --------------------------------------------------------------- wrap map

SphereWrapMap::SphereWrapMap(const Ball& s, const Point& puncture_point) : sphere(s), puncture(puncture_point) {
  if (s.center.dim != 3) throw DomainError("sphere wrap needs d = 3");
  if (!s.on_sphere(puncture_point, kGeomTol * std::max(1.0, s.radius)))
    throw DomainError("puncture must lie on the sphere");
  pole = s.center * 2.0 - puncture;
  const Point n = (pole - s.center) * (1.0 / s.radius);
  // least aligned axis for a stable frame
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[k])) k = i;
  Point axis = Point::zero(3);
  axis[k] = 1.0;
  e1 = axis - n * axis.dot(n);
  e1 *= 1.0 / e1.norm();
  e2 = cross(n, e1);
}

double SphereWrapMap::disk_radius() const { return kPi * sphere.radius; }

Point SphereWrapMap::apply(const Point& q) const {
  const double r = sphere.radius;
  double s = std::hypot(q[0], q[1]);
  if (s <= 1e-300) return pole;
  const double u = q[0] / s, v = q[1] / s;
  s = std::min(s, disk_radius());
  const double phi = s / r;
  const Point n = (pole - sphere.center) * (1.0 / r);
  return sphere.center + (n * std::cos(phi) + (e1 * u + e2 * v) * std::sin(phi)) * r;
}

Point SphereWrapMap::inverse(const Point& x) const {
  const double r = sphere.radius;
  Point m = x - sphere.center;
  m *= 1.0 / m.norm();
  const Point n = (pole - sphere.center) * (1.0 / r);
  const double c = m.dot(n);
  const Point w = m - n * c;
  const double sn = w.norm();
  if (sn <= 1e-15) {
    if (c < 0) throw DomainError("the puncture has no preimage");
    return Point(0.0, 0.0);
  }
  const double phi = std::atan2(sn, c);
  return Point(r * phi * w.dot(e1) / sn, r * phi * w.dot(e2) / sn);
}

LipschitzMap SphereWrapMap::as_map() const {
  LipschitzMap f;
  f.kind = "sphere_wrap";
  f.lipschitz = 1.0;
  f.target_dim = 3;
  f.nonlinear = true;
  const SphereWrapMap self = *this;
  f.apply = [self](const Point& p) { return self.apply(p); };
  return f;
}

Point choose_puncture(const Ball& sphere, std::span<const Point> avoid) {
  // Fibonacci spiral, deterministic
  const int n = 256;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  Point best = sphere.center + Point(0, 0, sphere.radius);
  double best_d = -1.0;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rho = std::sqrt(1.0 - z * z);
    const Point p = sphere.center + Point(rho * std::cos(golden * i), rho * std::sin(golden * i), z) * sphere.radius;
    double d = INFINITY;
    for (const Point& a : avoid) d = std::min(d, distance(a, p));
    if (d > best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

// ------------------------------------------------------ dyadic irrigation

namespace {

void dyadic_cell(const Point& centre, double h, const std::vector<Atom>& atoms, std::vector<TrafficPath>& out) {
  const Point& first = atoms.front().at;
  bool single = true;
  double m = 0;
  for (const Atom& a : atoms) {
    m += a.mass;
    single = single && near(a.at, first);
  }
  if (single) {
    out.push_back(TrafficPath::segment(centre, first, m));
    return;
  }
  const int d = centre.dim;
  std::vector<std::vector<Atom>> child(std::size_t{1} << d);
  for (const Atom& a : atoms) {
    std::size_t idx = 0;
    for (int k = 0; k < d; ++k)
      if (a.at[k] >= centre[k]) idx |= std::size_t{1} << k;
    child[idx].push_back(a);
  }
  for (std::size_t idx = 0; idx < child.size(); ++idx) {
    if (child[idx].empty()) continue;
    Point c = centre;
    for (int k = 0; k < d; ++k) c[k] += (idx >> k & 1u) ? h / 2 : -h / 2;
    double cm = 0;
    for (const Atom& a : child[idx]) cm += a.mass;
    out.push_back(TrafficPath::segment(centre, c, cm));
    dyadic_cell(c, h / 2, child[idx], out);
  }
}

}  // namespace

TrafficPath dyadic_irrigation(const AtomicMeasure& source, const AtomicMeasure& target, double alpha) {
  require_alpha(alpha);
  if (source.size() != 1 || source.atoms()[0].mass <= 0) throw DomainError("source must be a single positive atom");
  require_nonnegative(target);
  require_balanced(source, target);
  const Point x0 = source.atoms()[0].at;
  const int d = x0.dim;
  if (alpha <= 1.0 - 1.0 / d) throw DomainError("below irrigability threshold");
  double h = 0;
  for (const Atom& a : target.atoms())
    for (int k = 0; k < d; ++k) h = std::max(h, std::abs(a.at[k] - x0[k]));
  if (h <= kGeomTol) return {};
  std::vector<TrafficPath> parts;
  dyadic_cell(x0, h, target.atoms(), parts);
  return sum(parts);
}

// -------------------------------------------------------- sphere transport

namespace {

TrafficPath circle_transport(const AtomicMeasure& net, const Ball& sphere, double alpha, int per_circle) {
  struct Node {
    double angle;
    Point at;
    double b;
  };
  std::vector<Node> nodes;
  for (const Atom& a : net.atoms()) {
    double ang = std::atan2(a.at[1] - sphere.center[1], a.at[0] - sphere.center[0]);
    if (ang < 0) ang += 2 * kPi;
    nodes.push_back({ang, a.at, a.mass});
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node& x, const Node& y) { return x.angle < y.angle; });
  const std::size_t K = nodes.size();
  const double step = 2 * kPi / per_circle;

  // arc k runs counter-clockwise from node k to node k+1
  std::vector<std::vector<Point>> arcs(K);
  std::vector<double> arc_len(K, 0.0), F(K, 0.0);
  double acc = 0;
  for (std::size_t k = 0; k < K; ++k) {
    acc -= nodes[k].b;
    F[k] = acc;
    const double a0 = nodes[k].angle;
    double a1 = k + 1 < K ? nodes[k + 1].angle : nodes[0].angle + 2 * kPi;
    const double span = a1 - a0;
    const int pieces = std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
    auto& pts = arcs[k];
    pts.push_back(nodes[k].at);
    for (int i = 1; i < pieces; ++i) {
      const double t = a0 + span * i / pieces;
      pts.push_back(sphere.center + Point(std::cos(t), std::sin(t)) * sphere.radius);
    }
    pts.push_back(nodes[(k + 1) % K].at);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) arc_len[k] += distance(pts[i], pts[i + 1]);
  }
  // flow on arc k is c + F[k]; the cost is concave in c between breakpoints
  double best = INFINITY, best_c = 0;
  for (std::size_t j = 0; j < K; ++j) {
    const double c = -F[j];
    double cost = 0;
    for (std::size_t k = 0; k < K; ++k)
      if (k != j) cost += std::pow(std::abs(c + F[k]), alpha) * arc_len[k];
    if (cost < best - 1e-15 * std::max(1.0, best)) {
      best = cost;
      best_c = c;
    }
  }
  std::vector<TrafficPath> parts;
  for (std::size_t k = 0; k < K; ++k) {
    const double f = best_c + F[k];
    if (std::abs(f) <= kZeroTheta) continue;
    parts.push_back(TrafficPath::polyline(arcs[k], f));
  }
  return sum(parts);
}

}  // namespace

TrafficPath sphere_transport(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, const Ball& sphere,
                             double alpha, int segments_per_circle) {
  require_alpha(alpha);
  const int d = sphere.center.dim;
  if (segments_per_circle < 3) throw DomainError("need at least 3 segments per circle");
  if (d == 3 && alpha <= 0.5) throw DomainError("below sphere transport threshold");
  require_nonnegative(mu_minus);
  require_nonnegative(mu_plus);
  require_balanced(mu_minus, mu_plus);
  const double tol = kGeomTol * std::max(1.0, sphere.radius);
  for (const AtomicMeasure* m : {&mu_minus, &mu_plus})
    for (const Atom& a : m->atoms())
      if (!sphere.on_sphere(a.at, tol)) throw DomainError("atom off sphere: " + to_string(a.at));
  const AtomicMeasure net = mu_plus - mu_minus;
  if (net.empty()) return {};
  if (d == 2) return circle_transport(net, sphere, alpha, segments_per_circle);

  std::vector<Point> avoid = net.support();
  const SphereWrapMap wrap(sphere, choose_puncture(sphere, avoid));
  std::vector<Atom> plus_disk, minus_disk;
  double M = 0;
  for (const Atom& a : net.atoms()) {
    const Point q = wrap.inverse(a.at);
    if (a.mass > 0) {
      plus_disk.push_back({q, a.mass});
      M += a.mass;
    } else {
      minus_disk.push_back({q, -a.mass});
    }
  }
  const AtomicMeasure src = AtomicMeasure::dirac(Point(0.0, 0.0), M);
  const TrafficPath disk = subtract(dyadic_irrigation(src, AtomicMeasure(plus_disk), alpha),
                                    dyadic_irrigation(src, AtomicMeasure(minus_disk), alpha));
  TrafficPath out = push_forward(disk, wrap.as_map(), 2 * kPi * sphere.radius / segments_per_circle);
  // land the boundary exactly on the input atoms
  for (Point& v : out.vertices)
    for (const Point& a : avoid)
      if (near(v, a, 1e-9 * std::max(1.0, sphere.radius))) v = a;
  return out;
}

TrafficPath cone_transport(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, const Point& apex,
                           double alpha) {
  require_alpha(alpha);
  require_nonnegative(mu_minus);
  require_nonnegative(mu_plus);
  require_balanced(mu_minus, mu_plus);
  std::vector<TrafficPath> parts;
  for (const Atom& a : mu_minus.atoms()) parts.push_back(TrafficPath::segment(a.at, apex, a.mass));
  for (const Atom& a : mu_plus.atoms()) parts.push_back(TrafficPath::segment(apex, a.at, a.mass));
  return sum(parts);
}

double measured_constant(const TrafficPath& T, double total_mass, double alpha, double scale) {
  if (total_mass <= 0 || scale <= 0) return 0.0;
  return alpha_mass(T, alpha) / (std::pow(total_mass, alpha) * scale);
}

// ---------------------------------------------------- cheap sub-transport

namespace {

void require_submeasure(const AtomicMeasure& nu, const AtomicMeasure& mu) {
  for (const Atom& a : nu.atoms()) {
    const double cap = mu.mass_at(a.at);
    if (a.mass < 0 || a.mass > cap + 1e-9 * std::max(1.0, cap)) throw DomainError("not a sub-measure");
  }
}

// Groups endpoint atoms by the first sphere they lie on.
std::vector<AtomicMeasure> group_on_spheres(const AtomicMeasure& m, const std::vector<Ball>& balls) {
  std::vector<std::vector<Atom>> g(balls.size());
  for (const Atom& a : m.atoms()) {
    std::size_t idx = balls.size();
    for (std::size_t i = 0; i < balls.size(); ++i)
      if (balls[i].on_sphere(a.at, 1e-9 * std::max(1.0, balls[i].radius))) {
        idx = i;
        break;
      }
    if (idx == balls.size()) throw DomainError("cut point off the cover boundary: " + to_string(a.at));
    g[idx].push_back(a);
  }
  std::vector<AtomicMeasure> out;
  for (auto& v : g) out.emplace_back(std::move(v));
  return out;
}

Point heaviest(const AtomicMeasure& m) {
  const Atom* best = &m.atoms().front();
  for (const Atom& a : m.atoms())
    if (a.mass > best->mass || (a.mass == best->mass && a.at < best->at)) best = &a;
  return best->at;
}

}  // namespace

SubtransportReport cheap_subtransport(const TrafficPath& T, const PathMeasure& pi, const AtomicMeasure& nu_minus,
                                      const AtomicMeasure& nu_plus, double eps, const Config& cfg) {
  cfg.validate();
  const double alpha = cfg.alpha;
  const AtomicMeasure bd = boundary(T);
  const AtomicMeasure mu_minus = bd.negative_part(), mu_plus = bd.positive_part();
  require_submeasure(nu_minus, mu_minus);
  require_submeasure(nu_plus, mu_plus);
  require_balanced(nu_minus, nu_plus);

  SubtransportReport rep;
  if (nu_minus.empty()) {
    rep.within_eps = 0.0 <= eps;
    return rep;
  }
  const std::vector<Point> smin = mu_minus.support(), splus = mu_plus.support();
  double dist = INFINITY;
  for (const Point& a : smin)
    for (const Point& b : splus) dist = std::min(dist, distance(a, b));
  rep.r = dist / 3.0;
  rep.covers_minus = cover_compact(smin, rep.r, cfg.ambient_radius);
  rep.covers_plus = cover_compact(splus, rep.r, cfg.ambient_radius);
  const BallRegion Cminus = BallRegion::union_of(rep.covers_minus);
  const BallRegion Cplus = BallRegion::union_of(rep.covers_plus);

  // reweighted curves, cut at the cover boundaries
  PathMeasure cut_minus, cut_plus;
  for (const auto& e : pi.entries) {
    if (e.curve.empty()) continue;
    const double wm = e.weight * nu_minus.mass_at(e.curve.start()) / mu_minus.mass_at(e.curve.start());
    const double wp = e.weight * nu_plus.mass_at(e.curve.end()) / mu_plus.mass_at(e.curve.end());
    if (wm > 0) {
      const double t = first_exit(e.curve, Cminus);
      if (t == kNeverLeaves) throw DomainError("curve never leaves the cover of its start");
      Curve c = restrict_curve(e.curve, 0.0, t);
      if (!c.empty()) cut_minus.entries.push_back({std::move(c), wm});
    }
    if (wp > 0) {
      const double t = last_entry(e.curve, Cplus);
      Curve c = restrict_curve(e.curve, t, e.curve.length());
      if (!c.empty()) cut_plus.entries.push_back({std::move(c), wp});
    }
  }
  const TrafficPath Tcut_minus = reconstruct(cut_minus);
  const TrafficPath Tcut_plus = reconstruct(cut_plus);

  // one point per sphere, joined along it
  std::vector<TrafficPath> parts{Tcut_minus, Tcut_plus};
  std::vector<Atom> sig_minus, sig_plus;
  const auto gm = group_on_spheres(cut_minus.end_measure(), rep.covers_minus);
  const auto gp = group_on_spheres(cut_plus.start_measure(), rep.covers_plus);
  std::vector<TrafficPath> conn_minus, conn_plus;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (gm[i].empty()) continue;
    const Point y = heaviest(gm[i]);
    const double w = gm[i].total();
    rep.y_minus.push_back(y);
    sig_minus.push_back({y, w});
    conn_minus.push_back(sphere_transport(gm[i], AtomicMeasure::dirac(y, w), rep.covers_minus[i], alpha));
  }
  for (std::size_t i = 0; i < gp.size(); ++i) {
    if (gp[i].empty()) continue;
    const Point y = heaviest(gp[i]);
    const double w = gp[i].total();
    rep.y_plus.push_back(y);
    sig_plus.push_back({y, w});
    conn_plus.push_back(sphere_transport(AtomicMeasure::dirac(y, w), gp[i], rep.covers_plus[i], alpha));
  }
  rep.sigma_minus = AtomicMeasure(sig_minus);
  rep.sigma_plus = AtomicMeasure(sig_plus);
  Point apex = Point::zero(T.dim());
  std::size_t cnt = 0;
  for (const Atom& a : sig_minus) apex += a.at, ++cnt;
  for (const Atom& a : sig_plus) apex += a.at, ++cnt;
  apex *= 1.0 / static_cast<double>(cnt);
  const TrafficPath graph = cone_transport(rep.sigma_minus, rep.sigma_plus, apex, alpha);

  const TrafficPath Cm = sum(conn_minus), Cp = sum(conn_plus);
  rep.cost_cut_minus = alpha_mass(Tcut_minus, alpha);
  rep.cost_cut_plus = alpha_mass(Tcut_plus, alpha);
  rep.cost_conn_minus = alpha_mass(Cm, alpha);
  rep.cost_conn_plus = alpha_mass(Cp, alpha);
  rep.cost_graph = alpha_mass(graph, alpha);
  rep.cut_bound = sub_decomposition_bound(T, nu_minus.total(), alpha);
  parts.push_back(Cm);
  parts.push_back(Cp);
  parts.push_back(graph);
  rep.path = sum(parts);
  rep.cost = alpha_mass(rep.path, alpha);
  rep.within_eps = rep.cost <= eps;
  return rep;
}

}  // namespace btlab
