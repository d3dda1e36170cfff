#include "btlab/currents.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <numeric>

#include "btlab/detail/point_index.hpp"

namespace btlab {

// ---------------------------------------------------------------- measures

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) {
  detail::PointIndex index;
  std::vector<double> masses;
  for (const Atom& a : atoms) {
    if (!a.at.finite() || !std::isfinite(a.mass)) throw DomainError("non-finite atom");
    const std::size_t i = index.find_or_add(a.at);
    if (i == masses.size()) masses.push_back(0.0);
    masses[i] += a.mass;
  }
  for (std::size_t i = 0; i < masses.size(); ++i)
    if (std::abs(masses[i]) > kZeroTheta) atoms_.push_back({index.points()[i], masses[i]});
}

AtomicMeasure AtomicMeasure::dirac(const Point& p, double mass) {
  return AtomicMeasure({{p, mass}});
}

AtomicMeasure AtomicMeasure::positive_part() const {
  std::vector<Atom> out;
  for (const Atom& a : atoms_)
    if (a.mass > 0) out.push_back(a);
  return AtomicMeasure(std::move(out));
}

AtomicMeasure AtomicMeasure::negative_part() const {
  std::vector<Atom> out;
  for (const Atom& a : atoms_)
    if (a.mass < 0) out.push_back({a.at, -a.mass});
  return AtomicMeasure(std::move(out));
}

double AtomicMeasure::total() const {
  double s = 0;
  for (const Atom& a : atoms_) s += a.mass;
  return s;
}

double AtomicMeasure::total_variation() const {
  double s = 0;
  for (const Atom& a : atoms_) s += std::abs(a.mass);
  return s;
}

double AtomicMeasure::mass_at(const Point& p, double tol) const {
  double s = 0;
  for (const Atom& a : atoms_)
    if (distance(a.at, p) <= tol) s += a.mass;
  return s;
}

double AtomicMeasure::measure_of(const BallRegion& region) const {
  double s = 0;
  for (const Atom& a : atoms_)
    if (region.contains(a.at)) s += a.mass;
  return s;
}

AtomicMeasure AtomicMeasure::restricted(const BallRegion& region) const {
  std::vector<Atom> out;
  for (const Atom& a : atoms_)
    if (region.contains(a.at)) out.push_back(a);
  return AtomicMeasure(std::move(out));
}

std::vector<Point> AtomicMeasure::support() const {
  std::vector<Point> out;
  out.reserve(atoms_.size());
  for (const Atom& a : atoms_) out.push_back(a.at);
  return out;
}

AtomicMeasure AtomicMeasure::operator+(const AtomicMeasure& o) const {
  std::vector<Atom> all = atoms_;
  all.insert(all.end(), o.atoms_.begin(), o.atoms_.end());
  return AtomicMeasure(std::move(all));
}

AtomicMeasure AtomicMeasure::operator-(const AtomicMeasure& o) const { return *this + o * -1.0; }

AtomicMeasure AtomicMeasure::operator*(double s) const {
  std::vector<Atom> out = atoms_;
  for (Atom& a : out) a.mass *= s;
  return AtomicMeasure(std::move(out));
}

bool approx_equal(const AtomicMeasure& a, const AtomicMeasure& b, double tol) {
  std::vector<Atom> diff = a.atoms();
  for (const Atom& x : b.atoms()) diff.push_back({x.at, -x.mass});
  detail::PointIndex index;
  std::vector<double> m;
  for (const Atom& x : diff) {
    const std::size_t i = index.find_or_add(x.at);
    if (i == m.size()) m.push_back(0.0);
    m[i] += x.mass;
  }
  return std::all_of(m.begin(), m.end(), [&](double v) { return std::abs(v) <= tol; });
}

// ------------------------------------------------------------- overlay core

namespace {

struct Seg {
  Point a, b;
  double theta;
  std::size_t channel;
};

// Builds a path from oriented pieces without any overlap detection:
// merges coincident vertices and identical/antiparallel edges.
TrafficPath build_path(const std::vector<OverlayPiece>& pieces) {
  detail::PointIndex index;
  std::map<std::pair<std::size_t, std::size_t>, double> acc;
  for (const OverlayPiece& p : pieces) {
    const double th = std::accumulate(p.theta.begin(), p.theta.end(), 0.0);
    if (std::abs(th) <= kZeroTheta) continue;
    const std::size_t u = index.find_or_add(p.a);
    const std::size_t v = index.find_or_add(p.b);
    if (u == v) continue;
    if (u < v)
      acc[{u, v}] += th;
    else
      acc[{v, u}] -= th;
  }
  TrafficPath out;
  std::vector<std::size_t> remap(index.points().size(), SIZE_MAX);
  auto vid = [&](std::size_t i) {
    if (remap[i] == SIZE_MAX) {
      remap[i] = out.vertices.size();
      out.vertices.push_back(index.points()[i]);
    }
    return remap[i];
  };
  for (const auto& [key, th] : acc) {
    if (std::abs(th) <= kZeroTheta) continue;
    if (th > 0)
      out.edges.push_back({vid(key.first), vid(key.second), th});
    else
      out.edges.push_back({vid(key.second), vid(key.first), -th});
  }
  return out;
}

double line_gap(const Point& p, const Point& base, const Point& u) {
  const Point w = p - base;
  return (w - u * w.dot(u)).norm();
}

std::vector<OverlayPiece> overlay_segments(const std::vector<Seg>& segs, std::size_t channels) {
  const std::size_t n = segs.size();
  std::vector<Point> dir(n);
  std::vector<double> len(n);
  for (std::size_t i = 0; i < n; ++i) {
    len[i] = distance(segs[i].a, segs[i].b);
    dir[i] = len[i] > 0 ? (segs[i].b - segs[i].a) * (1.0 / len[i]) : Point::zero(segs[i].a.dim);
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<std::array<double, 6>> box(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      box[i][k] = std::min(segs[i].a[k], segs[i].b[k]) - kGeomTol;
      box[i][k + 3] = std::max(segs[i].a[k], segs[i].b[k]) + kGeomTol;
    }
  // sweep along x so only boxes overlapping in x are compared
  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), 0);
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return box[a][0] < box[b][0]; });
  for (std::size_t ii = 0; ii < n; ++ii) {
    const std::size_t i = by_x[ii];
    if (len[i] <= kGeomTol) continue;
    for (std::size_t jj = ii + 1; jj < n; ++jj) {
      const std::size_t j = by_x[jj];
      if (box[j][0] > box[i][3]) break;
      if (len[j] <= kGeomTol) continue;
      bool disjoint = false;
      for (int k = 0; k < 3 && !disjoint; ++k)
        disjoint = box[i][k + 3] < box[j][k] || box[j][k + 3] < box[i][k];
      if (disjoint) continue;
      if (line_gap(segs[j].a, segs[i].a, dir[i]) > kGeomTol ||
          line_gap(segs[j].b, segs[i].a, dir[i]) > kGeomTol)
        continue;
      const double s1 = (segs[j].a - segs[i].a).dot(dir[i]);
      const double s2 = (segs[j].b - segs[i].a).dot(dir[i]);
      const double lo = std::max(0.0, std::min(s1, s2));
      const double hi = std::min(len[i], std::max(s1, s2));
      if (hi - lo <= kGeomTol) continue;
      parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i)
    if (len[i] > 0) groups[find(i)].push_back(i);

  std::vector<OverlayPiece> out;
  for (const auto& [root, members] : groups) {
    if (members.size() == 1) {
      const Seg& s = segs[members[0]];
      OverlayPiece p{s.a, s.b, std::vector<double>(channels, 0.0)};
      p.theta[s.channel] = s.theta;
      out.push_back(std::move(p));
      continue;
    }
    const Point base = segs[members[0]].a;
    const Point u = dir[members[0]];
    struct Span {
      double lo, hi, sign, theta;
      std::size_t channel;
    };
    std::vector<Span> spans;
    std::vector<std::pair<double, Point>> cuts;
    for (std::size_t m : members) {
      const double sa = (segs[m].a - base).dot(u);
      const double sb = (segs[m].b - base).dot(u);
      spans.push_back({std::min(sa, sb), std::max(sa, sb), sb > sa ? 1.0 : -1.0, segs[m].theta,
                       segs[m].channel});
      cuts.emplace_back(sa, segs[m].a);
      cuts.emplace_back(sb, segs[m].b);
    }
    std::sort(cuts.begin(), cuts.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<std::pair<double, Point>> breaks;
    for (const auto& c : cuts)
      if (breaks.empty() || c.first - breaks.back().first > kGeomTol) breaks.push_back(c);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double mid = 0.5 * (breaks[k].first + breaks[k + 1].first);
      OverlayPiece p{breaks[k].second, breaks[k + 1].second, std::vector<double>(channels, 0.0)};
      bool any = false;
      for (const Span& sp : spans)
        if (sp.lo < mid && mid < sp.hi) {
          p.theta[sp.channel] += sp.sign * sp.theta;
          any = true;
        }
      if (any) out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Seg> segments_of(const TrafficPath& T, std::size_t channel, double scale = 1.0) {
  std::vector<Seg> out;
  out.reserve(T.edges.size());
  for (const Edge& e : T.edges)
    out.push_back({T.vertices.at(e.tail), T.vertices.at(e.head), e.theta * scale, channel});
  return out;
}

}  // namespace

std::vector<OverlayPiece> overlay_channels(std::span<const TrafficPath> parts) {
  std::vector<Seg> segs;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    auto s = segments_of(parts[c], c);
    segs.insert(segs.end(), s.begin(), s.end());
  }
  return overlay_segments(segs, parts.size());
}

// ------------------------------------------------------------- traffic paths

TrafficPath TrafficPath::segment(const Point& a, const Point& b, double theta) {
  TrafficPath T;
  if (near(a, b) || std::abs(theta) <= kZeroTheta) return T;
  T.vertices = {a, b};
  if (theta > 0)
    T.edges.push_back({0, 1, theta});
  else
    T.edges.push_back({1, 0, -theta});
  return T;
}

TrafficPath TrafficPath::polyline(std::span<const Point> pts, double theta) {
  std::vector<OverlayPiece> pieces;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) pieces.push_back({pts[i], pts[i + 1], {theta}});
  return build_path(pieces);
}

TrafficPath TrafficPath::normalized() const {
  return build_path(overlay_segments(segments_of(*this, 0), 1));
}

void TrafficPath::validate(double ambient_radius) const {
  for (const Point& p : vertices) {
    if (!p.finite()) throw DomainError("vertex with non-finite coordinates");
    if (ambient_radius > 0 && p.norm() > ambient_radius + kGeomTol)
      throw DomainError("vertex " + to_string(p) + " outside the ambient ball");
  }
  for (const Edge& e : edges) {
    if (e.tail >= vertices.size() || e.head >= vertices.size())
      throw DomainError("edge references a missing vertex");
    if (!(e.theta > 0) || !std::isfinite(e.theta))
      throw DomainError("edge multiplicity must be positive and finite");
    if (length(e) <= kGeomTol) throw DomainError("zero-length edge");
  }
}

void Config::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  if (dimension != 2 && dimension != 3) throw DomainError("dimension must be 2 or 3");
  if (!(ambient_radius > 0.0)) throw DomainError("ambient_radius must be positive");
}

bool Config::above_stability_threshold() const {
  return alpha > 1.0 - 1.0 / (dimension - 1);
}

AtomicMeasure boundary(const TrafficPath& T) {
  std::vector<Atom> atoms;
  atoms.reserve(2 * T.edges.size());
  for (const Edge& e : T.edges) {
    atoms.push_back({T.vertices[e.head], e.theta});
    atoms.push_back({T.vertices[e.tail], -e.theta});
  }
  return AtomicMeasure(std::move(atoms));
}

double mass(const TrafficPath& T) {
  double s = 0;
  for (const Edge& e : T.edges) s += e.theta * T.length(e);
  return s;
}

double alpha_mass(const TrafficPath& T, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("alpha must lie in [0, 1]");
  double s = 0;
  for (const Edge& e : T.edges)
    if (e.theta > kZeroTheta) s += std::pow(e.theta, alpha) * T.length(e);
  return s;
}

TrafficPath sum(std::span<const TrafficPath> parts) {
  std::vector<Seg> segs;
  for (const TrafficPath& p : parts) {
    auto s = segments_of(p, 0);
    segs.insert(segs.end(), s.begin(), s.end());
  }
  return build_path(overlay_segments(segs, 1));
}

TrafficPath add(const TrafficPath& a, const TrafficPath& b) {
  const TrafficPath parts[] = {a, b};
  return sum(parts);
}

TrafficPath subtract(const TrafficPath& a, const TrafficPath& b) { return add(a, scaled(b, -1.0)); }

TrafficPath scaled(const TrafficPath& T, double s) {
  TrafficPath out;
  if (std::abs(s) <= 0.0) return out;
  out.vertices = T.vertices;
  for (const Edge& e : T.edges) {
    const double th = e.theta * std::abs(s);
    if (th <= kZeroTheta) continue;
    out.edges.push_back(s > 0 ? Edge{e.tail, e.head, th} : Edge{e.head, e.tail, th});
  }
  return out;
}

bool equivalent(const TrafficPath& a, const TrafficPath& b, double tol) {
  return mass(subtract(a, b)) <= tol;
}

TrafficPath restrict(const TrafficPath& T, const BallRegion& region) {
  const std::vector<Ball> spheres = region.spheres();
  std::vector<OverlayPiece> pieces;
  for (const Edge& e : T.edges) {
    const Point& a = T.vertices[e.tail];
    const Point& b = T.vertices[e.head];
    std::vector<double> ts{0.0, 1.0};
    for (const Ball& s : spheres)
      for (double t : segment_sphere_crossings(a, b, s)) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      if (ts[k + 1] - ts[k] <= 0.0) continue;
      const Point p = lerp(a, b, ts[k]);
      const Point q = lerp(a, b, ts[k + 1]);
      if (region.contains(lerp(a, b, 0.5 * (ts[k] + ts[k + 1]))))
        pieces.push_back({p, q, {e.theta}});
    }
  }
  return build_path(pieces);
}

TrafficPath restrict_multiplicity_above(const TrafficPath& T, double threshold) {
  TrafficPath out;
  out.vertices = T.vertices;
  for (const Edge& e : T.edges)
    if (e.theta > threshold) out.edges.push_back(e);
  return out;
}

// ------------------------------------------------------------ push-forward

LipschitzMap LipschitzMap::identity(int dim) {
  return {"identity", 1.0, dim, false, [](const Point& p) { return p; }};
}

LipschitzMap LipschitzMap::ball_projection(double radius, int dim) {
  if (!(radius > 0)) throw DomainError("projection radius must be positive");
  return {"ball_projection", 1.0, dim, true,
          [radius](const Point& p) { return project_to_ball(p, radius); }};
}

LipschitzMap LipschitzMap::affine(std::vector<double> matrix, const Point& offset) {
  const int d = offset.dim;
  if (matrix.size() != static_cast<std::size_t>(d * d))
    throw DomainError("affine map needs a d x d matrix");
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = matrix[i * d + j];
  const double L = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
  return {"affine", L, d, false, [A, offset, d](const Point& p) {
            Point q = offset;
            for (int i = 0; i < d; ++i)
              for (int j = 0; j < d; ++j) q[i] += A(i, j) * p[j];
            return q;
          }};
}

LipschitzMap LipschitzMap::named(const std::string& kind, std::span<const double> params, int dim) {
  if (kind == "identity") return identity(dim);
  if (kind == "ball_projection") {
    if (params.size() != 1) throw DomainError("ball_projection takes one parameter (radius)");
    return ball_projection(params[0], dim);
  }
  if (kind == "scaling") {
    if (params.size() != 1) throw DomainError("scaling takes one parameter (factor)");
    std::vector<double> m(dim * dim, 0.0);
    for (int i = 0; i < dim; ++i) m[i * dim + i] = params[0];
    LipschitzMap f = affine(std::move(m), Point::zero(dim));
    f.kind = "scaling";
    return f;
  }
  if (kind == "affine") {
    const std::size_t need = static_cast<std::size_t>(dim * dim + dim);
    if (params.size() != need) throw DomainError("affine takes d*d + d parameters");
    std::vector<double> m(params.begin(), params.begin() + dim * dim);
    Point b = Point::zero(dim);
    for (int i = 0; i < dim; ++i) b[i] = params[dim * dim + i];
    return affine(std::move(m), b);
  }
  throw DomainError("unknown map kind: " + kind);
}

TrafficPath push_forward(const TrafficPath& T, const LipschitzMap& f, double max_piece) {
  if (!f.apply) throw DomainError("unknown map kind: " + f.kind);
  std::vector<Seg> segs;
  for (const Edge& e : T.edges) {
    const Point& a = T.vertices[e.tail];
    const Point& b = T.vertices[e.head];
    std::size_t k = 1;
    if (f.nonlinear && max_piece > 0)
      k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(T.length(e) / max_piece)));
    Point prev = f.apply(a);
    for (std::size_t i = 1; i <= k; ++i) {
      const Point next = f.apply(i == k ? b : lerp(a, b, static_cast<double>(i) / k));
      segs.push_back({prev, next, e.theta, 0});
      prev = next;
    }
  }
  return build_path(overlay_segments(segs, 1));
}

}  // namespace btlab
