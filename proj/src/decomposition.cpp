#include "btlab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace btlab {

// ------------------------------------------------------------------ curves

double Curve::length() const {
  double s = 0;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
    s += distance(waypoints[i], waypoints[i + 1]);
  return s;
}

Point Curve::at(double t) const {
  if (waypoints.empty()) throw DomainError("curve has no waypoints");
  if (t <= 0) return waypoints.front();
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const double L = distance(waypoints[i], waypoints[i + 1]);
    if (t <= L) return L > 0 ? lerp(waypoints[i], waypoints[i + 1], t / L) : waypoints[i];
    t -= L;
  }
  return waypoints.back();
}

bool Curve::simple() const {
  if (empty()) return false;
  for (std::size_t i = 0; i < waypoints.size(); ++i)
    for (std::size_t j = i + 1; j < waypoints.size(); ++j)
      if (near(waypoints[i], waypoints[j])) return false;
  return true;
}

double PathMeasure::total_weight() const {
  double s = 0;
  for (const auto& e : entries) s += e.weight;
  return s;
}

AtomicMeasure PathMeasure::start_measure() const {
  std::vector<Atom> a;
  for (const auto& e : entries) a.push_back({e.curve.start(), e.weight});
  return AtomicMeasure(std::move(a));
}

AtomicMeasure PathMeasure::end_measure() const {
  std::vector<Atom> a;
  for (const auto& e : entries) a.push_back({e.curve.end(), e.weight});
  return AtomicMeasure(std::move(a));
}

PathMeasure PathMeasure::scaled(double s) const {
  PathMeasure out = *this;
  for (auto& e : out.entries) e.weight *= s;
  return out;
}

// ------------------------------------------------------------------ cycles

namespace {

struct Digraph {
  std::vector<std::vector<std::size_t>> out;  // edge ids
};

Digraph digraph_of(const TrafficPath& T) {
  Digraph g;
  g.out.resize(T.vertices.size());
  for (std::size_t i = 0; i < T.edges.size(); ++i) g.out[T.edges[i].tail].push_back(i);
  return g;
}

// Edge ids of some directed cycle among edges with positive residual.
std::vector<std::size_t> find_cycle(const TrafficPath& T, const Digraph& g,
                                    const std::vector<double>& residual) {
  const std::size_t n = T.vertices.size();
  std::vector<int> color(n, 0);
  std::vector<std::size_t> via(n, SIZE_MAX);
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      if (k == g.out[v].size()) {
        color[v] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t e = g.out[v][k++];
      if (residual[e] <= kZeroTheta) continue;
      const std::size_t w = T.edges[e].head;
      if (color[w] == 1) {
        std::vector<std::size_t> cyc{e};
        for (std::size_t x = v; x != w; x = T.edges[via[x]].tail) cyc.push_back(via[x]);
        return cyc;
      }
      if (color[w] == 0) {
        color[w] = 1;
        via[w] = e;
        stack.emplace_back(w, 0);
      }
    }
  }
  return {};
}

}  // namespace

TrafficPath remove_cycles(const TrafficPath& T) {
  TrafficPath P = T.normalized();
  const Digraph g = digraph_of(P);
  std::vector<double> residual(P.edges.size());
  for (std::size_t i = 0; i < P.edges.size(); ++i) residual[i] = P.edges[i].theta;
  for (;;) {
    const auto cyc = find_cycle(P, g, residual);
    if (cyc.empty()) break;
    double bottleneck = residual[cyc.front()];
    for (std::size_t e : cyc) bottleneck = std::min(bottleneck, residual[e]);
    for (std::size_t e : cyc) {
      residual[e] -= bottleneck;
      if (residual[e] <= kZeroTheta) residual[e] = 0.0;
    }
  }
  TrafficPath out;
  out.vertices = P.vertices;
  for (std::size_t i = 0; i < P.edges.size(); ++i)
    if (residual[i] > kZeroTheta) out.edges.push_back({P.edges[i].tail, P.edges[i].head, residual[i]});
  return out.normalized();
}

bool is_acyclic(const TrafficPath& T) {
  std::vector<std::size_t> indeg(T.vertices.size(), 0);
  for (const Edge& e : T.edges) ++indeg[e.head];
  const Digraph g = digraph_of(T);
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < indeg.size(); ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const std::size_t v = ready.back();
    ready.pop_back();
    ++seen;
    for (std::size_t e : g.out[v])
      if (--indeg[T.edges[e].head] == 0) ready.push_back(T.edges[e].head);
  }
  return seen == T.vertices.size();
}

// ------------------------------------------------------- good decomposition

PathMeasure good_decomposition(const TrafficPath& input) {
  const TrafficPath T = input.normalized();
  if (!is_acyclic(T)) throw DomainError("not acyclic");
  const std::size_t n = T.vertices.size();
  double scale = 1.0;
  for (const Edge& e : T.edges) scale = std::max(scale, e.theta);
  const double tol = 1e-12 * scale;

  std::vector<double> net(n, 0.0);
  for (const Edge& e : T.edges) {
    net[e.head] += e.theta;
    net[e.tail] -= e.theta;
  }
  if (std::abs(std::accumulate(net.begin(), net.end(), 0.0)) > 1e-9 * scale * n)
    throw DomainError("unbalanced boundary");
  std::vector<double> deficit(n), excess(n);
  for (std::size_t v = 0; v < n; ++v) {
    deficit[v] = net[v] < -tol ? -net[v] : 0.0;
    excess[v] = net[v] > tol ? net[v] : 0.0;
  }
  std::vector<double> residual(T.edges.size());
  for (std::size_t i = 0; i < T.edges.size(); ++i) residual[i] = T.edges[i].theta;

  Digraph g = digraph_of(T);
  for (auto& lst : g.out)
    std::sort(lst.begin(), lst.end(), [&](std::size_t a, std::size_t b) {
      return T.vertices[T.edges[a].head] < T.vertices[T.edges[b].head];
    });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return T.vertices[a] < T.vertices[b]; });

  PathMeasure pi;
  const std::size_t cap = 4 * (T.edges.size() + n) + 8;
  for (std::size_t iter = 0; iter < cap; ++iter) {
    std::size_t s = SIZE_MAX;
    for (std::size_t v : order)
      if (deficit[v] > tol) {
        s = v;
        break;
      }
    if (s == SIZE_MAX) break;
    std::vector<std::size_t> walk_edges;
    std::size_t v = s;
    for (;;) {
      if (v != s && excess[v] > tol) break;
      std::size_t next = SIZE_MAX;
      for (std::size_t e : g.out[v])
        if (residual[e] > tol) {
          next = e;
          break;
        }
      if (next == SIZE_MAX) break;
      walk_edges.push_back(next);
      v = T.edges[next].head;
    }
    if (walk_edges.empty()) {
      // Deficit left only by round-off.
      deficit[s] = 0.0;
      continue;
    }
    double w = deficit[s];
    for (std::size_t e : walk_edges) w = std::min(w, residual[e]);
    if (excess[v] > tol) w = std::min(w, excess[v]);
    deficit[s] -= w;
    if (deficit[s] <= tol) deficit[s] = 0.0;
    excess[v] = std::max(0.0, excess[v] - w);
    if (excess[v] <= tol) excess[v] = 0.0;
    Curve c;
    c.waypoints.push_back(T.vertices[s]);
    for (std::size_t e : walk_edges) {
      residual[e] -= w;
      if (residual[e] <= tol) residual[e] = 0.0;
      c.waypoints.push_back(T.vertices[T.edges[e].head]);
    }
    pi.entries.push_back({std::move(c), w});
  }
  return pi;
}

TrafficPath reconstruct(const PathMeasure& pi) {
  std::vector<TrafficPath> parts;
  parts.reserve(pi.entries.size());
  for (const auto& e : pi.entries)
    if (!e.curve.empty() && e.weight > 0)
      parts.push_back(TrafficPath::polyline(e.curve.waypoints, e.weight));
  return sum(parts);
}

DecompositionCheck check_good_decomposition(const TrafficPath& T, const PathMeasure& pi) {
  DecompositionCheck r;
  double wl = 0, w = 0;
  for (const auto& e : pi.entries) {
    wl += e.weight * e.curve.length();
    w += e.weight;
    r.curves_simple = r.curves_simple && e.curve.simple();
  }
  r.mass_residual = std::abs(mass(T) - wl);
  const AtomicMeasure bd = boundary(T);
  r.boundary_residual = std::abs(bd.total_variation() - 2.0 * w);

  const AtomicMeasure neg = bd.negative_part();
  const AtomicMeasure pos = bd.positive_part();
  for (const auto& e : pi.entries) {
    if (e.curve.empty()) continue;
    if (neg.mass_at(e.curve.start()) <= 0 || pos.mass_at(e.curve.end()) <= 0) r.endpoints_ok = false;
  }

  std::vector<TrafficPath> parts{T};
  for (const auto& e : pi.entries)
    parts.push_back(TrafficPath::polyline(e.curve.waypoints, e.weight));
  for (const OverlayPiece& p : overlay_channels(parts)) {
    double through = 0;
    for (std::size_t c = 1; c < p.theta.size(); ++c) through += std::abs(p.theta[c]);
    r.density_residual = std::max(r.density_residual, std::abs(std::abs(p.theta[0]) - through));
  }
  r.reconstruction_residual = mass(subtract(reconstruct(pi), T));
  return r;
}

// ------------------------------------------------------- exit/entry times

namespace {

std::vector<double> breakpoints(const Point& p, const Point& q, const std::vector<Ball>& spheres) {
  std::vector<double> ts{0.0, 1.0};
  for (const Ball& b : spheres)
    for (double t : segment_sphere_crossings(p, q, b)) ts.push_back(t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace

double first_exit(const Curve& c, const BallRegion& region) {
  if (c.waypoints.empty()) return kNeverLeaves;
  if (!region.contains(c.start())) return 0.0;
  const std::vector<Ball> spheres = region.spheres();
  double acc = 0;
  for (std::size_t i = 0; i + 1 < c.waypoints.size(); ++i) {
    const Point& p = c.waypoints[i];
    const Point& q = c.waypoints[i + 1];
    const double L = distance(p, q);
    const auto ts = breakpoints(p, q, spheres);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      if (!region.contains(lerp(p, q, ts[k])) ||
          !region.contains(lerp(p, q, 0.5 * (ts[k] + ts[k + 1]))))
        return acc + ts[k] * L;
    }
    acc += L;
  }
  return region.contains(c.end()) ? kNeverLeaves : acc;
}

double last_entry(const Curve& c, const BallRegion& region) {
  if (c.waypoints.empty()) return 0.0;
  const double total = c.length();
  if (!region.contains(c.end())) return total;
  const std::vector<Ball> spheres = region.spheres();
  double acc = total;
  for (std::size_t i = c.waypoints.size() - 1; i > 0; --i) {
    const Point& p = c.waypoints[i - 1];
    const Point& q = c.waypoints[i];
    const double L = distance(p, q);
    acc -= L;
    const auto ts = breakpoints(p, q, spheres);
    for (std::size_t k = ts.size() - 1; k > 0; --k) {
      if (!region.contains(lerp(p, q, ts[k])) ||
          !region.contains(lerp(p, q, 0.5 * (ts[k - 1] + ts[k]))))
        return acc + ts[k] * L;
    }
  }
  return 0.0;
}

Curve restrict_curve(const Curve& c, double a, double b) {
  if (a > b) throw DomainError("restriction interval must satisfy a <= b");
  if (a < 0) throw DomainError("restriction interval must start at a >= 0");
  const double L = c.length();
  a = std::min(a, L);
  b = std::min(b, L);
  Curve out;
  out.waypoints.push_back(c.at(a));
  if (b <= a) return out;
  double acc = 0;
  for (std::size_t i = 1; i < c.waypoints.size(); ++i) {
    acc += distance(c.waypoints[i - 1], c.waypoints[i]);
    if (acc > a && acc < b && !near(c.waypoints[i], out.waypoints.back(), 1e-12))
      out.waypoints.push_back(c.waypoints[i]);
  }
  const Point end = c.at(b);
  if (!near(end, out.waypoints.back(), 1e-12))
    out.waypoints.push_back(end);
  else if (out.waypoints.size() > 1)
    out.waypoints.back() = end;
  return out;
}

// ------------------------------------------------------------------- cuts

CutResult cut_decomposition(const PathMeasure& pi, std::span<const Cell> cells, CutMode mode) {
  CutResult out;
  for (const auto& e : pi.entries) {
    if (e.curve.empty()) continue;
    const Point& anchor = mode == CutMode::kStartToFirstExit ? e.curve.start() : e.curve.end();
    std::size_t idx = SIZE_MAX;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].region.contains(anchor)) {
        idx = i;
        break;
      }
    if (idx == SIZE_MAX) continue;
    const BallRegion parent = BallRegion::ball(cells[idx].parent);
    Curve cut;
    if (mode == CutMode::kStartToFirstExit) {
      const double t = first_exit(e.curve, parent);
      cut = t == kNeverLeaves ? e.curve : restrict_curve(e.curve, 0.0, t);
    } else {
      const double t = last_entry(e.curve, parent);
      cut = restrict_curve(e.curve, t, e.curve.length());
    }
    if (cut.empty()) continue;
    out.pi.entries.push_back({std::move(cut), e.weight});
    out.cell_of.push_back(idx);
  }
  const AtomicMeasure starts = out.pi.start_measure();
  const AtomicMeasure ends = out.pi.end_measure();
  for (const Atom& s : starts.atoms())
    for (const Atom& t : ends.atoms())
      if (near(s.at, t.at)) throw DomainError("mutually singular endpoints required");
  return out;
}

TrafficPath cut_paths(const PathMeasure& pi, std::span<const Cell> cells, CutMode mode) {
  return reconstruct(cut_decomposition(pi, cells, mode).pi);
}

CurvePredicate starts_in(BallRegion region) {
  return [r = std::move(region)](const Curve& c) { return !c.empty() && r.contains(c.start()); };
}

CurvePredicate ends_in(BallRegion region) {
  return [r = std::move(region)](const Curve& c) { return !c.empty() && r.contains(c.end()); };
}

CurvePredicate both(CurvePredicate a, CurvePredicate b) {
  return [a = std::move(a), b = std::move(b)](const Curve& c) { return a(c) && b(c); };
}

std::pair<PathMeasure, TrafficPath> sub_decomposition(const PathMeasure& pi,
                                                      const CurvePredicate& keep) {
  PathMeasure kept;
  for (const auto& e : pi.entries)
    if (keep(e.curve)) kept.entries.push_back(e);
  TrafficPath T = reconstruct(kept);
  return {std::move(kept), std::move(T)};
}

double sub_decomposition_bound(const TrafficPath& T, double kept_weight, double alpha) {
  double s = 0;
  for (const Edge& e : T.edges) s += std::pow(std::min(e.theta, kept_weight), alpha) * T.length(e);
  return s;
}

}  // namespace btlab
