#include "btlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

namespace btlab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
// residual capacities below this are exhausted
constexpr double kCapEps = 1e-15;
}  // namespace

MinCostFlow::MinCostFlow(int n) : g_(n), pot_(n, 0.0) {}

int MinCostFlow::add_arc(int from, int to, double cap, double cost) {
  g_[from].push_back({to, cap, cost, static_cast<int>(g_[to].size())});
  g_[to].push_back({from, 0.0, -cost, static_cast<int>(g_[from].size()) - 1});
  index_.push_back({from, static_cast<int>(g_[from].size()) - 1});
  orig_cap_.push_back(cap);
  return static_cast<int>(index_.size()) - 1;
}

double MinCostFlow::flow_on(int arc) const {
  const auto [u, k] = index_[arc];
  return orig_cap_[arc] - g_[u][k].cap;
}

void MinCostFlow::bellman_ford_init(int s) {
  const int n = static_cast<int>(g_.size());
  std::vector<double> d(n, kInf);
  d[s] = 0.0;
  for (int it = 0; it < n; ++it) {
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      if (d[u] == kInf) continue;
      for (const Arc& a : g_[u])
        if (a.cap > kCapEps && d[u] + a.cost < d[a.to] - 1e-15) {
          d[a.to] = d[u] + a.cost;
          changed = true;
        }
    }
    if (!changed) break;
  }
  for (int v = 0; v < n; ++v) pot_[v] = d[v] == kInf ? 0.0 : d[v];
}

std::pair<double, double> MinCostFlow::run(int s, int t, double limit, double stop_cost) {
  const int n = static_cast<int>(g_.size());
  double flow = 0.0, cost = 0.0;
  std::vector<double> dist(n);
  std::vector<int> level(n), it(n);
  std::vector<char> done(n);
  using Item = std::pair<double, int>;
  auto admissible = [&](int u, const Arc& a) {
    if (a.cap <= kCapEps) return false;
    const double rc = a.cost + pot_[u] - pot_[a.to];
    return std::abs(rc) <= 1e-11 * (1.0 + std::abs(pot_[u]));
  };
  // pushes along level-increasing admissible arcs, adding the true arc costs
  std::function<double(int, double)> dfs = [&](int u, double f) -> double {
    if (u == t) return f;
    for (int& k = it[u]; k < static_cast<int>(g_[u].size()); ++k) {
      Arc& a = g_[u][k];
      if (level[a.to] != level[u] + 1 || !admissible(u, a)) continue;
      const double got = dfs(a.to, std::min(f, a.cap));
      if (got > 0) {
        a.cap -= got;
        g_[a.to][a.rev].cap += got;
        cost += got * a.cost;
        return got;
      }
    }
    return 0.0;
  };
  while (flow < limit) {
    // Dijkstra on reduced costs, stopped once t is settled
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[s] = 0.0;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, s});
    while (!pq.empty()) {
      auto [du, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u == t) break;
      for (const Arc& a : g_[u]) {
        if (a.cap <= kCapEps) continue;
        // rounding can push reduced costs a hair below zero
        const double rc = std::max(0.0, a.cost + pot_[u] - pot_[a.to]);
        if (du + rc < dist[a.to]) {
          dist[a.to] = du + rc;
          pq.push({dist[a.to], a.to});
        }
      }
    }
    if (dist[t] == kInf) break;
    const double dt = dist[t];
    for (int v = 0; v < n; ++v) pot_[v] += std::min(dist[v], dt);
    if (pot_[t] - pot_[s] >= stop_cost) break;

    // blocking flow on the admissible subgraph
    std::fill(level.begin(), level.end(), -1);
    level[s] = 0;
    std::vector<int> queue{s};
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (const Arc& a : g_[u])
        if (level[a.to] < 0 && admissible(u, a)) {
          level[a.to] = level[u] + 1;
          queue.push_back(a.to);
        }
    }
    if (level[t] < 0) break;  // only when rounding hides every shortest path
    std::fill(it.begin(), it.end(), 0);
    double pushed_round = 0.0;
    while (flow < limit) {
      const double f = dfs(s, limit - flow);
      if (f <= 0) break;
      flow += f;
      pushed_round += f;
    }
    if (pushed_round <= 0) break;
  }
  return {flow, cost};
}

// ---------------------------------------------------------------- 0-currents

double flat_norm_0(const AtomicMeasure& a) {
  const AtomicMeasure pos = a.positive_part();
  const AtomicMeasure neg = a.negative_part();
  const double total = pos.total() + neg.total();
  if (pos.empty() || neg.empty()) return total;
  // destroying both ends costs 2 per unit, so only pairs closer than 2 help
  const int P = static_cast<int>(pos.size()), N = static_cast<int>(neg.size());
  const int s = P + N, t = s + 1;
  MinCostFlow mcf(P + N + 2);
  for (int i = 0; i < P; ++i) mcf.add_arc(s, i, pos.atoms()[i].mass, 0.0);
  for (int j = 0; j < N; ++j) mcf.add_arc(P + j, t, neg.atoms()[j].mass, 0.0);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < N; ++j) {
      const double d = distance(pos.atoms()[i].at, neg.atoms()[j].at);
      if (d < 2.0) mcf.add_arc(i, P + j, kInf, d - 2.0);
    }
  mcf.bellman_ford_init(s);
  const auto [flow, cost] = mcf.run(s, t, kInf, 0.0);
  (void)flow;
  return std::max(0.0, total + cost);
}

double weak_star_gap(const AtomicMeasure& mu_n, const AtomicMeasure& mu) { return flat_norm_0(mu_n - mu); }

// ---------------------------------------------------------------- grid

GridComplex GridComplex::around(std::span<const TrafficPath> paths, double h, int margin) {
  if (!(h > 0)) throw DomainError("grid spacing must be positive");
  double lo[2] = {kInf, kInf}, hi[2] = {-kInf, -kInf};
  for (const TrafficPath& T : paths)
    for (const Point& p : T.vertices)
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
  if (lo[0] == kInf) lo[0] = lo[1] = hi[0] = hi[1] = 0.0;
  GridComplex g;
  g.h = h;
  // anchor on multiples of h so grid-aligned inputs rasterize exactly
  const double x0 = (std::floor(lo[0] / h + 1e-9) - margin) * h;
  const double y0 = (std::floor(lo[1] / h + 1e-9) - margin) * h;
  g.lo = Point(x0, y0);
  g.nx = static_cast<int>(std::ceil((hi[0] - x0) / h - 1e-9)) + margin;
  g.ny = static_cast<int>(std::ceil((hi[1] - y0) / h - 1e-9)) + margin;
  return g;
}

std::vector<std::pair<int, int>> GridComplex::face_boundary(int f) const {
  const int i = f % nx, j = f / nx;
  return {{hedge(i, j), 1}, {vedge(i + 1, j), 1}, {hedge(i, j + 1), -1}, {vedge(i, j), -1}};
}

std::pair<int, int> GridComplex::edge_nodes(int e) const {
  if (e < horizontal_count()) {
    const int i = e % nx, j = e / nx;
    return {node(i, j), node(i + 1, j)};
  }
  const int k = e - horizontal_count();
  const int i = k % (nx + 1), j = k / (nx + 1);
  return {node(i, j), node(i, j + 1)};
}

Rasterized rasterize(const TrafficPath& T, const GridComplex& grid) {
  Rasterized out;
  out.chain.assign(grid.edge_count(), 0.0);
  const double h = grid.h;
  auto snap = [&](const Point& p) {
    const double u = (p[0] - grid.lo[0]) / h, v = (p[1] - grid.lo[1]) / h;
    if (u < -1e-9 || v < -1e-9 || u > grid.nx + 1e-9 || v > grid.ny + 1e-9)
      throw DomainError("path exits grid box");
    return std::pair<int, int>{static_cast<int>(std::lround(u)), static_cast<int>(std::lround(v))};
  };
  for (const Edge& e : T.edges) {
    const auto [i0, j0] = snap(T.vertices[e.tail]);
    const auto [i1, j1] = snap(T.vertices[e.head]);
    out.error_bound += e.theta * (2.0 * h * T.length(e) + std::sqrt(2.0) * h);
    const int sx = i1 > i0 ? 1 : -1, sy = j1 > j0 ? 1 : -1;
    const double dx = i1 - i0, dy = j1 - j0;
    // signed area test against the snapped segment, in cell units
    auto off = [&](int i, int j) { return std::abs(dx * (j - j0) - dy * (i - i0)); };
    int i = i0, j = j0;
    while (i != i1 || j != j1) {
      bool step_x;
      if (i == i1)
        step_x = false;
      else if (j == j1)
        step_x = true;
      else
        step_x = off(i + sx, j) <= off(i, j + sy);
      if (step_x) {
        if (sx > 0)
          out.chain[grid.hedge(i, j)] += e.theta;
        else
          out.chain[grid.hedge(i - 1, j)] -= e.theta;
        i += sx;
      } else {
        if (sy > 0)
          out.chain[grid.vedge(i, j)] += e.theta;
        else
          out.chain[grid.vedge(i, j - 1)] -= e.theta;
        j += sy;
      }
    }
  }
  return out;
}

double grid_flat_norm(const std::vector<double>& chain, const GridComplex& grid) {
  if (static_cast<int>(chain.size()) != grid.edge_count()) throw DomainError("chain size does not match grid");
  // Dual: maximize sum c_k y_k over circulations on the face graph (plus an
  // outer node) with |y_k| <= w_k. Each grid edge links the faces on its two
  // sides (c = chain, w = h); each face links to the outer node (c = 0,
  // w = h^2). Start from y_k = sign(c_k) w_k and repair conservation at
  // minimum cost.
  const double h = grid.h;
  const int F = grid.face_count();
  const int outer = F, S = F + 1, Tn = F + 2;
  MinCostFlow mcf(F + 3);
  std::vector<double> excess(F + 1, 0.0);
  double base = 0.0;
  auto link = [&](int a, int b, double c, double w) {
    if (a == b) return;
    if (std::abs(c) <= kZeroTheta) {
      mcf.add_arc(a, b, w, 0.0);
      mcf.add_arc(b, a, w, 0.0);
      return;
    }
    if (c < 0) {
      std::swap(a, b);
      c = -c;
    }
    // y = +w on a -> b; undoing it or pushing further back costs c per unit
    base += c * w;
    excess[b] += w;
    excess[a] -= w;
    mcf.add_arc(b, a, 2.0 * w, c);
  };
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const int above = j < grid.ny ? grid.face(i, j) : outer;
      const int below = j > 0 ? grid.face(i, j - 1) : outer;
      link(above, below, chain[grid.hedge(i, j)], h);
    }
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i) {
      const int left = i > 0 ? grid.face(i - 1, j) : outer;
      const int right = i < grid.nx ? grid.face(i, j) : outer;
      link(left, right, chain[grid.vedge(i, j)], h);
    }
  for (int f = 0; f < F; ++f) link(f, outer, 0.0, h * h);
  double supply = 0.0;
  for (int v = 0; v <= F; ++v) {
    if (excess[v] > 0) {
      mcf.add_arc(S, v, excess[v], 0.0);
      supply += excess[v];
    } else if (excess[v] < 0) {
      mcf.add_arc(v, Tn, -excess[v], 0.0);
    }
  }
  if (supply <= 0) return 0.0;
  const auto [flow, cost] = mcf.run(S, Tn, supply, kInf);
  if (flow < supply * (1 - 1e-9)) throw DomainError("flat norm circulation infeasible");
  return std::max(0.0, base - cost);
}

FlatDistance flat_distance_1(const TrafficPath& T1, const TrafficPath& T2, const GridComplex& grid) {
  FlatDistance out;
  if (T1.dim() == 3 || T2.dim() == 3) {
    out.value = mass(subtract(T1, T2));
    out.method = "mass of difference (upper-bound surrogate)";
    return out;
  }
  const Rasterized r1 = rasterize(T1, grid);
  const Rasterized r2 = rasterize(T2, grid);
  std::vector<double> t(r1.chain.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = r1.chain[k] - r2.chain[k];
  out.value = grid_flat_norm(t, grid);
  out.error_bound = r1.error_bound + r2.error_bound;
  out.method = "grid flat norm";
  return out;
}

}  // namespace btlab
