#include "btlab/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "btlab/decomposition.hpp"

namespace btlab {

// --------------------------------------------------------------- topology

const Point& Topology::position(int v) const {
  const int T = static_cast<int>(terminals.size());
  return v < T ? terminals[v] : steiner[v - T];
}

void Topology::compute_flows() {
  const int n = node_count();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, edge)
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    adj[edges[i].first].push_back({edges[i].second, i});
    adj[edges[i].second].push_back({edges[i].first, i});
  }
  flow.assign(edges.size(), 0.0);
  if (n == 0) return;
  std::vector<int> parent_edge(n, -1), order;
  std::vector<bool> seen(n, false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (auto [w, e] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = true;
      parent_edge[w] = e;
      stack.push_back(w);
    }
  }
  if (static_cast<int>(order.size()) != n || static_cast<int>(edges.size()) != n - 1)
    throw DomainError("topology is not a tree");
  std::vector<double> sub(n, 0.0);
  for (int v = 0; v < static_cast<int>(terminals.size()); ++v) sub[v] = supply[v];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    const int e = parent_edge[v];
    if (e < 0) continue;
    const int p = edges[e].first == v ? edges[e].second : edges[e].first;
    // subtree of v needs sub[v] delivered from p
    flow[e] = edges[e].second == v ? sub[v] : -sub[v];
    sub[p] += sub[v];
  }
}

namespace {

double edge_weight(double f, double alpha) {
  const double a = std::abs(f);
  if (a <= kZeroTheta) return 0.0;
  return alpha == 0.0 ? 1.0 : std::pow(a, alpha);
}

}  // namespace

double Topology::cost(double alpha) const {
  double c = 0;
  for (std::size_t i = 0; i < edges.size(); ++i)
    c += edge_weight(flow[i], alpha) * distance(position(edges[i].first), position(edges[i].second));
  return c;
}

std::string Topology::key() const {
  std::vector<std::pair<int, int>> e;
  for (auto [a, b] : edges) e.emplace_back(std::min(a, b), std::max(a, b));
  std::sort(e.begin(), e.end());
  std::ostringstream os;
  os << terminals.size() << ':';
  for (auto [a, b] : e) os << a << '-' << b << ';';
  return os.str();
}

TrafficPath Topology::to_path() const {
  std::vector<TrafficPath> parts;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (std::abs(flow[i]) > kZeroTheta)
      parts.push_back(TrafficPath::segment(position(edges[i].first), position(edges[i].second), flow[i]));
  return sum(parts);
}

// ------------------------------------------------------ position descent

namespace {

struct Glue {
  std::vector<int> parent;
  explicit Glue(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
};

double extent(const Topology& t) {
  double s = 0;
  for (const Point& a : t.terminals)
    for (const Point& b : t.terminals) s = std::max(s, distance(a, b));
  return std::max(s, 1e-12);
}

// Majorization on the glued problem. Terminals are fixed; every glue group
// moves as one point (placed on its terminal if it has one).
std::pair<double, bool> run_mm(Topology& t, Glue& glue, double alpha, const PositionOptions& opt, bool unit_start) {
  const int T = static_cast<int>(t.terminals.size());
  const int n = t.node_count();
  const int dim = t.terminals.empty() ? 2 : t.terminals[0].dim;
  std::vector<int> root(n), fixed_term(n, -1), var(n, -1);
  for (int v = 0; v < n; ++v) root[v] = glue.find(v);
  for (int v = 0; v < T; ++v) fixed_term[root[v]] = v;
  int G = 0;
  for (int v = 0; v < n; ++v)
    if (root[v] == v && fixed_term[v] < 0) var[v] = G++;
  auto sync = [&]() {
    for (int v = T; v < n; ++v) {
      const int r = root[v];
      if (fixed_term[r] >= 0) t.steiner[v - T] = t.terminals[fixed_term[r]];
      else if (r != v) t.steiner[v - T] = t.steiner[r - T];
    }
  };
  sync();
  if (G == 0) return {t.cost(alpha), true};

  std::vector<double> c(t.edges.size());
  for (std::size_t i = 0; i < t.edges.size(); ++i) c[i] = edge_weight(t.flow[i], alpha);
  const double eps = 1e-12 * extent(t);

  auto group_pos = [&](int v) -> Point {
    const int r = root[v];
    return fixed_term[r] >= 0 ? t.terminals[fixed_term[r]] : t.position(r);
  };

  Eigen::MatrixXd A(G, G);
  Eigen::MatrixXd B(G, dim);
  double best = t.cost(alpha);
  std::vector<Point> best_pos = t.steiner;
  double prev = best;
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    A.setZero();
    B.setZero();
    double max_diag = 0;
    for (std::size_t i = 0; i < t.edges.size(); ++i) {
      const int a = t.edges[i].first, b = t.edges[i].second;
      if (root[a] == root[b]) continue;
      double w;
      if (unit_start && it == 0) {
        w = 1.0;
      } else {
        if (c[i] == 0.0) continue;
        const double d = distance(group_pos(a), group_pos(b));
        w = c[i] / std::sqrt(d * d + eps * eps);
      }
      const int ga = var[root[a]], gb = var[root[b]];
      if (ga >= 0) A(ga, ga) += w;
      if (gb >= 0) A(gb, gb) += w;
      if (ga >= 0 && gb >= 0) {
        A(ga, gb) -= w;
        A(gb, ga) -= w;
      } else if (ga >= 0) {
        const Point p = group_pos(b);
        for (int k = 0; k < dim; ++k) B(ga, k) += w * p[k];
      } else if (gb >= 0) {
        const Point p = group_pos(a);
        for (int k = 0; k < dim; ++k) B(gb, k) += w * p[k];
      }
    }
    for (int g = 0; g < G; ++g) max_diag = std::max(max_diag, A(g, g));
    if (max_diag == 0.0) {
      converged = true;
      break;
    }
    // proximal term keeps isolated groups in place and the system definite
    const double lam = 1e-12 * max_diag;
    for (int v = 0; v < n; ++v)
      if (var[v] >= 0) {
        const Point p = t.position(v);
        A(var[v], var[v]) += lam;
        for (int k = 0; k < dim; ++k) B(var[v], k) += lam * p[k];
      }
    const Eigen::MatrixXd X = A.ldlt().solve(B);
    for (int v = T; v < n; ++v)
      if (var[v] >= 0) {
        Point p = Point::zero(dim);
        for (int k = 0; k < dim; ++k) p[k] = X(var[v], k);
        t.steiner[v - T] = p;
      }
    sync();
    const double f = t.cost(alpha);
    if (f < best) {
      best = f;
      best_pos = t.steiner;
    }
    if (!(unit_start && it == 0) && std::abs(prev - f) <= opt.rel_tol * std::max(f, 1e-300)) {
      converged = true;
      break;
    }
    prev = f;
  }
  t.steiner = best_pos;
  return {best, converged};
}

}  // namespace

std::pair<Topology, bool> optimize_positions_checked(const Topology& topo, double alpha, const PositionOptions& opt) {
  Topology t = topo;
  if (t.flow.size() != t.edges.size()) t.compute_flows();
  if (t.steiner.empty()) return {t, true};
  const double scale = extent(t);
  const int T = static_cast<int>(t.terminals.size());
  Glue glue(t.node_count());
  auto [cost, ok] = run_mm(t, glue, alpha, opt, true);

  // contract collapsing Steiner points when that does not cost more
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < static_cast<int>(t.edges.size()); ++i) {
      const int a = t.edges[i].first, b = t.edges[i].second;
      const int ra = glue.find(a), rb = glue.find(b);
      if (ra == rb) continue;
      const double d = distance(t.position(a), t.position(b));
      if (d < 1e-4 * scale) cand.push_back({d, i});
    }
    std::sort(cand.begin(), cand.end());
    for (auto [d, i] : cand) {
      (void)d;
      const int a = t.edges[i].first, b = t.edges[i].second;
      // two terminals can never be glued
      auto has_terminal = [&](int r) {
        for (int v = 0; v < T; ++v)
          if (glue.find(v) == r) return true;
        return false;
      };
      const int ra = glue.find(a), rb = glue.find(b);
      if (ra == rb || (has_terminal(ra) && has_terminal(rb))) continue;
      Topology trial = t;
      Glue g2 = glue;
      // keep a terminal as the representative
      if (has_terminal(rb)) g2.parent[ra] = rb;
      else g2.parent[rb] = ra;
      auto [c2, ok2] = run_mm(trial, g2, alpha, opt, false);
      if (c2 <= cost + 1e-15 * std::max(1.0, cost)) {
        t = std::move(trial);
        glue = g2;
        cost = c2;
        ok = ok || ok2;
        changed = true;
        break;
      }
    }
  }
  return {t, ok};
}

Topology optimize_positions(const Topology& topo, double alpha, double tol) {
  PositionOptions opt;
  opt.rel_tol = tol;
  auto [t, ok] = optimize_positions_checked(topo, alpha, opt);
  if (!ok) throw ConvergenceError("position descent did not converge", t);
  return t;
}

// ------------------------------------------------------------ enumeration

namespace {

void signed_terminals(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, std::vector<Point>& pts,
                      std::vector<double>& supply) {
  const AtomicMeasure net = mu_plus - mu_minus;
  std::vector<Atom> atoms = net.atoms();
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.at < b.at; });
  for (const Atom& a : atoms) {
    pts.push_back(a.at);
    supply.push_back(a.mass);
  }
}

void require_balanced_marginals(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus) {
  for (const AtomicMeasure* m : {&mu_minus, &mu_plus})
    for (const Atom& a : m->atoms())
      if (a.mass < 0) throw DomainError("marginals must be nonnegative");
  const double a = mu_minus.total(), b = mu_plus.total();
  if (std::abs(a - b) > 1e-9 * std::max(1.0, std::max(a, b))) throw DomainError("unbalanced masses");
}

}  // namespace

std::vector<Topology> full_topologies(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus) {
  Topology base;
  signed_terminals(mu_minus, mu_plus, base.terminals, base.supply);
  const int n = static_cast<int>(base.terminals.size());
  std::vector<Topology> out;
  if (n < 2) return out;
  const int dim = base.terminals[0].dim;
  if (n == 2) {
    base.edges = {{0, 1}};
    out.push_back(base);
  } else {
    base.steiner.push_back(Point::zero(dim));
    base.edges = {{0, n}, {1, n}, {2, n}};
    std::vector<Topology> level{base};
    for (int k = 3; k < n; ++k) {
      std::vector<Topology> next;
      for (const Topology& t : level)
        for (std::size_t e = 0; e < t.edges.size(); ++e) {
          Topology u = t;
          const int s = n + static_cast<int>(u.steiner.size());
          u.steiner.push_back(Point::zero(dim));
          const auto [a, b] = u.edges[e];
          u.edges[e] = {a, s};
          u.edges.push_back({s, b});
          u.edges.push_back({s, k});
          next.push_back(std::move(u));
        }
      level = std::move(next);
    }
    out = std::move(level);
  }
  for (Topology& t : out) t.compute_flows();
  return out;
}

OracleResult brute_force_optimal(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                                 double tol) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  require_balanced_marginals(mu_minus, mu_plus);
  const AtomicMeasure net = mu_plus - mu_minus;
  if (net.size() > kOracleMaxAtoms) throw OracleRangeError("instance exceeds oracle bound");
  OracleResult res;
  const auto topos = full_topologies(mu_minus, mu_plus);
  res.topologies_tried = topos.size();
  if (topos.empty()) return res;
  PositionOptions opt;
  opt.rel_tol = std::min(1e-10, tol);
  double best = INFINITY;
  Topology winner;
  std::string winner_key;
  for (const Topology& t : topos) {
    auto [o, ok] = optimize_positions_checked(t, alpha, opt);
    (void)ok;
    const double c = o.cost(alpha);
    const std::string k = o.key();
    const double tie = 1e-12 * std::max(1.0, c);
    if (winner_key.empty() || c < best - tie || (std::abs(c - best) <= tie && k < winner_key)) {
      best = std::min(best, c);
      winner = std::move(o);
      winner_key = k;
    }
  }
  res.path = winner.to_path();
  res.cost = alpha_mass(res.path, alpha);
  res.topology = winner_key;
  return res;
}

// ------------------------------------------------------------ local search

namespace {

Topology mst_topology(const std::vector<Point>& pts, const std::vector<double>& supply) {
  Topology t;
  t.terminals = pts;
  t.supply = supply;
  const int n = static_cast<int>(pts.size());
  std::vector<bool> in(n, false);
  std::vector<double> best(n, INFINITY);
  std::vector<int> from(n, -1);
  if (n == 0) return t;
  best[0] = 0;
  for (int it = 0; it < n; ++it) {
    int v = -1;
    for (int i = 0; i < n; ++i)
      if (!in[i] && (v < 0 || best[i] < best[v])) v = i;
    in[v] = true;
    if (from[v] >= 0) t.edges.push_back({from[v], v});
    for (int i = 0; i < n; ++i)
      if (!in[i] && distance(pts[v], pts[i]) < best[i]) {
        best[i] = distance(pts[v], pts[i]);
        from[i] = v;
      }
  }
  t.compute_flows();
  return t;
}

// Reads a traffic path as a topology when its undirected graph is a forest.
std::optional<Topology> topology_of(const TrafficPath& P, const std::vector<Point>& pts,
                                    const std::vector<double>& supply) {
  Topology t;
  t.terminals = pts;
  t.supply = supply;
  const int T = static_cast<int>(pts.size());
  std::vector<int> id(P.vertices.size(), -1);
  for (std::size_t v = 0; v < P.vertices.size(); ++v) {
    for (int k = 0; k < T; ++k)
      if (near(P.vertices[v], pts[k])) id[v] = k;
    if (id[v] < 0) {
      id[v] = T + static_cast<int>(t.steiner.size());
      t.steiner.push_back(P.vertices[v]);
    }
  }
  Glue comp(t.node_count());
  for (const Edge& e : P.edges) {
    const int a = comp.find(id[e.tail]), b = comp.find(id[e.head]);
    if (a == b) return std::nullopt;
    comp.parent[a] = b;
    t.edges.push_back({id[e.tail], id[e.head]});
  }
  // link components with zero-flow edges
  for (int v = 1; v < t.node_count(); ++v) {
    const int a = comp.find(0), b = comp.find(v);
    if (a != b) {
      comp.parent[b] = a;
      t.edges.push_back({0, v});
    }
  }
  t.compute_flows();
  return t;
}

std::vector<std::vector<int>> adjacency(const Topology& t) {
  std::vector<std::vector<int>> adj(t.node_count());
  for (int i = 0; i < static_cast<int>(t.edges.size()); ++i) {
    adj[t.edges[i].first].push_back(i);
    adj[t.edges[i].second].push_back(i);
  }
  return adj;
}

// Removes Steiner nodes of degree <= 2 (degree 2: joins the neighbours).
void tidy(Topology& t) {
  const int T = static_cast<int>(t.terminals.size());
  for (bool again = true; again;) {
    again = false;
    const auto adj = adjacency(t);
    for (int v = T; v < t.node_count(); ++v) {
      const auto& inc = adj[v];
      if (inc.size() > 2) continue;
      std::vector<int> nb;
      for (int e : inc) nb.push_back(t.edges[e].first == v ? t.edges[e].second : t.edges[e].first);
      std::vector<std::pair<int, int>> keep;
      for (int i = 0; i < static_cast<int>(t.edges.size()); ++i)
        if (std::find(inc.begin(), inc.end(), i) == inc.end()) keep.push_back(t.edges[i]);
      if (nb.size() == 2) keep.push_back({nb[0], nb[1]});
      // drop node v and renumber
      for (auto& [a, b] : keep) {
        if (a > v) --a;
        if (b > v) --b;
      }
      t.steiner.erase(t.steiner.begin() + (v - T));
      t.edges = std::move(keep);
      again = true;
      break;
    }
  }
  t.compute_flows();
}

bool in_subtree(const Topology& t, int removed_edge, int root, int target) {
  const auto adj = adjacency(t);
  std::vector<bool> seen(t.node_count(), false);
  std::vector<int> st{root};
  seen[root] = true;
  while (!st.empty()) {
    const int v = st.back();
    st.pop_back();
    if (v == target) return true;
    for (int e : adj[v]) {
      if (e == removed_edge) continue;
      const int w = t.edges[e].first == v ? t.edges[e].second : t.edges[e].first;
      if (!seen[w]) {
        seen[w] = true;
        st.push_back(w);
      }
    }
  }
  return false;
}

std::optional<Topology> move_spr(const Topology& t, std::mt19937_64& rng) {
  if (t.edges.size() < 2) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pe(0, t.edges.size() - 1);
  const std::size_t e = pe(rng);
  auto [u, v] = t.edges[e];
  if (rng() & 1u) std::swap(u, v);
  // candidate attachment edges on u's side
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < t.edges.size(); ++i)
    if (i != e && !in_subtree(t, static_cast<int>(e), v, t.edges[i].first)) targets.push_back(i);
  if (targets.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pt(0, targets.size() - 1);
  const std::size_t tg = targets[pt(rng)];
  Topology n = t;
  const auto [a, b] = n.edges[tg];
  const int s = n.node_count();
  n.steiner.push_back(lerp(n.position(a), n.position(b), 0.5));
  n.edges[tg] = {a, s};
  n.edges.push_back({s, b});
  n.edges[e] = {s, v};
  tidy(n);
  return n;
}

std::optional<Topology> move_merge(const Topology& t, std::mt19937_64& rng) {
  const int T = static_cast<int>(t.terminals.size());
  if (t.steiner.empty()) return std::nullopt;
  const auto adj = adjacency(t);
  std::uniform_int_distribution<int> ps(T, t.node_count() - 1);
  const int s = ps(rng);
  std::uniform_int_distribution<std::size_t> pn(0, adj[s].size() - 1);
  const int e = adj[s][pn(rng)];
  const int w = t.edges[e].first == s ? t.edges[e].second : t.edges[e].first;
  Topology n = t;
  std::vector<std::pair<int, int>> keep;
  for (int i = 0; i < static_cast<int>(n.edges.size()); ++i) {
    if (i == e) continue;
    auto [a, b] = n.edges[i];
    if (a == s) a = w;
    if (b == s) b = w;
    keep.push_back({a, b});
  }
  for (auto& [a, b] : keep) {
    if (a > s) --a;
    if (b > s) --b;
  }
  n.steiner.erase(n.steiner.begin() + (s - T));
  n.edges = std::move(keep);
  tidy(n);
  return n;
}

std::optional<Topology> move_split(const Topology& t, std::mt19937_64& rng) {
  const auto adj = adjacency(t);
  const int T = static_cast<int>(t.terminals.size());
  std::vector<int> nodes;
  for (int v = 0; v < t.node_count(); ++v)
    if (adj[v].size() >= (v < T ? 2u : 4u)) nodes.push_back(v);
  if (nodes.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pv(0, nodes.size() - 1);
  const int v = nodes[pv(rng)];
  std::vector<int> inc = adj[v];
  std::shuffle(inc.begin(), inc.end(), rng);
  Topology n = t;
  const int s = n.node_count();
  Point at = n.position(v) * 0.5;
  for (int k = 0; k < 2; ++k) {
    auto& [a, b] = n.edges[inc[k]];
    const int other = a == v ? b : a;
    at += n.position(other) * 0.25;
    if (a == v) a = s;
    else b = s;
  }
  n.steiner.push_back(at);
  n.edges.push_back({v, s});
  tidy(n);
  return n;
}

}  // namespace

LocalSearchResult local_search(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                               const std::optional<TrafficPath>& init, const LocalSearchOptions& opt) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  require_balanced_marginals(mu_minus, mu_plus);
  std::vector<Point> pts;
  std::vector<double> supply;
  signed_terminals(mu_minus, mu_plus, pts, supply);
  LocalSearchResult res;
  if (pts.empty()) return res;

  Topology cur;
  if (init) {
    if (!approx_equal(boundary(*init), mu_plus - mu_minus)) throw DomainError("init has the wrong boundary");
    res.path = init->normalized();
    auto t = topology_of(res.path, pts, supply);
    cur = t ? *t : mst_topology(pts, supply);
    res.cost = alpha_mass(res.path, alpha);
    if (!t) {
      const TrafficPath p = cur.to_path();
      if (alpha_mass(p, alpha) < res.cost) {
        res.path = p;
        res.cost = alpha_mass(p, alpha);
      }
    }
  } else {
    cur = mst_topology(pts, supply);
    res.path = cur.to_path();
    res.cost = alpha_mass(res.path, alpha);
  }
  res.initial_cost = res.cost;
  double cur_cost = cur.cost(alpha);

  PositionOptions po;
  po.max_iter = 3000;
  auto accept = [&](Topology cand) {
    auto [o, ok] = optimize_positions_checked(cand, alpha, po);
    (void)ok;
    const double c = o.cost(alpha);
    if (c < cur_cost - 1e-12 * std::max(1.0, cur_cost)) {
      cur = std::move(o);
      cur_cost = c;
      const TrafficPath p = cur.to_path();
      const double pc = alpha_mass(p, alpha);
      if (pc < res.cost) {
        res.path = p;
        res.cost = pc;
        ++res.accepted_moves;
        res.cost_trace.push_back(pc);
      }
      return true;
    }
    return false;
  };
  accept(cur);

  std::mt19937_64 rng(opt.seed);
  for (int it = 0; it < opt.budget; ++it) {
    std::optional<Topology> cand;
    switch (rng() % 3) {
      case 0: cand = move_spr(cur, rng); break;
      case 1: cand = move_merge(cur, rng); break;
      default: cand = move_split(cur, rng); break;
    }
    if (cand) accept(std::move(*cand));
  }
  return res;
}

OptimalityReport is_optimal(const TrafficPath& T, double alpha, double tol) {
  const AtomicMeasure bd = boundary(T);
  const OracleResult o = brute_force_optimal(bd.negative_part(), bd.positive_part(), alpha, 1e-10);
  OptimalityReport r;
  r.cost = alpha_mass(T, alpha);
  r.oracle_cost = o.cost;
  r.gap = r.cost - o.cost;
  r.optimal = r.cost <= o.cost + tol;
  return r;
}

namespace {

// Cost of the forest `links` over `pts` with flows forced by `supply`;
// infinite when some component is unbalanced.
double forced_forest_cost(const std::vector<Point>& pts, const std::vector<double>& supply,
                          const std::vector<std::pair<int, int>>& links, double alpha) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (int i = 0; i < static_cast<int>(links.size()); ++i) {
    adj[links[i].first].push_back({links[i].second, i});
    adj[links[i].second].push_back({links[i].first, i});
  }
  std::vector<int> parent_edge(n, -2), order;
  std::vector<double> sub(supply);
  double cost = 0;
  for (int root = 0; root < n; ++root) {
    if (parent_edge[root] != -2) continue;
    parent_edge[root] = -1;
    order.clear();
    std::vector<int> stack{root};
    std::vector<int> parent(n, -1);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (auto [w, e] : adj[v]) {
        if (e == parent_edge[v]) continue;
        if (parent_edge[w] != -2) return INFINITY;  // cycle: not a forest
        parent_edge[w] = e;
        parent[w] = v;
        stack.push_back(w);
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int v = *it;
      if (parent_edge[v] < 0) continue;
      cost += edge_weight(std::abs(sub[v]), alpha) * distance(pts[v], pts[parent[v]]);
      sub[parent[v]] += sub[v];
    }
    if (std::abs(sub[root]) > 1e-9) return INFINITY;
  }
  return cost;
}

}  // namespace

SafeguardReport oracle_safeguard(const TrafficPath& T, double alpha, double tol) {
  SafeguardReport r;
  r.cost = alpha_mass(T, alpha);
  const int n = static_cast<int>(T.vertices.size());
  std::vector<double> supply(n, 0.0);
  std::vector<std::pair<int, int>> links;
  for (const Edge& e : T.edges) {
    supply[e.head] += e.theta;
    supply[e.tail] -= e.theta;
    links.push_back({static_cast<int>(e.tail), static_cast<int>(e.head)});
  }
  for (std::size_t drop = 0; drop < links.size(); ++drop) {
    std::vector<std::pair<int, int>> rest = links;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(drop));
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        rest.push_back({a, b});
        r.best_edge_swap = std::min(r.best_edge_swap, forced_forest_cost(T.vertices, supply, rest, alpha));
        rest.pop_back();
      }
  }
  if (is_acyclic(T)) {
    const PathMeasure pi = good_decomposition(T);
    for (const WeightedCurve& c : pi.entries) {
      PathMeasure one;
      one.entries.push_back(c);
      const TrafficPath moved =
          add(subtract(T, reconstruct(one)), TrafficPath::segment(c.curve.start(), c.curve.end(), c.weight));
      r.best_reroute = std::min(r.best_reroute, alpha_mass(moved, alpha));
    }
  }
  r.holds = r.best_edge_swap >= r.cost - tol && r.best_reroute >= r.cost - tol;
  return r;
}

}  // namespace btlab
