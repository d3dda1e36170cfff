#include <cmath>
#include <numbers>
#include <random>

#include "btlab/constructors.hpp"
#include "btlab/decomposition.hpp"
#include "btlab/optimizer.hpp"
#include "doctest.h"

using namespace btlab;

namespace {

// Dense grid search for the branch point b of a three-terminal star:
// min over b of sum_i w_i |x_i - b|.
double grid_star(const std::vector<Point>& x, const std::vector<double>& w, double lo_x, double hi_x, double lo_y,
                 double hi_y, double step, Point* arg = nullptr) {
  double best = INFINITY;
  for (double bx = lo_x; bx <= hi_x + 1e-12; bx += step)
    for (double by = lo_y; by <= hi_y + 1e-12; by += step) {
      double c = 0;
      for (std::size_t i = 0; i < x.size(); ++i) c += w[i] * std::hypot(x[i][0] - bx, x[i][1] - by);
      if (c < best) {
        best = c;
        if (arg) *arg = Point(bx, by);
      }
    }
  return best;
}

double angle_deg(const Point& a, const Point& o, const Point& b) {
  const Point u = a - o, v = b - o;
  return std::acos(u.dot(v) / (u.norm() * v.norm())) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("topology enumeration counts") {
  std::vector<Atom> m, p;
  for (int i = 0; i < 3; ++i) m.push_back({Point(i, 0), 1.0});
  for (int i = 0; i < 3; ++i) p.push_back({Point(i, 1), 1.0});
  CHECK(full_topologies(AtomicMeasure(m), AtomicMeasure(p)).size() == 105);  // (2*6-5)!!
  m.pop_back();
  p.back().mass = 0.0;
  p[0].mass = 1.0;
  CHECK(full_topologies(AtomicMeasure(m), AtomicMeasure({p[0], p[1]})).size() == 3);
}

TEST_CASE("oracle anchors") {
  const AtomicMeasure sources = AtomicMeasure::dirac({-1, 1}) + AtomicMeasure::dirac({1, 1});
  const AtomicMeasure sink = AtomicMeasure::dirac({0, 0}, 2.0);
  const OracleResult lin = brute_force_optimal(sources, sink, 1.0);
  CHECK(std::abs(lin.cost - 2 * std::sqrt(2.0)) <= 1e-6);

  const OracleResult two = brute_force_optimal(AtomicMeasure::dirac({0, 0}, 3.0), AtomicMeasure::dirac({1, 2}, 3.0), 0.4);
  CHECK(two.cost == doctest::Approx(std::pow(3.0, 0.4) * std::sqrt(5.0)).epsilon(1e-12));

  // alpha = 0.5: the branch angle condition gives exactly 90 degrees, which
  // is the angle the two sources already make at the sink.
  const OracleResult half = brute_force_optimal(sources, sink, 0.5);
  const double grid = grid_star({{-1, 1}, {1, 1}, {0, 0}}, {1, 1, std::sqrt(2.0)}, -1, 1, 0, 1, 1e-3);
  CHECK(std::abs(half.cost - grid) <= 1e-4);
  CHECK(half.cost <= 2 * std::sqrt(2.0) + 1e-12);

  // taller sources: the branch point moves strictly inside
  const AtomicMeasure tall = AtomicMeasure::dirac({-1, 2}) + AtomicMeasure::dirac({1, 2});
  const OracleResult y = brute_force_optimal(tall, sink, 0.5);
  Point b;
  const double gy = grid_star({{-1, 2}, {1, 2}, {0, 0}}, {1, 1, std::sqrt(2.0)}, -1, 1, 0, 2, 1e-3, &b);
  const double v_cost = 2 * std::sqrt(5.0);
  CHECK(y.cost < v_cost - 1e-3);
  CHECK(std::abs((v_cost - y.cost) - (v_cost - gy)) <= 1e-4);
  CHECK(b[1] > 0.0);
}

TEST_CASE("Fermat point at alpha = 0") {
  const double s = std::sqrt(3.0);
  const Point A(0, 0), B(2, 0), C(1, s);
  const OracleResult r = brute_force_optimal(AtomicMeasure::dirac(A), AtomicMeasure::dirac(B, 0.5) + AtomicMeasure::dirac(C, 0.5), 0.0);
  // the Steiner vertex is the only vertex that is not a terminal
  Point f;
  int found = 0;
  for (const Point& v : r.path.vertices)
    if (!near(v, A) && !near(v, B) && !near(v, C)) f = v, ++found;
  REQUIRE(found == 1);
  CHECK(std::abs(angle_deg(A, f, B) - 120.0) <= 0.1);
  CHECK(std::abs(angle_deg(B, f, C) - 120.0) <= 0.1);
  CHECK(std::abs(angle_deg(C, f, A) - 120.0) <= 0.1);
  Point g;
  const double grid = grid_star({A, B, C}, {1, 1, 1}, 0, 2, 0, s, 1e-3, &g);
  CHECK(distance(f, g) <= 2e-3);
  CHECK(std::abs(r.cost - grid) <= 1e-4);
}

TEST_CASE("oracle invariances and structure") {
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u(-1, 1), w(0.2, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Atom> m, p;
    double tm = 0;
    for (int i = 0; i < 2; ++i) {
      m.push_back({Point(u(rng) - 1.5, u(rng)), w(rng)});
      tm += m.back().mass;
    }
    const double a = w(rng);
    p.push_back({Point(u(rng) + 1.5, u(rng)), tm * a / (1 + a)});
    p.push_back({Point(u(rng) + 1.5, u(rng)), tm / (1 + a)});
    const AtomicMeasure mm(m), mp(p);
    const double alpha = 0.3 + 0.1 * trial;
    const OracleResult r = brute_force_optimal(mm, mp, alpha);
    CHECK(approx_equal(boundary(r.path), mp - mm));
    CHECK(is_acyclic(r.path));
    CHECK(equivalent(remove_cycles(r.path), r.path));
    CHECK(check_good_decomposition(r.path, good_decomposition(r.path)).ok(1e-9));
    const double lam = 2.5;
    CHECK(brute_force_optimal(mm * lam, mp * lam, alpha).cost ==
          doctest::Approx(std::pow(lam, alpha) * r.cost).epsilon(1e-8));
    std::vector<Atom> md, pd;
    for (auto x : m) md.push_back({x.at * lam, x.mass});
    for (auto x : p) pd.push_back({x.at * lam, x.mass});
    CHECK(brute_force_optimal(AtomicMeasure(md), AtomicMeasure(pd), alpha).cost ==
          doctest::Approx(lam * r.cost).epsilon(1e-8));
  }
  std::vector<Atom> many;
  for (int i = 0; i < 4; ++i) many.push_back({Point(i, 0), 1.0});
  std::vector<Atom> sinks;
  for (int i = 0; i < 3; ++i) sinks.push_back({Point(i, 3), 4.0 / 3});
  CHECK_THROWS_WITH_AS(brute_force_optimal(AtomicMeasure(many), AtomicMeasure(sinks), 0.5),
                       "instance exceeds oracle bound", DomainError);
}

TEST_CASE("oracle against dyadic irrigation") {
  const AtomicMeasure src = AtomicMeasure::dirac({0, 0}, 1.0);
  const AtomicMeasure tgt = AtomicMeasure::dirac({0.5, 0.5}, 0.25) + AtomicMeasure::dirac({-0.5, 0.5}, 0.25) +
                            AtomicMeasure::dirac({0.5, -0.5}, 0.25) + AtomicMeasure::dirac({-0.5, -0.5}, 0.25);
  const double dy = alpha_mass(dyadic_irrigation(src, tgt, 0.6), 0.6);
  const OracleResult o = brute_force_optimal(src, tgt, 0.6);
  CHECK(o.cost <= dy + 1e-12);
  MESSAGE("dyadic / oracle ratio: " << dy / o.cost);
}

TEST_CASE("optimize_positions") {
  SUBCASE("degree-1 Steiner point collapses") {
    Topology t;
    t.terminals = {Point(0, 0), Point(1, 0)};
    t.supply = {-1.0, 1.0};
    t.steiner = {Point(0.5, 0.7)};
    t.edges = {{0, 1}, {1, 2}};
    t.compute_flows();
    CHECK(t.flow[1] == 0.0);
    // only the zero-flow edge touches it; give it flow by attaching a sink
    t.terminals.push_back(Point(2, 1));
    t.supply = {-1.0, 0.0, 1.0};
    t.steiner = {Point(0.5, 0.7)};
    t.edges = {{0, 3}, {3, 1}, {1, 2}};
    // node 1 (supply 0) is a terminal; Steiner 3 has two edges with flow
    t.compute_flows();
    const Topology o = optimize_positions(t, 0.5);
    CHECK(distance(o.steiner[0], Point(0.5, 0.0)) < 0.5);
  }
  SUBCASE("symmetric Y keeps the branch on the axis") {
    Topology t;
    t.terminals = {Point(-1, 2), Point(1, 2), Point(0, 0)};
    t.supply = {-1.0, -1.0, 2.0};
    t.steiner = {Point(0.3, 0.3)};
    t.edges = {{0, 3}, {1, 3}, {2, 3}};
    t.compute_flows();
    const Topology o = optimize_positions(t, 0.5);
    CHECK(std::abs(o.steiner[0][0]) < 1e-7);
    CHECK(o.steiner[0][1] > 0.1);
  }
  SUBCASE("a leaf Steiner point snaps to its neighbour") {
    Topology t;
    t.terminals = {Point(0, 0), Point(1, 0)};
    t.supply = {-1.0, 1.0};
    t.steiner = {Point(0.3, 0.4), Point(0.9, 0.9)};
    t.edges = {{0, 2}, {2, 1}, {2, 3}};
    t.compute_flows();
    const Topology o = optimize_positions(t, 0.5);
    CHECK(o.cost(0.5) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("local search") {
  const AtomicMeasure sources = AtomicMeasure::dirac({-1, 2}) + AtomicMeasure::dirac({1, 2});
  const AtomicMeasure sink = AtomicMeasure::dirac({0, 0}, 2.0);
  const OracleResult o = brute_force_optimal(sources, sink, 0.5);
  const LocalSearchResult fixed = local_search(sources, sink, 0.5, o.path, {50, 3});
  CHECK(fixed.cost <= o.cost + 1e-12);
  CHECK(fixed.cost >= o.cost - 1e-9);

  const AtomicMeasure a = AtomicMeasure::dirac({0, 0}, 1.5), b = AtomicMeasure::dirac({2, 1}, 1.5);
  std::vector<Point> bent{{0, 0}, {1, 3}, {2, 1}};
  const LocalSearchResult straight = local_search(a, b, 0.5, TrafficPath::polyline(bent, 1.5), {50, 5});
  CHECK(equivalent(straight.path, TrafficPath::segment({0, 0}, {2, 1}, 1.5), 1e-6));

  std::mt19937_64 rng(89);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Atom> src;
  for (int i = 0; i < 4; ++i) src.push_back({Point(u(rng), u(rng) + 2.0), 0.25});
  const AtomicMeasure mm(src), mp = AtomicMeasure::dirac({0, -1}, 1.0);
  const OracleResult oracle = brute_force_optimal(mm, mp, 0.7);
  int close = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const LocalSearchResult r = local_search(mm, mp, 0.7, std::nullopt, {150, seed});
    CHECK(approx_equal(boundary(r.path), mp - mm));
    CHECK(r.cost >= oracle.cost - 1e-9);
    CHECK(r.cost <= 1.05 * oracle.cost);
    for (std::size_t i = 1; i < r.cost_trace.size(); ++i) CHECK(r.cost_trace[i] < r.cost_trace[i - 1]);
    close += r.cost <= oracle.cost + 1e-4;
  }
  MESSAGE("local search within 1e-4 of the oracle on " << close << "/20 seeds");
}

TEST_CASE("is_optimal") {
  const AtomicMeasure sources = AtomicMeasure::dirac({-1, 2}) + AtomicMeasure::dirac({1, 2});
  const AtomicMeasure sink = AtomicMeasure::dirac({0, 0}, 2.0);
  const OracleResult o = brute_force_optimal(sources, sink, 0.5);
  const OptimalityReport yes = is_optimal(o.path, 0.5, 1e-9);
  CHECK(yes.optimal);
  CHECK(std::abs(yes.gap) <= 1e-9);

  // detour on one source edge
  const TrafficPath detour = add(o.path, add(TrafficPath::segment({-1, 2}, {-2, 1}), TrafficPath::segment({-2, 1}, {-1, 2})));
  std::vector<Point> v{{-1, 2}, {-1, 3}, {0, 2}};
  const TrafficPath longer = sum(std::vector<TrafficPath>{o.path, scaled(TrafficPath::segment({-1, 2}, {0, 2}), -1.0),
                                                          TrafficPath::polyline(v)});
  (void)detour;
  const OptimalityReport no = is_optimal(longer, 0.5, 1e-9);
  CHECK_FALSE(no.optimal);
  CHECK(no.gap > 0);

  const TrafficPath V = add(TrafficPath::segment({-1, 2}, {0, 0}), TrafficPath::segment({1, 2}, {0, 0}));
  const OptimalityReport vr = is_optimal(V, 0.5, 1e-9);
  const double grid = grid_star({{-1, 2}, {1, 2}, {0, 0}}, {1, 1, std::sqrt(2.0)}, -1, 1, 0, 2, 1e-3);
  CHECK_FALSE(vr.optimal);
  CHECK(std::abs(vr.gap - (alpha_mass(V, 0.5) - grid)) <= 1e-4);
}

TEST_CASE("oracle safeguard") {
  std::mt19937_64 rng(89);
  std::uniform_real_distribution<double> u(-1, 1), w(0.2, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Atom> m, p;
    double tm = 0;
    for (int i = 0; i < 2 + trial % 2; ++i) {
      m.push_back({Point(u(rng) - 1.5, u(rng)), w(rng)});
      tm += m.back().mass;
    }
    p.push_back({Point(u(rng) + 1.5, u(rng)), tm * 0.4});
    p.push_back({Point(u(rng) + 1.5, u(rng)), tm * 0.6});
    const double alpha = 0.2 + 0.07 * trial;
    const OracleResult r = brute_force_optimal(AtomicMeasure(m), AtomicMeasure(p), alpha);
    const SafeguardReport s = oracle_safeguard(r.path, alpha, 1e-9);
    CHECK(s.holds);
    CHECK(s.best_edge_swap >= r.cost - 1e-9);
  }
  // a bent single edge: sending the curve straight is cheaper
  const TrafficPath bent = add(TrafficPath::segment({0, 0}, {1, 2}, 0.5), TrafficPath::segment({1, 2}, {2, 0}, 0.5));
  const SafeguardReport s = oracle_safeguard(bent, 0.5, 1e-9);
  CHECK_FALSE(s.holds);
  CHECK(s.best_reroute == doctest::Approx(2 * std::sqrt(0.5)));
  // V against the Y of taller sources: the edge swap cannot add a branch point, reroute is no help either
  const TrafficPath v = add(TrafficPath::segment({-1, 2}, {0, 0}), TrafficPath::segment({1, 2}, {0, 0}));
  CHECK(oracle_safeguard(v, 0.5, 1e-9).best_edge_swap >= alpha_mass(v, 0.5) - 1e-9);
}
