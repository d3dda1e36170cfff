#include <cmath>
#include <functional>
#include <random>

#include "btlab/decomposition.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace btlab;

namespace {

// Brute-force: does the support digraph have a directed cycle? Tries every
// start vertex and every simple walk.
bool has_cycle_exhaustive(const TrafficPath& T) {
  const std::size_t n = T.vertices.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Edge& e : T.edges)
    if (e.theta > 0) adj[e.tail].push_back(e.head);
  std::vector<bool> on(n, false);
  std::function<bool(std::size_t, std::size_t)> walk = [&](std::size_t start, std::size_t v) {
    for (std::size_t w : adj[v]) {
      if (w == start) return true;
      if (on[w]) continue;
      on[w] = true;
      if (walk(start, w)) return true;
      on[w] = false;
    }
    return false;
  };
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(on.begin(), on.end(), false);
    on[s] = true;
    if (walk(s, s)) return true;
  }
  return false;
}

Curve curve(std::vector<Point> pts) { return Curve{std::move(pts)}; }

}  // namespace

TEST_CASE("remove_cycles") {
  const Point a(0, 0), b(1, 0), c(2, 0.5), d(1.5, 1);
  TrafficPath T;
  T.vertices = {a, b, c, d};
  T.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 1, 1.0}};
  const TrafficPath R = remove_cycles(T);
  CHECK(equivalent(R, TrafficPath::segment(a, b)));

  std::mt19937_64 rng(41);
  const TrafficPath dag = testsupport::random_dag(rng, 8, 12);
  CHECK(equivalent(remove_cycles(dag), dag));

  for (int k = 0; k < 200; ++k) {
    const TrafficPath G = testsupport::random_digraph(rng, 6, 9).normalized();
    const TrafficPath H = remove_cycles(G);
    CHECK(is_acyclic(H));
    CHECK_FALSE(has_cycle_exhaustive(H));
    CHECK(approx_equal(boundary(H), boundary(G)));
    CHECK(mass(H) <= mass(G) + 1e-12);
    if (has_cycle_exhaustive(G))
      CHECK(mass(H) < mass(G) - 1e-9);
    else
      CHECK(std::abs(mass(H) - mass(G)) <= 1e-12);
    CHECK(equivalent(remove_cycles(H), H));
  }
}

TEST_CASE("good_decomposition examples") {
  const Point a(0, 0), b(1, 0), c(2, 1);
  std::vector<Point> chain{a, b, c};
  PathMeasure pi = good_decomposition(TrafficPath::polyline(chain));
  REQUIRE(pi.entries.size() == 1);
  CHECK(pi.entries[0].weight == doctest::Approx(1.0));
  CHECK(pi.entries[0].curve.waypoints.size() == 3);

  const Point s(0, 0), x(1, 1), y(1, -1), t(2, 0);
  std::vector<Point> p1{s, x, t}, p2{s, y, t};
  const TrafficPath diamond = add(TrafficPath::polyline(p1), TrafficPath::polyline(p2));
  pi = good_decomposition(diamond);
  CHECK(pi.entries.size() == 2);
  CHECK(pi.total_weight() == doctest::Approx(boundary(diamond).total_variation() / 2));

  // Y: two unit sources merging into a trunk of multiplicity 2
  const Point s1(-1, 1), s2(-1, -1), j(0, 0), sink(2, 0);
  const TrafficPath Y = sum(std::vector<TrafficPath>{TrafficPath::segment(s1, j), TrafficPath::segment(s2, j),
                                                     TrafficPath::segment(j, sink, 2.0)});
  pi = good_decomposition(Y);
  CHECK(pi.entries.size() == 2);
  double through_trunk = 0;
  for (const auto& e : pi.entries) {
    CHECK(e.weight == doctest::Approx(1.0));
    for (std::size_t i = 0; i + 1 < e.curve.waypoints.size(); ++i)
      if (near(e.curve.waypoints[i], j) && near(e.curve.waypoints[i + 1], sink)) through_trunk += e.weight;
  }
  CHECK(through_trunk == doctest::Approx(2.0));

  TrafficPath cyc;
  cyc.vertices = {a, b, c};
  cyc.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
  CHECK_THROWS_WITH_AS(good_decomposition(cyc), "not acyclic", DomainError);
}

TEST_CASE("good_decomposition identities on random DAGs") {
  std::mt19937_64 rng(43);
  for (int k = 0; k < 100; ++k) {
    const bool rational = k % 2 == 0;
    const TrafficPath T = testsupport::random_dag(rng, 9, 20, rational);
    const PathMeasure pi = good_decomposition(T);
    const DecompositionCheck chk = check_good_decomposition(T, pi);
    CHECK(chk.ok(1e-9));
    // independent recount of the boundary mass
    double bm = 0;
    for (const Atom& at : boundary(T).atoms()) bm += std::abs(at.mass);
    CHECK(std::abs(bm - 2 * pi.total_weight()) <= 1e-9);
    double wl = 0;
    for (const auto& e : pi.entries) wl += e.weight * e.curve.length();
    CHECK(std::abs(mass(T) - wl) <= 1e-9);
  }
}

TEST_CASE("reconstruct") {
  CHECK(reconstruct(PathMeasure{}).empty());
  PathMeasure one;
  one.entries.push_back({curve({{0, 0}, {1, 0}, {1, 1}}), 0.25});
  const TrafficPath T = reconstruct(one);
  CHECK(T.edges.size() == 2);
  for (const Edge& e : T.edges) CHECK(e.theta == doctest::Approx(0.25));
  CHECK(approx_equal(boundary(T), (AtomicMeasure::dirac({1, 1}) - AtomicMeasure::dirac({0, 0})) * 0.25));

  std::mt19937_64 rng(47);
  for (int k = 0; k < 50; ++k) {
    const TrafficPath R = testsupport::random_dag(rng, 8, 16);
    CHECK(equivalent(reconstruct(good_decomposition(R)), R));
  }
}

TEST_CASE("first exit and last entry") {
  const Curve c = curve({{0, 0}, {1, 0}});
  const BallRegion B = BallRegion::ball(Ball({0, 0}, 0.5));
  CHECK(first_exit(c, B) == doctest::Approx(0.5));
  CHECK(first_exit(c, BallRegion::ball(Ball({0, 0}, 5.0))) == kNeverLeaves);
  CHECK(first_exit(c, BallRegion::ball(Ball({3, 0}, 0.5))) == 0.0);
  CHECK(last_entry(c, BallRegion::ball(Ball({1, 0}, 0.25))) == doctest::Approx(0.75));
  CHECK(last_entry(c, BallRegion::ball(Ball({0, 0}, 5.0))) == 0.0);
  // leaves, comes back, leaves again
  const Curve w = curve({{0, 0}, {2, 0}, {2, 1}, {0, 1}});
  const BallRegion U = BallRegion::union_of({Ball({0, 0}, 0.6), Ball({0, 1}, 0.6)});
  CHECK(first_exit(w, U) == doctest::Approx(0.6));
  CHECK(last_entry(w, U) == doctest::Approx(5.0 - 0.6));
}

TEST_CASE("restrict_curve") {
  const Curve c = curve({{0, 0}, {1, 0}, {1, 1}});
  const Curve full = restrict_curve(c, 0, c.length());
  CHECK(full.waypoints.size() == 3);
  CHECK(restrict_curve(c, 0.7, 0.7).empty());
  const Curve mid = restrict_curve(c, 0.5, 1.5);
  REQUIRE(mid.waypoints.size() == 3);
  CHECK(near(mid.start(), {0.5, 0}));
  CHECK(near(mid.waypoints[1], {1, 0}));
  CHECK(near(mid.end(), {1, 0.5}));
  CHECK(mid.length() == doctest::Approx(1.0));
  CHECK_THROWS_AS(restrict_curve(c, 1.0, 0.5), DomainError);
}

TEST_CASE("cut_paths") {
  SUBCASE("radial exit") {
    PathMeasure pi;
    pi.entries.push_back({curve({{0, 0}, {3, 0}}), 1.0});
    const Ball B({0, 0}, 1.0);
    const std::vector<Cell> cells{{BallRegion::ball(B), B}};
    const TrafficPath cut = cut_paths(pi, cells, CutMode::kStartToFirstExit);
    CHECK(approx_equal(boundary(cut), AtomicMeasure::dirac({1, 0}) - AtomicMeasure::dirac({0, 0})));
  }
  SUBCASE("never leaving") {
    PathMeasure pi;
    pi.entries.push_back({curve({{0, 0}, {0.2, 0.1}, {0.3, 0}}), 1.0});
    const Ball B({0, 0}, 1.0);
    const std::vector<Cell> cells{{BallRegion::ball(B), B}};
    CHECK(equivalent(cut_paths(pi, cells, CutMode::kStartToFirstExit), reconstruct(pi)));
  }
  SUBCASE("two balls: cut multiplicity below the original") {
    // sources near (-1,0) and (1,0), sinks near (0,3); shared trunk
    const TrafficPath T =
        sum(std::vector<TrafficPath>{TrafficPath::segment({-1, 0}, {0, 1}), TrafficPath::segment({1, 0}, {0, 1}),
                                     TrafficPath::segment({-0.2, 0}, {0, 1}, 0.5),
                                     TrafficPath::segment({0, 1}, {0, 3}, 2.5)});
    const PathMeasure pi = good_decomposition(T);
    const std::vector<Ball> balls{Ball({-1, 0}, 1.2), Ball({1, 0}, 1.2)};
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < balls.size(); ++i)
      cells.push_back({BallRegion::difference_cell(balls, i), balls[i]});
    const CutResult cr = cut_decomposition(pi, cells, CutMode::kStartToFirstExit);
    const TrafficPath cut = reconstruct(cr.pi);
    const std::vector<TrafficPath> both_paths{T, cut};
    for (const OverlayPiece& p : overlay_channels(both_paths)) {
      CHECK(std::abs(p.theta[1]) <= std::abs(p.theta[0]) + 1e-12);
      if (std::abs(p.theta[1]) > 0) CHECK(p.theta[0] * p.theta[1] > 0);
    }
    CHECK(check_good_decomposition(cut, cr.pi).ok(1e-9));
    // negative boundary of the cut equals the start measure
    CHECK(approx_equal(boundary(cut).negative_part(), cr.pi.start_measure()));
  }
  SUBCASE("endpoint collision") {
    PathMeasure pi;
    pi.entries.push_back({curve({{0, 0}, {2, 0}}), 1.0});
    pi.entries.push_back({curve({{0.5, 0}, {0, 0.5}, {0, 0}}), 1.0});
    const Ball B({0, 0}, 5.0);
    const std::vector<Cell> cells{{BallRegion::ball(B), B}};
    CHECK_THROWS_WITH_AS(cut_decomposition(pi, cells, CutMode::kStartToFirstExit),
                         "mutually singular endpoints required", DomainError);
  }
}

TEST_CASE("sub_decomposition") {
  const Point s1(-1, 1), s2(-1, -1), j(0, 0), t(2, 0);
  const TrafficPath Y = sum(std::vector<TrafficPath>{TrafficPath::segment(s1, j), TrafficPath::segment(s2, j),
                                                     TrafficPath::segment(j, t, 2.0)});
  const PathMeasure pi = good_decomposition(Y);
  auto all = sub_decomposition(pi, [](const Curve&) { return true; });
  CHECK(equivalent(all.second, Y));
  auto none = sub_decomposition(pi, [](const Curve&) { return false; });
  CHECK(none.second.empty());

  auto one = sub_decomposition(pi, starts_in(BallRegion::ball(Ball(s1, 0.1))));
  REQUIRE(one.first.entries.size() == 1);
  const TrafficPath trunk = restrict(one.second, BallRegion::ball(Ball({1, 0}, 0.5)));
  REQUIRE(trunk.edges.size() == 1);
  CHECK(trunk.edges[0].theta == doctest::Approx(1.0));

  // bound and its decay on a fixed instance
  std::mt19937_64 rng(53);
  const TrafficPath R = testsupport::random_dag(rng, 9, 18);
  const PathMeasure pr = good_decomposition(R);
  double prev = INFINITY;
  for (double frac : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
    PathMeasure part = pr.scaled(frac);
    const TrafficPath Tp = reconstruct(part);
    const double w = part.total_weight();
    double total_len = 0;
    for (const auto& e : part.entries) total_len += e.curve.length();
    const double bound = sub_decomposition_bound(R, w, 0.5);
    CHECK(alpha_mass(Tp, 0.5) <= bound + 1e-9);
    CHECK(alpha_mass(Tp, 0.5) <= std::pow(w, 0.5) * total_len + 1e-9);
    CHECK(alpha_mass(Tp, 0.5) < prev);
    prev = alpha_mass(Tp, 0.5);
  }
}
