#include <cmath>
#include <random>

#include "btlab/metrics.hpp"
#include "doctest.h"

using namespace btlab;

namespace {

// Exhaustive search over integer transport plans (units of 1/16): every
// unit either travels i -> j at cost d_ij or is destroyed at cost 1.
struct Lattice {
  std::vector<int> p, n;  // units
  std::vector<std::vector<double>> d;
  double best = INFINITY;

  void go(std::size_t cell, std::vector<int>& row, std::vector<int>& col, double moved) {
    const std::size_t P = p.size(), N = n.size();
    if (cell == P * N) {
      int left = 0;
      for (std::size_t i = 0; i < P; ++i) left += p[i] - row[i];
      for (std::size_t j = 0; j < N; ++j) left += n[j] - col[j];
      best = std::min(best, (moved + left) / 16.0);
      return;
    }
    const std::size_t i = cell / N, j = cell % N;
    const int cap = std::min(p[i] - row[i], n[j] - col[j]);
    for (int g = 0; g <= cap; ++g) {
      row[i] += g;
      col[j] += g;
      go(cell + 1, row, col, moved + g * d[i][j]);
      row[i] -= g;
      col[j] -= g;
    }
  }
};

double lattice_flat(const std::vector<Atom>& pos, const std::vector<Atom>& neg) {
  Lattice L;
  for (const Atom& a : pos) L.p.push_back(static_cast<int>(std::lround(a.mass * 16)));
  for (const Atom& a : neg) L.n.push_back(static_cast<int>(std::lround(a.mass * 16)));
  for (const Atom& a : pos) {
    L.d.emplace_back();
    for (const Atom& b : neg) L.d.back().push_back(distance(a.at, b.at));
  }
  std::vector<int> row(pos.size(), 0), col(neg.size(), 0);
  L.go(0, row, col, 0.0);
  return L.best;
}

AtomicMeasure random_measure(std::mt19937_64& rng, int k, double spread) {
  std::uniform_real_distribution<double> c(-spread, spread), m(-1.0, 1.0);
  std::vector<Atom> a;
  for (int i = 0; i < k; ++i) a.push_back({Point(c(rng), c(rng)), m(rng)});
  return AtomicMeasure(a);
}

TrafficPath square_loop(double x0, double y0, double side) {
  const std::vector<Point> pts{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}, {x0, y0}};
  return TrafficPath::polyline(pts);
}

}  // namespace

TEST_CASE("flat_norm_0 closed forms") {
  CHECK(flat_norm_0(AtomicMeasure()) == 0.0);
  const Point x(0.2, 0.1);
  CHECK(flat_norm_0(AtomicMeasure::dirac(x) - AtomicMeasure::dirac(x + Point(0.5, 0))) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(flat_norm_0(AtomicMeasure::dirac(x) - AtomicMeasure::dirac(x + Point(0, 10))) ==
        doctest::Approx(2.0).epsilon(1e-12));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const Point y(u(rng), u(rng));
    const double m = 0.1 + u(rng);
    const double f = flat_norm_0(AtomicMeasure::dirac(x, m) - AtomicMeasure::dirac(y, m));
    CHECK(f == doctest::Approx(m * std::min(distance(x, y), 2.0)).epsilon(1e-12));
  }
  // one-signed measures can only be destroyed
  CHECK(flat_norm_0(AtomicMeasure::dirac(x, 0.7) + AtomicMeasure::dirac({1, 1}, 0.2)) ==
        doctest::Approx(0.9));
}

TEST_CASE("flat_norm_0 against the assignment lattice") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-1.2, 1.2);
  std::uniform_int_distribution<int> units(1, 3);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Atom> pos, neg, all;
    for (int i = 0; i < 3; ++i) pos.push_back({Point(c(rng), c(rng)), units(rng) / 16.0});
    for (int i = 0; i < 3; ++i) neg.push_back({Point(c(rng), c(rng)), units(rng) / 16.0});
    for (const Atom& a : pos) all.push_back(a);
    for (const Atom& a : neg) all.push_back({a.at, -a.mass});
    CHECK(flat_norm_0(AtomicMeasure(all)) == doctest::Approx(lattice_flat(pos, neg)).epsilon(1e-12));
  }
}

TEST_CASE("flat_norm_0 is a norm") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const AtomicMeasure a = random_measure(rng, 4, 1.5);
    const AtomicMeasure b = random_measure(rng, 4, 1.5);
    const double fa = flat_norm_0(a), fb = flat_norm_0(b);
    CHECK(flat_norm_0(a + b) <= fa + fb + 1e-9);
    const double lam = s(rng);
    CHECK(std::abs(flat_norm_0(a * lam) - std::abs(lam) * fa) <= 1e-9);
    CHECK(fa <= a.total_variation() + 1e-12);
    CHECK(fa >= 0.0);
  }
}

TEST_CASE("weak_star_gap") {
  const Point x(0.3, -0.4);
  const AtomicMeasure mu = AtomicMeasure::dirac(x);
  CHECK(weak_star_gap(mu, mu) == 0.0);
  for (int n : {1, 2, 4, 16, 64})
    CHECK(weak_star_gap(AtomicMeasure::dirac(x + Point(1.0 / n, 0)), mu) == doctest::Approx(1.0 / n).epsilon(1e-12));

  // Rounding coordinates k/3 to the nearest multiple of 2^-l moves each atom
  // by exactly sqrt(2)/(3 2^l), so the gap halves per level.
  const std::vector<Atom> target{{Point(1.0 / 3, 2.0 / 3), 0.5},
                                 {Point(-2.0 / 3, 1.0 / 3), 0.5},
                                 {Point(4.0 / 3, -1.0 / 3), -0.25},
                                 {Point(-1.0 / 3, -4.0 / 3), -0.75}};
  const AtomicMeasure mu4(target);
  double prev = 0.0;
  for (int l = 1; l <= 8; ++l) {
    const double q = std::ldexp(1.0, l);
    std::vector<Atom> moved;
    for (const Atom& a : target)
      moved.push_back({Point(std::round(a.at[0] * q) / q, std::round(a.at[1] * q) / q), a.mass});
    const double gap = weak_star_gap(AtomicMeasure(moved), mu4);
    CHECK(gap == doctest::Approx(2.0 * std::sqrt(2.0) / (3.0 * q)).epsilon(1e-9));
    if (l > 1) CHECK(prev / gap == doctest::Approx(2.0).epsilon(1e-9));
    prev = gap;
  }
}

TEST_CASE("grid boundary of boundary vanishes") {
  GridComplex g;
  g.nx = 7;
  g.ny = 5;
  for (int f = 0; f < g.face_count(); ++f) {
    std::vector<int> nodes(g.node_count(), 0);
    for (auto [e, sgn] : g.face_boundary(f)) {
      const auto [a, b] = g.edge_nodes(e);
      nodes[b] += sgn;
      nodes[a] -= sgn;
    }
    for (int v : nodes) CHECK(v == 0);
  }
}

TEST_CASE("rasterization") {
  GridComplex g;
  g.lo = Point(0, 0);
  g.h = 0.1;
  g.nx = g.ny = 20;
  const Rasterized r = rasterize(TrafficPath::segment({0.03, 0.02}, {1.47, 0.88}), g);
  // staircase from node (0,0) to node (15,9): boundary is exact
  std::vector<double> nodes(g.node_count(), 0.0);
  double len = 0;
  for (int e = 0; e < g.edge_count(); ++e) {
    const auto [a, b] = g.edge_nodes(e);
    nodes[b] += r.chain[e];
    nodes[a] -= r.chain[e];
    len += std::abs(r.chain[e]) * g.h;
  }
  CHECK(nodes[g.node(15, 9)] == doctest::Approx(1.0));
  CHECK(nodes[g.node(0, 0)] == doctest::Approx(-1.0));
  CHECK(len == doctest::Approx(2.4));
  CHECK(r.error_bound > 0.0);
  CHECK_THROWS_WITH_AS(rasterize(TrafficPath::segment({0, 0}, {2.5, 0}), g), "path exits grid box", DomainError);
}

TEST_CASE("flat_distance_1 anchors") {
  const TrafficPath loop = square_loop(0, 0, 1);
  const std::vector<TrafficPath> both{loop};
  for (double h : {0.1, 0.05}) {
    const GridComplex g = GridComplex::around(both, h);
    const FlatDistance same = flat_distance_1(loop, loop, g);
    CHECK(same.value == doctest::Approx(0.0));
    CHECK(same.method == "grid flat norm");
    // min(perimeter 4, area 1)
    const FlatDistance f = flat_distance_1(loop, TrafficPath{}, g);
    CHECK(std::abs(f.value - 1.0) <= f.error_bound + 1e-9);
    CHECK(f.value == doctest::Approx(1.0).epsilon(1e-9));
  }
  // a small loop is cheaper to keep than to fill: 4s < s^2 once s > 4
  const TrafficPath big = square_loop(0, 0, 5);
  const std::vector<TrafficPath> b{big};
  CHECK(flat_distance_1(big, TrafficPath{}, GridComplex::around(b, 0.5)).value == doctest::Approx(20.0));
}

TEST_CASE("flat_distance_1 on parallel segments") {
  // T1 - T2 is the rectangle boundary minus its two short sides, so the
  // optimum fills the rectangle (area delta) and keeps the sides (2 delta).
  for (double delta : {0.2, 0.1}) {
    const TrafficPath a = TrafficPath::segment({0, 0}, {1, 0});
    const TrafficPath b = TrafficPath::segment({0, delta}, {1, delta});
    const std::vector<TrafficPath> both{a, b};
    const FlatDistance f = flat_distance_1(a, b, GridComplex::around(both, delta / 10));
    MESSAGE("delta " << delta << ": flat " << f.value << " (ratio to delta " << f.value / delta << ")");
    CHECK(f.value <= 3 * delta + 1e-9);
    CHECK(f.value >= 3 * delta - 4 * delta / 10 - 1e-9);
    CHECK(f.value <= mass(subtract(a, b)) + f.error_bound);
  }
}

TEST_CASE("flat_distance_1 refinement and triangle inequality") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> c(0.0, 1.0);
  auto random_poly = [&] {
    std::vector<Point> pts;
    for (int i = 0; i < 4; ++i) pts.emplace_back(c(rng), c(rng));
    return TrafficPath::polyline(pts, 0.5 + c(rng));
  };
  for (int trial = 0; trial < 5; ++trial) {
    const TrafficPath A = random_poly(), B = random_poly(), C = random_poly();
    const std::vector<TrafficPath> all{A, B, C};
    const GridComplex coarse = GridComplex::around(all, 0.05);
    const GridComplex fine = GridComplex::around(all, 0.025);
    const FlatDistance ab = flat_distance_1(A, B, coarse);
    const FlatDistance ab2 = flat_distance_1(A, B, fine);
    CHECK(ab2.value <= ab.value + ab.error_bound + ab2.error_bound);
    const FlatDistance bc = flat_distance_1(B, C, coarse), ac = flat_distance_1(A, C, coarse);
    CHECK(ac.value <= ab.value + bc.value + 2 * (ab.error_bound + bc.error_bound));
    CHECK(ab.value <= mass(subtract(A, B)) + ab.error_bound);
  }
}

TEST_CASE("flat_distance_1 in three dimensions is a labelled surrogate") {
  const TrafficPath a = TrafficPath::segment({0, 0, 0}, {1, 0, 0});
  const TrafficPath b = TrafficPath::segment({0, 0, 0.1}, {1, 0, 0.1}, 0.5);
  const FlatDistance f = flat_distance_1(a, b, GridComplex{});
  CHECK(f.value == doctest::Approx(1.5));
  CHECK(f.method == "mass of difference (upper-bound surrogate)");
}
