#include "btlab/covering.hpp"

#include <random>

namespace btlab {

BallRegion closed_union(std::span<const Ball> balls) {
  BallRegion r;
  for (Ball b : balls) {
    b.closed = true;
    r.include.push_back(b);
  }
  return r;
}

namespace {

bool hits_atom(const Ball& b, std::span<const AtomicMeasure> measures) {
  for (const AtomicMeasure& m : measures)
    for (const Atom& a : m.atoms())
      if (b.on_sphere(a.at)) return true;
  return false;
}

}  // namespace

NullSetCover cover_null_set(std::span<const Point> A, const TrafficPath& T,
                            const TrafficPath& T_opt,
                            std::span<const AtomicMeasure> boundary_atoms, double eps,
                            double alpha, std::uint64_t seed) {
  if (!(eps > 0)) throw DomainError("eps must be positive");
  NullSetCover out;
  if (A.empty()) return out;

  // Half the budget for the radii, the rest absorbs perturbation.
  double rho = eps / (2.0 * static_cast<double>(A.size()));
  std::vector<Ball> balls;
  for (int halving = 0;; ++halving) {
    balls.clear();
    for (const Point& p : A) balls.emplace_back(p, rho, false);
    const BallRegion U = closed_union(balls);
    const double m1 = alpha_mass(restrict(T, U), alpha);
    const double m2 = alpha_mass(restrict(T_opt, U), alpha);
    if (m1 < eps / 2 && m2 < eps / 2) break;
    if (halving == 200) throw DomainError("covering infeasible at tolerance");
    rho *= 0.5;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(0.0, 1e-6);
  for (Ball& b : balls) {
    const double base = b.radius;
    int tries = 0;
    while (hits_atom(b, boundary_atoms)) {
      if (++tries > 64) throw DomainError("covering infeasible at tolerance");
      // (1, 1 + 1e-6]
      b.radius = base * (1.0 + 1e-6 - factor(rng));
    }
    out.perturbation_attempts += tries;
  }

  const BallRegion U = closed_union(balls);
  out.restricted_alpha_mass = alpha_mass(restrict(T, U), alpha);
  out.restricted_alpha_mass_opt = alpha_mass(restrict(T_opt, U), alpha);
  for (const Ball& b : balls) out.radius_sum += b.radius;
  if (!(out.radius_sum < eps) || !(out.restricted_alpha_mass < eps) ||
      !(out.restricted_alpha_mass_opt < eps))
    throw DomainError("covering infeasible at tolerance");
  out.balls = std::move(balls);
  return out;
}

}  // namespace btlab
