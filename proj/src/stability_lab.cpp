#include "btlab/stability_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "btlab/constructors.hpp"
#include "btlab/covering.hpp"
#include "btlab/optimizer.hpp"

namespace btlab {

namespace {

constexpr double kPi = std::numbers::pi;

// uniform in [0, 1) from the top 53 bits: identical on every platform
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Point shift_direction(std::mt19937_64& rng, int dim) {
  if (dim == 2) {
    const double a = 2 * kPi * unit_draw(rng);
    return Point(std::cos(a), std::sin(a));
  }
  const double z = 2 * unit_draw(rng) - 1, a = 2 * kPi * unit_draw(rng);
  const double s = std::sqrt(std::max(0.0, 1 - z * z));
  return Point(s * std::cos(a), s * std::sin(a), z);
}

std::vector<double> cantor_centres(int n) {
  std::vector<double> left{0.0};
  double len = 1.0;
  for (int k = 0; k < n; ++k) {
    len /= 3.0;
    std::vector<double> next;
    for (double a : left) {
      next.push_back(a);
      next.push_back(a + 2 * len);
    }
    left = std::move(next);
  }
  for (double& a : left) a += len / 2;
  return left;
}

std::vector<Point> all_vertices(std::span<const TrafficPath> paths) {
  std::vector<Point> out;
  for (const TrafficPath& T : paths) out.insert(out.end(), T.vertices.begin(), T.vertices.end());
  return out;
}

double extent_of(std::span<const TrafficPath> paths) {
  double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
  for (const Point& p : all_vertices(paths))
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  if (lo[0] == INFINITY) return 1.0;
  return std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-6});
}

// Sum of m^alpha times the displacement of each atom between two levels.
double cost_perturbation(const MeasureSpec& s, int n, double alpha) {
  if (n <= 0) return 0.0;
  if (s.kind == "cantor") {
    const double L = distance(s.from, s.to);
    const double m = s.mass / std::ldexp(1.0, n);
    return std::ldexp(1.0, n) * std::pow(m, alpha) * L * std::pow(3.0, -n) / 2;
  }
  double sum = 0;
  for (const Atom& a : s.atoms.atoms()) sum += std::pow(std::abs(a.mass), alpha);
  return sum * s.shift / n;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- quantize

AtomicMeasure quantize(const MeasureSpec& spec, int n) {
  if (n < 0) throw DomainError("refinement level must be nonnegative");
  if (spec.kind == "atoms") {
    if (n == 0 || spec.shift == 0.0) return spec.atoms;
    std::mt19937_64 rng(spec.seed);
    std::vector<Atom> out;
    for (const Atom& a : spec.atoms.atoms()) out.push_back({a.at + shift_direction(rng, a.at.dim) * (spec.shift / n), a.mass});
    return AtomicMeasure(out);
  }
  if (spec.kind == "cantor") {
    const std::vector<double> c = cantor_centres(n);
    const double m = spec.mass / static_cast<double>(c.size());
    std::vector<Atom> out;
    for (double t : c) out.push_back({lerp(spec.from, spec.to, t), m});
    return AtomicMeasure(out);
  }
  throw DomainError("unknown measure kind: " + spec.kind);
}

double quantization_bound(const MeasureSpec& spec, int n) {
  if (spec.kind == "cantor") return spec.mass * distance(spec.from, spec.to) * std::pow(3.0, -n) / 2;
  if (n == 0) return 0.0;
  return spec.atoms.total_variation() * std::abs(spec.shift) / n;
}

void ExperimentConfig::validate() const {
  config.validate();
  if (!config.above_stability_threshold()) throw DomainError("alpha must exceed 1 - 1/(d-1)");
  if (schedule.empty()) throw DomainError("empty schedule");
  for (int n : schedule)
    if (n < 1) throw DomainError("schedule entries must be positive");
  for (const MeasureSpec* s : {&minus, &plus}) {
    if (s->kind != "atoms" && s->kind != "cantor") throw DomainError("unknown measure kind: " + s->kind);
    for (const Atom& a : quantize(*s, 0).atoms())
      if (a.mass <= 0) throw DomainError("marginal masses must be positive");
  }
  const AtomicMeasure m = quantize(minus, 0), p = quantize(plus, 0);
  if (std::abs(m.total() - p.total()) > 1e-9) throw DomainError("unbalanced masses");
  const int n_max = *std::max_element(schedule.begin(), schedule.end());
  for (int lvl : {0, n_max}) {
    const AtomicMeasure a = quantize(minus, lvl), b = quantize(plus, lvl);
    for (const Atom& x : a.atoms())
      for (const Atom& y : b.atoms())
        if (near(x.at, y.at)) throw DomainError("supports of mu- and mu+ must be disjoint");
  }
}

// ---------------------------------------------------------------- trials

TrialReport run_stability_trial(const ExperimentConfig& cfg) {
  cfg.validate();
  const double alpha = cfg.config.alpha;
  const int n_max = *std::max_element(cfg.schedule.begin(), cfg.schedule.end());
  TrialReport rep;
  rep.name = cfg.name;

  // range check first, in schedule order, so the error names the first n
  for (int n : cfg.schedule) {
    const AtomicMeasure net = quantize(cfg.plus, n) - quantize(cfg.minus, n);
    if (net.size() > kOracleMaxAtoms) throw OracleRangeError("oracle range exceeded at n = " + std::to_string(n));
  }
  const int limit_level = (cfg.minus.countable() || cfg.plus.countable()) ? n_max : 0;
  const AtomicMeasure lim_minus = quantize(cfg.minus, limit_level), lim_plus = quantize(cfg.plus, limit_level);
  if ((lim_plus - lim_minus).size() > kOracleMaxAtoms)
    throw OracleRangeError("oracle range exceeded at n = " + std::to_string(n_max) + " (limit truncation)");
  rep.tolerance = cfg.optimality_tol;
  if (limit_level > 0) {
    // the truncated limit sits this far from the true one in flat norm
    rep.tolerance += quantization_bound(cfg.minus, limit_level) + quantization_bound(cfg.plus, limit_level);
  }

  const std::size_t S = cfg.schedule.size();
  std::vector<OracleResult> solved(S);
  {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw;
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < std::min(workers, S); ++w)
      jobs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t k = next++; k < S; k = next++) {
          const int n = cfg.schedule[k];
          solved[k] = brute_force_optimal(quantize(cfg.minus, n), quantize(cfg.plus, n), alpha);
        }
      }));
    for (auto& j : jobs) j.get();
  }
  const OracleResult lim = brute_force_optimal(lim_minus, lim_plus, alpha);
  rep.limit = lim.path;
  rep.limit_cost = lim.cost;

  std::vector<TrafficPath> paths{rep.limit};
  for (const OracleResult& r : solved) paths.push_back(r.path);
  const double h = cfg.grid_h > 0 ? cfg.grid_h : extent_of(paths) / 64;
  const bool planar = cfg.config.dimension == 2;
  const GridComplex grid = planar ? GridComplex::around(paths, h) : GridComplex{};

  rep.rows.resize(S);
  std::vector<double> slack(S);
  for (std::size_t k = 0; k < S; ++k) {
    const int n = cfg.schedule[k];
    TrialRow& row = rep.rows[k];
    row.n = n;
    row.cost_n = solved[k].cost;
    row.topology = solved[k].topology;
    row.boundary_gap_minus = weak_star_gap(quantize(cfg.minus, n), lim_minus);
    row.boundary_gap_plus = weak_star_gap(quantize(cfg.plus, n), lim_plus);
    const FlatDistance fd = flat_distance_1(solved[k].path, rep.limit, grid);
    row.flat_gap_T = fd.value;
    row.flat_gap_error = fd.error_bound;
    rep.flat_method = fd.method;
    slack[k] = cost_perturbation(cfg.minus, n, alpha) + cost_perturbation(cfg.plus, n, alpha);
  }

  // verdicts
  double sup_cost = 0;
  bool finite = true;
  for (const TrialRow& r : rep.rows) {
    finite = finite && std::isfinite(r.cost_n);
    sup_cost = std::max(sup_cost, r.cost_n);
  }
  rep.costs_bounded = finite && sup_cost <= 2 * rep.limit_cost + rep.tolerance;

  std::vector<std::size_t> order(S);
  for (std::size_t k = 0; k < S; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cfg.schedule[a] < cfg.schedule[b]; });
  bool monotone = true;
  for (std::size_t q = 1; q < S; ++q) {
    const TrialRow& a = rep.rows[order[q - 1]];
    const TrialRow& b = rep.rows[order[q]];
    if (a.n < 8) continue;
    monotone = monotone && b.boundary_gap_minus <= a.boundary_gap_minus + 1e-12 &&
               b.boundary_gap_plus <= a.boundary_gap_plus + 1e-12;
  }
  const TrialRow& last = rep.rows[order.back()];
  const bool small = last.boundary_gap_minus <= quantization_bound(cfg.minus, last.n) + cfg.convergence_tol &&
                     last.boundary_gap_plus <= quantization_bound(cfg.plus, last.n) + cfg.convergence_tol;
  rep.gaps_vanish = monotone && small;

  const OptimalityReport opt = is_optimal(rep.limit, alpha, rep.tolerance);
  rep.limit_gap = opt.gap;
  rep.limit_optimal = opt.optimal && std::abs(opt.gap) <= rep.tolerance;

  rep.liminf_cost = INFINITY;
  rep.lsc_holds = true;
  for (std::size_t q = S / 2; q < S; ++q) {
    const std::size_t k = order[q];
    rep.liminf_cost = std::min(rep.liminf_cost, rep.rows[k].cost_n);
    rep.lsc_holds = rep.lsc_holds && rep.rows[k].cost_n >= rep.limit_cost - rep.tolerance - slack[k];
  }
  const bool ok = rep.costs_bounded && rep.gaps_vanish && rep.limit_optimal && rep.lsc_holds;
  rep.verdict = ok ? "optimal" : "not established";
  return rep;
}

// ---------------------------------------------------------------- competitor

std::vector<std::string> CompetitorConfig::violations(double C_eff) const {
  std::vector<std::string> v;
  auto fmt = [](const char* what, double l, double r) {
    std::ostringstream s;
    s.precision(6);
    s << what << " (" << l << " > " << r << ")";
    return s.str();
  };
  if (!(Delta > 0)) v.push_back("Delta must be positive");
  if (!(eps1 > 0 && eps2 > 0 && delta > 0)) v.push_back("eps1, eps2, delta must be positive");
  if (!(alpha > 0 && alpha < 1)) v.push_back("alpha must lie in (0, 1)");
  if (!v.empty()) return v;
  if (eps2 > delta / 2) v.push_back(fmt("eps2 <= delta/2", eps2, delta / 2));
  if (C_eff * std::pow(eps1, 1 - alpha) > delta / 2)
    v.push_back(fmt("C eps1^(1-alpha) <= delta/2", C_eff * std::pow(eps1, 1 - alpha), delta / 2));
  if (eps1 > delta / 4) v.push_back(fmt("eps1 <= delta/4", eps1, delta / 4));
  if (16 * std::pow(eps1, alpha) * C_eff > std::pow(delta, alpha) * Delta)
    v.push_back(fmt("16 eps1^alpha C <= delta^alpha Delta", 16 * std::pow(eps1, alpha) * C_eff,
                    std::pow(delta, alpha) * Delta));
  return v;
}

double connection_constant(int dim, double alpha) {
  if (dim == 2) return 2 * kPi;
  if (alpha <= 0.5) return INFINITY;
  // two dyadic trees in a disk of half-width pi r, summed level by level
  const double q = std::pow(2.0, 1 - 2 * alpha);
  return 2 * std::sqrt(2.0) * kPi * (1 + q) / (1 - q);
}

namespace {

struct Measured {
  std::vector<double> cells;  // mass per difference cell
  double outside = 0.0;       // outside the first N cells
  double in_first = 0.0;      // of the union of the first N balls
};

Measured measure_cells(const AtomicMeasure& m, const std::vector<Ball>& balls, int N) {
  Measured out;
  out.cells.assign(balls.size(), 0.0);
  for (const Atom& a : m.atoms()) {
    std::size_t i = 0;
    while (i < balls.size() && !balls[i].contains(a.at)) ++i;
    if (i < balls.size()) out.cells[i] += a.mass;
    if (i < static_cast<std::size_t>(N))
      out.in_first += a.mass;
    else
      out.outside += a.mass;
  }
  return out;
}

std::size_t first_ball(const Point& p, const std::vector<Ball>& balls) {
  std::size_t i = 0;
  while (i < balls.size() && !balls[i].contains(p)) ++i;
  return i;
}

}  // namespace

CompetitorReport build_competitor(const TrafficPath& T_n, const PathMeasure& pi_n, const TrafficPath& T_opt,
                                  const PathMeasure& pi_opt, const Covers& covers, const CompetitorConfig& cc) {
  const double alpha = cc.alpha;
  const double C_eff = cc.C > 0 ? cc.C : alpha_mass(T_n, alpha);
  if (auto v = cc.violations(C_eff); !v.empty()) throw DomainError("smallness constraints violated: " + join(v));
  const int Nm = cc.N_minus, Np = cc.N_plus;
  if (Nm < 1 || Np < 1 || Nm > static_cast<int>(covers.minus.size()) || Np > static_cast<int>(covers.plus.size()))
    throw DomainError("N_minus and N_plus must lie in 1..number of balls");
  const int dim = T_opt.dim();
  const double eps2 = cc.eps2;
  const double Delta = cc.Delta;

  CompetitorReport rep;
  rep.C_meas = connection_constant(dim, alpha);

  const AtomicMeasure bd_opt = boundary(T_opt), bd_n = boundary(T_n);
  const AtomicMeasure mu_m = bd_opt.negative_part(), mu_p = bd_opt.positive_part();
  const AtomicMeasure mun_m = bd_n.negative_part(), mun_p = bd_n.positive_part();

  // covering properties and the choice of N and n
  std::vector<std::string> bad;
  for (const AtomicMeasure* m : {&mu_m, &mu_p, &mun_m, &mun_p})
    if (std::abs(m->total() - 1.0) > 1e-9) bad.push_back("marginals must be probability measures");
  for (const Ball& a : covers.minus)
    for (const Ball& b : covers.plus)
      if (distance(a.center, b.center) <= a.radius + b.radius) bad.push_back("closures of the two coverings meet");
  double rsum_m = 0, rsum_p = 0;
  for (const Ball& b : covers.minus) rsum_m += b.radius;
  for (const Ball& b : covers.plus) rsum_p += b.radius;
  if (std::max(rsum_m, rsum_p) >= Delta / (128 * rep.C_meas)) bad.push_back("sum of radii >= Delta/(128 C)");
  for (const auto* balls : {&covers.minus, &covers.plus}) {
    const BallRegion U = closed_union(*balls);
    if (alpha_mass(restrict(T_n, U), alpha) > Delta / 128 || alpha_mass(restrict(T_opt, U), alpha) > Delta / 128)
      bad.push_back("alpha-mass on the closed covering exceeds Delta/128");
    for (const Ball& b : *balls)
      for (const AtomicMeasure* m : {&mu_m, &mu_p, &mun_m, &mun_p})
        for (const Atom& a : m->atoms())
          if (b.on_sphere(a.at)) bad.push_back("boundary atom on a covering sphere");
  }
  for (const Atom& a : mu_m.atoms())
    if (first_ball(a.at, covers.minus) == covers.minus.size()) bad.push_back("mu- not covered");
  for (const Atom& a : mu_p.atoms())
    if (first_ball(a.at, covers.plus) == covers.plus.size()) bad.push_back("mu+ not covered");
  const Measured cm = measure_cells(mu_m, covers.minus, Nm), cp = measure_cells(mu_p, covers.plus, Np);
  const Measured cnm = measure_cells(mun_m, covers.minus, Nm), cnp = measure_cells(mun_p, covers.plus, Np);
  for (double c : cm.cells)
    if (c <= 0) bad.push_back("redundant ball in the minus covering");
  for (double c : cp.cells)
    if (c <= 0) bad.push_back("redundant ball in the plus covering");
  if (cm.in_first <= 1 - cc.eps1 / 4 || cp.in_first <= 1 - cc.eps1 / 4) bad.push_back("N too small for eps1");
  for (int i = 0; i < Nm; ++i)
    if (cnm.cells[i] > (1 + eps2) * cm.cells[i] + 1e-12) bad.push_back("mu_n-(C_i) > (1+eps2) mu-(C_i)");
  for (int j = 0; j < Np; ++j)
    if (cnp.cells[j] > (1 + eps2) * cp.cells[j] + 1e-12) bad.push_back("mu_n+(C_j) > (1+eps2) mu+(C_j)");
  if (cnm.outside > cc.eps1 / 2 + 1e-12 || cnp.outside > cc.eps1 / 2 + 1e-12)
    bad.push_back("mu_n mass outside the first N cells exceeds eps1/2");
  if (!bad.empty()) {
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    throw DomainError("covering preconditions violated: " + join(bad));
  }

  const std::vector<Ball> first_m(covers.minus.begin(), covers.minus.begin() + Nm);
  const std::vector<Ball> first_p(covers.plus.begin(), covers.plus.begin() + Np);

  // selection: curves starting in the first N- balls and ending in the first N+
  const auto [pi_sel, T_sel] = sub_decomposition(
      pi_n, both(starts_in(BallRegion::union_of(first_m)), ends_in(BallRegion::union_of(first_p))));
  rep.T_sel = T_sel;

  // cut at the first exit / last entry of the starting / ending ball
  std::vector<Cell> cells_m, cells_p;
  for (int i = 0; i < Nm; ++i) cells_m.push_back({BallRegion::difference_cell(first_m, i), first_m[i]});
  for (int j = 0; j < Np; ++j) cells_p.push_back({BallRegion::difference_cell(first_p, j), first_p[j]});
  const CutResult cut_m = cut_decomposition(pi_sel, cells_m, CutMode::kStartToFirstExit);
  const CutResult cut_p = cut_decomposition(pi_sel, cells_p, CutMode::kLastEntryToEnd);
  rep.T_sel_minus = reconstruct(cut_m.pi);
  rep.T_sel_plus = reconstruct(cut_p.pi);
  std::vector<std::vector<Atom>> out_m(Nm), in_p(Np);
  for (std::size_t k = 0; k < cut_m.pi.entries.size(); ++k) {
    const auto& e = cut_m.pi.entries[k];
    out_m[cut_m.cell_of[k]].push_back({e.curve.end(), e.weight});
  }
  for (std::size_t k = 0; k < cut_p.pi.entries.size(); ++k) {
    const auto& e = cut_p.pi.entries[k];
    in_p[cut_p.cell_of[k]].push_back({e.curve.start(), e.weight});
  }

  // T_opt between the first exit of B_i- and the last entry of B_j+
  PathMeasure pi_restr;
  std::vector<std::vector<Atom>> restr_start(covers.minus.size()), restr_end(covers.plus.size());
  for (const auto& e : pi_opt.entries) {
    if (e.curve.empty()) continue;
    const std::size_t i = first_ball(e.curve.start(), covers.minus);
    const std::size_t j = first_ball(e.curve.end(), covers.plus);
    if (i == covers.minus.size() || j == covers.plus.size()) continue;
    const double t1 = first_exit(e.curve, BallRegion::ball(covers.minus[i]));
    const double t2 = last_entry(e.curve, BallRegion::ball(covers.plus[j]));
    if (t1 == kNeverLeaves || t1 > t2) throw DomainError("curve of T_opt does not cross between its balls");
    Curve c = restrict_curve(e.curve, t1, t2);
    if (c.empty()) continue;
    restr_start[i].push_back({c.start(), e.weight});
    restr_end[j].push_back({c.end(), e.weight});
    pi_restr.entries.push_back({std::move(c), e.weight});
  }
  rep.T_opt_restr = reconstruct(pi_restr);

  // connections along the spheres
  std::vector<TrafficPath> conn_m, conn_p;
  std::vector<Atom> sig_p, sig_m;
  double conn_bound_m = 0, conn_bound_p = 0;
  auto weight = [&](double num, double den, const char* side, int idx) {
    if (den <= 0) {
      if (num > 1e-12) throw DomainError(std::string("alpha_") + side + " undefined at ball " + std::to_string(idx));
      return 0.0;
    }
    const double a = num / den;
    if (a < 0 || a > 1 + 1e-12) {
      std::ostringstream s;
      s << "alpha_" << side << "[" << idx << "] = " << a << " outside [0, 1]";
      throw DomainError(s.str());
    }
    return std::min(a, 1.0);
  };
  for (int i = 0; i < Nm; ++i) {
    const AtomicMeasure from(out_m[i]), to_unit(restr_start[i]);
    const double a = weight(from.total(), (1 + eps2) * to_unit.total(), "minus", i);
    rep.alpha_minus.push_back(a);
    const AtomicMeasure to = to_unit * (a * (1 + eps2));
    for (const Atom& x : to.atoms()) sig_p.push_back(x);
    conn_m.push_back(sphere_transport(from, to, covers.minus[i], alpha));
    conn_bound_m += rep.C_meas * std::pow(from.total(), alpha) * covers.minus[i].radius;
  }
  for (int j = 0; j < Np; ++j) {
    const AtomicMeasure to(in_p[j]), from_unit(restr_end[j]);
    const double a = weight(to.total(), (1 + eps2) * from_unit.total(), "plus", j);
    rep.alpha_plus.push_back(a);
    const AtomicMeasure from = from_unit * (a * (1 + eps2));
    for (const Atom& x : from.atoms()) sig_m.push_back(x);
    conn_p.push_back(sphere_transport(from, to, covers.plus[j], alpha));
    conn_bound_p += rep.C_meas * std::pow(to.total(), alpha) * covers.plus[j].radius;
  }
  rep.T_conn_minus = sum(conn_m);
  rep.T_conn_plus = sum(conn_p);
  rep.sigma_plus = AtomicMeasure(sig_p);
  rep.sigma_minus = AtomicMeasure(sig_m);

  // send the excess back along a reversed, rescaled T_opt^restr
  std::vector<Atom> all_start, all_end;
  for (const auto& v : restr_start) all_start.insert(all_start.end(), v.begin(), v.end());
  for (const auto& v : restr_end) all_end.insert(all_end.end(), v.begin(), v.end());
  const AtomicMeasure nu_m = AtomicMeasure(all_start) * (1 + eps2);
  const AtomicMeasure nu_p = AtomicMeasure(all_end) * (1 + eps2);
  rep.nu_n_minus = nu_m - rep.sigma_plus;
  rep.nu_n_plus = nu_p - rep.sigma_minus;
  for (const AtomicMeasure* m : {&rep.nu_n_minus, &rep.nu_n_plus})
    for (const Atom& a : m->atoms())
      if (a.mass < -1e-9) throw DomainError("sigma exceeds nu: alpha weights inconsistent");
  rep.nu_n_minus = rep.nu_n_minus.positive_part();
  rep.nu_n_plus = rep.nu_n_plus.positive_part();
  if (!rep.nu_n_minus.empty() || !rep.nu_n_plus.empty()) {
    PathMeasure pi_rev;
    for (const auto& e : pi_restr.entries) {
      Curve c = e.curve;
      std::reverse(c.waypoints.begin(), c.waypoints.end());
      pi_rev.entries.push_back({std::move(c), e.weight * (1 + eps2)});
    }
    double R = 1.0;
    for (const Point& p : rep.T_opt_restr.vertices) R = std::max(R, p.norm() + 1.0);
    Config sub;
    sub.alpha = alpha;
    sub.dimension = dim;
    sub.ambient_radius = R;
    rep.T_back = cheap_subtransport(scaled(rep.T_opt_restr, -(1 + eps2)), pi_rev, rep.nu_n_plus, rep.nu_n_minus,
                                    Delta / 128, sub)
                     .path;
  }

  // assemble
  const std::vector<TrafficPath> tilde{rep.T_sel_minus, rep.T_conn_minus, scaled(rep.T_opt_restr, 1 + eps2),
                                       rep.T_back,      rep.T_conn_plus,  rep.T_sel_plus};
  rep.T_tilde_sel = sum(tilde);
  const std::vector<TrafficPath> bar{rep.T_tilde_sel, T_n, scaled(rep.T_sel, -1.0)};
  rep.T_bar = sum(bar);
  rep.boundary_residual_sel = (boundary(rep.T_tilde_sel) - boundary(rep.T_sel)).total_variation();
  rep.boundary_residual_bar = (boundary(rep.T_bar) - boundary(T_n)).total_variation();

  // energy ledger
  const BallRegion Um = closed_union(first_m), Up = closed_union(first_p);
  std::vector<Ball> all_first = first_m;
  all_first.insert(all_first.end(), first_p.begin(), first_p.end());
  const BallRegion U = closed_union(all_first), Uc = U.complemented();
  auto am = [&](const TrafficPath& T) { return alpha_mass(T, alpha); };
  auto line = [&](std::string name, double lhs, double rhs, bool strict = false) {
    rep.ledger.push_back({std::move(name), lhs, rhs, strict ? lhs < rhs : lhs <= rhs + 1e-12});
  };
  rep.cost_T_n = am(T_n);
  rep.cost_T_bar = am(rep.T_bar);
  line("boundary of T~sel equals boundary of Tsel", rep.boundary_residual_sel, 1e-9);
  line("boundary of T-bar equals boundary of T_n", rep.boundary_residual_bar, 1e-9);
  line("conn- cost <= sum C_meas m_i^alpha r_i", am(rep.T_conn_minus), conn_bound_m);
  line("conn+ cost <= sum C_meas m_j^alpha r_j", am(rep.T_conn_plus), conn_bound_p);
  line("conn- cost <= Delta/128", am(rep.T_conn_minus), Delta / 128);
  line("conn+ cost <= Delta/128", am(rep.T_conn_plus), Delta / 128);
  line("T_opt^restr inside U- <= Delta/128", am(restrict(rep.T_opt_restr, Um)), Delta / 128);
  line("T_opt^restr inside U+ <= Delta/128", am(restrict(rep.T_opt_restr, Up)), Delta / 128);
  line("T_back cost <= Delta/128", am(rep.T_back), Delta / 128);
  line("T~sel outside U <= M(T_opt) + Delta/4", am(restrict(rep.T_tilde_sel, Uc)), am(T_opt) + Delta / 4);
  line("(T~sel - Tsel-) inside U- <= Delta/32", am(restrict(subtract(rep.T_tilde_sel, rep.T_sel_minus), Um)),
       Delta / 32);
  line("(T~sel - Tsel+) inside U+ <= Delta/32", am(restrict(subtract(rep.T_tilde_sel, rep.T_sel_plus), Up)),
       Delta / 32);
  line("T-bar inside U <= Delta/16 + T_n inside U", am(restrict(rep.T_bar, U)), Delta / 16 + am(restrict(T_n, U)));
  line("T-bar outside U <= T_n outside U - Delta/4", am(restrict(rep.T_bar, Uc)),
       am(restrict(T_n, Uc)) - Delta / 4);
  line("M(T-bar) < M(T_n)", rep.cost_T_bar, rep.cost_T_n, true);
  rep.cheaper = rep.cost_T_bar < rep.cost_T_n;
  return rep;
}

DetourInstance make_detour_instance(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                                    double Delta, double radius, double shift, std::uint64_t seed) {
  if (!(shift < radius)) throw DomainError("shift must stay inside the balls");
  const double M = mu_minus.total();
  const AtomicMeasure mm = mu_minus * (1.0 / M), mp = mu_plus * (1.0 / M);
  DetourInstance out;
  out.T_opt = brute_force_optimal(mm, mp, alpha).path;
  MeasureSpec sm{"atoms", mm, shift, seed, {}, {}, 1.0}, sp{"atoms", mp, shift, seed + 1, {}, {}, 1.0};
  TrafficPath base = brute_force_optimal(quantize(sm, 1), quantize(sp, 1), alpha).path;

  std::size_t worst = 0;
  double wc = -1;
  for (std::size_t k = 0; k < base.edges.size(); ++k) {
    const double c = std::pow(base.edges[k].theta, alpha) * base.length(base.edges[k]);
    if (c > wc) {
      wc = c;
      worst = k;
    }
  }
  const Edge e = base.edges[worst];
  const Point u = base.vertices[e.tail], v = base.vertices[e.head];
  const double L = distance(u, v);
  // theta^alpha (2 sqrt(L^2/4 + t^2) - L) = Delta
  const double half = 0.5 * (Delta / std::pow(e.theta, alpha) + L);
  const double t = std::sqrt(std::max(0.0, half * half - L * L / 4));
  Point nrm = v - u;
  if (nrm.dim == 2) {
    nrm = Point(-nrm[1], nrm[0]);
  } else {
    Point axis(0, 0, 1);
    if (std::abs(nrm.dot(axis)) > 0.9 * L) axis = Point(1, 0, 0);
    nrm = Point(nrm[1] * axis[2] - nrm[2] * axis[1], nrm[2] * axis[0] - nrm[0] * axis[2],
                nrm[0] * axis[1] - nrm[1] * axis[0]);
  }
  nrm *= 1.0 / nrm.norm();
  const Point w = lerp(u, v, 0.5) + nrm * t;
  base.edges.erase(base.edges.begin() + static_cast<long>(worst));
  const std::vector<TrafficPath> parts{base, TrafficPath::segment(u, w, e.theta), TrafficPath::segment(w, v, e.theta)};
  out.T_n = sum(parts);
  out.pi_n = good_decomposition(out.T_n);
  out.pi_opt = good_decomposition(out.T_opt);
  for (const Atom& a : mm.atoms()) out.covers.minus.push_back(Ball(a.at, radius));
  for (const Atom& a : mp.atoms()) out.covers.plus.push_back(Ball(a.at, radius));

  CompetitorConfig& cc = out.cc;
  cc.Delta = Delta;
  cc.alpha = alpha;
  cc.N_minus = static_cast<int>(out.covers.minus.size());
  cc.N_plus = static_cast<int>(out.covers.plus.size());
  const double C = alpha_mass(out.T_n, alpha);
  cc.delta = 0.5;
  cc.eps2 = 1e-9;
  cc.eps1 = 0.5 * std::min({cc.delta / 4, std::pow(cc.delta / (2 * C), 1 / (1 - alpha)),
                            std::pow(std::pow(cc.delta, alpha) * Delta / (16 * C), 1 / alpha)});
  return out;
}

// ------------------------------------------------------ property checks

bool check_quasi_additivity(const TrafficPath& T1, const TrafficPath& T2, double eps, double alpha) {
  if (!(eps > 0 && eps < 0.25)) throw DomainError("eps must lie in (0, 1/4)");
  const std::vector<TrafficPath> parts{T1, T2};
  for (const OverlayPiece& p : overlay_channels(parts)) {
    const double a = std::abs(p.theta[0]), b = std::abs(p.theta[1]);
    if (a > kZeroTheta && b > kZeroTheta && !(a < eps * b))
      throw DomainError("multiplicity hypothesis violated: theta1 >= eps theta2 on a shared edge");
  }
  const double lhs = (1 + 4 * std::pow(eps, alpha)) * alpha_mass(add(T1, T2), alpha);
  const double rhs = alpha_mass(T1, alpha) + alpha_mass(T2, alpha);
  return lhs >= rhs * (1 - 1e-12);
}

HighMultiplicityReport check_high_multiplicity_lsc(const TrafficPath& T, const std::vector<TrafficPath>& T_seq,
                                                   const BallRegion& A, double eps, double alpha, double grid_h) {
  HighMultiplicityReport rep;
  std::vector<TrafficPath> all{T};
  all.insert(all.end(), T_seq.begin(), T_seq.end());
  for (const TrafficPath& P : all) rep.C = std::max(rep.C, alpha_mass(P, alpha));
  const bool planar = T.dim() == 2;
  const GridComplex grid = planar ? GridComplex::around(all, grid_h > 0 ? grid_h : extent_of(all) / 64) : GridComplex{};
  for (const TrafficPath& P : T_seq) rep.gaps.push_back(flat_distance_1(P, T, grid).value);

  const double base = alpha_mass(restrict(T, A), alpha);
  auto slack_at = [&](double delta) {
    double m = INFINITY;
    for (std::size_t k = 0; k < T_seq.size(); ++k) {
      if (rep.gaps[k] > delta) continue;
      const double v = alpha_mass(restrict(restrict_multiplicity_above(T_seq[k], delta), A), alpha);
      m = std::min(m, v - (base - eps));
    }
    return m;
  };
  auto ok = [](double s) { return s >= -1e-12; };

  std::vector<double> bp{0.0};
  for (const TrafficPath& P : T_seq)
    for (const Edge& e : P.edges) bp.push_back(e.theta);
  bp.insert(bp.end(), rep.gaps.begin(), rep.gaps.end());
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  double s0 = slack_at(0.0);
  if (!ok(s0)) {
    rep.delta = 0.0;
    rep.margin = s0;
  } else {
    rep.delta = INFINITY;
    rep.margin = s0;
    for (std::size_t k = 1; k <= bp.size(); ++k) {
      const double mid = k < bp.size() ? 0.5 * (bp[k - 1] + bp[k]) : 2 * bp.back() + 1;
      const double s_mid = slack_at(mid);
      if (!ok(s_mid)) {
        rep.delta = bp[k - 1];
        break;
      }
      rep.margin = s_mid;
      if (k == bp.size()) break;
      if (!ok(slack_at(bp[k]))) {
        rep.delta = bp[k];
        break;
      }
    }
  }
  rep.holds = rep.delta > 0;

  // plain semicontinuity range on the sequence, ordered by gap
  std::vector<std::size_t> order(T_seq.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rep.gaps[a] < rep.gaps[b]; });
  rep.delta0 = 0.0;
  for (std::size_t k : order) {
    if (alpha_mass(restrict(T_seq[k], A), alpha) < base - eps) {
      rep.delta0 = rep.gaps[k];
      break;
    }
    rep.delta0 = rep.gaps[k];
  }
  double lo = 0.0, hi = rep.delta0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid + rep.C * std::pow(mid, 1 - alpha) <= rep.delta0)
      lo = mid;
    else
      hi = mid;
  }
  rep.derived_delta = lo;
  rep.derived_holds = ok(slack_at(rep.derived_delta));
  return rep;
}

}  // namespace btlab
