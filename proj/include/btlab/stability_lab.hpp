#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btlab/currents.hpp"
#include "btlab/decomposition.hpp"
#include "btlab/metrics.hpp"

namespace btlab {

/// A limit measure and how its approximations are produced.
///
/// kind "atoms": the measure itself; level n shifts atom i by shift/n along a
/// fixed unit direction drawn from `seed` (n = 0: no shift).
/// kind "cantor": middle-thirds Cantor measure of mass `mass` on the segment
/// from -> to; level n has 2^n equal atoms at the level-n interval centres.
struct MeasureSpec {
  std::string kind = "atoms";
  AtomicMeasure atoms;
  double shift = 0.0;
  std::uint64_t seed = 0;
  Point from, to;
  double mass = 1.0;

  bool countable() const { return kind == "cantor"; }
};

AtomicMeasure quantize(const MeasureSpec& spec, int n);
/// Upper bound on weak_star_gap(quantize(spec, n), limit).
double quantization_bound(const MeasureSpec& spec, int n);

struct ExperimentConfig {
  std::string name;
  Config config;
  MeasureSpec minus, plus;
  std::vector<int> schedule{1, 2, 4, 8, 16, 32, 64};
  std::uint64_t seed = 1;
  double optimality_tol = 1e-4;
  double convergence_tol = 1e-6;
  /// Grid spacing for the flat distance of T_n to T (0: extent / 64).
  double grid_h = 0.0;
  int threads = 0;  // 0: hardware concurrency

  /// Throws DomainError naming the violated invariant.
  void validate() const;
};

struct TrialRow {
  int n = 0;
  double cost_n = 0.0;
  double boundary_gap_minus = 0.0;
  double boundary_gap_plus = 0.0;
  double flat_gap_T = 0.0;
  double flat_gap_error = 0.0;
  std::string topology;
};

struct TrialReport {
  std::string name;
  std::string flat_method;
  std::vector<TrialRow> rows;
  TrafficPath limit;
  double limit_cost = 0.0;
  double limit_gap = 0.0;  // is_optimal gap of the limit candidate
  double tolerance = 0.0;  // optimality tol plus truncation error
  bool costs_bounded = false;
  bool gaps_vanish = false;          // nonincreasing beyond n = 8, last below convergence tol
  bool limit_optimal = false;
  double liminf_cost = 0.0;          // min over the second half of the schedule
  bool lsc_holds = false;            // liminf >= limit cost - tol
  std::string verdict;               // "optimal" or "not established"
};

/// Oracle on every scheduled instance and on the limit measures. Throws
/// DomainError "oracle range exceeded at n = <n>" past six atoms.
TrialReport run_stability_trial(const ExperimentConfig& cfg);

struct CompetitorConfig {
  double Delta = 0.0;
  double eps1 = 0.0, eps2 = 0.0, delta = 0.0;
  int N_minus = 0, N_plus = 0;
  double alpha = 0.5;
  /// Uniform alpha-mass bound; 0 means alpha_mass(T_n).
  double C = 0.0;

  /// Violated smallness constraints, empty when admissible.
  std::vector<std::string> violations(double C_eff) const;
};

struct Covers {
  std::vector<Ball> minus, plus;
};

/// sup over balanced measures of mass M on a sphere of radius r of
/// alpha_mass(sphere_transport) / (M^alpha r).
double connection_constant(int dim, double alpha);

struct LedgerLine {
  std::string name;
  double lhs = 0.0, rhs = 0.0;
  bool holds = false;
};

struct CompetitorReport {
  TrafficPath T_sel, T_sel_minus, T_sel_plus, T_opt_restr, T_conn_minus, T_conn_plus, T_back;
  TrafficPath T_tilde_sel, T_bar;
  std::vector<double> alpha_minus, alpha_plus;
  AtomicMeasure sigma_minus, sigma_plus, nu_n_minus, nu_n_plus;
  double boundary_residual_sel = 0.0;  // M(d T~sel - d Tsel)
  double boundary_residual_bar = 0.0;  // M(d T-bar - d T_n)
  double cost_T_n = 0.0, cost_T_bar = 0.0;
  double C_meas = 0.0;
  std::vector<LedgerLine> ledger;
  bool cheaper = false;
};

/// A cheaper competitor for a suboptimal T_n, assembled piece by piece from
/// T_n, the limit optimum T_opt and coverings of the two supports.
/// Preconditions on covers and on the measures are checked; throws
/// DomainError listing violated smallness constraints, or when some
/// alpha_i falls outside [0, 1].
CompetitorReport build_competitor(const TrafficPath& T_n, const PathMeasure& pi_n, const TrafficPath& T_opt,
                                  const PathMeasure& pi_opt, const Covers& covers, const CompetitorConfig& cc);

/// A deliberately suboptimal T_n: the oracle for mu shifted by `shift`,
/// with its costliest edge bent into a detour of extra alpha-mass Delta.
/// Comes with one ball of radius `radius` per limit atom and smallness
/// parameters satisfying the constraints for C = alpha_mass(T_n).
struct DetourInstance {
  TrafficPath T_n, T_opt;
  PathMeasure pi_n, pi_opt;
  Covers covers;
  CompetitorConfig cc;
};

DetourInstance make_detour_instance(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                                    double Delta, double radius = 1e-4, double shift = 1e-5,
                                    std::uint64_t seed = 1);

/// (1 + 4 eps^alpha) M^a(T1 + T2) >= M^a(T1) + M^a(T2). Requires
/// eps in (0, 1/4) and theta1 < eps theta2 wherever both are present.
bool check_quasi_additivity(const TrafficPath& T1, const TrafficPath& T2, double eps, double alpha);

struct HighMultiplicityReport {
  double delta = 0.0;   // sup of the initial range of thresholds where the inequality holds
  double margin = 0.0;  // slack just below delta
  bool holds = false;
  double C = 0.0;
  double delta0 = 0.0;        // plain semicontinuity range measured on the sequence
  double derived_delta = 0.0;   // solves d + C d^(1 - alpha) = delta0
  bool derived_holds = false;   // inequality at derived_delta
  std::vector<double> gaps;   // flat gap of each T_n to T
};

HighMultiplicityReport check_high_multiplicity_lsc(const TrafficPath& T, const std::vector<TrafficPath>& T_seq,
                                                   const BallRegion& A, double eps, double alpha,
                                                   double grid_h = 0.0);

}  // namespace btlab
