#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btlab/currents.hpp"

namespace btlab {

/// A tree over terminal atoms and free Steiner vertices. Nodes 0..T-1 are
/// terminals, T.. are Steiner vertices. Flows are forced by mass balance;
/// edges whose flow vanishes cost nothing, so forests are trees with
/// zero-flow links.
struct Topology {
  std::vector<Point> terminals;
  std::vector<double> supply;  // mu_plus - mu_minus at each terminal
  std::vector<Point> steiner;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> flow;  // along edges[i].first -> edges[i].second

  int node_count() const { return static_cast<int>(terminals.size() + steiner.size()); }
  const Point& position(int v) const;
  void compute_flows();
  double cost(double alpha) const;
  /// Canonical text form (sorted edge list) used for deterministic ties.
  std::string key() const;
  TrafficPath to_path() const;
};

/// Thrown when position descent runs out of iterations; carries the best
/// iterate found.
class ConvergenceError : public DomainError {
 public:
  ConvergenceError(const std::string& what, Topology best) : DomainError(what), best_(std::move(best)) {}
  const Topology& best() const { return best_; }

 private:
  Topology best_;
};

struct PositionOptions {
  double rel_tol = 1e-10;
  int max_iter = 10000;
};

/// Minimizes sum |flow_e|^alpha |edge| over Steiner positions (alpha = 0:
/// unit weight on every edge with nonzero flow). Majorization: each step
/// solves the weighted Laplacian system; the objective never increases.
/// Steiner points that end up within 1e-7 (relative) of a neighbour are
/// snapped onto it when that does not raise the cost.
Topology optimize_positions(const Topology& topo, double alpha, double tol = 1e-10);

/// As above but never throws: returns the best iterate and whether the
/// stopping rule was met.
std::pair<Topology, bool> optimize_positions_checked(const Topology& topo, double alpha,
                                                     const PositionOptions& opt = {});

/// Every full Steiner topology on the terminals of mu_plus - mu_minus.
std::vector<Topology> full_topologies(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus);

struct OracleResult {
  TrafficPath path;
  double cost = 0.0;
  std::string topology;  // key of the winner
  std::size_t topologies_tried = 0;
  std::string tie_break = "lexicographic on topology key among costs within 1e-12";
};

inline constexpr std::size_t kOracleMaxAtoms = 6;

class OracleRangeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Exhaustive oracle: all full Steiner trees (with degenerations), each
/// position-optimized. Errors "instance exceeds oracle bound" beyond six
/// atoms.
OracleResult brute_force_optimal(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                                 double tol = 1e-9);

struct LocalSearchOptions {
  int budget = 200;
  std::uint64_t seed = 1;
};

struct LocalSearchResult {
  TrafficPath path;
  double cost = 0.0;
  double initial_cost = 0.0;
  int accepted_moves = 0;
  std::vector<double> cost_trace;  // cost after each accepted move
};

/// Randomized improvement from `init` (a minimum spanning tree when absent):
/// subtree prune-and-regraft, Steiner merges, position descent. Only
/// strictly improving moves are accepted.
LocalSearchResult local_search(const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus, double alpha,
                               const std::optional<TrafficPath>& init, const LocalSearchOptions& opt = {});

struct OptimalityReport {
  bool optimal = false;
  double gap = 0.0;  // alpha_mass(T) - oracle cost
  double cost = 0.0;
  double oracle_cost = 0.0;
};

OptimalityReport is_optimal(const TrafficPath& T, double alpha, double tol);

/// Cheap non-improvement checks beyond tree enumeration: drop one edge and
/// reconnect the two sides by any straight link (flows re-forced), or send
/// one curve of the good decomposition straight from start to end.
struct SafeguardReport {
  double cost = 0.0;
  double best_edge_swap = INFINITY;
  double best_reroute = INFINITY;
  bool holds = false;  // no variant cheaper than cost - tol
};

SafeguardReport oracle_safeguard(const TrafficPath& T, double alpha, double tol);

}  // namespace btlab
