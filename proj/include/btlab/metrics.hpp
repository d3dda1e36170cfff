#pragma once

#include <string>
#include <vector>

#include "btlab/currents.hpp"

namespace btlab {

/// Successive shortest paths (Dijkstra with potentials) on a directed graph
/// with real capacities. Costs must be nonnegative unless `bellman_ford_init`
/// is used first.
class MinCostFlow {
 public:
  explicit MinCostFlow(int n);
  int add_arc(int from, int to, double cap, double cost);
  /// Pushes from s to t along shortest paths while the path cost is below
  /// `stop_cost` and flow is below `limit`. Returns (flow, cost).
  std::pair<double, double> run(int s, int t, double limit, double stop_cost);
  /// Potentials from Bellman-Ford so negative arc costs are allowed.
  void bellman_ford_init(int s);
  double flow_on(int arc) const;

 private:
  struct Arc {
    int to;
    double cap;
    double cost;
    int rev;
  };
  std::vector<std::vector<Arc>> g_;
  std::vector<std::pair<int, int>> index_;
  std::vector<double> pot_;
  std::vector<double> orig_cap_;
};

/// Flat norm of a 0-current: min over a = R + dS of M(R) + M(S), with S made
/// of segments between atoms. Exact (transport or destroy, per unit mass).
double flat_norm_0(const AtomicMeasure& a);

/// Regular square grid in the plane: nx * ny faces of side h, lower-left
/// corner `lo`. Horizontal edges point +x, vertical edges +y; faces are
/// oriented counter-clockwise.
struct GridComplex {
  Point lo{0.0, 0.0};
  double h = 0.1;
  int nx = 10, ny = 10;

  /// Grid of spacing h around the bounding box of the paths, padded by
  /// `margin` cells.
  static GridComplex around(std::span<const TrafficPath> paths, double h, int margin = 2);

  int node_count() const { return (nx + 1) * (ny + 1); }
  int horizontal_count() const { return nx * (ny + 1); }
  int edge_count() const { return horizontal_count() + (nx + 1) * ny; }
  int face_count() const { return nx * ny; }
  int node(int i, int j) const { return j * (nx + 1) + i; }
  int hedge(int i, int j) const { return j * nx + i; }                        // (i,j)->(i+1,j)
  int vedge(int i, int j) const { return horizontal_count() + j * (nx + 1) + i; }  // (i,j)->(i,j+1)
  int face(int i, int j) const { return j * nx + i; }
  /// Signed edges of the counter-clockwise boundary of a face.
  std::vector<std::pair<int, int>> face_boundary(int f) const;
  /// (tail node, head node).
  std::pair<int, int> edge_nodes(int e) const;
};

struct Rasterized {
  std::vector<double> chain;  // coefficient per grid edge
  double error_bound = 0.0;   // flat distance from the path to the chain
};

/// Snaps vertices to grid nodes and replaces each segment by a 4-connected
/// staircase staying within h of it. Throws "path exits grid box".
Rasterized rasterize(const TrafficPath& T, const GridComplex& grid);

struct FlatDistance {
  double value = 0.0;
  double error_bound = 0.0;
  /// "grid flat norm" (d = 2) or "mass of difference (upper-bound surrogate)" (d = 3).
  std::string method;
};

/// min M(t - ds) + M(s) over grid 2-chains s, t = raster(T1) - raster(T2).
/// Solved as a min-cost circulation on the planar dual.
FlatDistance flat_distance_1(const TrafficPath& T1, const TrafficPath& T2, const GridComplex& grid);
/// Exact simplicial flat norm of a grid 1-chain.
double grid_flat_norm(const std::vector<double>& chain, const GridComplex& grid);

/// flat_norm_0(mu_n - mu).
double weak_star_gap(const AtomicMeasure& mu_n, const AtomicMeasure& mu);

}  // namespace btlab
