#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace dcflex {

/// Undirected connected graph of prosumer nodes joined by resistive-inductive
/// lines. Each edge carries an orientation given by its listing order (first
/// endpoint is the positive end of the line current); all derived physics is
/// invariant under flipping that choice.
struct GridTopology {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;

  int n_edges() const { return static_cast<int>(edges.size()); }

  /// Throws std::invalid_argument on self-loops, out-of-range endpoints,
  /// duplicate edges, or a disconnected graph.
  void validate() const;
};

/// Ring of n nodes: edges (0,1), (1,2), ..., (n-2,n-1), (0,n-1).
GridTopology ring_topology(int n);

/// Node-edge incidence matrix B (n x m): B(i,k) = +1 if node i is the
/// positive end of edge k, -1 if the negative end, 0 otherwise.
Eigen::MatrixXd incidence_matrix(const GridTopology& topo);

/// Conductance-weighted Laplacian L = B R^-1 B^T for per-edge resistances r.
/// Throws if any resistance is not strictly positive.
Eigen::MatrixXd weighted_laplacian(const GridTopology& topo,
                                   const Eigen::VectorXd& r);

/// y = L x computed as neighbor-only exchanges along the edges, without
/// forming L. Matches weighted_laplacian(topo, r) * x.
Eigen::VectorXd laplacian_apply(const GridTopology& topo,
                                const Eigen::VectorXd& r,
                                const Eigen::VectorXd& x);

/// True if the graph is connected (BFS).
bool is_connected(const GridTopology& topo);

}  // namespace dcflex
