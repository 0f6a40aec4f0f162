#include "dcflex/network.hpp"

#include <queue>
#include <set>
#include <stdexcept>
#include <string>

namespace dcflex {

void GridTopology::validate() const {
  if (n_nodes < 1) throw std::invalid_argument("topology: need at least one node");
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n_nodes || b < 0 || b >= n_nodes)
      throw std::invalid_argument("topology: edge endpoint out of range");
    if (a == b) throw std::invalid_argument("topology: self-loop");
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second)
      throw std::invalid_argument("topology: duplicate edge");
  }
  if (!is_connected(*this))
    throw std::invalid_argument("topology: graph is not connected");
}

GridTopology ring_topology(int n) {
  if (n < 3) throw std::invalid_argument("ring_topology: need n >= 3");
  GridTopology t;
  t.n_nodes = n;
  for (int i = 0; i + 1 < n; ++i) t.edges.emplace_back(i, i + 1);
  t.edges.emplace_back(0, n - 1);
  return t;
}

Eigen::MatrixXd incidence_matrix(const GridTopology& topo) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(topo.n_nodes, topo.n_edges());
  for (int k = 0; k < topo.n_edges(); ++k) {
    B(topo.edges[k].first, k) = 1.0;
    B(topo.edges[k].second, k) = -1.0;
  }
  return B;
}

Eigen::MatrixXd weighted_laplacian(const GridTopology& topo,
                                   const Eigen::VectorXd& r) {
  if (r.size() != topo.n_edges())
    throw std::invalid_argument("weighted_laplacian: resistance count mismatch");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(topo.n_nodes, topo.n_nodes);
  for (int k = 0; k < topo.n_edges(); ++k) {
    if (!(r[k] > 0.0))
      throw std::invalid_argument("weighted_laplacian: resistance must be > 0 (edge " +
                                  std::to_string(k) + ")");
    const double g = 1.0 / r[k];
    const auto [a, b] = topo.edges[k];
    L(a, a) += g;
    L(b, b) += g;
    L(a, b) -= g;
    L(b, a) -= g;
  }
  return L;
}

Eigen::VectorXd laplacian_apply(const GridTopology& topo,
                                const Eigen::VectorXd& r,
                                const Eigen::VectorXd& x) {
  if (r.size() != topo.n_edges())
    throw std::invalid_argument("laplacian_apply: resistance count mismatch");
  if (x.size() != topo.n_nodes)
    throw std::invalid_argument("laplacian_apply: vector size mismatch");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(topo.n_nodes);
  for (int k = 0; k < topo.n_edges(); ++k) {
    const auto [a, b] = topo.edges[k];
    const double w = (x[a] - x[b]) / r[k];
    y[a] += w;
    y[b] -= w;
  }
  return y;
}

bool is_connected(const GridTopology& topo) {
  if (topo.n_nodes <= 0) return false;
  std::vector<std::vector<int>> adj(topo.n_nodes);
  for (const auto& [a, b] : topo.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(topo.n_nodes, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        q.push(w);
      }
  }
  return count == topo.n_nodes;
}

}  // namespace dcflex
