#pragma once

#include <cstddef>
#include <vector>

namespace branchlab {

/// Dinic max-flow with double capacities; small graphs only (transport
/// feasibility between two finite offspring supports).
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t n_nodes);

  std::size_t add_edge(std::size_t from, std::size_t to, double capacity);
  double run(std::size_t source, std::size_t sink);
  double flow_on(std::size_t edge_id) const;
  /// Nodes reachable from the source in the residual graph (call after run).
  std::vector<bool> source_side() const;

 private:
  struct Edge {
    std::size_t to;
    double cap;
    double flow;
  };

  bool bfs(std::size_t s, std::size_t t);
  double dfs(std::size_t v, std::size_t t, double pushed);

  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
  std::size_t source_ = 0;

  static constexpr double kEps = 1e-14;
};

}  // namespace branchlab
