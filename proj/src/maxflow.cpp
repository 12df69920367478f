#include "branchlab/maxflow.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace branchlab {

MaxFlow::MaxFlow(std::size_t n_nodes) : adj_(n_nodes) {}

std::size_t MaxFlow::add_edge(std::size_t from, std::size_t to,
                              double capacity) {
  std::size_t id = edges_.size();
  edges_.push_back(Edge{to, capacity, 0.0});
  edges_.push_back(Edge{from, 0.0, 0.0});  // reverse edge
  adj_[from].push_back(id);
  adj_[to].push_back(id + 1);
  return id;
}

bool MaxFlow::bfs(std::size_t s, std::size_t t) {
  level_.assign(adj_.size(), -1);
  std::deque<std::size_t> queue{s};
  level_[s] = 0;
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t id : adj_[v]) {
      const Edge& e = edges_[id];
      if (level_[e.to] < 0 && e.cap - e.flow > kEps) {
        level_[e.to] = level_[v] + 1;
        queue.push_back(e.to);
      }
    }
  }
  return level_[t] >= 0;
}

double MaxFlow::dfs(std::size_t v, std::size_t t, double pushed) {
  if (v == t || pushed <= kEps) return pushed;
  for (std::size_t& i = next_[v]; i < adj_[v].size(); ++i) {
    std::size_t id = adj_[v][i];
    Edge& e = edges_[id];
    if (level_[e.to] != level_[v] + 1 || e.cap - e.flow <= kEps) continue;
    double got = dfs(e.to, t, std::min(pushed, e.cap - e.flow));
    if (got > kEps) {
      e.flow += got;
      edges_[id ^ 1].flow -= got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::run(std::size_t source, std::size_t sink) {
  source_ = source;
  double total = 0.0;
  while (bfs(source, sink)) {
    next_.assign(adj_.size(), 0);
    for (;;) {
      double pushed = dfs(source, sink, std::numeric_limits<double>::max());
      if (pushed <= kEps) break;
      total += pushed;
    }
  }
  return total;
}

double MaxFlow::flow_on(std::size_t edge_id) const {
  return edges_[edge_id].flow;
}

std::vector<bool> MaxFlow::source_side() const {
  std::vector<bool> seen(adj_.size(), false);
  std::deque<std::size_t> queue{source_};
  seen[source_] = true;
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t id : adj_[v]) {
      const Edge& e = edges_[id];
      if (!seen[e.to] && e.cap - e.flow > kEps) {
        seen[e.to] = true;
        queue.push_back(e.to);
      }
    }
  }
  return seen;
}

}  // namespace branchlab
