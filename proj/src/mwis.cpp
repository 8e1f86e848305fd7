#include "airtrack/mwis.hpp"

#include <algorithm>
#include <boost/dynamic_bitset.hpp>
#include <numeric>
#include <string>

#include "airtrack/core.hpp"

namespace airtrack {

void ConflictGraph::add_edge(int a, int b) {
  if (a == b) return;
  const auto n = static_cast<int>(size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw Error(ErrorCode::kInvalidArgument, "edge out of range");
  auto insert = [](std::vector<int>& adj, int v) {
    const auto it = std::lower_bound(adj.begin(), adj.end(), v);
    if (it == adj.end() || *it != v) adj.insert(it, v);
  };
  insert(adjacency[a], b);
  insert(adjacency[b], a);
}

bool ConflictGraph::adjacent(int a, int b) const {
  return std::binary_search(adjacency[a].begin(), adjacency[a].end(), b);
}

double set_weight(const ConflictGraph& g, const std::vector<int>& sorted_vertices) {
  double total = 0.0;
  for (int v : sorted_vertices) total += g.weights[v];
  return total;
}

bool is_independent(const ConflictGraph& g, const std::vector<int>& vertices) {
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      if (vertices[i] == vertices[j] || g.adjacent(vertices[i], vertices[j])) return false;
    }
  }
  return true;
}

namespace {

void check_weights(const ConflictGraph& g) {
  for (double w : g.weights) {
    if (!(w > 0.0)) throw Error(ErrorCode::kInvalidArgument, "MWIS weights must be > 0");
  }
}

// true if candidate should replace incumbent
bool better(double total, const std::vector<int>& set, double best_total,
            const std::vector<int>& best_set) {
  if (total != best_total) return total > best_total;
  return std::lexicographical_compare(set.begin(), set.end(), best_set.begin(), best_set.end());
}

using Bits = boost::dynamic_bitset<>;

class ComponentSolver {
 public:
  ComponentSolver(const ConflictGraph& g, std::vector<int> vertices) : g_(g) {
    // local index order: degree descending, then id
    std::sort(vertices.begin(), vertices.end(), [&](int a, int b) {
      const auto da = g.adjacency[a].size(), db = g.adjacency[b].size();
      return da != db ? da > db : a < b;
    });
    ids_ = std::move(vertices);
    const std::size_t n = ids_.size();
    std::vector<int> local(g.size(), -1);
    for (std::size_t i = 0; i < n; ++i) local[ids_[i]] = static_cast<int>(i);
    nbr_.assign(n, Bits(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (int u : g.adjacency[ids_[i]]) {
        if (local[u] >= 0) nbr_[i].set(static_cast<std::size_t>(local[u]));
      }
    }
  }

  MwisResult solve() {
    const std::size_t n = ids_.size();
    // greedy incumbent
    std::vector<std::size_t> by_weight(n);
    std::iota(by_weight.begin(), by_weight.end(), 0);
    std::stable_sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
      const double wa = g_.weights[ids_[a]], wb = g_.weights[ids_[b]];
      return wa != wb ? wa > wb : ids_[a] < ids_[b];
    });
    Bits blocked(n);
    std::vector<int> greedy;
    for (std::size_t i : by_weight) {
      if (blocked.test(i)) continue;
      greedy.push_back(ids_[i]);
      blocked |= nbr_[i];
      blocked.set(i);
    }
    std::sort(greedy.begin(), greedy.end());
    best_ = greedy;
    best_total_ = set_weight(g_, best_);

    Bits candidates(n);
    candidates.set();
    std::vector<int> chosen;
    search(candidates, chosen, 0.0);
    return {best_, best_total_};
  }

 private:
  // Greedy clique cover of the candidates; sum of the heaviest vertex per clique.
  double clique_bound(const Bits& candidates) const {
    Bits left = candidates;
    double bound = 0.0;
    for (std::size_t i = left.find_first(); i != Bits::npos; i = left.find_first()) {
      Bits clique_pool = left & nbr_[i];
      double heaviest = g_.weights[ids_[i]];
      left.reset(i);
      for (std::size_t j = clique_pool.find_first(); j != Bits::npos; j = clique_pool.find_next(j)) {
        heaviest = std::max(heaviest, g_.weights[ids_[j]]);
        left.reset(j);
        clique_pool &= nbr_[j];
      }
      bound += heaviest;
    }
    return bound;
  }

  void search(const Bits& candidates, std::vector<int>& chosen, double current) {
    const std::size_t v = candidates.find_first();
    if (v == Bits::npos) {
      std::vector<int> set = chosen;
      std::sort(set.begin(), set.end());
      const double total = set_weight(g_, set);
      if (better(total, set, best_total_, best_)) {
        best_ = std::move(set);
        best_total_ = total;
      }
      return;
    }
    const double bound = current + clique_bound(candidates);
    // slack keeps equal-weight alternatives alive for the tie-break
    if (bound < best_total_ - 1e-9 * std::max(1.0, std::abs(best_total_))) return;

    Bits with = candidates & ~nbr_[v];
    with.reset(v);
    chosen.push_back(ids_[v]);
    search(with, chosen, current + g_.weights[ids_[v]]);
    chosen.pop_back();

    Bits without = candidates;
    without.reset(v);
    search(without, chosen, current);
  }

  const ConflictGraph& g_;
  std::vector<int> ids_;
  std::vector<Bits> nbr_;
  std::vector<int> best_;
  double best_total_ = 0.0;
};

std::vector<std::vector<int>> components(const ConflictGraph& g) {
  std::vector<int> seen(g.size(), 0);
  std::vector<std::vector<int>> out;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> comp{static_cast<int>(s)};
    seen[s] = 1;
    for (std::size_t k = 0; k < comp.size(); ++k) {
      for (int u : g.adjacency[comp[k]]) {
        if (!seen[u]) {
          seen[u] = 1;
          comp.push_back(u);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace

MwisResult solve_mwis(const ConflictGraph& g, std::size_t cap) {
  if (g.size() > cap) {
    throw Error(ErrorCode::kSizeLimit, std::to_string(g.size()) + " vertices exceed the exact cap");
  }
  check_weights(g);
  MwisResult out;
  for (auto& comp : components(g)) {
    const MwisResult part = ComponentSolver(g, std::move(comp)).solve();
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
  }
  std::sort(out.vertices.begin(), out.vertices.end());
  out.total = set_weight(g, out.vertices);
  return out;
}

MwisResult mwis_bruteforce(const ConflictGraph& g) {
  if (g.size() > kBruteForceCap) {
    throw Error(ErrorCode::kSizeLimit, "brute force is limited to 20 vertices");
  }
  check_weights(g);
  const auto n = static_cast<int>(g.size());
  MwisResult best;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> set;
    bool ok = true;
    for (int v = 0; v < n && ok; ++v) {
      if (!(mask & (1u << v))) continue;
      for (int u : set) ok = ok && !g.adjacent(u, v);
      set.push_back(v);
    }
    if (!ok) continue;
    const double total = set_weight(g, set);
    if (better(total, set, best.total, best.vertices)) {
      best.vertices = std::move(set);
      best.total = total;
    }
  }
  return best;
}

MwisResult mwis_greedy(const ConflictGraph& g) {
  std::vector<int> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return g.weights[a] > g.weights[b]; });
  std::vector<char> blocked(g.size(), 0);
  MwisResult out;
  for (int v : order) {
    if (blocked[v]) continue;
    out.vertices.push_back(v);
    blocked[v] = 1;
    for (int u : g.adjacency[v]) blocked[u] = 1;
  }
  std::sort(out.vertices.begin(), out.vertices.end());
  out.total = set_weight(g, out.vertices);
  return out;
}

}  // namespace airtrack
