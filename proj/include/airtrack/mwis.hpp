// Maximum weighted independent set over a conflict graph.
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace airtrack {

struct ConflictGraph {
  std::vector<double> weights;              // vertex id = index, weights > 0
  std::vector<std::vector<int>> adjacency;  // sorted, symmetric, no self loops

  explicit ConflictGraph(std::size_t n = 0) : weights(n, 1.0), adjacency(n) {}
  std::size_t size() const { return weights.size(); }
  void add_edge(int a, int b);
  bool adjacent(int a, int b) const;
};

struct MwisResult {
  std::vector<int> vertices;  // sorted ascending
  double total = 0.0;         // summed in ascending vertex order
};

inline constexpr std::size_t kDefaultExactCap = 500;
inline constexpr std::size_t kBruteForceCap = 20;

// Sum of weights in ascending vertex order.
double set_weight(const ConflictGraph& g, const std::vector<int>& sorted_vertices);
bool is_independent(const ConflictGraph& g, const std::vector<int>& vertices);

// Exact branch and bound per connected component. Among optimal sets the
// lexicographically smallest sorted vertex list is returned. Throws SizeLimit
// above `cap` vertices.
MwisResult solve_mwis(const ConflictGraph& g, std::size_t cap = kDefaultExactCap);

// Exhaustive enumeration with the same tie-break; throws SizeLimit above 20.
MwisResult mwis_bruteforce(const ConflictGraph& g);

// Heaviest-first greedy selection (ties by lower id).
MwisResult mwis_greedy(const ConflictGraph& g);

}  // namespace airtrack
