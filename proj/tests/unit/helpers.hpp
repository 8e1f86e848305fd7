#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airtrack/core.hpp"
#include "airtrack/mwis.hpp"
#include "airtrack/rng.hpp"

namespace airtrack::testing {

inline Detection make_detection(std::int64_t frame, DetectionId id, double cx, double cy, double w = 10.0,
                                double h = 20.0) {
  Detection d;
  d.frame_index = frame;
  d.detection_id = id;
  d.box = {cx - w / 2.0, cy - h / 2.0, w, h};
  d.label = "person";
  d.confidence = 0.9;
  d.chip = Chip::filled(8, 8, 3, 0.5);
  return d;
}

inline BoundingBox random_box(Rng& rng) {
  return {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(0.5, 40.0), rng.uniform(0.5, 40.0)};
}

inline Chip random_chip(Rng& rng, int w, int h, int c) {
  Chip chip(w, h, c);
  for (double& v : chip.pixels()) v = rng.uniform();
  return chip;
}

// Weights are multiples of 1/8 so every subset sum is exact in binary.
inline ConflictGraph random_graph(Rng& rng, int n, double edge_prob) {
  ConflictGraph g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.weights[static_cast<std::size_t>(i)] = static_cast<double>(rng.uniform_int(1, 80)) / 8.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(edge_prob)) g.add_edge(i, j);
  return g;
}

}  // namespace airtrack::testing
