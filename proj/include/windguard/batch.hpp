#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "windguard/scada.hpp"

namespace windguard {

/// Stacked windows. inputs[(b · features + f) · hours + t], targets[b · hours + t].
struct Batch {
  std::size_t size = 0;
  std::size_t features = 0;
  std::size_t hours = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  double input(std::size_t b, std::size_t f, std::size_t t) const {
    return inputs[(b * features + f) * hours + t];
  }
};

/// Stacks the given samples, or all of them when `indices` is empty.
Batch make_batch(std::span<const scada::WindowSample> samples, std::span<const std::size_t> indices = {});

}  // namespace windguard
