#pragma once

// Finite-difference verification of every differentiable path the trainer
// uses: single ops, each level's cross-modal block, each level's region
// masks and the full compose → align → fuse → contrastive loss chain.

#include <cstdint>
#include <string>
#include <vector>

#include "cir/synthetic.hpp"

namespace cir {

struct GradCheckSuiteOptions {
  ModelDims dims = desk_dims();
  std::size_t k = 4;
  std::size_t tokens = 5;
  std::size_t batch = 3;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  /// Coordinates probed per tensor in the block and chain cases; 0 = all.
  std::size_t max_coords_per_tensor = 48;
  /// Std of the perturbation applied to freshly initialized parameters so
  /// that the check is not taken at the near-linear initialization point.
  double jitter = 0.2;
};

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  double seconds = 0.0;
};

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options);

}  // namespace cir
