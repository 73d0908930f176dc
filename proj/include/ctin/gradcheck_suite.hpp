#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctin {

struct OracleCase {
  std::string name;
  int shapes = 0;
  double max_rel_error = 0.0;
  double max_raw_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool passed = false;
};

/// Central-difference checks of every differentiable operation, the model
/// blocks, the losses and a small end-to-end model loss. Each case runs on
/// `shapes` seeded random shapes.
std::vector<OracleCase> run_gradcheck_suite(int shapes = 10, std::uint64_t seed = 0,
                                            double tolerance = 1e-4);

}  // namespace ctin
