#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nae {

struct GradCheckEntry {
  std::string op;
  double max_rel_error = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Finite-difference checks of every differentiable op at small random sizes,
// plus the full end-to-end model composite (train and frozen statistics).
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed = 7);

}  // namespace nae
