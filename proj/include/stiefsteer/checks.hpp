#pragma once

// Randomized property suites over the manifold primitives and both solvers.
// Backs the `check` CLI subcommand.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stiefsteer/steer.hpp"

namespace stiefsteer {

enum class CheckScale { Quick, Full };

struct PropertyResult {
  std::string name;
  bool passed = true;
  int trials = 0;
  int exceptions = 0;  // tolerated outliers (statistical properties only)
  std::string detail;  // first failure, or a short statistic
};

// Retraction used by the retraction properties. Returns the raw matrix so a
// broken implementation can be observed instead of rejected at construction.
using RetractionFn = std::function<Matrix(const StiefelPoint&, const TangentVector&)>;

struct CheckOptions {
  std::uint64_t seed = 42;
  CheckScale scale = CheckScale::Quick;
  // Empty means polar_retract. Tests substitute a corrupted one.
  RetractionFn retraction;
};

std::vector<PropertyResult> run_property_checks(const CheckOptions& opts);

// (V + U) with no normalization; a negative control for the retraction suites.
Matrix corrupted_retraction(const StiefelPoint& v, const TangentVector& u);

}  // namespace stiefsteer
