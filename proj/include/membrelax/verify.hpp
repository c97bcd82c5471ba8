#ifndef MEMBRELAX_VERIFY_HPP
#define MEMBRELAX_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "membrelax/cell.hpp"

namespace membrelax {

struct CheckResult {
  std::string name;
  bool pass = false;
  double slack = 0.0;   // measured margin; positive means room to spare
  std::string detail;
};

// Invariant suite over the built-in models: growth bounds, convex
// collapse, the laminate oracle, the inf_b identity, envelope
// idempotence, surface-density equality, rotated-cell invariance and
// directional convexity. `only` filters by name; empty runs everything.
std::vector<CheckResult> run_verification(const std::vector<std::string>& only,
                                          std::uint64_t seed, const CellGrid& grid = {});

std::vector<std::string> verification_check_names();

}  // namespace membrelax

#endif
