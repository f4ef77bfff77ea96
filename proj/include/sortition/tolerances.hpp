#pragma once

namespace sortition {

/// Floating-point tolerances shared by every module and test.
struct Tolerances {
  /// Equality-constraint residual accepted from the LP solver.
  static constexpr double feasibility = 1e-8;
  /// Smallest pivot magnitude the simplex and eliminations will divide by.
  static constexpr double pivot = 1e-12;
  /// Distance to 0/1 below which a rounding variable is frozen.
  static constexpr double integrality_snap = 1e-9;
  /// Reduced-cost threshold for simplex optimality.
  static constexpr double optimality = 1e-9;
  /// Relative tolerance on sums such as sum(pi) = k.
  static constexpr double sum_relative = 1e-9;
};

} // namespace sortition
