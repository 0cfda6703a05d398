#pragma once

// Exact piecewise-linear fluid limits on the simplex, their reflection
// regulators, and recovery of rates from a prescribed drift.

#include <optional>
#include <string>
#include <vector>

#include "zrpfluid/absorbing.hpp"
#include "zrpfluid/markov_core.hpp"

namespace zrpfluid {

/// Point of the probability simplex over the sites.
class SimplexPoint {
 public:
  /// Accepts values >= -tol summing to 1 within 1e-6; clamps the negative
  /// dust to 0 and renormalizes. Throws InvalidArgument otherwise.
  static SimplexPoint make(Vector values, double tol = kDefaultTolerance);

  /// The vertex at `site`.
  static SimplexPoint vertex(std::size_t n, int site);

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Vector& values() const { return values_; }
  double operator()(int i) const { return values_[i]; }

  /// S(u) = {i : u(i) > tol}.
  SiteSet support(double tol = kDefaultTolerance) const;

 private:
  explicit SimplexPoint(Vector values) : values_(std::move(values)) {}
  Vector values_;
};

/// lambda^u: the net flow on A(S(u)) extended by zero.
FlowVector velocity(const RateMatrix& r, const SimplexPoint& u,
                    double tol = kDefaultTolerance);

/// Time for u + t*lam to leave the simplex; nullopt when no support
/// coordinate decreases faster than -flow_tol (the path is at rest).
std::optional<double> exit_time(const SimplexPoint& u, const FlowVector& lam,
                                double flow_tol = kDefaultTolerance);

struct PathBreakpoint {
  double time;
  SimplexPoint point;
  SiteSet closure;     // A(point)
  FlowVector velocity; // lambda^{point}; null on the terminal breakpoint
};

/// Concatenation of rectilinear segments; the last breakpoint is at rest.
struct PiecewiseLinearPath {
  std::vector<PathBreakpoint> breakpoints;

  std::size_t terminal_index() const { return breakpoints.size() - 1; }
  double terminal_time() const { return breakpoints.back().time; }
  const SimplexPoint& start() const { return breakpoints.front().point; }
};

/// Throws NonTermination if more than |V| breakpoints would be produced.
PiecewiseLinearPath fluid_trajectory(const RateMatrix& r, const SimplexPoint& u,
                                     double tol = kDefaultTolerance);

SimplexPoint evaluate_path(const PiecewiseLinearPath& path, double t);

struct RegulatorSegment {
  double start;
  Vector level;  // rho at `start`
  Vector slope;  // d rho / dt on [start, next start)
};

/// Cumulative regulator aligned with the breakpoints of a fluid path.
struct RegulatorPath {
  std::vector<RegulatorSegment> segments;

  Vector evaluate(double t) const;
};

/// Per segment, the slope is zero on S = S(v_k) and equals
/// Q^S (lambda^{v_k} - lambda)|_{V \ S} elsewhere, Q^S the inverse of
/// (I - p^T) restricted to V \ S.
RegulatorPath regulator_path(const RateMatrix& r, const PiecewiseLinearPath& path);

struct OrpReport {
  bool passed = true;
  std::size_t checked_times = 0;
  double max_residual = 0.0;          // ||zeta - xi - sum rho(i) w_i||_inf
  double min_coordinate = 0.0;        // smallest zeta_t(i) seen
  double min_increment = 0.0;         // most negative rho increment
  double max_complementarity = 0.0;   // largest zeta(i) where rho(i) grows
  std::vector<std::string> violations;
};

/// Checks the reflection-problem conditions with input xi_t = u + t*lambda
/// at every breakpoint and segment midpoint.
OrpReport verify_orp(const PiecewiseLinearPath& path, const RegulatorPath& regulator,
                     const RateMatrix& r, const SimplexPoint& u,
                     double tol = kDefaultTolerance);

struct RecoveredRates {
  Vector exit_rates;  // r(i)
  double shift;       // multiple of mu_p added to the least-squares solution
  double residual;    // ||sum_i r(i) w_i + lam||_inf
  RateMatrix rates;   // r(i,j) = r(i) p(i,j)
};

inline constexpr double kMinRecoveredRate = 1e-6;

/// Exit rates r(i) >= kMinRecoveredRate with -sum_i r(i) w_i = lam.
/// Throws NotStochastic or DriftNotBalanced.
RecoveredRates rates_from_probabilities(const Matrix& p, const Vector& lam,
                                        double tol = kDefaultTolerance);

}  // namespace zrpfluid
