#pragma once

// Event-driven simulation of the zero-range process and a convergence
// harness against the fluid limit.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "zrpfluid/fluid.hpp"
#include "zrpfluid/markov_core.hpp"

namespace zrpfluid {

/// Departure rate factor g(n): g(0) = 0, g(n) >= 1 for n >= 1, g(n) -> 1.
class JumpRateFunction {
 public:
  struct Constant {};
  struct Evans {
    double b;
  };
  /// g(n) = values[n - 1] for 1 <= n <= values.size(), `tail` beyond.
  struct Table {
    std::vector<double> values;
    double tail;
  };

  static JumpRateFunction constant() { return JumpRateFunction(Constant{}); }
  /// g(n) = 1 + b/n; throws InvalidArgument unless b > 0.
  static JumpRateFunction evans(double b);
  /// Throws InvalidArgument if an entry is < 1 or tail != 1.
  static JumpRateFunction table(std::vector<double> values, double tail = 1.0);

  double operator()(std::int64_t n) const;

  const std::variant<Constant, Evans, Table>& kind() const { return kind_; }
  std::string name() const;

 private:
  explicit JumpRateFunction(std::variant<Constant, Evans, Table> kind) : kind_(std::move(kind)) {}
  std::variant<Constant, Evans, Table> kind_;
};

struct ParticleConfiguration {
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
};

/// Largest-remainder rounding of N*u to a configuration with exactly N particles.
ParticleConfiguration initial_configuration(const SimplexPoint& u, std::int64_t particles);

struct JumpEvent {
  double time;  // process time
  std::uint32_t from;
  std::uint32_t to;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct EventLog {
  ParticleConfiguration initial;
  std::vector<JumpEvent> events;
  double horizon;  // process time covered by the log
  std::uint64_t seed;
};

/// Next-event sampling of the generator with jump rates g(eta(i)) r(i,j)
/// up to process time t_max. Reproducible given `seed`.
EventLog simulate_zrp(const RateMatrix& r, const JumpRateFunction& g,
                      const ParticleConfiguration& initial, double t_max, std::uint64_t seed);

struct SampledPath {
  std::vector<double> times;  // fluid clock
  std::vector<Vector> points; // eta_{tN} / N
  std::uint64_t seed;
  std::int64_t particles;
};

/// Samples the rescaled process at fluid times t (process time t*N).
/// Throws HorizonExceeded when a sample lies beyond the log.
SampledPath rescaled_path(const EventLog& log, std::int64_t particles,
                          std::span<const double> fluid_times);

/// Per-trial stream seed derived from the master seed, N and trial index.
std::uint64_t trial_seed(std::uint64_t master_seed, std::int64_t particles, std::size_t trial);

inline constexpr std::size_t kConvergenceGridSteps = 200;

struct TrialResult {
  std::int64_t particles;
  std::size_t trial;
  std::uint64_t seed;
  double sup_distance;
  std::size_t events;
};

struct ConvergenceSummary {
  std::int64_t particles;
  double median;
  double p90;
};

struct ConvergenceResult {
  std::vector<TrialResult> trials;        // ordered by (N, trial)
  std::vector<ConvergenceSummary> summary; // one per N, input order
};

struct ConvergenceOptions {
  std::vector<std::int64_t> particle_counts;
  double horizon = 1.0;  // fluid time T
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  double tol = kDefaultTolerance;
};

/// sup over the grid k*T/200, k = 0..200, of ||zeta^N_t - zeta^u_t||_inf,
/// summarized by median and 90th percentile over trials for each N.
ConvergenceResult convergence_experiment(const RateMatrix& r, const JumpRateFunction& g,
                                         const SimplexPoint& u,
                                         const ConvergenceOptions& options);

/// Linear-interpolation quantile of `values` (copied and sorted).
double quantile(std::vector<double> values, double q);

}  // namespace zrpfluid
