#include "zrpfluid/zrp_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace zrpfluid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform on [0, 1) from the top 53 bits; avoids the implementation-defined
// std distributions so streams are identical across standard libraries.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

JumpRateFunction JumpRateFunction::evans(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidArgument, "evans jump rate needs b > 0");
  }
  return JumpRateFunction(Evans{b});
}

JumpRateFunction JumpRateFunction::table(std::vector<double> values, double tail) {
  if (tail != 1.0) {
    throw Error(ErrorCode::InvalidArgument, "table jump rate must have tail value exactly 1");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] >= 1.0) || !std::isfinite(values[k])) {
      throw Error(ErrorCode::InvalidArgument,
                  "table jump rate g(" + std::to_string(k + 1) + ") must be >= 1");
    }
  }
  return JumpRateFunction(Table{std::move(values), tail});
}

double JumpRateFunction::operator()(std::int64_t n) const {
  if (n <= 0) return 0.0;
  struct Visitor {
    std::int64_t n;
    double operator()(const Constant&) const { return 1.0; }
    double operator()(const Evans& e) const { return 1.0 + e.b / static_cast<double>(n); }
    double operator()(const Table& t) const {
      return static_cast<std::size_t>(n) <= t.values.size() ? t.values[n - 1] : t.tail;
    }
  };
  return std::visit(Visitor{n}, kind_);
}

std::string JumpRateFunction::name() const {
  struct Visitor {
    std::string operator()(const Constant&) const { return "constant"; }
    std::string operator()(const Evans& e) const {
      std::ostringstream os;
      os << "evans(b=" << e.b << ")";
      return os.str();
    }
    std::string operator()(const Table& t) const {
      return "table(" + std::to_string(t.values.size()) + " entries)";
    }
  };
  return std::visit(Visitor{}, kind_);
}

std::int64_t ParticleConfiguration::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ParticleConfiguration initial_configuration(const SimplexPoint& u, std::int64_t particles) {
  if (particles < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  const std::size_t n = u.size();
  ParticleConfiguration eta{std::vector<std::int64_t>(n, 0)};
  std::vector<double> remainder(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = static_cast<double>(particles) * u(static_cast<int>(i));
    eta.counts[i] = static_cast<std::int64_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(eta.counts[i]);
    assigned += eta.counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < particles; k = (k + 1) % n, ++assigned) {
    ++eta.counts[order[k]];
  }
  while (assigned > particles) {
    // Only reachable through rounding of u's sum; take from the largest pile.
    auto it = std::max_element(eta.counts.begin(), eta.counts.end());
    --*it;
    --assigned;
  }
  return eta;
}

EventLog simulate_zrp(const RateMatrix& r, const JumpRateFunction& g,
                      const ParticleConfiguration& initial, double t_max, std::uint64_t seed) {
  const std::size_t n = r.size();
  if (initial.counts.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "configuration has the wrong number of sites");
  }
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw Error(ErrorCode::InvalidArgument, "simulation horizon must be finite");
  }
  for (std::int64_t c : initial.counts) {
    if (c < 0) throw Error(ErrorCode::InvalidArgument, "negative particle count");
  }

  EventLog log{initial, {}, t_max, seed};
  std::vector<std::int64_t> eta = initial.counts;
  std::vector<double> site_rate(n);
  for (std::size_t i = 0; i < n; ++i) site_rate[i] = g(eta[i]) * r.exit_rate(static_cast<int>(i));

  std::mt19937_64 rng(seed);
  double t = 0.0;
  while (true) {
    const double total = std::accumulate(site_rate.begin(), site_rate.end(), 0.0);
    if (total <= 0.0) break;
    t += -std::log1p(-unit_uniform(rng)) / total;
    if (t > t_max) break;

    double pick = unit_uniform(rng) * total;
    std::size_t from = 0;
    std::size_t last_busy = 0;
    for (; from < n; ++from) {
      if (site_rate[from] <= 0.0) continue;
      last_busy = from;
      if (pick < site_rate[from]) break;
      pick -= site_rate[from];
    }
    if (from == n) from = last_busy;

    const auto row = static_cast<int>(from);
    double target = unit_uniform(rng) * r.exit_rate(row);
    std::size_t to = 0;
    std::size_t last_positive = 0;
    for (; to < n; ++to) {
      const double w = r(row, static_cast<int>(to));
      if (w <= 0.0) continue;
      last_positive = to;
      if (target < w) break;
      target -= w;
    }
    if (to == n) to = last_positive;

    --eta[from];
    ++eta[to];
    site_rate[from] = g(eta[from]) * r.exit_rate(row);
    site_rate[to] = g(eta[to]) * r.exit_rate(static_cast<int>(to));
    log.events.push_back({t, static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(to)});
  }
  return log;
}

SampledPath rescaled_path(const EventLog& log, std::int64_t particles,
                          std::span<const double> fluid_times) {
  if (particles < 1) throw Error(ErrorCode::InvalidArgument, "need at least one particle");
  SampledPath out{{}, {}, log.seed, particles};
  std::vector<std::int64_t> eta = log.initial.counts;
  const double scale = 1.0 / static_cast<double>(particles);
  std::size_t next = 0;
  double previous = 0.0;
  for (double t : fluid_times) {
    if (t < previous) throw Error(ErrorCode::InvalidArgument, "sample times must be sorted");
    previous = t;
    const double process_time = t * static_cast<double>(particles);
    if (process_time > log.horizon) {
      std::ostringstream os;
      os << "sample at process time " << process_time << " is past the simulated horizon "
         << log.horizon;
      throw Error(ErrorCode::HorizonExceeded, os.str());
    }
    while (next < log.events.size() && log.events[next].time <= process_time) {
      --eta[log.events[next].from];
      ++eta[log.events[next].to];
      ++next;
    }
    Vector point(static_cast<Eigen::Index>(eta.size()));
    for (std::size_t i = 0; i < eta.size(); ++i) point[i] = static_cast<double>(eta[i]) * scale;
    out.times.push_back(t);
    out.points.push_back(std::move(point));
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::int64_t particles, std::size_t trial) {
  std::uint64_t s = splitmix64(master_seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(particles));
  return splitmix64(s + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(trial) + 1));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ConvergenceResult convergence_experiment(const RateMatrix& r, const JumpRateFunction& g,
                                         const SimplexPoint& u,
                                         const ConvergenceOptions& options) {
  if (options.particle_counts.empty() || options.trials == 0) {
    throw Error(ErrorCode::InvalidArgument, "experiment needs at least one N and one trial");
  }
  if (!(options.horizon > 0.0) || !std::isfinite(options.horizon)) {
    throw Error(ErrorCode::InvalidArgument, "experiment horizon must be positive and finite");
  }
  const PiecewiseLinearPath fluid = fluid_trajectory(r, u, options.tol);
  std::vector<double> grid(kConvergenceGridSteps + 1);
  std::vector<Vector> reference(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid[k] = options.horizon * static_cast<double>(k) / kConvergenceGridSteps;
  }
  grid.back() = options.horizon;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    reference[k] = evaluate_path(fluid, grid[k]).values();
  }

  ConvergenceResult result;
  for (std::int64_t particles : options.particle_counts) {
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      result.trials.push_back(
          {particles, trial, trial_seed(options.master_seed, particles, trial), 0.0, 0});
    }
  }

  auto run_trial = [&](TrialResult& tr) {
    const ParticleConfiguration eta0 = initial_configuration(u, tr.particles);
    const double t_max = options.horizon * static_cast<double>(tr.particles);
    const EventLog log = simulate_zrp(r, g, eta0, t_max, tr.seed);
    const SampledPath path = rescaled_path(log, tr.particles, grid);
    double sup = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      sup = std::max(sup, (path.points[k] - reference[k]).cwiseAbs().maxCoeff());
    }
    tr.sup_distance = sup;
    tr.events = log.events.size();
  };

  unsigned workers = options.threads != 0 ? options.threads
                                          : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(result.trials.size()));
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t k = cursor++; k < result.trials.size(); k = cursor++) {
      run_trial(result.trials[k]);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (std::int64_t particles : options.particle_counts) {
    std::vector<double> sups;
    for (const TrialResult& tr : result.trials) {
      if (tr.particles == particles) sups.push_back(tr.sup_distance);
    }
    result.summary.push_back({particles, quantile(sups, 0.5), quantile(sups, 0.9)});
  }
  return result;
}

}  // namespace zrpfluid
