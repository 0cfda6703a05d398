#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "support/test_models.hpp"
#include "zrpfluid/zrp_sim.hpp"

using namespace zrpfluid;
using namespace zrpfluid::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

std::int64_t replay_total(const EventLog& log, std::size_t n) {
  std::vector<std::int64_t> eta = log.initial.counts;
  for (const JumpEvent& e : log.events) {
    REQUIRE(eta[e.from] > 0);
    --eta[e.from];
    ++eta[e.to];
  }
  REQUIRE(eta.size() == n);
  return std::accumulate(eta.begin(), eta.end(), std::int64_t{0});
}

}  // namespace

TEST_CASE("jump rate functions") {
  const auto c = JumpRateFunction::constant();
  CHECK(c(0) == 0.0);
  CHECK(c(1) == 1.0);
  CHECK(c(1000) == 1.0);

  const auto e = JumpRateFunction::evans(2.0);
  CHECK(e(0) == 0.0);
  CHECK(e(1) == 3.0);
  CHECK(e(4) == 1.5);
  CHECK_THROWS_AS(JumpRateFunction::evans(0.0), Error);
  CHECK_THROWS_AS(JumpRateFunction::evans(-1.0), Error);

  const auto t = JumpRateFunction::table({2.0, 1.5});
  CHECK(t(1) == 2.0);
  CHECK(t(2) == 1.5);
  CHECK(t(3) == 1.0);
  CHECK_THROWS_AS(JumpRateFunction::table({0.5}), Error);
  CHECK_THROWS_AS(JumpRateFunction::table({2.0}, 1.2), Error);
}

TEST_CASE("initial configuration by largest remainder") {
  const SimplexPoint u = SimplexPoint::make(vec({0.5, 0.25, 0.25}));
  CHECK(initial_configuration(u, 4).counts == std::vector<std::int64_t>{2, 1, 1});

  const SimplexPoint third = SimplexPoint::make(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  const auto c = initial_configuration(third, 10);
  CHECK(c.total() == 10);
  CHECK(c.counts == std::vector<std::int64_t>{4, 3, 3});

  std::mt19937_64 rng(21);
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + k % 6;
    const SimplexPoint v = SimplexPoint::make(random_simplex_values(rng, n, 0.3));
    for (std::int64_t particles : {1, 7, 100, 12345}) {
      const auto eta = initial_configuration(v, particles);
      CHECK(eta.total() == particles);
      for (int i = 0; i < n; ++i) {
        CHECK(eta.counts[i] >= 0);
        CHECK(std::abs(static_cast<double>(eta.counts[i]) / particles - v(i)) <=
              1.0 / static_cast<double>(particles) + 1e-15);
      }
    }
  }
}

TEST_CASE("simulation conserves particles and is reproducible") {
  const RateMatrix w = example_w();
  const auto eta0 = initial_configuration(SimplexPoint::vertex(3, 0), 50);
  const EventLog a = simulate_zrp(w, JumpRateFunction::evans(2.0), eta0, 20.0, 7);
  const EventLog b = simulate_zrp(w, JumpRateFunction::evans(2.0), eta0, 20.0, 7);
  const EventLog c = simulate_zrp(w, JumpRateFunction::evans(2.0), eta0, 20.0, 8);
  CHECK(a.events == b.events);
  CHECK_FALSE(a.events == c.events);
  CHECK(replay_total(a, 3) == 50);
  CHECK(a.horizon == 20.0);
  for (std::size_t k = 1; k < a.events.size(); ++k) CHECK(a.events[k - 1].time <= a.events[k].time);
  for (const JumpEvent& e : a.events) CHECK(w(static_cast<int>(e.from), static_cast<int>(e.to)) > 0.0);
}

TEST_CASE("rescaled path sampling") {
  const RateMatrix w = example_w();
  const auto eta0 = initial_configuration(SimplexPoint::vertex(3, 0), 10);
  const EventLog log = simulate_zrp(w, JumpRateFunction::constant(), eta0, 30.0, 3);
  const double times[] = {0.0, 1.0, 3.0};
  const SampledPath p = rescaled_path(log, 10, times);
  CHECK((p.points[0] - vec({1, 0, 0})).cwiseAbs().maxCoeff() == 0.0);
  for (const Vector& z : p.points) CHECK(z.sum() == doctest::Approx(1.0));

  const double late[] = {3.5};
  CHECK_THROWS_AS(rescaled_path(log, 10, late), Error);
  const double unsorted[] = {1.0, 0.5};
  CHECK_THROWS_AS(rescaled_path(log, 10, unsorted), Error);

  // No events: the sampled path is frozen at the initial configuration.
  const EventLog empty{eta0, {}, 5.0, 0};
  const double frozen_times[] = {0.0, 0.25, 0.5};
  for (const Vector& z : rescaled_path(empty, 10, frozen_times).points) {
    CHECK((z - vec({1, 0, 0})).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("a single particle performs the embedded random walk") {
  const RateMatrix w = example_w();
  ParticleConfiguration one{{0, 1, 0}};
  const EventLog log = simulate_zrp(w, JumpRateFunction::evans(3.0), one, 2000.0, 11);
  REQUIRE(log.events.size() > 100);
  // From the middle site the walk moves to either side with probability 1/2.
  std::size_t from_middle = 0;
  std::size_t to_left = 0;
  for (const JumpEvent& e : log.events) {
    if (e.from == 1) {
      ++from_middle;
      to_left += e.to == 0;
    }
  }
  const double frac = static_cast<double>(to_left) / static_cast<double>(from_middle);
  CHECK(std::abs(frac - 0.5) < 4.0 * std::sqrt(0.25 / static_cast<double>(from_middle)));
  // Every exit rate is 2 and g(1) = 4.
  const double rate = static_cast<double>(log.events.size()) / log.horizon;
  CHECK(std::abs(rate / 8.0 - 1.0) < 0.1);
}

TEST_CASE("symmetric pair: long-run occupation is balanced") {
  const RateMatrix r = symmetric_two_site();
  ParticleConfiguration eta0{{10, 0}};
  const double horizon = 200000.0;
  const EventLog log = simulate_zrp(r, JumpRateFunction::constant(), eta0, horizon, 17);
  std::int64_t at0 = 10;
  double prev = 0.0;
  double area = 0.0;
  for (const JumpEvent& e : log.events) {
    area += static_cast<double>(at0) * (e.time - prev);
    prev = e.time;
    at0 += e.from == 0 ? -1 : 1;
  }
  area += static_cast<double>(at0) * (horizon - prev);
  CHECK(area / horizon == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("departures from a permanently occupied site are Poisson") {
  // Site 0 of a two-site chain with r(1,0) >> r(0,1) stays occupied; with
  // constant g its departures form a Poisson stream of rate r(0,1).
  const RateMatrix r = RateMatrix::from_rows({{0, 1}, {5, 0}});
  ParticleConfiguration eta0{{200, 0}};
  const EventLog log = simulate_zrp(r, JumpRateFunction::constant(), eta0, 2000.0, 23);
  std::vector<double> gaps;
  double last = 0.0;
  std::int64_t at0 = 200;
  bool occupied_throughout = true;
  for (const JumpEvent& e : log.events) {
    if (e.from == 0) {
      gaps.push_back(e.time - last);
      last = e.time;
      --at0;
    } else {
      ++at0;
    }
    occupied_throughout = occupied_throughout && at0 > 0;
  }
  REQUIRE(occupied_throughout);
  REQUIRE(gaps.size() > 1000);
  constexpr int kBins = 10;
  std::array<int, kBins> counts{};
  for (double g : gaps) {
    const double cdf = 1.0 - std::exp(-g);
    counts[std::min(kBins - 1, static_cast<int>(cdf * kBins))]++;
  }
  const double expected = static_cast<double>(gaps.size()) / kBins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 27.877);  // chi-square, 9 degrees of freedom, level 0.001
}

TEST_CASE("trial seeds") {
  CHECK(trial_seed(1, 100, 0) == trial_seed(1, 100, 0));
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 100, 1));
  CHECK(trial_seed(1, 100, 0) != trial_seed(1, 1000, 0));
  CHECK(trial_seed(1, 100, 0) != trial_seed(2, 100, 0));
}

TEST_CASE("quantile") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.9) == doctest::Approx(9.0));
  CHECK(quantile({5.0}, 0.9) == 5.0);
}

TEST_CASE("convergence experiment is deterministic across thread counts") {
  const RateMatrix w = example_w();
  ConvergenceOptions opt{{20, 80}, 1.0, 6, 42, 1, kDefaultTolerance};
  const ConvergenceResult one = convergence_experiment(w, JumpRateFunction::constant(),
                                                       SimplexPoint::vertex(3, 0), opt);
  opt.threads = 4;
  const ConvergenceResult four = convergence_experiment(w, JumpRateFunction::constant(),
                                                        SimplexPoint::vertex(3, 0), opt);
  REQUIRE(one.trials.size() == 12);
  for (std::size_t k = 0; k < one.trials.size(); ++k) {
    CHECK(one.trials[k].sup_distance == four.trials[k].sup_distance);
    CHECK(one.trials[k].particles == (k < 6 ? 20 : 80));
    CHECK(one.trials[k].sup_distance >= 0.0);
    CHECK(one.trials[k].sup_distance <= 2.0);
  }
  REQUIRE(one.summary.size() == 2);
  CHECK(one.summary[0].median <= one.summary[0].p90);
}

TEST_CASE("frozen two-site configuration samples as a constant") {
  const EventLog frozen{ParticleConfiguration{{4, 0}}, {}, 8.0, 0};
  const double times[] = {0.0, 1.0, 2.0};
  for (const Vector& z : rescaled_path(frozen, 4, times).points) {
    CHECK((z - vec({1, 0})).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("worked example at N = 10^4 sits near the fluid point at t = 0.5") {
  const RateMatrix w = example_w();
  const auto eta0 = initial_configuration(SimplexPoint::vertex(3, 0), 10000);
  std::vector<double> errors;
  for (std::uint64_t seed = 1; seed <= 9; ++seed) {
    const EventLog log = simulate_zrp(w, JumpRateFunction::constant(), eta0, 5000.0, seed);
    const double t[] = {0.5};
    errors.push_back((rescaled_path(log, 10000, t).points[0] - vec({0.5, 0.5, 0})).cwiseAbs().maxCoeff());
  }
  CHECK(quantile(errors, 0.5) <= 0.05);
}

TEST_CASE("vertex on the bottleneck stays put up to fluctuations") {
  ConvergenceOptions opt{{10000}, 2.0, 10, 7, 0, kDefaultTolerance};
  const ConvergenceResult res = convergence_experiment(example_w(), JumpRateFunction::constant(),
                                                       SimplexPoint::vertex(3, 1), opt);
  CHECK(res.summary[0].median <= 0.05);
}
