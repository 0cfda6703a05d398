#pragma once

// Fixtures and independent oracles shared by the unit and acceptance suites.
// Nothing here calls the solver paths it is used to check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "zrpfluid/markov_core.hpp"

namespace zrpfluid::testing {

/// r(0,1)=2, r(1,0)=1, r(1,2)=1, r(2,1)=2.
inline RateMatrix example_w() {
  return RateMatrix::from_rows({{0, 2, 0}, {1, 0, 1}, {0, 2, 0}});
}

inline RateMatrix symmetric_two_site() { return RateMatrix::from_rows({{0, 1}, {1, 0}}); }

/// 0 -> 1 -> 2 -> 0 with unit rates.
inline RateMatrix cycle3() {
  return RateMatrix::from_rows({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
}

inline RateMatrix complete3() {
  return RateMatrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
}

enum class ModelFamily { Generic, Reversible, Symmetric };

/// Random irreducible rate matrix normalized to max entry 1. A random
/// Hamiltonian cycle (or spanning path, for the reversible families)
/// guarantees strong connectivity; other pairs are present with
/// probability `density`.
inline RateMatrix random_rates(std::mt19937_64& rng, int n, ModelFamily family,
                               double density = 0.5) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix m = Matrix::Zero(n, n);

  if (family == ModelFamily::Generic) {
    for (int k = 0; k < n; ++k) m(perm[k], perm[(k + 1) % n]) = 0.05 + unit(rng);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && m(i, j) == 0.0 && unit(rng) < density) m(i, j) = 0.05 + unit(rng);
      }
    }
  } else {
    // Symmetric conductances on a connected graph.
    Matrix s = Matrix::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
      const double c = 0.05 + unit(rng);
      s(perm[k], perm[k + 1]) = c;
      s(perm[k + 1], perm[k]) = c;
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (s(i, j) == 0.0 && unit(rng) < density) {
          const double c = 0.05 + unit(rng);
          s(i, j) = c;
          s(j, i) = c;
        }
      }
    }
    if (family == ModelFamily::Symmetric) {
      m = s;
    } else {
      // mu(i) r(i,j) = s(i,j): detailed balance with a prescribed mu that
      // ties its maximum on a random number of sites.
      std::vector<double> mu(n);
      const int ties = 1 + static_cast<int>(unit(rng) * std::min(n, 3));
      for (int k = 0; k < n; ++k) mu[perm[k]] = k < ties ? 1.0 : 0.2 + 0.7 * unit(rng);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = s(i, j) / mu[i];
      }
    }
  }
  m /= m.maxCoeff();
  return RateMatrix::validate(m);
}

/// Mixed corpus: 60% generic, 25% reversible with tied maxima, 15% symmetric.
inline std::vector<RateMatrix> random_corpus(std::uint64_t seed, std::size_t count,
                                             int min_sites, int max_sites) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(min_sites, max_sites);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RateMatrix> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double pick = unit(rng);
    const ModelFamily family = pick < 0.6    ? ModelFamily::Generic
                               : pick < 0.85 ? ModelFamily::Reversible
                                             : ModelFamily::Symmetric;
    out.push_back(random_rates(rng, size(rng), family, 0.2 + 0.6 * unit(rng)));
  }
  return out;
}

/// Random point of the simplex; each coordinate is zeroed with
/// probability `zero_prob` (at least one survives).
inline Vector random_simplex_values(std::mt19937_64& rng, int n, double zero_prob) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = unit(rng) < zero_prob ? 0.0 : expo(rng) + 1e-3;
  if (v.sum() == 0.0) v[std::uniform_int_distribution<int>(0, n - 1)(rng)] = 1.0;
  return v / v.sum();
}

// ---- independent oracles --------------------------------------------------

/// Stationary law by power iteration of the uniformized chain.
inline Vector oracle_invariant(const RateMatrix& r, int iterations = 200000) {
  const int n = static_cast<int>(r.size());
  const double lambda = 1.5 * r.exit_rates().maxCoeff();
  Matrix step = r.rates() / lambda;
  for (int i = 0; i < n; ++i) step(i, i) = 1.0 - r.exit_rate(i) / lambda;
  Vector mu = Vector::Constant(n, 1.0 / n);
  for (int it = 0; it < iterations; ++it) {
    Vector next = step.transpose() * mu;
    const double diff = (next - mu).cwiseAbs().maxCoeff();
    mu = next;
    if (diff < 1e-16) break;
  }
  return mu / mu.sum();
}

/// Hitting distribution on A by Gauss-Seidel sweeps of the embedded chain.
/// Returns h(k, i) indexed by full site indices (columns outside A are 0).
inline Matrix oracle_hitting(const RateMatrix& r, SiteSet target) {
  const int n = static_cast<int>(r.size());
  Matrix h = Matrix::Zero(n, n);
  for (int i : target.indices()) h(i, i) = 1.0;
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double change = 0.0;
    for (int k = 0; k < n; ++k) {
      if (target.contains(k)) continue;
      for (int col : target.indices()) {
        double v = 0.0;
        for (int m = 0; m < n; ++m) v += r(k, m) * h(m, col);
        v /= r.exit_rate(k);
        change = std::max(change, std::abs(v - h(k, col)));
        h(k, col) = v;
      }
    }
    if (change < 1e-16) break;
  }
  return h;
}

/// Trace rates straight from the defining sum, with oracle hitting probabilities.
inline Matrix oracle_trace(const RateMatrix& r, SiteSet subset) {
  const int n = static_cast<int>(r.size());
  const Matrix h = oracle_hitting(r, subset);
  const std::vector<int> members = subset.indices();
  const int m = static_cast<int>(members.size());
  Matrix out = Matrix::Zero(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      double v = r(members[a], members[b]);
      for (int k = 0; k < n; ++k) {
        if (!subset.contains(k)) v += r(members[a], k) * h(k, members[b]);
      }
      out(a, b) = v;
    }
  }
  return out;
}

}  // namespace zrpfluid::testing
