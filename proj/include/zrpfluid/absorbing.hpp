#pragma once

// r-absorbing subsets, minimal absorbing supersets and bottlenecks.

#include <vector>

#include "zrpfluid/markov_core.hpp"

namespace zrpfluid {

struct AbsorbingWitness {
  int site;     // j outside the subset
  double flow;  // lambda^{A u {j}}(j)
};

struct AbsorbingReport {
  SiteSet subset;
  bool absorbing = false;
  std::vector<AbsorbingWitness> witnesses;
};

/// A is r-absorbing when A = V or every outside site j has
/// lambda^{A u {j}}(j) <= tol * r.scale(). The empty set is absorbing.
AbsorbingReport is_r_absorbing(const RateMatrix& r, SiteSet subset,
                               double tol = kDefaultTolerance);

struct AbsorbingIteration {
  SiteSet current;
  FlowVector flow;  // lambda^{current}
  SiteSet removed;
};

struct MinimalAbsorbingTrace {
  SiteSet input;
  std::vector<AbsorbingIteration> iterations;
  SiteSet result;
};

/// Shrinks A_1 = V by discarding the sites of A_k \ S with
/// lambda^{A_k} <= tol until none remain. Throws EmptySiteSet for S = {}.
MinimalAbsorbingTrace minimal_absorbing(const RateMatrix& r, SiteSet seed,
                                        double tol = kDefaultTolerance);

/// Sites whose invariant mass is within tol of the maximum.
SiteSet bottleneck_set(const RateMatrix& r, double tol = kDefaultTolerance);

inline constexpr std::size_t kMaxEnumerationSites = 12;

/// Every nonempty r-absorbing subset, in increasing bitmask order.
/// Throws TooManySites above kMaxEnumerationSites.
std::vector<SiteSet> enumerate_absorbing(const RateMatrix& r,
                                         double tol = kDefaultTolerance);

}  // namespace zrpfluid
