#include "zrpfluid/absorbing.hpp"

#include <algorithm>
#include <thread>

namespace zrpfluid {

AbsorbingReport is_r_absorbing(const RateMatrix& r, SiteSet subset, double tol) {
  const auto n = r.size();
  if (!subset.is_subset_of(SiteSet::full(n))) {
    throw Error(ErrorCode::UnknownSite, "subset is not contained in the site set");
  }
  AbsorbingReport report{subset, true, {}};
  if (subset.empty()) return report;

  const double threshold = tol * r.scale();
  for (int j : subset.complement(n).indices()) {
    const double flow = net_flow(r, subset.with(j))(j);
    report.witnesses.push_back({j, flow});
    if (flow > threshold) report.absorbing = false;
  }
  return report;
}

MinimalAbsorbingTrace minimal_absorbing(const RateMatrix& r, SiteSet seed, double tol) {
  const auto n = r.size();
  if (seed.empty()) {
    throw Error(ErrorCode::EmptySiteSet, "minimal absorbing set of the empty set is not defined");
  }
  if (!seed.is_subset_of(SiteSet::full(n))) {
    throw Error(ErrorCode::UnknownSite, "seed set is not contained in the site set");
  }

  const double threshold = tol * r.scale();
  MinimalAbsorbingTrace trace{seed, {}, {}};
  SiteSet current = SiteSet::full(n);
  while (true) {
    FlowVector flow = net_flow(r, current);
    SiteSet removed;
    for (int i : current.minus(seed).indices()) {
      if (flow(i) <= threshold) removed.insert(i);
    }
    trace.iterations.push_back({current, std::move(flow), removed});
    if (removed.empty()) break;
    current = current.minus(removed);
  }
  trace.result = current;
  return trace;
}

SiteSet bottleneck_set(const RateMatrix& r, double tol) {
  const Vector mu = invariant_distribution(r);
  const double top = mu.maxCoeff();
  SiteSet out;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu[i] >= top - tol) out.insert(static_cast<int>(i));
  }
  return out;
}

std::vector<SiteSet> enumerate_absorbing(const RateMatrix& r, double tol) {
  const auto n = r.size();
  if (n > kMaxEnumerationSites) {
    throw Error(ErrorCode::TooManySites,
                "enumeration supports at most " + std::to_string(kMaxEnumerationSites) +
                    " sites, got " + std::to_string(n));
  }
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<char> flags(count, 0);

  auto scan = [&](std::uint64_t first, std::uint64_t stride) {
    for (std::uint64_t bits = first; bits < count; bits += stride) {
      if (bits == 0) continue;
      flags[bits] = is_r_absorbing(r, SiteSet(bits), tol).absorbing ? 1 : 0;
    }
  };
  const unsigned workers =
      count < 256 ? 1U : std::max(1U, std::min(8U, std::thread::hardware_concurrency()));
  if (workers == 1) {
    scan(1, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(scan, w, workers);
  }

  std::vector<SiteSet> out;
  for (std::uint64_t bits = 1; bits < count; ++bits) {
    if (flags[bits]) out.emplace_back(bits);
  }
  return out;
}

}  // namespace zrpfluid
