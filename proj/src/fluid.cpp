#include "zrpfluid/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace zrpfluid {

namespace {

constexpr double kSumTolerance = 1e-6;

// Sum_i rho(i) w_i with w_i = e_i - p(i, .).
Vector push_direction(const Matrix& p, const Vector& rho) {
  Vector out = Vector::Zero(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (rho[i] == 0.0) continue;
    out[i] += rho[i];
    out -= rho[i] * p.row(i).transpose();
  }
  return out;
}

std::size_t segment_at(const PiecewiseLinearPath& path, double t) {
  const auto& bps = path.breakpoints;
  auto it = std::upper_bound(bps.begin(), bps.end(), t,
                             [](double x, const PathBreakpoint& b) { return x < b.time; });
  return it == bps.begin() ? 0 : static_cast<std::size_t>(it - bps.begin()) - 1;
}

}  // namespace

SimplexPoint SimplexPoint::make(Vector values, double tol) {
  if (values.size() == 0) throw Error(ErrorCode::EmptySiteSet, "simplex point has no coordinates");
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < -tol) {
      std::ostringstream os;
      os << "coordinate " << i << " = " << values[i] << " is negative";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
  values = values.cwiseMax(0.0);
  const double sum = values.sum();
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os << "coordinates sum to " << sum << ", not 1";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  return SimplexPoint(values / sum);
}

SimplexPoint SimplexPoint::vertex(std::size_t n, int site) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v[site] = 1.0;
  return SimplexPoint(std::move(v));
}

SiteSet SimplexPoint::support(double tol) const {
  SiteSet s;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (values_[i] > tol) s.insert(static_cast<int>(i));
  }
  return s;
}

FlowVector velocity(const RateMatrix& r, const SimplexPoint& u, double tol) {
  const SiteSet closure = minimal_absorbing(r, u.support(tol), tol).result;
  return net_flow(r, closure);
}

std::optional<double> exit_time(const SimplexPoint& u, const FlowVector& lam, double flow_tol) {
  std::optional<double> best;
  for (Eigen::Index i = 0; i < lam.values.size(); ++i) {
    if (u(static_cast<int>(i)) <= 0.0 || lam.values[i] >= -flow_tol) continue;
    const double t = -u(static_cast<int>(i)) / lam.values[i];
    if (!best || t < *best) best = t;
  }
  return best;
}

PiecewiseLinearPath fluid_trajectory(const RateMatrix& r, const SimplexPoint& u, double tol) {
  if (u.size() != r.size()) {
    throw Error(ErrorCode::InvalidArgument, "initial point has the wrong dimension");
  }
  const double flow_tol = tol * r.scale();
  PiecewiseLinearPath path;
  SimplexPoint point = u;
  double time = 0.0;
  while (true) {
    const SiteSet closure = minimal_absorbing(r, point.support(tol), tol).result;
    FlowVector lam = net_flow(r, closure);
    const std::optional<double> dt = exit_time(point, lam, flow_tol);
    if (!dt) lam.values.setZero();
    path.breakpoints.push_back({time, point, closure, lam});
    if (!dt) break;
    if (path.breakpoints.size() >= r.size()) {
      throw Error(ErrorCode::NonTermination,
                  "fluid path exceeded |V| breakpoints; tolerance is likely misconfigured");
    }
    // Every coordinate driven to (or within tol of) zero is clamped, so
    // simultaneous hits leave the support together.
    Vector next = point.values() + *dt * lam.values;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      if (next[i] <= tol) next[i] = 0.0;
    }
    point = SimplexPoint::make(std::move(next), tol);
    time += *dt;
  }
  return path;
}

SimplexPoint evaluate_path(const PiecewiseLinearPath& path, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "path time must be nonnegative");
  const std::size_t k = segment_at(path, t);
  const PathBreakpoint& b = path.breakpoints[k];
  if (k == path.terminal_index()) return b.point;
  Vector v = b.point.values() + (t - b.time) * b.velocity.values;
  return SimplexPoint::make(v.cwiseMax(0.0));
}

Vector RegulatorPath::evaluate(double t) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double x, const RegulatorSegment& s) { return x < s.start; });
  const RegulatorSegment& seg = it == segments.begin() ? segments.front() : *std::prev(it);
  return seg.level + std::max(0.0, t - seg.start) * seg.slope;
}

RegulatorPath regulator_path(const RateMatrix& r, const PiecewiseLinearPath& path) {
  const auto n = static_cast<Eigen::Index>(r.size());
  const Matrix p = embedded_probabilities(r);
  const Vector lambda = net_flow_of(r);

  RegulatorPath out;
  Vector level = Vector::Zero(n);
  for (std::size_t k = 0; k < path.breakpoints.size(); ++k) {
    const PathBreakpoint& b = path.breakpoints[k];
    const std::vector<int> outside = b.point.support().complement(r.size()).indices();
    Vector slope = Vector::Zero(n);
    if (!outside.empty()) {
      const auto q = static_cast<Eigen::Index>(outside.size());
      Matrix block(q, q);
      Vector rhs(q);
      for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index c = 0; c < q; ++c) {
          block(a, c) = (a == c ? 1.0 : 0.0) - p(outside[c], outside[a]);
        }
        rhs[a] = b.velocity(outside[a]) - lambda[outside[a]];
      }
      Eigen::PartialPivLU<Matrix> lu(block);
      if (lu.rcond() < 1e-13) {
        throw Error(ErrorCode::SingularSolve, "reflection block (I - p^T) is singular");
      }
      const Vector y = lu.solve(rhs);
      for (Eigen::Index a = 0; a < q; ++a) slope[outside[a]] = y[a];
    }
    out.segments.push_back({b.time, level, slope});
    if (k + 1 < path.breakpoints.size()) {
      level = level + (path.breakpoints[k + 1].time - b.time) * slope;
    }
  }
  return out;
}

OrpReport verify_orp(const PiecewiseLinearPath& path, const RegulatorPath& regulator,
                     const RateMatrix& r, const SimplexPoint& u, double tol) {
  OrpReport report;
  if (regulator.segments.size() != path.breakpoints.size()) {
    report.passed = false;
    report.violations.push_back("regulator breakpoints are not aligned with the path");
    return report;
  }
  const Matrix p = embedded_probabilities(r);
  const Vector lambda = net_flow_of(r);
  const double slope_tol = tol * std::max(1.0, r.scale());

  auto fail = [&](std::string what) {
    report.passed = false;
    if (report.violations.size() < 32) report.violations.push_back(std::move(what));
  };

  // Sample times: every breakpoint and midpoint, plus two times on the
  // terminal ray.
  std::vector<double> times;
  const auto& bps = path.breakpoints;
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
    times.push_back(bps[k].time);
    times.push_back(0.5 * (bps[k].time + bps[k + 1].time));
  }
  const double tf = path.terminal_time();
  const double tail = std::max(1.0, tf);
  times.push_back(tf);
  times.push_back(tf + 0.5 * tail);
  times.push_back(tf + tail);

  Vector previous_rho;
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double t = times[m];
    const Vector zeta = evaluate_path(path, t).values();
    const Vector rho = regulator.evaluate(t);
    const Vector xi = u.values() + t * lambda;
    const double residual = (zeta - xi - push_direction(p, rho)).cwiseAbs().maxCoeff();
    report.max_residual = std::max(report.max_residual, residual);
    report.min_coordinate = std::min(report.min_coordinate, zeta.minCoeff());
    ++report.checked_times;
    if (residual > tol) {
      std::ostringstream os;
      os << "(ii) reconstruction residual " << residual << " at t=" << t;
      fail(os.str());
    }
    if (zeta.minCoeff() < -tol) {
      std::ostringstream os;
      os << "(ii) zeta leaves the orthant at t=" << t;
      fail(os.str());
    }
    if (m > 0) {
      const double inc = (rho - previous_rho).minCoeff();
      report.min_increment = std::min(report.min_increment, inc);
      if (inc < -slope_tol) {
        std::ostringstream os;
        os << "(i) rho decreases by " << -inc << " before t=" << t;
        fail(os.str());
      }
    }
    previous_rho = rho;
  }

  // Complementarity: a coordinate of rho may only grow on a segment along
  // which the matching coordinate of zeta stays at zero.
  for (std::size_t k = 0; k < regulator.segments.size(); ++k) {
    const RegulatorSegment& seg = regulator.segments[k];
    const double end = k + 1 < bps.size() ? bps[k + 1].time : seg.start + tail;
    const Vector probes[3] = {evaluate_path(path, seg.start).values(),
                              evaluate_path(path, 0.5 * (seg.start + end)).values(),
                              evaluate_path(path, end).values()};
    for (Eigen::Index i = 0; i < seg.slope.size(); ++i) {
      if (seg.slope[i] < -slope_tol) {
        std::ostringstream os;
        os << "(i) rho(" << i << ") has negative slope " << seg.slope[i] << " on segment " << k;
        fail(os.str());
      }
      if (seg.slope[i] <= slope_tol) continue;
      for (const Vector& z : probes) {
        report.max_complementarity = std::max(report.max_complementarity, z[i]);
        if (z[i] > tol) {
          std::ostringstream os;
          os << "(i) rho(" << i << ") grows on segment " << k << " while zeta(" << i
             << ") = " << z[i];
          fail(os.str());
          break;
        }
      }
    }
  }
  return report;
}

RecoveredRates rates_from_probabilities(const Matrix& p, const Vector& lam, double tol) {
  const auto n = p.rows();
  if (n == 0 || p.cols() != n || lam.size() != n) {
    throw Error(ErrorCode::NotStochastic, "transition matrix must be square and match the drift");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.row(i).minCoeff() < 0.0 || std::abs(p.row(i).sum() - 1.0) > tol || p(i, i) != 0.0) {
      throw Error(ErrorCode::NotStochastic,
                  "row " + std::to_string(i) + " is not a zero-diagonal probability vector");
    }
  }
  std::optional<RateMatrix> as_rates;
  try {
    as_rates = RateMatrix::validate(p);
  } catch (const Error& e) {
    throw Error(ErrorCode::NotStochastic, std::string("transition matrix: ") + e.what());
  }
  if (std::abs(lam.sum()) > tol) {
    throw Error(ErrorCode::DriftNotBalanced, "drift components do not sum to zero");
  }

  // -lam = sum_i a_i w_i = (I - p^T) a; the kernel is spanned by mu_p.
  const Vector mu = invariant_distribution(*as_rates);
  const Matrix reflection = Matrix::Identity(n, n) - p.transpose();
  const Vector a = reflection.completeOrthogonalDecomposition().solve(-lam);

  double shift = 0.0;
  while ((a + shift * mu).minCoeff() < kMinRecoveredRate) {
    shift = shift == 0.0 ? 1.0 : 2.0 * shift;
    if (!std::isfinite(shift) || shift > 1e300) {
      throw Error(ErrorCode::SingularSolve, "no finite shift makes the recovered rates positive");
    }
  }
  const Vector exit_rates = a + shift * mu;
  const Vector residual = push_direction(p, exit_rates) + lam;
  return RecoveredRates{exit_rates, shift, residual.cwiseAbs().maxCoeff(),
                        RateMatrix::validate(exit_rates.asDiagonal() * p)};
}

}  // namespace zrpfluid
