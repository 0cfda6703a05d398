#include "zrpfluid/markov_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace zrpfluid {

namespace {

// Below this reciprocal condition number a dense solve is reported as
// singular rather than returned.
constexpr double kMinRcond = 1e-13;

std::string join_labels(const std::vector<std::string>& labels, SiteSet s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int i : s.indices()) {
    if (!first) os << ',';
    os << labels[i];
    first = false;
  }
  os << '}';
  return os.str();
}

SiteSet reachable_from(const Matrix& rates, int start, bool forward) {
  const auto n = rates.rows();
  SiteSet seen;
  seen.insert(start);
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      const double w = forward ? rates(i, j) : rates(j, i);
      if (w > 0.0 && !seen.contains(j)) {
        seen.insert(j);
        stack.push_back(j);
      }
    }
  }
  return seen;
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySiteSet: return "EmptySiteSet";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::NonZeroDiagonal: return "NonZeroDiagonal";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::TooManySites: return "TooManySites";
    case ErrorCode::UnknownSite: return "UnknownSite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::NonTermination: return "NonTermination";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::DriftNotBalanced: return "DriftNotBalanced";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::ConsistencyFailure: return "ConsistencyFailure";
  }
  return "Unknown";
}

std::vector<int> SiteSet::indices() const {
  std::vector<int> out;
  out.reserve(size());
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(__builtin_ctzll(b));
  }
  return out;
}

SiteSet localize(SiteSet subset, SiteSet within) {
  SiteSet out;
  int local = 0;
  for (int i : within.indices()) {
    if (subset.contains(i)) out.insert(local);
    ++local;
  }
  return out;
}

std::optional<std::pair<int, int>> find_unreachable_pair(const Matrix& rates) {
  const int n = static_cast<int>(rates.rows());
  if (n == 0) return std::nullopt;
  const SiteSet all = SiteSet::full(n);
  const SiteSet fwd = reachable_from(rates, 0, true);
  if (fwd != all) return std::pair{0, all.minus(fwd).indices().front()};
  const SiteSet bwd = reachable_from(rates, 0, false);
  if (bwd != all) return std::pair{all.minus(bwd).indices().front(), 0};
  return std::nullopt;
}

RateMatrix::RateMatrix(Matrix rates, std::vector<std::string> labels)
    : rates_(std::move(rates)), labels_(std::move(labels)) {
  exit_rates_ = rates_.rowwise().sum();
  scale_ = rates_.maxCoeff();
}

RateMatrix RateMatrix::validate(const Matrix& raw, std::vector<std::string> labels) {
  if (raw.rows() == 0 || raw.cols() == 0) {
    throw Error(ErrorCode::EmptySiteSet, "rate matrix has no sites");
  }
  if (raw.rows() != raw.cols()) {
    std::ostringstream os;
    os << "rate matrix is " << raw.rows() << "x" << raw.cols() << ", not square";
    throw Error(ErrorCode::NotSquare, os.str());
  }
  const int n = static_cast<int>(raw.rows());
  if (static_cast<std::size_t>(n) > kMaxSites) {
    throw Error(ErrorCode::TooManySites,
                "at most " + std::to_string(kMaxSites) + " sites are supported");
  }
  if (labels.empty()) {
    for (int i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::NotSquare, "label count does not match matrix size");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = raw(i, j);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "rate (" << labels[i] << "," << labels[j] << ") = " << v
           << " is not a finite nonnegative number";
        throw Error(ErrorCode::NegativeRate, os.str());
      }
    }
    if (raw(i, i) != 0.0) {
      throw Error(ErrorCode::NonZeroDiagonal,
                  "NonZeroDiagonal at sites[" + std::to_string(i) + "] (" + labels[i] + ")");
    }
  }
  if (auto pair = find_unreachable_pair(raw)) {
    const auto [from, to] = *pair;
    const SiteSet reach = reachable_from(raw, from, true);
    std::ostringstream os;
    os << "NotIrreducible: " << labels[to] << " is unreachable from " << labels[from]
       << "; partition " << join_labels(labels, reach) << " | "
       << join_labels(labels, reach.complement(n));
    throw Error(ErrorCode::NotIrreducible, os.str());
  }
  return RateMatrix(raw, std::move(labels));
}

RateMatrix RateMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                 std::vector<std::string> labels) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n) {
      throw Error(ErrorCode::NotSquare, "row " + std::to_string(i) + " has wrong length");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return validate(m, std::move(labels));
}

std::optional<int> RateMatrix::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<int>(it - labels_.begin());
}

Matrix embedded_probabilities(const RateMatrix& r) {
  // A single-site matrix is the only valid one with a zero exit rate.
  if (r.size() == 1) return Matrix::Zero(1, 1);
  return r.exit_rates().cwiseInverse().asDiagonal() * r.rates();
}

Vector invariant_distribution(const RateMatrix& r) {
  const auto n = static_cast<Eigen::Index>(r.size());
  // Transposed generator with the last balance equation replaced by sum(mu) = 1.
  Matrix system = r.rates().transpose();
  system.diagonal() -= r.exit_rates();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;

  Eigen::PartialPivLU<Matrix> lu(system);
  if (lu.rcond() < kMinRcond) {
    throw Error(ErrorCode::SingularSolve, "invariant distribution system is singular");
  }
  Vector mu = lu.solve(rhs);
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

double HittingProbabilityMatrix::at(int from, int site) const {
  auto it = std::find(columns.begin(), columns.end(), site);
  if (it == columns.end()) {
    throw Error(ErrorCode::UnknownSite, "site is not in the target set");
  }
  return probs(from, it - columns.begin());
}

HittingProbabilityMatrix hitting_probabilities(const RateMatrix& r, SiteSet target) {
  const int n = static_cast<int>(r.size());
  if (target.empty()) throw Error(ErrorCode::EmptySiteSet, "target set is empty");
  if (!target.is_subset_of(SiteSet::full(n))) {
    throw Error(ErrorCode::UnknownSite, "target set is not a subset of the sites");
  }

  HittingProbabilityMatrix out;
  out.target = target;
  out.columns = target.indices();
  const auto m = static_cast<Eigen::Index>(out.columns.size());
  out.probs = Matrix::Zero(n, m);
  for (Eigen::Index c = 0; c < m; ++c) out.probs(out.columns[c], c) = 1.0;

  const std::vector<int> outside = target.complement(n).indices();
  if (outside.empty()) return out;

  // Harmonic off the target: r(k) h(k) - sum_{m outside} r(k,m) h(m) = r(k, target column).
  const auto q = static_cast<Eigen::Index>(outside.size());
  Matrix system(q, q);
  Matrix rhs(q, m);
  for (Eigen::Index a = 0; a < q; ++a) {
    const int k = outside[a];
    for (Eigen::Index b = 0; b < q; ++b) system(a, b) = -r(k, outside[b]);
    system(a, a) += r.exit_rate(k);
    for (Eigen::Index c = 0; c < m; ++c) rhs(a, c) = r(k, out.columns[c]);
  }
  Eigen::PartialPivLU<Matrix> lu(system);
  if (lu.rcond() < kMinRcond) {
    throw Error(ErrorCode::SingularSolve, "hitting probability system is singular");
  }
  // Rounding can leave entries a few ulps outside [0, 1].
  const Matrix h = lu.solve(rhs).cwiseMax(0.0).cwiseMin(1.0);
  for (Eigen::Index a = 0; a < q; ++a) out.probs.row(outside[a]) = h.row(a);
  return out;
}

RateMatrix trace_rates(const RateMatrix& r, SiteSet subset) {
  const int n = static_cast<int>(r.size());
  if (subset.empty()) throw Error(ErrorCode::EmptySiteSet, "trace on an empty set");
  if (subset == SiteSet::full(n)) return r;

  const auto hit = hitting_probabilities(r, subset);
  const std::vector<int>& members = hit.columns;
  const std::vector<int> outside = subset.complement(n).indices();
  const auto m = static_cast<Eigen::Index>(members.size());
  Matrix tr = Matrix::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int i = members[a];
    for (Eigen::Index b = 0; b < m; ++b) {
      if (a == b) continue;
      double v = r(i, members[b]);
      for (int k : outside) v += r(i, k) * hit.probs(k, b);
      tr(a, b) = v;
    }
  }
  return RateMatrix::validate(tr, labels_of(r, subset));
}

RateMatrix trace_rates_recursive(const RateMatrix& r, SiteSet subset,
                                 std::span<const int> removal_order) {
  const int n = static_cast<int>(r.size());
  if (subset.empty()) throw Error(ErrorCode::EmptySiteSet, "trace on an empty set");
  const SiteSet outside = subset.complement(n);

  std::vector<int> order(removal_order.begin(), removal_order.end());
  if (order.empty()) order = outside.indices();
  SiteSet listed;
  for (int k : order) {
    if (k < 0 || k >= n || !outside.contains(k) || listed.contains(k)) {
      throw Error(ErrorCode::InvalidArgument, "removal order must list V \\ A exactly once");
    }
    listed.insert(k);
  }
  if (listed != outside) {
    throw Error(ErrorCode::InvalidArgument, "removal order must list V \\ A exactly once");
  }

  Matrix w = r.rates();
  SiteSet active = SiteSet::full(n);
  for (int k : order) {
    active.erase(k);
    double exit_k = 0.0;
    for (int j : active.indices()) exit_k += w(k, j);
    // Every excursion through k re-enters the active set; loops back to the
    // source are dropped since the trace has no self-rates.
    for (int i : active.indices()) {
      if (w(i, k) == 0.0) continue;
      for (int j : active.indices()) {
        if (j != i) w(i, j) += w(i, k) * w(k, j) / exit_k;
      }
    }
  }

  const std::vector<int> members = subset.indices();
  const auto m = static_cast<Eigen::Index>(members.size());
  Matrix tr(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      tr(a, b) = a == b ? 0.0 : w(members[a], members[b]);
    }
  }
  return RateMatrix::validate(tr, labels_of(r, subset));
}

Vector net_flow_of(const RateMatrix& r) {
  return r.rates().colwise().sum().transpose() - r.exit_rates();
}

FlowVector net_flow(const RateMatrix& r, SiteSet subset) {
  const RateMatrix tr = trace_rates(r, subset);
  const Vector local = net_flow_of(tr);
  FlowVector out{subset, Vector::Zero(static_cast<Eigen::Index>(r.size()))};
  const std::vector<int> members = subset.indices();
  for (std::size_t a = 0; a < members.size(); ++a) out.values[members[a]] = local[a];
  return out;
}

std::vector<std::string> labels_of(const RateMatrix& r, SiteSet s) {
  std::vector<std::string> out;
  for (int i : s.indices()) out.push_back(r.labels()[i]);
  return out;
}

}  // namespace zrpfluid
