#pragma once

// Finite-state rate matrices: validation, embedded chain, invariant law,
// hitting probabilities, traces on subsets and their net flows.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace zrpfluid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Classification tolerance, applied on the scale where max r(i,j) = 1.
inline constexpr double kDefaultTolerance = 1e-9;

/// Largest site set representable by SiteSet.
inline constexpr std::size_t kMaxSites = 64;

enum class ErrorCode {
  EmptySiteSet,
  NotSquare,
  NegativeRate,
  NonZeroDiagonal,
  NotIrreducible,
  TooManySites,
  UnknownSite,
  InvalidArgument,
  SingularSolve,
  NonTermination,
  NotStochastic,
  DriftNotBalanced,
  HorizonExceeded,
  ConsistencyFailure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Subset of {0, ..., n-1} for n <= 64, stored as a bitmask.
class SiteSet {
 public:
  constexpr SiteSet() = default;
  constexpr explicit SiteSet(std::uint64_t bits) : bits_(bits) {}

  static SiteSet full(std::size_t n) {
    return SiteSet(n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
  }
  static SiteSet of(std::initializer_list<int> sites) {
    SiteSet s;
    for (int i : sites) s.insert(i);
    return s;
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool contains(int i) const { return (bits_ >> i) & 1U; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const { return __builtin_popcountll(bits_); }

  void insert(int i) { bits_ |= std::uint64_t{1} << i; }
  void erase(int i) { bits_ &= ~(std::uint64_t{1} << i); }
  SiteSet with(int i) const { SiteSet s = *this; s.insert(i); return s; }
  SiteSet without(int i) const { SiteSet s = *this; s.erase(i); return s; }

  bool is_subset_of(SiteSet other) const { return (bits_ & ~other.bits_) == 0; }
  SiteSet operator&(SiteSet o) const { return SiteSet(bits_ & o.bits_); }
  SiteSet operator|(SiteSet o) const { return SiteSet(bits_ | o.bits_); }
  SiteSet minus(SiteSet o) const { return SiteSet(bits_ & ~o.bits_); }
  SiteSet complement(std::size_t n) const { return full(n).minus(*this); }

  /// Members in ascending order.
  std::vector<int> indices() const;

  friend bool operator==(SiteSet, SiteSet) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Irreducible transition rates on a finite labelled site set.
///
/// Instances only exist in validated form: zero diagonal, nonnegative
/// entries, strongly connected support graph.
class RateMatrix {
 public:
  /// Throws Error with EmptySiteSet, NotSquare, NegativeRate,
  /// NonZeroDiagonal or NotIrreducible. Labels default to "0", "1", ...
  static RateMatrix validate(const Matrix& raw,
                             std::vector<std::string> labels = {});
  static RateMatrix from_rows(const std::vector<std::vector<double>>& rows,
                              std::vector<std::string> labels = {});

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Matrix& rates() const { return rates_; }
  double operator()(int i, int j) const { return rates_(i, j); }
  double exit_rate(int i) const { return exit_rates_[i]; }
  const Vector& exit_rates() const { return exit_rates_; }

  /// max_{i,j} r(i,j); multiplies tolerances for flow comparisons.
  double scale() const { return scale_; }

  std::optional<int> index_of(const std::string& label) const;

 private:
  RateMatrix(Matrix rates, std::vector<std::string> labels);

  Matrix rates_;
  Vector exit_rates_;
  std::vector<std::string> labels_;
  double scale_ = 0.0;
};

/// Strongly-connected check on the support digraph of `rates`.
/// Returns an unreachable pair (from, to) when not strongly connected.
std::optional<std::pair<int, int>> find_unreachable_pair(const Matrix& rates);

/// p(i,j) = r(i,j) / r(i).
Matrix embedded_probabilities(const RateMatrix& r);

/// Stationary law of the continuous-time walk; throws SingularSolve when
/// the bordered system is numerically rank deficient.
Vector invariant_distribution(const RateMatrix& r);

/// probs(k, c) = P(walk from k enters `target` first at the c-th member of
/// target.indices()).
struct HittingProbabilityMatrix {
  SiteSet target;
  std::vector<int> columns;  // target.indices()
  Matrix probs;              // |V| x |target|

  double at(int from, int site) const;
};

HittingProbabilityMatrix hitting_probabilities(const RateMatrix& r, SiteSet target);

/// Trace of r on A via hitting probabilities of A from V \ A.
RateMatrix trace_rates(const RateMatrix& r, SiteSet subset);

/// Trace of r on A by eliminating the sites of V \ A one at a time.
/// `removal_order` defaults to ascending index; it must list V \ A exactly.
RateMatrix trace_rates_recursive(const RateMatrix& r, SiteSet subset,
                                 std::span<const int> removal_order = {});

/// Net flow lambda^A, stored over all of V with zeros outside `carrier`.
struct FlowVector {
  SiteSet carrier;
  Vector values;

  double operator()(int i) const { return values[i]; }
  bool is_null(double tol) const { return values.cwiseAbs().maxCoeff() <= tol; }
};

/// lambda(i) = sum_j [r(j,i) - r(i,j)] for the whole matrix r.
Vector net_flow_of(const RateMatrix& r);

FlowVector net_flow(const RateMatrix& r, SiteSet subset);

/// Re-indexes `subset` (given in V indices) to the local indices of `within`,
/// i.e. to the site numbering of trace_rates(r, within).
SiteSet localize(SiteSet subset, SiteSet within);

/// Labels of the members of `s`, in ascending index order.
std::vector<std::string> labels_of(const RateMatrix& r, SiteSet s);

}  // namespace zrpfluid
