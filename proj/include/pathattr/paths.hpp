#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pathattr/common.hpp"
#include "pathattr/model.hpp"

namespace pathattr {

enum class PathKind { StraightLine, SerialCostSharing, AxisPermutation, PiecewiseLinear };

// A piecewise-linear curve from a reference point (alpha = 0) to an
// explanation point (alpha = 1). Immutable value object.
//
// Parametrization:
//   StraightLine       x(a) = start + a * (end - start)
//   SerialCostSharing  every coordinate advances toward its end value at the
//                      same absolute rate and stops on arrival; the rate is
//                      chosen so the last coordinate arrives at a = 1
//   AxisPermutation    n equal alpha-intervals, one per feature in `order`,
//                      each moving only that feature (zero-length segments
//                      for features that do not move still get their share)
//   PiecewiseLinear    explicit waypoints, equal alpha-interval per segment
class Path {
 public:
  static Path straight_line(std::vector<double> start, std::vector<double> end);
  static Path serial_cost_sharing(std::vector<double> start, std::vector<double> end);
  static Path axis_permutation(std::vector<double> start, std::vector<double> end,
                               std::vector<int> order);
  // waypoints.front() is the start, waypoints.back() the end
  static Path piecewise_linear(std::vector<std::vector<double>> waypoints);

  PathKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(start_.size()); }
  const std::vector<double>& start() const { return start_; }
  const std::vector<double>& end() const { return end_; }
  const std::vector<int>& order() const { return order_; }

  // Point on the path; alpha outside [0, 1] raises InputError. Endpoints are
  // returned exactly.
  std::vector<double> point_at(double alpha) const;

  // The path's image as an ordered vertex list (corner points included, no
  // consecutive duplicates beyond genuinely zero-length segments).
  std::vector<std::vector<double>> polyline() const;

 private:
  Path(PathKind kind, std::vector<double> start, std::vector<double> end)
      : kind_(kind), start_(std::move(start)), end_(std::move(end)) {}

  PathKind kind_;
  std::vector<double> start_;
  std::vector<double> end_;
  std::vector<int> order_;                       // AxisPermutation
  std::vector<std::vector<double>> waypoints_;   // PiecewiseLinear
};

// ============================================================================
// Feature subsets and the interventional lift
// ============================================================================

// The set S of "present" features (bitmask; supports up to 63 features).
struct FeatureSubset {
  uint64_t bits = 0;

  static FeatureSubset none() { return {}; }
  static FeatureSubset all(int n) {
    return FeatureSubset{n >= 64 ? ~0ULL : ((1ULL << n) - 1)};
  }
  static FeatureSubset of(std::initializer_list<int> features) {
    FeatureSubset s;
    for (int f : features) s.add(f);
    return s;
  }

  bool contains(int i) const { return (bits >> i) & 1ULL; }
  void add(int i) { bits |= (1ULL << i); }
  int count() const { return __builtin_popcountll(bits); }
};

// Interventional lift: features in S keep their value from x, the rest are
// replaced by the reference's value.
std::vector<double> masked_point(std::span<const double> x, std::span<const double> ref,
                                 FeatureSubset s);

// ============================================================================
// Per-feature monotone reparametrization (for invariance tests)
// ============================================================================

struct FeatureTransform {
  std::function<double(double)> forward;        // g
  std::function<double(double)> inverse;        // g^-1
  std::function<double(double)> inverse_deriv;  // d(g^-1)/du
};

// The original attribution problem expressed in the transformed coordinate:
// points have x_i replaced by g(x_i) and the model becomes f with g^-1
// applied to feature i, so every score is preserved.
class TransformedProblem {
 public:
  TransformedProblem(Model base, int feature, FeatureTransform transform,
                     std::vector<double> ref, std::vector<double> expl);

  const std::vector<double>& ref() const { return ref_; }
  const std::vector<double>& expl() const { return expl_; }
  int n_features() const { return base_.n_features(); }

  double eval(std::span<const double> x) const;
  // chain rule; requires the base model to be analytic
  std::vector<double> grad(std::span<const double> x) const;

 private:
  std::vector<double> pull_back(std::span<const double> x) const;

  Model base_;
  int feature_;
  FeatureTransform transform_;
  std::vector<double> ref_;
  std::vector<double> expl_;
};

// Builds the transformed problem for feature `i`. The map is checked for
// strict monotonicity (and inverse consistency) on a sampled probe over the
// range spanned by the two points; failures raise InputError.
TransformedProblem transform_feature(const Model& base, std::span<const double> ref,
                                     std::span<const double> expl, int feature,
                                     FeatureTransform transform);

}  // namespace pathattr
