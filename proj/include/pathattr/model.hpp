#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pathattr/common.hpp"
#include "pathattr/polynomial.hpp"

namespace pathattr {

// ============================================================================
// Decision trees (parallel-array encoding)
// ============================================================================

enum class Link { Identity, Logistic };
enum class Aggregation { Sum, Mean };

inline double apply_link(Link link, double margin) {
  if (link == Link::Identity) return margin;
  // numerically stable logistic
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

// Binary decision tree stored as parallel arrays, topologically ordered
// (children always come after their parent). Leaf sentinel: left == right == -1.
// Routing rule: x[feature] < threshold goes left, equality goes right.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<double> value;
  std::vector<int> left;
  std::vector<int> right;

  int node_count() const { return static_cast<int>(feature.size()); }
  bool is_leaf(int node) const { return left[node] == right[node]; }

  double eval(std::span<const double> x) const {
    int node = 0;
    while (left[node] != right[node]) {
      node = x[feature[node]] < threshold[node] ? left[node] : right[node];
    }
    return value[node];
  }

  int depth() const;
  int leaf_count() const;

  // Throws SchemaError (with `where` as the path prefix) on any structural
  // violation: bad sentinel, child index out of range or not strictly greater
  // than the parent, feature index out of range, non-finite threshold.
  void validate(int n_features, const std::string& where) const;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  int n_features = 0;
  Link link = Link::Identity;
  Aggregation aggregation = Aggregation::Sum;

  // Aggregated value in margin space (pre-link). Trees are summed in index
  // order; Mean divides by the tree count once at the end.
  double margin(std::span<const double> x) const {
    double acc = 0.0;
    for (const Tree& t : trees) acc += t.eval(x);
    if (aggregation == Aggregation::Mean && !trees.empty()) {
      acc /= static_cast<double>(trees.size());
    }
    return acc;
  }

  double aggregate_margin(double tree_value_sum) const {
    if (aggregation == Aggregation::Mean && !trees.empty()) {
      return tree_value_sum / static_cast<double>(trees.size());
    }
    return tree_value_sum;
  }

  double eval(std::span<const double> x) const { return apply_link(link, margin(x)); }

  void validate() const;
};

// ============================================================================
// Closed-form models with exact gradients
// ============================================================================

class AnalyticModel {
 public:
  struct Linear {
    std::vector<double> weights;
    double bias = 0.0;
  };
  // f(x) = sum_i terms[i](x_i)
  struct Separable {
    std::vector<Polynomial> terms;
  };
  // f(x) = sum_ij m[i*n+j] * x_i * x_j
  struct Bilinear {
    int n = 0;
    std::vector<double> m;  // row-major n x n
    double at(int i, int j) const { return m[static_cast<size_t>(i) * n + j]; }
  };
  // f(x1, x2) = 1/2 + 1/2 * tanh((x2 - centerline(x1)) / delta)
  struct TanhField {
    double delta = 0.125;
    Polynomial centerline;
  };
  struct Combination {
    std::vector<double> coeffs;
    std::vector<AnalyticModel> parts;
  };

  using Spec = std::variant<Linear, Separable, Bilinear, TanhField, Combination>;

  static AnalyticModel linear(std::vector<double> weights, double bias);
  static AnalyticModel separable(std::vector<Polynomial> terms);
  static AnalyticModel bilinear(int n, std::vector<double> row_major);
  static AnalyticModel tanh_field(double delta, Polynomial centerline);
  static AnalyticModel combination(std::vector<double> coeffs,
                                   std::vector<AnalyticModel> parts);

  int n_features() const { return n_features_; }
  double eval(std::span<const double> x) const;
  std::vector<double> grad(std::span<const double> x) const;
  void grad_into(std::span<const double> x, std::span<double> out) const;

  // The constant d2f/dx_i dx_j when the model has one (Linear/Separable: 0,
  // Bilinear: m_ij + m_ji, combinations thereof); nullopt when it varies.
  std::optional<double> mixed_partial(int i, int j) const;

  const Spec& spec() const { return spec_; }

 private:
  AnalyticModel(Spec spec, int n_features)
      : spec_(std::move(spec)), n_features_(n_features) {}

  Spec spec_;
  int n_features_ = 0;
};

// The default §-free way to build the toy transition field used across the
// synthetic experiments: centerline(u) = -(4(u - 1/2))^11 - u + 1, expanded to
// exact integer monomial coefficients.
Polynomial default_centerline();

// ============================================================================
// Unifying model
// ============================================================================

// A model is a weighted sum of parts, each either a TreeEnsemble or an
// AnalyticModel. Plain models are a single part with coefficient 1; weighted
// combinations keep attribution linear in the parts.
class Model {
 public:
  struct Term {
    double coeff = 1.0;
    std::variant<TreeEnsemble, AnalyticModel> part;
  };

  Model(TreeEnsemble ensemble);    // NOLINT(google-explicit-constructor)
  Model(AnalyticModel analytic);   // NOLINT(google-explicit-constructor)
  static Model combination(std::vector<double> coeffs, std::vector<Model> parts);

  int n_features() const { return n_features_; }

  // Deterministic score; throws InputError on dimension mismatch.
  double eval(std::span<const double> x) const;

  // Exact gradient; throws UnsupportedOperation if any part is a tree
  // ensemble (piecewise-constant parts have no usable gradient; the
  // discontinuity engine handles them instead).
  std::vector<double> grad(std::span<const double> x) const;

  bool has_tree_part() const;
  bool has_analytic_part() const;
  std::span<const Term> terms() const { return terms_; }

  // Single-part accessors; nullptr when the model is not of that exact shape
  // (one part, coefficient 1).
  const TreeEnsemble* as_tree_ensemble() const;
  const AnalyticModel* as_analytic() const;

  void check_dimension(std::span<const double> x) const;

 private:
  Model() = default;
  std::vector<Term> terms_;
  int n_features_ = 0;
};

}  // namespace pathattr
