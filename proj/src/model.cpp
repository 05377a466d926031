#include "pathattr/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace pathattr {

// ============================================================================
// pairwise_sum (declared in common.hpp)
// ============================================================================

namespace {

double pairwise_sum_impl(const double* v, size_t n) {
  if (n <= 16) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
  }
  const size_t half = n / 2;
  return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double pairwise_dot(std::span<const double> values, std::span<const double> weights) {
  std::vector<double> prod(values.size());
  for (size_t i = 0; i < values.size(); ++i) prod[i] = values[i] * weights[i];
  return pairwise_sum(prod);
}

// ============================================================================
// Tree
// ============================================================================

int Tree::depth() const {
  if (node_count() == 0) return 0;
  std::vector<int> level(node_count(), 0);
  int deepest = 0;
  for (int i = 0; i < node_count(); ++i) {
    if (is_leaf(i)) continue;
    level[left[i]] = level[i] + 1;
    level[right[i]] = level[i] + 1;
    deepest = std::max(deepest, level[i] + 1);
  }
  return deepest;
}

int Tree::leaf_count() const {
  int leaves = 0;
  for (int i = 0; i < node_count(); ++i) leaves += is_leaf(i) ? 1 : 0;
  return leaves;
}

void Tree::validate(int n_features, const std::string& where) const {
  const size_t n = feature.size();
  if (threshold.size() != n || value.size() != n || left.size() != n ||
      right.size() != n) {
    throw SchemaError(where, "parallel arrays have mismatched lengths");
  }
  if (n == 0) throw SchemaError(where, "tree has no nodes");
  for (int i = 0; i < static_cast<int>(n); ++i) {
    const std::string node_path = where + ".left[" + std::to_string(i) + "]";
    if (left[i] == right[i]) {
      if (left[i] != -1) {
        throw SchemaError(node_path,
                          "leaf sentinel violated: left == right must be -1, got " +
                              std::to_string(left[i]));
      }
      continue;
    }
    if (left[i] <= i || left[i] >= static_cast<int>(n)) {
      throw SchemaError(node_path, "child index " + std::to_string(left[i]) +
                                       " out of range or not after parent " +
                                       std::to_string(i));
    }
    if (right[i] <= i || right[i] >= static_cast<int>(n)) {
      throw SchemaError(where + ".right[" + std::to_string(i) + "]",
                        "child index " + std::to_string(right[i]) +
                            " out of range or not after parent " + std::to_string(i));
    }
    if (feature[i] < 0 || feature[i] >= n_features) {
      throw SchemaError(where + ".feature[" + std::to_string(i) + "]",
                        "feature index " + std::to_string(feature[i]) +
                            " out of range for n_features=" + std::to_string(n_features));
    }
    if (!std::isfinite(threshold[i])) {
      throw SchemaError(where + ".threshold[" + std::to_string(i) + "]",
                        "threshold must be finite");
    }
  }
}

void TreeEnsemble::validate() const {
  if (n_features <= 0) {
    throw SchemaError("$.n_features", "must be a positive integer");
  }
  for (size_t t = 0; t < trees.size(); ++t) {
    trees[t].validate(n_features, "$.trees[" + std::to_string(t) + "]");
  }
}

// ============================================================================
// AnalyticModel
// ============================================================================

AnalyticModel AnalyticModel::linear(std::vector<double> weights, double bias) {
  const int n = static_cast<int>(weights.size());
  return AnalyticModel(Linear{std::move(weights), bias}, n);
}

AnalyticModel AnalyticModel::separable(std::vector<Polynomial> terms) {
  const int n = static_cast<int>(terms.size());
  return AnalyticModel(Separable{std::move(terms)}, n);
}

AnalyticModel AnalyticModel::bilinear(int n, std::vector<double> row_major) {
  if (static_cast<int>(row_major.size()) != n * n) {
    throw InputError("bilinear matrix must have n*n entries");
  }
  return AnalyticModel(Bilinear{n, std::move(row_major)}, n);
}

AnalyticModel AnalyticModel::tanh_field(double delta, Polynomial centerline) {
  if (!(delta > 0.0)) throw InputError("tanh field delta must be positive");
  return AnalyticModel(TanhField{delta, std::move(centerline)}, 2);
}

AnalyticModel AnalyticModel::combination(std::vector<double> coeffs,
                                         std::vector<AnalyticModel> parts) {
  if (coeffs.size() != parts.size()) {
    throw InputError("combination needs one coefficient per part");
  }
  if (parts.empty()) throw InputError("combination needs at least one part");
  const int n = parts.front().n_features();
  for (const AnalyticModel& p : parts) {
    if (p.n_features() != n) {
      throw InputError("combination parts disagree on input dimension");
    }
  }
  return AnalyticModel(Combination{std::move(coeffs), std::move(parts)}, n);
}

double AnalyticModel::eval(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Linear>) {
          double acc = m.bias;
          for (size_t i = 0; i < m.weights.size(); ++i) acc += m.weights[i] * x[i];
          return acc;
        } else if constexpr (std::is_same_v<T, Separable>) {
          double acc = 0.0;
          for (size_t i = 0; i < m.terms.size(); ++i) acc += m.terms[i](x[i]);
          return acc;
        } else if constexpr (std::is_same_v<T, Bilinear>) {
          double acc = 0.0;
          for (int i = 0; i < m.n; ++i) {
            for (int j = 0; j < m.n; ++j) acc += m.at(i, j) * x[i] * x[j];
          }
          return acc;
        } else if constexpr (std::is_same_v<T, TanhField>) {
          const double z = (x[1] - m.centerline(x[0])) / m.delta;
          return 0.5 + 0.5 * std::tanh(z);
        } else {
          double acc = 0.0;
          for (size_t p = 0; p < m.parts.size(); ++p) {
            acc += m.coeffs[p] * m.parts[p].eval(x);
          }
          return acc;
        }
      },
      spec_);
}

void AnalyticModel::grad_into(std::span<const double> x, std::span<double> out) const {
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Linear>) {
          for (size_t i = 0; i < m.weights.size(); ++i) out[i] = m.weights[i];
        } else if constexpr (std::is_same_v<T, Separable>) {
          for (size_t i = 0; i < m.terms.size(); ++i) out[i] = m.terms[i].deriv(x[i]);
        } else if constexpr (std::is_same_v<T, Bilinear>) {
          for (int i = 0; i < m.n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m.n; ++j) acc += (m.at(i, j) + m.at(j, i)) * x[j];
            out[i] = acc;
          }
        } else if constexpr (std::is_same_v<T, TanhField>) {
          const double z = (x[1] - m.centerline(x[0])) / m.delta;
          const double th = std::tanh(z);
          const double sech2 = 1.0 - th * th;
          out[0] = -0.5 * sech2 * m.centerline.deriv(x[0]) / m.delta;
          out[1] = 0.5 * sech2 / m.delta;
        } else {
          for (size_t i = 0; i < out.size(); ++i) out[i] = 0.0;
          std::vector<double> partial(out.size());
          for (size_t p = 0; p < m.parts.size(); ++p) {
            m.parts[p].grad_into(x, partial);
            for (size_t i = 0; i < out.size(); ++i) out[i] += m.coeffs[p] * partial[i];
          }
        }
      },
      spec_);
}

std::vector<double> AnalyticModel::grad(std::span<const double> x) const {
  std::vector<double> g(n_features_);
  grad_into(x, g);
  return g;
}

std::optional<double> AnalyticModel::mixed_partial(int i, int j) const {
  if (i == j) return std::nullopt;
  return std::visit(
      [&](const auto& m) -> std::optional<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Linear> || std::is_same_v<T, Separable>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, Bilinear>) {
          return m.at(i, j) + m.at(j, i);
        } else if constexpr (std::is_same_v<T, TanhField>) {
          return std::nullopt;
        } else {
          double acc = 0.0;
          for (size_t p = 0; p < m.parts.size(); ++p) {
            const auto sub = m.parts[p].mixed_partial(i, j);
            if (!sub) return std::nullopt;
            acc += m.coeffs[p] * *sub;
          }
          return acc;
        }
      },
      spec_);
}

Polynomial default_centerline() {
  // -(4(u - 1/2))^11 - u + 1 in the monomial basis; every coefficient is an
  // exact integer, so evaluation at dyadic points is exact.
  return Polynomial({2049.0, -45057.0, 450560.0, -2703360.0, 10813440.0,
                     -30277632.0, 60555264.0, -86507520.0, 86507520.0,
                     -57671680.0, 23068672.0, -4194304.0});
}

// ============================================================================
// Model
// ============================================================================

Model::Model(TreeEnsemble ensemble) {
  n_features_ = ensemble.n_features;
  terms_.push_back(Term{1.0, std::move(ensemble)});
}

Model::Model(AnalyticModel analytic) {
  n_features_ = analytic.n_features();
  terms_.push_back(Term{1.0, std::move(analytic)});
}

Model Model::combination(std::vector<double> coeffs, std::vector<Model> parts) {
  if (coeffs.size() != parts.size()) {
    throw InputError("combination needs one coefficient per part");
  }
  if (parts.empty()) throw InputError("combination needs at least one part");
  Model out;
  out.n_features_ = parts.front().n_features();
  for (size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].n_features() != out.n_features_) {
      throw InputError("combination parts disagree on input dimension");
    }
    for (const Term& t : parts[p].terms_) {
      out.terms_.push_back(Term{coeffs[p] * t.coeff, t.part});
    }
  }
  return out;
}

void Model::check_dimension(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_features_) {
    throw InputError("input has dimension " + std::to_string(x.size()) +
                     ", model expects " + std::to_string(n_features_));
  }
}

double Model::eval(std::span<const double> x) const {
  check_dimension(x);
  double acc = 0.0;
  for (const Term& t : terms_) {
    acc += t.coeff * std::visit([&](const auto& part) { return part.eval(x); }, t.part);
  }
  return acc;
}

std::vector<double> Model::grad(std::span<const double> x) const {
  check_dimension(x);
  if (has_tree_part()) {
    throw UnsupportedOperation(
        "gradient is undefined for tree ensembles (piecewise constant; "
        "use the discontinuity-aware attribution instead)");
  }
  std::vector<double> g(n_features_, 0.0);
  std::vector<double> partial(n_features_);
  for (const Term& t : terms_) {
    const auto& analytic = std::get<AnalyticModel>(t.part);
    analytic.grad_into(x, partial);
    for (int i = 0; i < n_features_; ++i) g[i] += t.coeff * partial[i];
  }
  return g;
}

bool Model::has_tree_part() const {
  for (const Term& t : terms_) {
    if (std::holds_alternative<TreeEnsemble>(t.part)) return true;
  }
  return false;
}

bool Model::has_analytic_part() const {
  for (const Term& t : terms_) {
    if (std::holds_alternative<AnalyticModel>(t.part)) return true;
  }
  return false;
}

const TreeEnsemble* Model::as_tree_ensemble() const {
  if (terms_.size() != 1 || terms_[0].coeff != 1.0) return nullptr;
  return std::get_if<TreeEnsemble>(&terms_[0].part);
}

const AnalyticModel* Model::as_analytic() const {
  if (terms_.size() != 1 || terms_[0].coeff != 1.0) return nullptr;
  return std::get_if<AnalyticModel>(&terms_[0].part);
}

}  // namespace pathattr
