#include "pathattr/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pathattr/paths.hpp"
#include "pathattr/rng.hpp"

namespace pathattr {

std::optional<Method> parse_method(std::string_view name) {
  if (name == "gig") return Method::Gig;
  if (name == "shapley-exact") return Method::ShapleyExact;
  if (name == "shapley-permutation") return Method::ShapleyPermutation;
  if (name == "shapley-sampled") return Method::ShapleySampled;
  return std::nullopt;
}

namespace {

void check_pair(int n, std::span<const double> x_ref, std::span<const double> x_expl) {
  if (static_cast<int>(x_ref.size()) != n || static_cast<int>(x_expl.size()) != n) {
    throw InputError("point dimension does not match the model");
  }
}

// All 2^n interventional scores, indexed by the present-feature mask.
std::vector<double> masked_score_table(const ScoreFn& score, int n,
                                       std::span<const double> x_ref,
                                       std::span<const double> x_expl) {
  const size_t n_masks = size_t{1} << n;
  std::vector<double> values(n_masks);
  std::vector<double> point(n);
  for (size_t mask = 0; mask < n_masks; ++mask) {
    for (int i = 0; i < n; ++i) {
      point[i] = (mask >> i) & 1ULL ? x_expl[i] : x_ref[i];
    }
    values[mask] = score(point);
  }
  return values;
}

}  // namespace

// ============================================================================
// Exact forms
// ============================================================================

AttributionResult shapley_exact(const ScoreFn& score, int n_features,
                                std::span<const double> x_ref,
                                std::span<const double> x_expl, int max_features) {
  check_pair(n_features, x_ref, x_expl);
  if (n_features > max_features) {
    throw InputError("shapley_exact: " + std::to_string(n_features) +
                     " features exceed the exact limit of " + std::to_string(max_features) +
                     "; use shapley_sampled");
  }
  const std::vector<double> values = masked_score_table(score, n_features, x_ref, x_expl);

  AttributionResult result;
  result.method = Method::ShapleyExact;
  result.phi = shapley_from_orthant_values(values, n_features);
  double total = 0.0;
  for (double p : result.phi) total += p;
  result.efficiency_residual = total - (values.back() - values.front());
  return result;
}

AttributionResult shapley_exact(const Model& model, std::span<const double> x_ref,
                                std::span<const double> x_expl, int max_features) {
  const ScoreFn score = [&model](std::span<const double> x) { return model.eval(x); };
  return shapley_exact(score, model.n_features(), x_ref, x_expl, max_features);
}

AttributionResult shapley_permutation(const ScoreFn& score, int n_features,
                                      std::span<const double> x_ref,
                                      std::span<const double> x_expl, int max_features) {
  check_pair(n_features, x_ref, x_expl);
  if (n_features > max_features) {
    throw InputError("shapley_permutation: " + std::to_string(n_features) +
                     " features exceed the enumeration limit of " +
                     std::to_string(max_features) + "; use shapley_sampled");
  }
  const std::vector<double> values = masked_score_table(score, n_features, x_ref, x_expl);

  std::vector<int> perm(n_features);
  for (int i = 0; i < n_features; ++i) perm[i] = i;

  std::vector<double> phi(n_features, 0.0);
  double n_perms = 0.0;
  do {
    size_t mask = 0;
    for (int j = 0; j < n_features; ++j) {
      const size_t next = mask | (size_t{1} << perm[j]);
      phi[perm[j]] += values[next] - values[mask];
      mask = next;
    }
    n_perms += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));

  AttributionResult result;
  result.method = Method::ShapleyPermutation;
  result.phi.resize(n_features);
  for (int i = 0; i < n_features; ++i) result.phi[i] = phi[i] / n_perms;
  double total = 0.0;
  for (double p : result.phi) total += p;
  result.efficiency_residual = total - (values.back() - values.front());
  return result;
}

AttributionResult shapley_permutation(const Model& model, std::span<const double> x_ref,
                                      std::span<const double> x_expl, int max_features) {
  const ScoreFn score = [&model](std::span<const double> x) { return model.eval(x); };
  return shapley_permutation(score, model.n_features(), x_ref, x_expl, max_features);
}

// ============================================================================
// Permutation sampling
// ============================================================================

SampledResult shapley_sampled(const ScoreFn& score, int n_features,
                              std::span<const double> x_ref,
                              std::span<const double> x_expl,
                              const SampledOptions& options) {
  check_pair(n_features, x_ref, x_expl);
  if (options.max_permutations < 2) {
    throw InputError("shapley_sampled needs max_permutations >= 2");
  }

  RandomStream rng(options.seed);
  std::vector<int> perm(n_features);
  for (int i = 0; i < n_features; ++i) perm[i] = i;

  const double score_ref = score(x_ref);
  const double score_expl = score(x_expl);

  // per-feature Welford accumulators over permutations
  std::vector<double> mean(n_features, 0.0);
  std::vector<double> m2(n_features, 0.0);
  std::vector<double> point(n_features);

  int used = 0;
  bool converged = false;
  while (used < options.max_permutations && !converged) {
    rng.shuffle(perm);
    std::copy(x_ref.begin(), x_ref.end(), point.begin());
    double prev = score_ref;
    ++used;
    for (int j = 0; j < n_features; ++j) {
      const int f = perm[j];
      point[f] = x_expl[f];
      const double cur = score(point);
      const double marginal = cur - prev;
      prev = cur;
      const double delta = marginal - mean[f];
      mean[f] += delta / used;
      m2[f] += delta * (marginal - mean[f]);
    }

    if (options.target_stderr > 0.0 && used >= std::max(2, options.min_samples)) {
      converged = true;
      for (int f = 0; f < n_features; ++f) {
        const double se = std::sqrt(m2[f] / (used - 1) / used);
        if (!(se < options.target_stderr)) {
          converged = false;
          break;
        }
      }
    }
  }

  SampledResult out;
  out.attribution.method = Method::ShapleySampled;
  out.attribution.phi = mean;
  std::vector<double> se(n_features);
  for (int f = 0; f < n_features; ++f) {
    se[f] = used >= 2 ? std::sqrt(m2[f] / (used - 1) / used)
                      : std::numeric_limits<double>::quiet_NaN();
  }
  out.attribution.stderr_phi = se;
  double total = 0.0;
  for (double p : mean) total += p;
  out.attribution.efficiency_residual = total - (score_expl - score_ref);

  out.report.mean_phi = mean;
  out.report.stderr_phi = std::move(se);
  out.report.n_used = used;
  out.report.n_failed = 0;
  out.report.converged = converged;
  out.report.mean_residual = out.attribution.efficiency_residual;
  return out;
}

SampledResult shapley_sampled(const Model& model, std::span<const double> x_ref,
                              std::span<const double> x_expl,
                              const SampledOptions& options) {
  const ScoreFn score = [&model](std::span<const double> x) { return model.eval(x); };
  return shapley_sampled(score, model.n_features(), x_ref, x_expl, options);
}

// ============================================================================
// Expectation over references
// ============================================================================

void ReferenceSet::validate(int n_features) const {
  if (points.empty()) throw InputError("reference set must be non-empty");
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != n_features) {
      throw InputError("reference point dimension does not match");
    }
  }
  if (!weights.empty()) {
    if (weights.size() != points.size()) {
      throw InputError("reference weights must match the point count");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw InputError("reference weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw InputError("reference weights must not all be zero");
  }
}

ConvergenceReport expected_attribution(const PairAttributor& attributor,
                                       const ReferenceSet& refs,
                                       std::span<const double> x_expl,
                                       const ExpectationOptions& options) {
  const int n = static_cast<int>(x_expl.size());
  refs.validate(n);

  std::vector<size_t> order(refs.points.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  RandomStream rng(options.shuffle_seed);
  rng.shuffle(order);

  const auto weight_of = [&](size_t ref_index) {
    return refs.weights.empty() ? 1.0 : refs.weights[ref_index];
  };

  // consumed samples, in consumption order
  std::vector<std::vector<double>> phis;
  std::vector<double> residuals;
  std::vector<double> weights;

  // weighted Welford state driving the stopping criterion (O(1) per sample);
  // the reported statistics are recomputed pairwise at the end
  std::vector<double> run_mean(n, 0.0);
  std::vector<double> run_m2(n, 0.0);
  double weight_total = 0.0;
  double weight_sq_total = 0.0;

  int n_failed = 0;
  bool converged = false;

  const int block = std::max(1, options.block_size);
  std::vector<std::optional<AttributionResult>> slot(block);

  for (size_t begin = 0; begin < order.size() && !converged; begin += block) {
    const int count = static_cast<int>(std::min<size_t>(block, order.size() - begin));

    const auto evaluate_one = [&](int b) {
      slot[b].reset();
      try {
        AttributionResult r = attributor(x_expl, refs.points[order[begin + b]]);
        for (double p : r.phi) {
          if (std::isnan(p)) return;  // poisoned reference
        }
        slot[b] = std::move(r);
      } catch (...) {
        // recorded below as a failure; only this reference is skipped
      }
    };

    if (options.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
      for (int b = 0; b < count; ++b) evaluate_one(b);
    } else {
      for (int b = 0; b < count; ++b) evaluate_one(b);
    }

    // fixed consumption order regardless of evaluation interleaving
    for (int b = 0; b < count && !converged; ++b) {
      if (!slot[b]) {
        ++n_failed;
        continue;
      }
      const AttributionResult& r = *slot[b];
      const double w = weight_of(order[begin + b]);
      phis.push_back(r.phi);
      residuals.push_back(r.efficiency_residual);
      weights.push_back(w);
      if (w > 0.0) {
        weight_total += w;
        weight_sq_total += w * w;
        for (int i = 0; i < n; ++i) {
          const double delta = r.phi[i] - run_mean[i];
          run_mean[i] += (w / weight_total) * delta;
          run_m2[i] += w * delta * (r.phi[i] - run_mean[i]);
        }
      }

      const int n_used = static_cast<int>(phis.size());
      if (options.target_stderr > 0.0 && n_used >= std::max(2, options.min_samples)) {
        const double n_eff = weight_total * weight_total / weight_sq_total;
        const double denom = weight_total - weight_sq_total / weight_total;
        converged = denom > 0.0;
        for (int i = 0; i < n && converged; ++i) {
          const double var = run_m2[i] / denom;
          if (!(std::sqrt(var / n_eff) < options.target_stderr)) converged = false;
        }
      }
    }
  }

  // ---- report with pairwise reductions ------------------------------------
  ConvergenceReport report;
  report.n_used = static_cast<int>(phis.size());
  report.n_failed = n_failed;
  report.converged = converged;
  report.mean_phi.assign(n, std::numeric_limits<double>::quiet_NaN());
  report.stderr_phi.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (phis.empty()) return report;

  const double w_total = pairwise_sum(weights);
  const double w_sq_total = pairwise_dot(weights, weights);
  std::vector<double> column(phis.size());
  for (int i = 0; i < n; ++i) {
    for (size_t j = 0; j < phis.size(); ++j) column[j] = phis[j][i];
    report.mean_phi[i] = pairwise_dot(column, weights) / w_total;
  }
  if (phis.size() >= 2) {
    const double denom = w_total - w_sq_total / w_total;
    const double n_eff = w_total * w_total / w_sq_total;
    if (denom > 0.0) {
      std::vector<double> sq(phis.size());
      for (int i = 0; i < n; ++i) {
        for (size_t j = 0; j < phis.size(); ++j) {
          const double d = phis[j][i] - report.mean_phi[i];
          sq[j] = d * d;
        }
        const double var = pairwise_dot(sq, weights) / denom;
        report.stderr_phi[i] = std::sqrt(var / n_eff);
      }
    }
  }
  report.mean_residual = pairwise_dot(residuals, weights) / w_total;
  return report;
}

PairAttributor make_gig_attributor(const Model& model, const GigConfig& config) {
  const Model* m = &model;
  return [m, config](std::span<const double> x_expl, std::span<const double> x_ref) {
    return gig_attribute(*m, x_ref, x_expl, config);
  };
}

PairAttributor make_shapley_exact_attributor(const Model& model, int max_features) {
  const Model* m = &model;
  return [m, max_features](std::span<const double> x_expl, std::span<const double> x_ref) {
    return shapley_exact(*m, x_ref, x_expl, max_features);
  };
}

}  // namespace pathattr
