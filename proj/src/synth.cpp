#include "pathattr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pathattr/rng.hpp"
#include "pathattr/shapley.hpp"

namespace pathattr::synth {

// ============================================================================
// Toy field and samplers
// ============================================================================

double ToyFieldSpec::probability(double x1, double x2) const {
  return 0.5 + 0.5 * std::tanh((x2 - centerline(x1)) / delta);
}

std::string_view source_name(SampleSource s) {
  switch (s) {
    case SampleSource::Gaussian0: return "gaussian0";
    case SampleSource::Gaussian1: return "gaussian1";
    case SampleSource::Uniform: return "uniform";
  }
  return "unknown";
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

LabeledSample draw_gaussian_sample(const GaussianSpec& g, SampleSource source,
                                   const ToyFieldSpec& field, RandomStream& rng) {
  // axis-aligned draw in the 45-degree frame, rotated back
  const double u = g.sigma_major * rng.normal();
  const double v = g.sigma_minor * rng.normal();
  LabeledSample s;
  s.x1 = g.mu[0] + (u - v) * kInvSqrt2;
  s.x2 = g.mu[1] + (u + v) * kInvSqrt2;
  s.label = rng.bernoulli(field.probability(s.x1, s.x2)) ? 2 : 1;
  s.source = source;
  return s;
}

}  // namespace

std::vector<LabeledSample> gen_double_gaussian(const GaussianSpec& g0,
                                               const GaussianSpec& g1,
                                               int n_per_gaussian,
                                               const ToyFieldSpec& field, uint64_t seed) {
  if (n_per_gaussian < 1) throw InputError("n_per_gaussian must be >= 1");
  RandomStream rng(seed);
  std::vector<LabeledSample> out;
  out.reserve(2 * static_cast<size_t>(n_per_gaussian));
  for (int i = 0; i < n_per_gaussian; ++i) {
    out.push_back(draw_gaussian_sample(g0, SampleSource::Gaussian0, field, rng));
  }
  for (int i = 0; i < n_per_gaussian; ++i) {
    out.push_back(draw_gaussian_sample(g1, SampleSource::Gaussian1, field, rng));
  }
  return out;
}

std::vector<LabeledSample> gen_uniform_background(int n, const Bounds2D& bounds,
                                                  const ToyFieldSpec& field,
                                                  uint64_t seed) {
  if (n < 0) throw InputError("background count must be >= 0");
  if (!(bounds.x1_hi > bounds.x1_lo) || !(bounds.x2_hi > bounds.x2_lo)) {
    throw InputError("uniform background bounds are degenerate");
  }
  RandomStream rng(seed);
  std::vector<LabeledSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    LabeledSample s;
    s.x1 = rng.uniform(bounds.x1_lo, bounds.x1_hi);
    s.x2 = rng.uniform(bounds.x2_lo, bounds.x2_hi);
    s.label = rng.bernoulli(field.probability(s.x1, s.x2)) ? 2 : 1;
    s.source = SampleSource::Uniform;
    out.push_back(s);
  }
  return out;
}

// ============================================================================
// Extra-trees trainer
// ============================================================================

namespace {

constexpr int kNumFeatures = 2;

double sample_feature(const LabeledSample& s, int f) { return f == 0 ? s.x1 : s.x2; }

struct TreeBuilder {
  const std::vector<LabeledSample>& data;
  const TrainerConfig& config;
  RandomStream rng;
  Tree tree;

  // builds the subtree over data[indices] and returns its node id; nodes are
  // appended parent-first, so children always have larger ids
  int build(std::vector<int>& indices, int depth) {
    const int node = tree.node_count();
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.value.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);

    int n_class2 = 0;
    for (int idx : indices) n_class2 += data[idx].label == 2 ? 1 : 0;
    const int n_node = static_cast<int>(indices.size());
    const double fraction = static_cast<double>(n_class2) / n_node;

    const bool pure = n_class2 == 0 || n_class2 == n_node;
    const bool too_small = n_node < config.min_samples_split;
    const bool too_deep = config.max_depth >= 0 && depth >= config.max_depth;
    if (pure || too_small || too_deep) {
      tree.value[node] = fraction;
      return node;
    }

    // candidate features, one uniform-random threshold each
    std::vector<int> candidates;
    if (config.n_candidate_features < 0 ||
        config.n_candidate_features >= kNumFeatures) {
      candidates = {0, 1};
    } else {
      candidates = {static_cast<int>(rng.bounded(kNumFeatures))};
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = std::numeric_limits<double>::infinity();
    for (int f : candidates) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (int idx : indices) {
        lo = std::min(lo, sample_feature(data[idx], f));
        hi = std::max(hi, sample_feature(data[idx], f));
      }
      if (!(hi > lo)) continue;  // constant feature in this node
      const double thr = rng.uniform(lo, hi);

      int n_left = 0, c2_left = 0;
      for (int idx : indices) {
        if (sample_feature(data[idx], f) < thr) {
          ++n_left;
          c2_left += data[idx].label == 2 ? 1 : 0;
        }
      }
      const int n_right = n_node - n_left;
      if (n_left == 0 || n_right == 0) continue;
      const int c2_right = n_class2 - c2_left;

      const double pl = static_cast<double>(c2_left) / n_left;
      const double pr = static_cast<double>(c2_right) / n_right;
      const double gini_left = 2.0 * pl * (1.0 - pl);
      const double gini_right = 2.0 * pr * (1.0 - pr);
      const double impurity = (n_left * gini_left + n_right * gini_right) / n_node;
      if (impurity < best_impurity) {
        best_impurity = impurity;
        best_feature = f;
        best_threshold = thr;
      }
    }

    if (best_feature < 0) {
      tree.value[node] = fraction;
      return node;
    }

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (int idx : indices) {
      (sample_feature(data[idx], best_feature) < best_threshold ? left_idx : right_idx)
          .push_back(idx);
    }

    tree.feature[node] = best_feature;
    tree.threshold[node] = best_threshold;
    tree.value[node] = fraction;
    tree.left[node] = build(left_idx, depth + 1);
    tree.right[node] = build(right_idx, depth + 1);
    return node;
  }
};

Tree train_one_tree(const std::vector<LabeledSample>& data, const TrainerConfig& config,
                    int tree_index) {
  TreeBuilder builder{data, config,
                      RandomStream(derive_seed(config.seed, static_cast<uint64_t>(tree_index))),
                      Tree{}};
  std::vector<int> indices(data.size());
  std::iota(indices.begin(), indices.end(), 0);
  builder.build(indices, 0);
  return std::move(builder.tree);
}

}  // namespace

TreeEnsemble train_extra_trees(const std::vector<LabeledSample>& data,
                               const TrainerConfig& config) {
  if (config.n_trees < 1) throw InputError("n_trees must be >= 1");
  if (static_cast<int>(data.size()) < std::max(1, config.min_samples_split)) {
    throw InputError("not enough samples to train");
  }

  TreeEnsemble ensemble;
  ensemble.n_features = kNumFeatures;
  ensemble.link = Link::Identity;
  ensemble.aggregation = Aggregation::Mean;
  ensemble.trees.resize(config.n_trees);

  if (config.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < config.n_trees; ++t) {
      ensemble.trees[t] = train_one_tree(data, config, t);
    }
  } else {
    for (int t = 0; t < config.n_trees; ++t) {
      ensemble.trees[t] = train_one_tree(data, config, t);
    }
  }
  return ensemble;
}

// ============================================================================
// Centerline selection
// ============================================================================

CenterlineSelection select_centerline_points(const std::vector<LabeledSample>& data,
                                             int k, double band) {
  if (k < 1) throw InputError("selection size must be >= 1");

  struct Candidate {
    double x1, x2;
    double t;  // projection onto the line x2 = x1
    double off;  // |x1 - x2|, distance proxy to the line
  };
  std::vector<Candidate> candidates;
  for (const LabeledSample& s : data) {
    if (s.label == 2 && std::abs(s.x1 - s.x2) < band) {
      candidates.push_back(
          Candidate{s.x1, s.x2, (s.x1 + s.x2) * kInvSqrt2, std::abs(s.x1 - s.x2)});
    }
  }

  CenterlineSelection out;
  if (static_cast<int>(candidates.size()) <= k) {
    out.truncated = static_cast<int>(candidates.size()) < k;
    for (const Candidate& c : candidates) out.points.push_back({c.x1, c.x2});
    return out;
  }

  // greedy farthest-point selection on the projection, seeded with the
  // candidate nearest the line; ties break on the first index
  std::vector<bool> taken(candidates.size(), false);
  std::vector<size_t> chosen;
  size_t seed_idx = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].off < candidates[seed_idx].off) seed_idx = i;
  }
  chosen.push_back(seed_idx);
  taken[seed_idx] = true;
  std::vector<double> dist(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    dist[i] = std::abs(candidates[i].t - candidates[seed_idx].t);
  }
  while (static_cast<int>(chosen.size()) < k) {
    size_t best = 0;
    double best_dist = -1.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (!taken[i] && dist[i] > best_dist) {
        best_dist = dist[i];
        best = i;
      }
    }
    taken[best] = true;
    chosen.push_back(best);
    for (size_t i = 0; i < candidates.size(); ++i) {
      dist[i] = std::min(dist[i], std::abs(candidates[i].t - candidates[best].t));
    }
  }

  // deterministic output order: along the line
  std::sort(chosen.begin(), chosen.end(),
            [&](size_t a, size_t b) { return candidates[a].t < candidates[b].t; });
  for (size_t c : chosen) out.points.push_back({candidates[c].x1, candidates[c].x2});
  return out;
}

// ============================================================================
// Ratio experiment
// ============================================================================

std::vector<ExperimentRow> run_ratio_experiment(const ExperimentConfig& config) {
  std::vector<ExperimentRow> rows;

  for (int background_n : config.background_counts) {
    for (uint64_t seed : config.seeds) {
      const uint64_t data_seed = derive_seed(seed, 0xDA7AULL);
      const uint64_t background_seed = derive_seed(seed, 0xBA09ULL);
      const uint64_t train_seed = derive_seed(seed, 0x72A1ULL);
      const uint64_t shuffle_seed = derive_seed(seed, 0x5FF1ULL);

      // the Gaussian sample is identical across background counts for a given
      // seed; the background only changes what the model is trained on
      std::vector<LabeledSample> gauss =
          gen_double_gaussian(config.gaussian0, config.gaussian1, config.n_per_gaussian,
                              config.field, data_seed);
      std::vector<LabeledSample> train_data = gauss;
      if (background_n > 0) {
        const auto background =
            gen_uniform_background(background_n, config.bounds, config.field,
                                   background_seed);
        train_data.insert(train_data.end(), background.begin(), background.end());
      }

      TrainerConfig trainer = config.trainer;
      trainer.seed = train_seed;
      trainer.exec = config.exec;
      const TreeEnsemble ensemble = train_extra_trees(train_data, trainer);
      const Model model(ensemble);

      const CenterlineSelection selection =
          select_centerline_points(gauss, config.n_points, config.band);

      ReferenceSet refs;
      refs.points.reserve(gauss.size());
      for (const LabeledSample& s : gauss) refs.points.push_back({s.x1, s.x2});

      const std::array<Method, 2> methods{Method::Gig, Method::ShapleyExact};
      const int n_rows = static_cast<int>(selection.points.size()) * 2;
      std::vector<ExperimentRow> config_rows(n_rows);

      const auto run_row = [&](int r) {
        const int point_idx = r / 2;
        const Method method = methods[r % 2];
        const auto& pt = selection.points[point_idx];
        const std::vector<double> x_expl{pt[0], pt[1]};

        ExpectationOptions opts;
        opts.target_stderr = config.target_stderr;
        opts.shuffle_seed = derive_seed(shuffle_seed, static_cast<uint64_t>(r));
        opts.exec = Exec::Serial;  // rows are already parallel

        const PairAttributor attributor = method == Method::Gig
                                              ? make_gig_attributor(model)
                                              : make_shapley_exact_attributor(model);
        ExperimentRow row;
        row.background_n = background_n;
        row.seed = seed;
        row.point_idx = point_idx;
        row.x1 = pt[0];
        row.x2 = pt[1];
        row.method = method;
        try {
          const ConvergenceReport report =
              expected_attribution(attributor, refs, x_expl, opts);
          row.phi1 = report.mean_phi[0];
          row.phi2 = report.mean_phi[1];
          row.stderr1 = report.stderr_phi[0];
          row.stderr2 = report.stderr_phi[1];
          row.efficiency_residual = report.mean_residual;
          row.converged = report.converged;
          const double score_change = (row.phi1 + row.phi2) - report.mean_residual;
          row.unstable = std::abs(row.phi2) < 1e-6 * std::abs(score_change);
          row.ratio = row.unstable ? std::numeric_limits<double>::quiet_NaN()
                                   : row.phi1 / row.phi2;
        } catch (const std::exception&) {
          // per-point failure: keep the row, mark it unusable
          row.phi1 = row.phi2 = row.ratio = std::numeric_limits<double>::quiet_NaN();
          row.unstable = true;
        }
        config_rows[r] = std::move(row);
      };

      if (config.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < n_rows; ++r) run_row(r);
      } else {
        for (int r = 0; r < n_rows; ++r) run_row(r);
      }

      rows.insert(rows.end(), config_rows.begin(), config_rows.end());
    }
  }
  return rows;
}

RatioSummary summarize_ratios(const std::vector<ExperimentRow>& rows, int background_n,
                              uint64_t seed, Method method) {
  std::vector<double> ratios;
  for (const ExperimentRow& row : rows) {
    if (row.background_n != background_n || row.seed != seed || row.method != method) {
      continue;
    }
    if (row.unstable || std::isnan(row.ratio)) continue;
    ratios.push_back(row.ratio);
  }
  RatioSummary out;
  out.n_stable = static_cast<int>(ratios.size());
  if (ratios.empty()) {
    out.median_ratio = out.max_ratio = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::sort(ratios.begin(), ratios.end());
  const size_t m = ratios.size();
  out.median_ratio = m % 2 == 1 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
  out.max_ratio = ratios.back();
  return out;
}

}  // namespace pathattr::synth
