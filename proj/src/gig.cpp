#include "pathattr/gig.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>
#include <sstream>

namespace pathattr {

// ============================================================================
// Orthant Shapley kernel
// ============================================================================

std::vector<double> shapley_from_orthant_values(std::span<const double> values, int k) {
  assert(static_cast<size_t>(1) << k == values.size());
  // factorials up to 20 are exact in double
  std::vector<double> fact(k + 1, 1.0);
  for (int i = 1; i <= k; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> weight(k, 0.0);  // weight by |S|
  for (int s = 0; s < k; ++s) weight[s] = fact[s] * fact[k - 1 - s] / fact[k];

  std::vector<double> credits(k, 0.0);
  const size_t n_masks = values.size();
  for (size_t mask = 0; mask < n_masks; ++mask) {
    const int s = __builtin_popcountll(mask);
    for (int j = 0; j < k; ++j) {
      if (mask & (size_t{1} << j)) continue;
      credits[j] += weight[s] * (values[mask | (size_t{1} << j)] - values[mask]);
    }
  }
  return credits;
}

namespace {

// Sorted unique split values of one feature across every tree part.
std::vector<double> feature_thresholds(std::span<const Model::Term> terms, int feature) {
  std::vector<double> out;
  for (const Model::Term& term : terms) {
    const TreeEnsemble* ensemble = std::get_if<TreeEnsemble>(&term.part);
    if (!ensemble) continue;
    for (const Tree& tree : ensemble->trees) {
      for (int i = 0; i < tree.node_count(); ++i) {
        if (!tree.is_leaf(i) && tree.feature[i] == feature) {
          out.push_back(tree.threshold[i]);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct ProbePair {
  double pre = 0.0;
  double post = 0.0;
};

// Displacements strictly inside the two regions adjacent to a crossing.
ProbePair make_probes(const std::vector<double>& sorted_thresholds, double threshold,
                      double direction) {
  const double fallback = 1e-9 * std::max(1.0, std::abs(threshold));
  double below = threshold - fallback;
  double above = threshold + fallback;

  auto lo = std::lower_bound(sorted_thresholds.begin(), sorted_thresholds.end(), threshold);
  if (lo != sorted_thresholds.begin()) {
    const double prev = *std::prev(lo);
    if (prev < threshold) below = 0.5 * (prev + threshold);
  }
  auto hi = std::upper_bound(sorted_thresholds.begin(), sorted_thresholds.end(), threshold);
  if (hi != sorted_thresholds.end()) {
    above = 0.5 * (threshold + *hi);
  }

  return direction > 0 ? ProbePair{below, above} : ProbePair{above, below};
}

std::vector<double> orthant_credits(const ScoreFn& score,
                                    std::span<const double> corner_point,
                                    std::span<const int> crossing_features,
                                    std::span<const ProbePair> probes, int corner_limit) {
  const int k = static_cast<int>(crossing_features.size());
  if (k > corner_limit) {
    std::ostringstream msg;
    msg << "corner too wide: " << k << " features cross at one path point (limit "
        << corner_limit << "); features:";
    for (int f : crossing_features) msg << ' ' << f;
    throw CornerTooWideError(msg.str(),
                             std::vector<int>(crossing_features.begin(),
                                              crossing_features.end()));
  }

  const size_t n_masks = size_t{1} << k;
  std::vector<double> values(n_masks);
  std::vector<double> point(corner_point.begin(), corner_point.end());
  for (size_t mask = 0; mask < n_masks; ++mask) {
    for (int j = 0; j < k; ++j) {
      point[crossing_features[j]] =
          (mask & (size_t{1} << j)) ? probes[j].post : probes[j].pre;
    }
    values[mask] = score(point);
  }
  return shapley_from_orthant_values(values, k);
}

}  // namespace

std::vector<double> orthant_shapley(const Model& model,
                                    std::span<const double> corner_point,
                                    std::span<const int> crossing_features,
                                    std::span<const double> thresholds,
                                    std::span<const double> direction_signs,
                                    int corner_limit) {
  model.check_dimension(corner_point);
  if (crossing_features.size() != thresholds.size() ||
      crossing_features.size() != direction_signs.size()) {
    throw InputError("orthant_shapley: features, thresholds and directions must align");
  }
  std::vector<ProbePair> probes(crossing_features.size());
  for (size_t j = 0; j < crossing_features.size(); ++j) {
    probes[j] = make_probes(feature_thresholds(model.terms(), crossing_features[j]),
                            thresholds[j], direction_signs[j]);
  }
  const ScoreFn score = [&model](std::span<const double> x) { return model.eval(x); };
  return orthant_credits(score, corner_point, crossing_features, probes, corner_limit);
}

// ============================================================================
// gig_attribute
// ============================================================================

namespace {

// One tree's event list within one model term.
struct EventStream {
  int term_index = 0;   // index into tree_terms
  TreePathSplits splits;
};

struct StreamCursor {
  double alpha;
  int stream;
  int event;
  bool operator>(const StreamCursor& other) const {
    if (alpha != other.alpha) return alpha > other.alpha;
    if (stream != other.stream) return stream > other.stream;
    return event > other.event;
  }
};

struct TreeTermState {
  const TreeEnsemble* ensemble = nullptr;
  double coeff = 1.0;
  double value_sum = 0.0;  // running sum of per-tree segment values
};

double combined_tree_score(const std::vector<TreeTermState>& states) {
  double acc = 0.0;
  for (const TreeTermState& st : states) {
    acc += st.coeff * apply_link(st.ensemble->link,
                                 st.ensemble->aggregate_margin(st.value_sum));
  }
  return acc;
}

}  // namespace

AttributionResult gig_attribute(const Model& model, std::span<const double> x_ref,
                                std::span<const double> x_expl, const GigConfig& config) {
  model.check_dimension(x_ref);
  model.check_dimension(x_expl);
  for (double v : x_ref) {
    if (std::isnan(v)) throw InputError("reference point contains NaN");
  }
  for (double v : x_expl) {
    if (std::isnan(v)) throw InputError("explanation point contains NaN");
  }

  const int n = model.n_features();
  AttributionResult result;
  result.method = Method::Gig;
  result.phi.assign(n, 0.0);

  if (std::equal(x_ref.begin(), x_ref.end(), x_expl.begin())) {
    return result;
  }

  // ---- tree part: merged crossing events ----------------------------------
  std::vector<TreeTermState> tree_states;
  std::vector<EventStream> streams;
  for (const Model::Term& term : model.terms()) {
    const TreeEnsemble* ensemble = std::get_if<TreeEnsemble>(&term.part);
    if (!ensemble) continue;
    const int term_index = static_cast<int>(tree_states.size());
    tree_states.push_back(TreeTermState{ensemble, term.coeff, 0.0});
    for (const Tree& tree : ensemble->trees) {
      EventStream s;
      s.term_index = term_index;
      s.splits = find_path_tree_splits(tree, x_ref, x_expl);
      tree_states[term_index].value_sum += s.splits.segment_values.front();
      streams.push_back(std::move(s));
    }
  }

  if (!streams.empty()) {
    std::priority_queue<StreamCursor, std::vector<StreamCursor>, std::greater<>> heap;
    for (size_t s = 0; s < streams.size(); ++s) {
      if (!streams[s].splits.events.empty()) {
        heap.push(StreamCursor{streams[s].splits.events[0].alpha, static_cast<int>(s), 0});
      }
    }

    // lazily built per-feature threshold tables for corner probes
    std::vector<std::vector<double>> threshold_cache(n);
    std::vector<bool> threshold_cached(n, false);

    const ScoreFn tree_score = [&](std::span<const double> x) {
      double acc = 0.0;
      for (const TreeTermState& st : tree_states) {
        acc += st.coeff * apply_link(st.ensemble->link, st.ensemble->margin(x));
      }
      return acc;
    };

    std::vector<int> group_features;
    std::vector<double> group_thresholds;
    while (!heap.empty()) {
      const StreamCursor anchor = heap.top();
      group_features.clear();
      group_thresholds.clear();

      const double score_before = combined_tree_score(tree_states);
      while (!heap.empty() && coincident_alphas(heap.top().alpha, anchor.alpha)) {
        const StreamCursor c = heap.top();
        heap.pop();
        EventStream& stream = streams[c.stream];
        const SplitEvent& ev = stream.splits.events[c.event];
        if (std::find(group_features.begin(), group_features.end(), ev.feature) ==
            group_features.end()) {
          group_features.push_back(ev.feature);
          group_thresholds.push_back(ev.threshold);
        }
        TreeTermState& st = tree_states[stream.term_index];
        st.value_sum += stream.splits.segment_values[c.event + 1] -
                        stream.splits.segment_values[c.event];
        const int next = c.event + 1;
        if (next < static_cast<int>(stream.splits.events.size())) {
          heap.push(StreamCursor{stream.splits.events[next].alpha, c.stream, next});
        }
      }
      const double score_after = combined_tree_score(tree_states);

      if (group_features.size() == 1) {
        // single-feature crossing: the whole jump goes to that feature
        result.phi[group_features[0]] += score_after - score_before;
        continue;
      }

      // corner: sort features ascending (thresholds follow)
      std::vector<size_t> perm(group_features.size());
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      std::sort(perm.begin(), perm.end(), [&](size_t a, size_t b) {
        return group_features[a] < group_features[b];
      });
      std::vector<int> features(perm.size());
      std::vector<ProbePair> probes(perm.size());
      for (size_t i = 0; i < perm.size(); ++i) {
        const int f = group_features[perm[i]];
        features[i] = f;
        if (!threshold_cached[f]) {
          threshold_cache[f] = feature_thresholds(model.terms(), f);
          threshold_cached[f] = true;
        }
        const double direction = x_expl[f] > x_ref[f] ? 1.0 : -1.0;
        assert(x_expl[f] != x_ref[f]);
        probes[i] = make_probes(threshold_cache[f], group_thresholds[perm[i]], direction);
      }

      std::vector<double> corner_point(n);
      for (int i = 0; i < n; ++i) {
        corner_point[i] = x_ref[i] + anchor.alpha * (x_expl[i] - x_ref[i]);
      }
      const std::vector<double> credits =
          orthant_credits(tree_score, corner_point, features, probes, config.corner_limit);
      for (size_t i = 0; i < features.size(); ++i) {
        result.phi[features[i]] += credits[i];
      }
    }
  }

  // ---- analytic part: per-feature gradient quadrature on the line ---------
  bool has_analytic = false;
  for (const Model::Term& term : model.terms()) {
    if (std::holds_alternative<AnalyticModel>(term.part)) has_analytic = true;
  }
  if (has_analytic) {
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
      if (x_expl[i] != x_ref[i]) active.push_back(i);  // zero-delta features skipped
    }
    if (!active.empty()) {
      std::vector<double> point(n);
      std::vector<double> grad_buffer(n);
      std::vector<double> grad_sum(n);
      const auto integrand = [&](double alpha, std::span<double> out) {
        for (int i = 0; i < n; ++i) {
          point[i] = x_ref[i] + alpha * (x_expl[i] - x_ref[i]);
        }
        std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
        for (const Model::Term& term : model.terms()) {
          const AnalyticModel* analytic = std::get_if<AnalyticModel>(&term.part);
          if (!analytic) continue;
          analytic->grad_into(point, grad_buffer);
          for (int i = 0; i < n; ++i) grad_sum[i] += term.coeff * grad_buffer[i];
        }
        for (size_t j = 0; j < active.size(); ++j) {
          const int f = active[j];
          out[j] = (x_expl[f] - x_ref[f]) * grad_sum[f];
        }
      };
      const QuadratureResult quad =
          integrate_adaptive(integrand, static_cast<int>(active.size()), config.quadrature);
      for (size_t j = 0; j < active.size(); ++j) {
        result.phi[active[j]] += quad.values[j];
      }
    }
  }

  double total = 0.0;
  for (double p : result.phi) total += p;
  result.efficiency_residual = total - (model.eval(x_expl) - model.eval(x_ref));
  return result;
}

// ============================================================================
// Path IG for continuous models
// ============================================================================

AttributionResult ig_attribute_path(const GradFn& grad, const ScoreFn& score,
                                    int n_features, const Path& path,
                                    const QuadratureConfig& config) {
  AttributionResult result;
  result.method = Method::Gig;
  result.phi.assign(n_features, 0.0);

  const auto vertices = path.polyline();
  std::vector<double> point(n_features);
  for (size_t seg = 0; seg + 1 < vertices.size(); ++seg) {
    const std::vector<double>& a = vertices[seg];
    const std::vector<double>& b = vertices[seg + 1];
    std::vector<int> active;
    for (int i = 0; i < n_features; ++i) {
      if (b[i] != a[i]) active.push_back(i);
    }
    if (active.empty()) continue;

    const auto integrand = [&](double t, std::span<double> out) {
      for (int i = 0; i < n_features; ++i) point[i] = a[i] + t * (b[i] - a[i]);
      const std::vector<double> g = grad(point);
      for (size_t j = 0; j < active.size(); ++j) {
        const int f = active[j];
        out[j] = (b[f] - a[f]) * g[f];
      }
    };
    const QuadratureResult quad =
        integrate_adaptive(integrand, static_cast<int>(active.size()), config);
    for (size_t j = 0; j < active.size(); ++j) {
      result.phi[active[j]] += quad.values[j];
    }
  }

  double total = 0.0;
  for (double p : result.phi) total += p;
  result.efficiency_residual = total - (score(path.end()) - score(path.start()));
  return result;
}

AttributionResult ig_attribute_path(const AnalyticModel& model, const Path& path,
                                    const QuadratureConfig& config) {
  if (path.dim() != model.n_features()) {
    throw InputError("path dimension does not match model dimension");
  }
  const GradFn grad = [&model](std::span<const double> x) { return model.grad(x); };
  const ScoreFn score = [&model](std::span<const double> x) { return model.eval(x); };
  return ig_attribute_path(grad, score, model.n_features(), path, config);
}

// ============================================================================
// theorem_gap
// ============================================================================

TheoremGapResult theorem_gap(const AnalyticModel& model, const Path& path_a,
                             const Path& path_b, const QuadratureConfig& config) {
  if (model.n_features() != 2 || path_a.dim() != 2 || path_b.dim() != 2) {
    throw InputError("theorem_gap is a 2D check");
  }
  if (path_a.start() != path_b.start() || path_a.end() != path_b.end()) {
    throw InputError("theorem_gap paths must share endpoints");
  }
  const auto mixed = model.mixed_partial(0, 1);
  if (!mixed) {
    throw InputError("theorem_gap requires a model with constant mixed partials");
  }

  TheoremGapResult out;
  out.mixed_partial = *mixed;
  out.observed_gap = ig_attribute_path(model, path_a, config).phi[0] -
                     ig_attribute_path(model, path_b, config).phi[0];

  // closed loop: path_a forward, path_b backward; shoelace, clockwise positive
  std::vector<std::vector<double>> loop = path_a.polyline();
  {
    auto back = path_b.polyline();
    loop.insert(loop.end(), back.rbegin(), back.rend());
  }
  double twice_area = 0.0;
  for (size_t i = 0; i < loop.size(); ++i) {
    const auto& p = loop[i];
    const auto& q = loop[(i + 1) % loop.size()];
    twice_area += (q[0] - p[0]) * (q[1] + p[1]);
  }
  out.signed_area = 0.5 * twice_area;
  out.predicted_gap = out.mixed_partial * out.signed_area;
  return out;
}

}  // namespace pathattr
