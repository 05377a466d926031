#include "pathattr/splits.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace pathattr {

// ============================================================================
// Single-tree split extraction
// ============================================================================

namespace {

struct SplitWalker {
  const Tree& tree;
  std::span<const double> x_start;
  std::span<const double> x_end;
  TreePathSplits out;

  double feature_at(int f, double alpha) const {
    return x_start[f] + alpha * (x_end[f] - x_start[f]);
  }

  // Splits [alpha_min, alpha_max] at every crossing inside the subtree rooted
  // at `node`. Every recursive call descends one level, so the stack depth is
  // bounded by the tree depth.
  void walk(double alpha_min, double alpha_max, int node) {
    if (tree.is_leaf(node)) {
      out.segment_values.push_back(tree.value[node]);
      return;
    }
    const int f = tree.feature[node];
    const double thr = tree.threshold[node];
    const double v_min = feature_at(f, alpha_min);
    const double v_max = feature_at(f, alpha_max);
    const int child_min = v_min < thr ? tree.left[node] : tree.right[node];
    const int child_max = v_max < thr ? tree.left[node] : tree.right[node];

    if (child_min == child_max) {
      // The tie rule can hide a crossing that sits exactly on a window
      // boundary (a corner shared with an ancestor split). Record it and
      // probe the far side through a zero-width window, so every region
      // touching the corner is traversed and the merged corner carries the
      // full crossing-feature set.
      const double delta = x_end[f] - x_start[f];
      if (delta > 0.0 && v_min == thr && alpha_min > 0.0) {
        walk(alpha_min, alpha_min, tree.left[node]);  // pre-side limit
        out.events.push_back(SplitEvent{alpha_min, f, thr, 0.0});
        walk(alpha_min, alpha_max, tree.right[node]);
        return;
      }
      if (delta < 0.0 && v_max == thr && alpha_max < 1.0) {
        walk(alpha_min, alpha_max, tree.right[node]);
        out.events.push_back(SplitEvent{alpha_max, f, thr, 0.0});
        walk(alpha_max, alpha_max, tree.left[node]);  // post-side limit
        return;
      }
      // split hyperplane does not intersect this stretch of the path
      walk(alpha_min, alpha_max, child_min);
      return;
    }

    // crossing parameter from the global endpoints; clamp to the current
    // window so rounding cannot break the sort order
    double alpha_mid = (thr - x_start[f]) / (x_end[f] - x_start[f]);
    alpha_mid = std::clamp(alpha_mid, alpha_min, alpha_max);

    walk(alpha_min, alpha_mid, child_min);
    out.events.push_back(SplitEvent{alpha_mid, f, thr, 0.0});
    walk(alpha_mid, alpha_max, child_max);
  }
};

}  // namespace

TreePathSplits find_path_tree_splits(const Tree& tree, std::span<const double> x_start,
                                     std::span<const double> x_end) {
  if (x_start.size() != x_end.size()) {
    throw InputError("path endpoints have mismatched dimensions");
  }
  for (double v : x_start) {
    if (std::isnan(v)) throw InputError("path endpoint contains NaN");
  }
  for (double v : x_end) {
    if (std::isnan(v)) throw InputError("path endpoint contains NaN");
  }

  SplitWalker walker{tree, x_start, x_end, {}};
  walker.walk(0.0, 1.0, 0);

  TreePathSplits result = std::move(walker.out);
  for (size_t k = 0; k < result.events.size(); ++k) {
    result.events[k].value_before = result.segment_values[k];
  }
  return result;
}

// ============================================================================
// Ensemble merge
// ============================================================================

namespace {

struct Cursor {
  double alpha;
  int tree;
  int event;

  bool operator>(const Cursor& other) const {
    if (alpha != other.alpha) return alpha > other.alpha;
    if (tree != other.tree) return tree > other.tree;
    return event > other.event;
  }
};

}  // namespace

SegmentList merge_ensemble_splits(const std::vector<TreePathSplits>& per_tree,
                                  Aggregation aggregation, Link link) {
  const int n_trees = static_cast<int>(per_tree.size());
  for (const TreePathSplits& t : per_tree) {
    for (size_t k = 1; k < t.events.size(); ++k) {
      if (t.events[k].alpha < t.events[k - 1].alpha) {
        throw std::logic_error("merge_ensemble_splits: per-tree events must be sorted");
      }
    }
    if (t.segment_values.size() != t.events.size() + 1) {
      throw std::logic_error("merge_ensemble_splits: segment/event count mismatch");
    }
  }

  // per-tree cursor into its segment list; aggregate by full re-summation in
  // tree order so segment values match TreeEnsemble::margin bit-exactly
  std::vector<int> segment_of(n_trees, 0);
  const auto aggregate = [&]() {
    double acc = 0.0;
    for (int t = 0; t < n_trees; ++t) {
      acc += per_tree[t].segment_values[segment_of[t]];
    }
    if (aggregation == Aggregation::Mean && n_trees > 0) acc /= n_trees;
    return acc;
  };

  SegmentList merged;
  merged.link = link;

  std::priority_queue<Cursor, std::vector<Cursor>, std::greater<>> heap;
  for (int t = 0; t < n_trees; ++t) {
    if (!per_tree[t].events.empty()) {
      heap.push(Cursor{per_tree[t].events[0].alpha, t, 0});
    }
  }

  merged.segment_values.push_back(aggregate());

  while (!heap.empty()) {
    const Cursor anchor = heap.top();
    std::vector<int> features;

    // drain every event coincident with the anchor alpha
    while (!heap.empty() && coincident_alphas(heap.top().alpha, anchor.alpha)) {
      const Cursor c = heap.top();
      heap.pop();
      features.push_back(per_tree[c.tree].events[c.event].feature);
      segment_of[c.tree] = c.event + 1;
      const int next = c.event + 1;
      if (next < static_cast<int>(per_tree[c.tree].events.size())) {
        heap.push(Cursor{per_tree[c.tree].events[next].alpha, c.tree, next});
      }
    }

    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    merged.breakpoints.push_back(anchor.alpha);
    merged.crossing_features.push_back(std::move(features));
    merged.segment_values.push_back(aggregate());
  }

  return merged;
}

}  // namespace pathattr
