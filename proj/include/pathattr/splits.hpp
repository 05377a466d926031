#pragma once

#include <span>
#include <vector>

#include "pathattr/common.hpp"
#include "pathattr/model.hpp"

namespace pathattr {

// A path/tree crossing: at parameter `alpha` the path crosses `feature`'s
// split hyperplane at `threshold`; the tree (or merged margin) held
// `value_before` on the segment ending at alpha.
struct SplitEvent {
  double alpha = 0.0;
  int feature = -1;
  double threshold = 0.0;
  double value_before = 0.0;
};

// One tree's piecewise-constant profile along a straight path: sorted events
// and the constant value on each open segment between them
// (segment_values.size() == events.size() + 1; the last entry is the value on
// (last alpha, 1]).
struct TreePathSplits {
  std::vector<SplitEvent> events;
  std::vector<double> segment_values;

  double terminal_value() const { return segment_values.back(); }
};

// Walks the tree once, splitting the alpha window at every split hyperplane
// the straight path from x_start to x_end crosses. Alphas come out sorted;
// each recorded crossing feature is the split feature that generated it.
// Crossings exactly at an endpoint (a path endpoint sitting on a threshold)
// appear with alpha 0 or 1 and a zero-width boundary segment, so the value
// jump at the endpoint is still accounted for.
// NaN endpoints raise InputError; a zero-length path yields one segment.
TreePathSplits find_path_tree_splits(const Tree& tree, std::span<const double> x_start,
                                     std::span<const double> x_end);

// Merged profile of a whole ensemble along the path. Values are aggregated
// margins (link applied at evaluation time via `score`).
struct SegmentList {
  std::vector<double> breakpoints;                  // sorted merged alphas
  std::vector<double> segment_values;               // margin per open segment
  std::vector<std::vector<int>> crossing_features;  // per breakpoint, sorted unique
  Link link = Link::Identity;

  bool is_corner(size_t k) const { return crossing_features[k].size() > 1; }
  double score(size_t segment) const { return apply_link(link, segment_values[segment]); }
};

// True when two crossing parameters are considered the same breakpoint
// (relative 1e-12, absolute 1e-15 near zero; one division of rounding each).
inline bool coincident_alphas(double a, double b) {
  const double tol = std::max(1e-15, 1e-12 * std::max(std::abs(a), std::abs(b)));
  return std::abs(a - b) <= tol;
}

// K-way heap merge of per-tree event lists (O(n_alpha * log2 n_trees)
// comparisons). Coincident alphas on the same feature collapse into one
// breakpoint; on different features they are flagged as a corner. Segment
// margins are re-aggregated from the per-tree segment values in tree order,
// so they match TreeEnsemble::margin at any interior point bit-exactly.
// Unsorted input raises std::logic_error.
SegmentList merge_ensemble_splits(const std::vector<TreePathSplits>& per_tree,
                                  Aggregation aggregation, Link link);

}  // namespace pathattr
