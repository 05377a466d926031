#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pathattr/splits.hpp"
#include "testutil.hpp"

using namespace pathattr;
using namespace pathattr::testutil;

namespace {

Tree make_stump(int feature, double threshold, double left_value, double right_value) {
  Tree t;
  t.feature = {feature, -1, -1};
  t.threshold = {threshold, 0.0, 0.0};
  t.value = {0.0, left_value, right_value};
  t.left = {1, -1, -1};
  t.right = {2, -1, -1};
  return t;
}

std::vector<double> path_point(std::span<const double> a, std::span<const double> b,
                               double alpha) {
  std::vector<double> p(a.size());
  for (size_t i = 0; i < p.size(); ++i) p[i] = a[i] + alpha * (b[i] - a[i]);
  return p;
}

// value implied by the extracted profile at an interior alpha
double profile_value(const TreePathSplits& splits, double alpha) {
  size_t seg = 0;
  while (seg < splits.events.size() && splits.events[seg].alpha < alpha) ++seg;
  return splits.segment_values[seg];
}

}  // namespace

TEST_CASE("stump crossing is interpolated linearly") {
  const Tree stump = make_stump(0, 0.5, 0.0, 1.0);
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  const TreePathSplits splits = find_path_tree_splits(stump, a, b);

  REQUIRE(splits.events.size() == 1);
  CHECK(splits.events[0].alpha == 0.5);
  CHECK(splits.events[0].feature == 0);
  CHECK(splits.events[0].threshold == 0.5);
  CHECK(splits.events[0].value_before == 0.0);
  REQUIRE(splits.segment_values.size() == 2);
  CHECK(splits.segment_values[0] == 0.0);
  CHECK(splits.segment_values[1] == 1.0);
}

TEST_CASE("a path inside one leaf region yields a single segment") {
  const Tree stump = make_stump(0, 0.5, -2.0, 3.0);
  const TreePathSplits splits =
      find_path_tree_splits(stump, std::vector<double>{0.1, 0.0}, std::vector<double>{0.4, 1.0});
  CHECK(splits.events.empty());
  REQUIRE(splits.segment_values.size() == 1);
  CHECK(splits.terminal_value() == -2.0);
}

TEST_CASE("zero-length path yields a single segment") {
  const Tree stump = make_stump(0, 0.5, -2.0, 3.0);
  const std::vector<double> p{0.5, 0.5};
  const TreePathSplits splits = find_path_tree_splits(stump, p, p);
  CHECK(splits.events.empty());
  CHECK(splits.terminal_value() == 3.0);  // equality routes right
}

TEST_CASE("NaN endpoints are rejected") {
  const Tree stump = make_stump(0, 0.5, 0.0, 1.0);
  const std::vector<double> good{0.0, 0.0};
  const std::vector<double> bad{std::nan(""), 0.0};
  CHECK_THROWS_AS(find_path_tree_splits(stump, bad, good), InputError);
  CHECK_THROWS_AS(find_path_tree_splits(stump, good, bad), InputError);
}

TEST_CASE("random trees agree with a dense alpha scan") {
  RandomStream rng(300);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.bounded(3));
    const Tree tree = random_tree(rng, n, 3 + static_cast<int>(rng.bounded(3)));
    const auto a = random_point(rng, n);
    const auto b = random_point(rng, n);
    const TreePathSplits splits = find_path_tree_splits(tree, a, b);

    // alphas sorted, inside [0, 1], crossing features valid
    for (size_t k = 0; k < splits.events.size(); ++k) {
      CHECK(splits.events[k].alpha >= 0.0);
      CHECK(splits.events[k].alpha <= 1.0);
      if (k > 0) CHECK(splits.events[k].alpha >= splits.events[k - 1].alpha);
      CHECK(splits.events[k].feature >= 0);
      CHECK(splits.events[k].feature < n);
      CHECK(splits.events[k].value_before == splits.segment_values[k]);
    }

    const int grid = 100000;
    double prev_value = tree.eval(path_point(a, b, 0.0));
    for (int g = 1; g <= grid; ++g) {
      const double alpha = static_cast<double>(g) / grid;
      const double direct = tree.eval(path_point(a, b, alpha));

      // profile reproduces the direct evaluation away from breakpoints
      bool near_breakpoint = false;
      for (const SplitEvent& ev : splits.events) {
        if (std::abs(ev.alpha - alpha) < 1e-9) near_breakpoint = true;
      }
      if (!near_breakpoint) CHECK(profile_value(splits, alpha) == direct);

      // every detected value change sits within 1e-5 of a reported alpha
      if (direct != prev_value) {
        const double lo = alpha - 1.0 / grid;
        bool matched = false;
        for (const SplitEvent& ev : splits.events) {
          if (ev.alpha >= lo - 1e-5 && ev.alpha <= alpha + 1e-5) matched = true;
        }
        CHECK(matched);
      }
      prev_value = direct;
    }
  }
}

TEST_CASE("endpoint exactly on a threshold still accounts for the jump") {
  const Tree stump = make_stump(0, 0.5, -1.0, 2.0);
  SUBCASE("start on the threshold, moving down") {
    const TreePathSplits splits = find_path_tree_splits(stump, std::vector<double>{0.5, 0.0},
                                                        std::vector<double>{0.0, 1.0});
    REQUIRE(splits.events.size() == 1);
    CHECK(splits.events[0].alpha == 0.0);
    CHECK(splits.segment_values[0] == 2.0);  // value at the start point itself
    CHECK(splits.segment_values[1] == -1.0);
  }
  SUBCASE("start on the threshold, moving up stays in one region") {
    const TreePathSplits splits = find_path_tree_splits(stump, std::vector<double>{0.5, 0.0},
                                                        std::vector<double>{1.0, 1.0});
    CHECK(splits.events.empty());
    CHECK(splits.terminal_value() == 2.0);
  }
}

// ============================================================================
// Ensemble merge
// ============================================================================

TEST_CASE("two stumps on one feature merge into three segments") {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  std::vector<TreePathSplits> per_tree;
  per_tree.push_back(find_path_tree_splits(make_stump(0, 0.3, 0.0, 1.0), a, b));
  per_tree.push_back(find_path_tree_splits(make_stump(0, 0.6, 0.0, 10.0), a, b));

  const SegmentList merged = merge_ensemble_splits(per_tree, Aggregation::Sum, Link::Identity);
  REQUIRE(merged.breakpoints.size() == 2);
  CHECK(merged.breakpoints[0] == 0.3);
  CHECK(merged.breakpoints[1] == 0.6);
  REQUIRE(merged.segment_values.size() == 3);
  CHECK(merged.segment_values[0] == 0.0);
  CHECK(merged.segment_values[1] == 1.0);
  CHECK(merged.segment_values[2] == 11.0);
  CHECK(!merged.is_corner(0));
  CHECK(!merged.is_corner(1));
}

TEST_CASE("coincident alphas on different features flag a corner") {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  std::vector<TreePathSplits> per_tree;
  per_tree.push_back(find_path_tree_splits(make_stump(0, 0.5, 0.0, 1.0), a, b));
  per_tree.push_back(find_path_tree_splits(make_stump(1, 0.5, 0.0, 5.0), a, b));

  const SegmentList merged = merge_ensemble_splits(per_tree, Aggregation::Sum, Link::Identity);
  REQUIRE(merged.breakpoints.size() == 1);
  CHECK(merged.breakpoints[0] == 0.5);
  CHECK(merged.is_corner(0));
  CHECK(merged.crossing_features[0] == std::vector<int>{0, 1});
  CHECK(merged.segment_values[0] == 0.0);
  CHECK(merged.segment_values[1] == 6.0);
}

TEST_CASE("coincident alphas on the same feature collapse into one breakpoint") {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1.0, 1.0};
  std::vector<TreePathSplits> per_tree;
  per_tree.push_back(find_path_tree_splits(make_stump(0, 0.5, 0.0, 1.0), a, b));
  per_tree.push_back(find_path_tree_splits(make_stump(0, 0.5, 0.0, 2.0), a, b));

  const SegmentList merged = merge_ensemble_splits(per_tree, Aggregation::Sum, Link::Identity);
  REQUIRE(merged.breakpoints.size() == 1);
  CHECK(!merged.is_corner(0));
  CHECK(merged.segment_values[1] == 3.0);
}

TEST_CASE("merged segment values equal dense-scan margins exactly") {
  RandomStream rng(301);
  for (const Aggregation agg : {Aggregation::Sum, Aggregation::Mean}) {
    const TreeEnsemble ensemble = [&] {
      TreeEnsemble e = random_stump_ensemble(rng, 50, 3);
      e.aggregation = agg;
      return e;
    }();
    const auto a = random_point(rng, 3);
    const auto b = random_point(rng, 3);

    std::vector<TreePathSplits> per_tree;
    for (const Tree& t : ensemble.trees) {
      per_tree.push_back(find_path_tree_splits(t, a, b));
    }
    const SegmentList merged = merge_ensemble_splits(per_tree, agg, ensemble.link);

    // midpoint of every open segment, bit-exact against direct evaluation
    for (size_t seg = 0; seg < merged.segment_values.size(); ++seg) {
      const double lo = seg == 0 ? 0.0 : merged.breakpoints[seg - 1];
      const double hi = seg == merged.breakpoints.size() ? 1.0 : merged.breakpoints[seg];
      if (!(hi > lo)) continue;  // zero-width boundary segment
      const double mid = 0.5 * (lo + hi);
      CHECK(merged.segment_values[seg] == ensemble.margin(path_point(a, b, mid)));
    }
  }
}

TEST_CASE("unsorted per-tree events are a contract violation") {
  TreePathSplits bogus;
  bogus.events = {SplitEvent{0.7, 0, 0.7, 0.0}, SplitEvent{0.3, 0, 0.3, 0.0}};
  bogus.segment_values = {0.0, 1.0, 2.0};
  CHECK_THROWS_AS(merge_ensemble_splits({bogus}, Aggregation::Sum, Link::Identity),
                  std::logic_error);
}

TEST_CASE("link is applied at evaluation time") {
  const std::vector<double> a{0.0};
  const std::vector<double> b{1.0};
  std::vector<TreePathSplits> per_tree;
  Tree stump = make_stump(0, 0.5, -2.0, 2.0);
  per_tree.push_back(find_path_tree_splits(stump, a, b));
  const SegmentList merged =
      merge_ensemble_splits(per_tree, Aggregation::Sum, Link::Logistic);
  CHECK(merged.segment_values[0] == -2.0);  // stored in margin space
  CHECK(merged.score(0) == apply_link(Link::Logistic, -2.0));
  CHECK(merged.score(1) == apply_link(Link::Logistic, 2.0));
}
