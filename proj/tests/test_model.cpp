#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pathattr/model.hpp"
#include "pathattr/model_json.hpp"
#include "pathattr/synth.hpp"
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

// central finite differences, step 1e-6
std::vector<double> fd_gradient(const AnalyticModel& m, std::vector<double> x) {
  const double h = 1e-6;
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = m.eval(x);
    x[i] = saved - h;
    const double down = m.eval(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("depth-1 tree routes left below the threshold") {
  TreeEnsemble e;
  e.n_features = 1;
  e.trees.push_back(make_stump(0, 0.5, 0.0, 1.0));
  const Model m(e);
  CHECK(m.eval(std::vector<double>{0.2}) == 0.0);
  CHECK(m.eval(std::vector<double>{0.7}) == 1.0);
  // equality routes right
  CHECK(m.eval(std::vector<double>{0.5}) == 1.0);
}

TEST_CASE("linear model evaluates w.x + bias") {
  const Model m(AnalyticModel::linear({2.0, 3.0}, 1.0));
  CHECK(m.eval(std::vector<double>{1.0, 1.0}) == 6.0);
}

TEST_CASE("tanh field sits at 1/2 on the centerline") {
  const AnalyticModel field = AnalyticModel::tanh_field(0.125, default_centerline());
  CHECK(field.eval(std::vector<double>{0.5, 0.5}) == 0.5);
  // centerline polynomial spot value
  CHECK(default_centerline()(0.25) == 1.75);
}

TEST_CASE("eval rejects dimension mismatches") {
  const Model m(AnalyticModel::linear({1.0, 1.0}, 0.0));
  CHECK_THROWS_AS(m.eval(std::vector<double>{1.0}), InputError);
  CHECK_THROWS_AS(m.eval(std::vector<double>{1.0, 2.0, 3.0}), InputError);
}

TEST_CASE("closed-form gradients") {
  SUBCASE("bilinear product rule") {
    // f = x0 * x1
    const AnalyticModel m = AnalyticModel::bilinear(2, {0.0, 1.0, 0.0, 0.0});
    const auto g = m.grad(std::vector<double>{3.0, 7.0});
    CHECK(g[0] == 7.0);
    CHECK(g[1] == 3.0);
  }
  SUBCASE("linear gradient is the weight vector") {
    const AnalyticModel m = AnalyticModel::linear({2.0, -3.0, 0.5}, 4.0);
    const auto g = m.grad(std::vector<double>{9.0, 9.0, 9.0});
    CHECK(g == std::vector<double>{2.0, -3.0, 0.5});
  }
  SUBCASE("tanh field matches central differences at the center") {
    const AnalyticModel m = AnalyticModel::tanh_field(0.125, default_centerline());
    const std::vector<double> x{0.5, 0.5};
    const auto g = m.grad(x);
    const auto fd = fd_gradient(m, x);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(g[i] - fd[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST_CASE("gradient is unsupported on tree ensembles") {
  TreeEnsemble e;
  e.n_features = 1;
  e.trees.push_back(make_stump(0, 0.5, 0.0, 1.0));
  const Model m(e);
  CHECK_THROWS_AS(m.grad(std::vector<double>{0.2}), UnsupportedOperation);
}

TEST_CASE("gradients match central differences on random points") {
  RandomStream rng(2024);
  const double h_tol = 1e-5;

  const auto check_model = [&](const AnalyticModel& m, auto&& sample_point) {
    for (int rep = 0; rep < 100; ++rep) {
      const std::vector<double> x = sample_point();
      const auto g = m.grad(x);
      const auto fd = fd_gradient(m, x);
      for (size_t i = 0; i < g.size(); ++i) {
        const double scale = std::max(1e-3, std::abs(g[i]));
        CHECK(std::abs(g[i] - fd[i]) / scale < h_tol);
      }
    }
  };

  SUBCASE("linear") {
    check_model(AnalyticModel::linear({1.5, -2.0, 0.25}, 0.5),
                [&] { return random_point(rng, 3); });
  }
  SUBCASE("separable") {
    check_model(random_separable(rng, 3), [&] { return random_point(rng, 3); });
  }
  SUBCASE("bilinear") {
    check_model(random_bilinear(rng, 4), [&] { return random_point(rng, 4); });
  }
  SUBCASE("tanh field near the transition") {
    const AnalyticModel m = AnalyticModel::tanh_field(0.125, default_centerline());
    check_model(m, [&] {
      const double x1 = rng.uniform(0.2, 0.8);
      const double x2 = default_centerline()(x1) + rng.uniform(-0.25, 0.25);
      return std::vector<double>{x1, x2};
    });
  }
  SUBCASE("combination") {
    std::vector<AnalyticModel> parts{random_separable(rng, 3), random_bilinear(rng, 3)};
    check_model(AnalyticModel::combination({0.7, -1.3}, std::move(parts)),
                [&] { return random_point(rng, 3); });
  }
}

TEST_CASE("combination eval equals the weighted sum of part evals") {
  RandomStream rng(7);
  const AnalyticModel a = random_separable(rng, 3);
  const AnalyticModel b = random_bilinear(rng, 3);
  const AnalyticModel combo = AnalyticModel::combination({0.5, -2.0}, {a, b});
  for (int rep = 0; rep < 200; ++rep) {
    const auto x = random_point(rng, 3);
    const double expected = 0.5 * a.eval(x) - 2.0 * b.eval(x);
    CHECK(std::abs(combo.eval(x) - expected) < 1e-12);
  }
}

TEST_CASE("eval is pure") {
  RandomStream rng(11);
  const TreeEnsemble e = random_tree_ensemble(rng, 20, 4, 5);
  const Model m(e);
  const auto x = random_point(rng, 4);
  const double first = m.eval(x);
  for (int rep = 0; rep < 10; ++rep) CHECK(m.eval(x) == first);
}

TEST_CASE("mixed partials") {
  const AnalyticModel bl = AnalyticModel::bilinear(2, {0.0, 1.0, 0.25, 0.0});
  CHECK(*bl.mixed_partial(0, 1) == 1.25);
  const AnalyticModel sep =
      AnalyticModel::separable({Polynomial({0, 1}), Polynomial({0, 1})});
  CHECK(*sep.mixed_partial(0, 1) == 0.0);
  const AnalyticModel tf = AnalyticModel::tanh_field(0.125, default_centerline());
  CHECK(!tf.mixed_partial(0, 1).has_value());
}

// ============================================================================
// JSON document round trips
// ============================================================================

TEST_CASE("single stump document loads") {
  const std::string doc = R"({
    "format_version": 1, "kind": "tree_ensemble", "n_features": 2,
    "link": "identity", "aggregation": "sum",
    "trees": [{"feature": [0, -1, -1], "threshold": [0.5, 0, 0],
               "value": [0, 0, 1], "left": [1, -1, -1], "right": [2, -1, -1]}]})";
  const Model m = load_model(doc);
  const TreeEnsemble* e = m.as_tree_ensemble();
  REQUIRE(e != nullptr);
  CHECK(e->trees.size() == 1);
  CHECK(e->trees[0].node_count() == 3);
}

TEST_CASE("schema violations carry the offending path") {
  SUBCASE("child index out of range") {
    const std::string doc = R"({
      "format_version": 1, "kind": "tree_ensemble", "n_features": 2,
      "link": "identity", "aggregation": "sum",
      "trees": [{"feature": [0, -1, -1], "threshold": [0.5, 0, 0],
                 "value": [0, 0, 1], "left": [5, -1, -1], "right": [2, -1, -1]}]})";
    try {
      load_model(doc);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.path()).find("trees[0]") != std::string::npos);
      CHECK(std::string(e.what()).find("5") != std::string::npos);
    }
  }
  SUBCASE("leaf sentinel violation") {
    const std::string doc = R"({
      "format_version": 1, "kind": "tree_ensemble", "n_features": 2,
      "link": "identity", "aggregation": "sum",
      "trees": [{"feature": [0], "threshold": [0.5], "value": [0],
                 "left": [7], "right": [7]}]})";
    CHECK_THROWS_AS(load_model(doc), SchemaError);
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(load_model("{nope"), SchemaError); }
  SUBCASE("unknown kind") {
    CHECK_THROWS_AS(load_model(R"({"format_version": 1, "kind": "mystery"})"), SchemaError);
  }
  SUBCASE("unknown link") {
    const std::string doc = R"({
      "format_version": 1, "kind": "tree_ensemble", "n_features": 1,
      "link": "probit", "aggregation": "sum", "trees": []})";
    CHECK_THROWS_AS(load_model(doc), SchemaError);
  }
}

TEST_CASE("trained ensemble round-trips through the document form") {
  // train a real 100-tree ensemble, save, reload, probe
  RandomStream rng(5);
  synth::ToyFieldSpec field;
  const auto data = synth::gen_double_gaussian(synth::default_gaussian0(),
                                               synth::default_gaussian1(), 300, field, 99);
  synth::TrainerConfig cfg;
  cfg.n_trees = 100;
  cfg.seed = 17;
  const TreeEnsemble trained = synth::train_extra_trees(data, cfg);
  const Model original(trained);

  const std::string doc = save_model(original);
  const Model reloaded = load_model(doc);

  for (int rep = 0; rep < 10000; ++rep) {
    const auto x = random_point(rng, 2, -1.0, 2.0);
    CHECK(original.eval(x) == reloaded.eval(x));
  }

  // a second save is byte-identical (shortest round-trip floats)
  CHECK(save_model(reloaded) == doc);
}

TEST_CASE("analytic models round-trip through the document form") {
  RandomStream rng(31);
  const AnalyticModel combo = AnalyticModel::combination(
      {1.0, 0.5},
      {random_separable(rng, 2), AnalyticModel::tanh_field(0.125, default_centerline())});
  const Model original(combo);
  const Model reloaded = load_model(save_model(original));
  for (int rep = 0; rep < 1000; ++rep) {
    const auto x = random_point(rng, 2);
    CHECK(original.eval(x) == reloaded.eval(x));
  }
}
