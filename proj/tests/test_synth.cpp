#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pathattr/io.hpp"
#include "pathattr/synth.hpp"
#include "testutil.hpp"

using namespace pathattr;
using namespace pathattr::synth;
using pathattr::testutil::random_point;

TEST_CASE("toy probability field") {
  const ToyFieldSpec field;
  SUBCASE("the centerline pins probability one half") {
    CHECK(field.probability(0.5, 0.5) == 0.5);
  }
  SUBCASE("saturation far above the centerline") {
    CHECK(field.probability(0.5, 100.0) > 1.0 - 1e-12);
    CHECK(field.probability(0.5, 100.0) <= 1.0);
    CHECK(field.probability(0.5, -100.0) < 1e-12);
  }
  SUBCASE("half a unit above the center of the field") {
    // (1 - centerline(0.5)) / delta = 4
    CHECK(field.probability(0.5, 1.0) ==
          doctest::Approx(0.99966464986953352).epsilon(1e-15));
  }
}

TEST_CASE("double gaussian sampler") {
  const ToyFieldSpec field;
  SUBCASE("yields n per gaussian with the right sources") {
    const auto samples =
        gen_double_gaussian(default_gaussian0(), default_gaussian1(), 300, field, 7);
    REQUIRE(samples.size() == 600);
    for (int i = 0; i < 300; ++i) CHECK(samples[i].source == SampleSource::Gaussian0);
    for (int i = 300; i < 600; ++i) CHECK(samples[i].source == SampleSource::Gaussian1);
  }
  SUBCASE("is deterministic in the seed") {
    const auto a =
        gen_double_gaussian(default_gaussian0(), default_gaussian1(), 50, field, 11);
    const auto b =
        gen_double_gaussian(default_gaussian0(), default_gaussian1(), 50, field, 11);
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].x1 == b[i].x1);
      CHECK(a[i].x2 == b[i].x2);
      CHECK(a[i].label == b[i].label);
    }
  }
  SUBCASE("moments match the rotated covariance") {
    const int n = 100000;
    const auto samples =
        gen_double_gaussian(default_gaussian0(), default_gaussian1(), n, field, 13);
    // rotate gaussian0 draws into the 45-degree frame
    const double inv_sqrt2 = 0.7071067811865476;
    double mean_u = 0.0, mean_v = 0.0;
    for (int i = 0; i < n; ++i) {
      mean_u += (samples[i].x1 + samples[i].x2) * inv_sqrt2;
      mean_v += (samples[i].x2 - samples[i].x1) * inv_sqrt2;
    }
    mean_u /= n;
    mean_v /= n;
    double var_u = 0.0, var_v = 0.0, cov_uv = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = (samples[i].x1 + samples[i].x2) * inv_sqrt2 - mean_u;
      const double v = (samples[i].x2 - samples[i].x1) * inv_sqrt2 - mean_v;
      var_u += u * u;
      var_v += v * v;
      cov_uv += u * v;
    }
    var_u /= n - 1;
    var_v /= n - 1;
    cov_uv /= n - 1;
    CHECK(std::abs(var_u - 0.16) < 0.02 * 0.16);
    CHECK(std::abs(var_v - 0.04) < 0.02 * 0.04);
    CHECK(std::abs(cov_uv) < 0.002);
  }
  SUBCASE("labels follow the field probability") {
    const auto samples =
        gen_double_gaussian(default_gaussian0(), default_gaussian1(), 100000, field, 17);
    // gaussian1 sits deep in the class-2 region
    int class2 = 0;
    for (size_t i = samples.size() / 2; i < samples.size(); ++i) {
      class2 += samples[i].label == 2 ? 1 : 0;
    }
    CHECK(static_cast<double>(class2) / (samples.size() / 2) > 0.85);
  }
}

TEST_CASE("uniform background sampler") {
  const ToyFieldSpec field;
  const Bounds2D bounds;
  SUBCASE("counts") {
    CHECK(gen_uniform_background(25, bounds, field, 3).size() == 25);
    CHECK(gen_uniform_background(0, bounds, field, 3).empty());
  }
  SUBCASE("degenerate bounds rejected") {
    CHECK_THROWS_AS(gen_uniform_background(5, Bounds2D{1.0, 1.0, 0.0, 1.0}, field, 3),
                    InputError);
  }
  SUBCASE("mean sits at the box center") {
    const auto samples = gen_uniform_background(100000, bounds, field, 5);
    double m1 = 0.0, m2 = 0.0;
    for (const auto& s : samples) {
      m1 += s.x1;
      m2 += s.x2;
    }
    m1 /= samples.size();
    m2 /= samples.size();
    // within 1% of the box extent
    CHECK(std::abs(m1 - 0.5) < 0.03);
    CHECK(std::abs(m2 - 0.5) < 0.03);
  }
}

// ============================================================================
// Trainer
// ============================================================================

namespace {

std::vector<LabeledSample> blob_data() {
  // two well-separated blobs: class 1 near (0,0), class 2 near (3,3)
  RandomStream rng(19);
  std::vector<LabeledSample> data;
  for (int i = 0; i < 200; ++i) {
    LabeledSample a{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1,
                    SampleSource::Gaussian0};
    LabeledSample b{rng.uniform(2.5, 3.5), rng.uniform(2.5, 3.5), 2,
                    SampleSource::Gaussian1};
    data.push_back(a);
    data.push_back(b);
  }
  return data;
}

}  // namespace

TEST_CASE("separated blobs train to high accuracy") {
  const auto data = blob_data();
  TrainerConfig cfg;
  cfg.n_trees = 30;
  cfg.seed = 2;
  const TreeEnsemble e = train_extra_trees(data, cfg);
  const Model m(e);
  int correct = 0;
  for (const auto& s : data) {
    const double p = m.eval(std::vector<double>{s.x1, s.x2});
    const int predicted = p >= 0.5 ? 2 : 1;
    correct += predicted == s.label ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("single-class data trains to a constant ensemble") {
  std::vector<LabeledSample> data;
  RandomStream rng(23);
  for (int i = 0; i < 50; ++i) {
    data.push_back(LabeledSample{rng.uniform01(), rng.uniform01(), 2,
                                 SampleSource::Gaussian1});
  }
  TrainerConfig cfg;
  cfg.n_trees = 10;
  const TreeEnsemble e = train_extra_trees(data, cfg);
  for (const Tree& t : e.trees) CHECK(t.node_count() == 1);
  const Model m(e);
  CHECK(m.eval(std::vector<double>{0.5, 0.5}) == 1.0);
}

TEST_CASE("training is deterministic in the seed") {
  const auto data = blob_data();
  TrainerConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 31;
  const TreeEnsemble a = train_extra_trees(data, cfg);
  const TreeEnsemble b = train_extra_trees(data, cfg);
  REQUIRE(a.trees.size() == b.trees.size());
  for (size_t t = 0; t < a.trees.size(); ++t) {
    CHECK(a.trees[t].feature == b.trees[t].feature);
    CHECK(a.trees[t].threshold == b.trees[t].threshold);
    CHECK(a.trees[t].value == b.trees[t].value);
    CHECK(a.trees[t].left == b.trees[t].left);
    CHECK(a.trees[t].right == b.trees[t].right);
  }
}

TEST_CASE("trained scores stay inside [0, 1]") {
  const ToyFieldSpec field;
  const auto data =
      gen_double_gaussian(default_gaussian0(), default_gaussian1(), 150, field, 29);
  TrainerConfig cfg;
  cfg.n_trees = 40;
  cfg.seed = 5;
  const Model m(train_extra_trees(data, cfg));
  RandomStream rng(30);
  for (int rep = 0; rep < 2000; ++rep) {
    const double p = m.eval(random_point(rng, 2, -2.0, 3.0));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // trained trees validate structurally
  const TreeEnsemble* e = m.as_tree_ensemble();
  REQUIRE(e != nullptr);
  CHECK_NOTHROW(e->validate());
}

TEST_CASE("max depth is honored") {
  const auto data = blob_data();
  TrainerConfig cfg;
  cfg.n_trees = 5;
  cfg.max_depth = 3;
  cfg.seed = 7;
  const TreeEnsemble e = train_extra_trees(data, cfg);
  for (const Tree& t : e.trees) CHECK(t.depth() <= 3);
}

// ============================================================================
// Centerline selection
// ============================================================================

TEST_CASE("selection returns k class-2 points inside the band") {
  const ToyFieldSpec field;
  const auto data =
      gen_double_gaussian(default_gaussian0(), default_gaussian1(), 300, field, 37);
  const auto selection = select_centerline_points(data, 20, 0.05);
  CHECK(!selection.truncated);
  REQUIRE(selection.points.size() == 20);
  for (const auto& p : selection.points) {
    CHECK(std::abs(p[0] - p[1]) < 0.05);
  }
}

TEST_CASE("k=1 with a huge band returns the closest class-2 point to the line") {
  const ToyFieldSpec field;
  const auto data =
      gen_double_gaussian(default_gaussian0(), default_gaussian1(), 300, field, 37);
  const auto selection = select_centerline_points(data, 1, 1e9);
  REQUIRE(selection.points.size() == 1);
  double best = 1e300;
  for (const auto& s : data) {
    if (s.label == 2) best = std::min(best, std::abs(s.x1 - s.x2));
  }
  CHECK(std::abs(selection.points[0][0] - selection.points[0][1]) == best);
}

TEST_CASE("too few candidates returns everything with a flag") {
  std::vector<LabeledSample> data;
  data.push_back(LabeledSample{0.5, 0.5, 2, SampleSource::Gaussian1});
  data.push_back(LabeledSample{0.6, 0.61, 2, SampleSource::Gaussian1});
  data.push_back(LabeledSample{0.4, 0.9, 2, SampleSource::Gaussian1});  // out of band
  data.push_back(LabeledSample{0.7, 0.7, 1, SampleSource::Gaussian0});  // wrong class
  const auto selection = select_centerline_points(data, 20, 0.05);
  CHECK(selection.truncated);
  CHECK(selection.points.size() == 2);
}

TEST_CASE("greedy selection spreads farther than random in-band picks") {
  const ToyFieldSpec field;
  const auto data =
      gen_double_gaussian(default_gaussian0(), default_gaussian1(), 300, field, 43);
  const auto selection = select_centerline_points(data, 20, 0.05);
  REQUIRE(selection.points.size() == 20);
  const auto spread = [](const std::vector<std::array<double, 2>>& pts) {
    double best = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      for (size_t j = i + 1; j < pts.size(); ++j) {
        const double dx = pts[i][0] - pts[j][0];
        const double dy = pts[i][1] - pts[j][1];
        best = std::max(best, std::hypot(dx, dy));
      }
    }
    return best;
  };
  const double greedy_spread = spread(selection.points);

  std::vector<std::array<double, 2>> in_band;
  for (const auto& s : data) {
    if (s.label == 2 && std::abs(s.x1 - s.x2) < 0.05) in_band.push_back({s.x1, s.x2});
  }
  std::vector<double> random_spreads;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(seed);
    std::vector<std::array<double, 2>> sample = in_band;
    rng.shuffle(sample);
    sample.resize(20);
    random_spreads.push_back(spread(sample));
  }
  std::sort(random_spreads.begin(), random_spreads.end());
  const double median_random = random_spreads[random_spreads.size() / 2];
  CHECK(greedy_spread >= median_random);
}

// ============================================================================
// Ratio experiment
// ============================================================================

TEST_CASE("the ratio experiment emits a deterministic, well-formed table") {
  ExperimentConfig config;
  config.background_counts = {0};
  config.seeds = {3};
  config.trainer.n_trees = 20;
  config.n_points = 5;
  config.target_stderr = 0.0;

  const auto rows = run_ratio_experiment(config);
  REQUIRE(rows.size() == 10);  // 1 background x 1 seed x 5 points x 2 methods
  for (size_t r = 0; r < rows.size(); ++r) {
    CHECK(rows[r].point_idx == static_cast<int>(r / 2));
    CHECK(rows[r].method == (r % 2 == 0 ? Method::Gig : Method::ShapleyExact));
    CHECK(rows[r].background_n == 0);
    CHECK(std::abs(rows[r].efficiency_residual) < 1e-6);
    if (!rows[r].unstable) {
      CHECK(rows[r].ratio == doctest::Approx(rows[r].phi1 / rows[r].phi2));
    }
  }

  const auto rows2 = run_ratio_experiment(config);
  REQUIRE(rows2.size() == rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    CHECK(rows[r].phi1 == rows2[r].phi1);
    CHECK(rows[r].phi2 == rows2[r].phi2);
  }

  const RatioSummary summary = summarize_ratios(rows, 0, 3, Method::Gig);
  CHECK(summary.n_stable > 0);
  CHECK(std::isfinite(summary.median_ratio));
}

TEST_CASE("experiment table round-trips through CSV") {
  ExperimentConfig config;
  config.background_counts = {0};
  config.seeds = {3};
  config.trainer.n_trees = 10;
  config.n_points = 3;
  const auto rows = run_ratio_experiment(config);

  const auto path = std::filesystem::temp_directory_path() / "pathattr_test_table.csv";
  io::write_experiment_csv(path, rows);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "background_n,seed,point_idx,x1,x2,method,phi1,phi2,ratio,stderr1,stderr2,"
        "efficiency_residual,converged");
  int data_lines = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++data_lines;
  }
  CHECK(data_lines == static_cast<int>(rows.size()));
  std::filesystem::remove(path);
}

TEST_CASE("dataset CSV round-trips") {
  const ToyFieldSpec field;
  const auto samples =
      gen_double_gaussian(default_gaussian0(), default_gaussian1(), 20, field, 47);
  const auto path = std::filesystem::temp_directory_path() / "pathattr_test_data.csv";
  io::write_dataset_csv(path, samples);
  const auto loaded = io::read_dataset_csv(path);
  REQUIRE(loaded.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].x1 == samples[i].x1);
    CHECK(loaded[i].x2 == samples[i].x2);
    CHECK(loaded[i].label == samples[i].label);
    CHECK(loaded[i].source == samples[i].source);
  }
  // datasets double as point files
  const auto points = io::read_points_csv(path);
  REQUIRE(points.size() == samples.size());
  CHECK(points[0].size() == 2);
  CHECK(points[0][0] == samples[0].x1);
  std::filesystem::remove(path);
}
