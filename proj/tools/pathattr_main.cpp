// pathattr: path-based feature attribution for tree ensembles and analytic
// models, plus the synthetic data-missingness experiment harness.

#include <chrono>
#include <cstring>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pathattr/batch.hpp"
#include "pathattr/gig.hpp"
#include "pathattr/io.hpp"
#include "pathattr/model.hpp"
#include "pathattr/model_json.hpp"
#include "pathattr/rng.hpp"
#include "pathattr/shapley.hpp"
#include "pathattr/synth.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using nlohmann::json;
using namespace pathattr;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitComputationError = 3;

struct Timer {
  std::chrono::steady_clock::time_point begin = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  }
};

void write_manifest(const std::filesystem::path& output_path, const json& body) {
  const std::filesystem::path manifest_path = output_path.string() + ".manifest.json";
  io::atomic_write_text(manifest_path, body.dump(2) + "\n");
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InputError(std::string("cannot parse ") + what + " list entry '" + item + "'");
    }
  }
  if (out.empty()) throw InputError(std::string(what) + " list is empty");
  return out;
}

// order-independent per-reference seed: hash of the base seed and the
// reference's raw coordinate bits
uint64_t seed_for_point(uint64_t base, std::span<const double> point) {
  uint64_t h = splitmix64(base);
  for (double v : point) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

// ============================================================================
// attribute
// ============================================================================

struct AttributeArgs {
  std::string model_path;
  std::string points_path;
  std::string refs_path;
  std::string method = "gig";
  std::string out_path;
  std::string format = "csv";
  uint64_t seed = 0;
  double target_stderr = 0.0;
  int corner_limit = 20;
  int max_permutations = 2000;
  bool serial = false;
};

int cmd_attribute(const AttributeArgs& args) {
  const auto method = parse_method(args.method);
  if (!method) throw InputError("unknown method '" + args.method + "'");
  if (args.format != "csv" && args.format != "json") {
    throw InputError("format must be csv or json");
  }

  const Model model = load_model_file(args.model_path);
  const auto points = io::read_points_csv(args.points_path);
  const auto ref_points = io::read_points_csv(args.refs_path);
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != model.n_features()) {
      throw InputError("points file dimension does not match the model");
    }
  }
  ReferenceSet refs;
  refs.points = ref_points;
  refs.validate(model.n_features());

  GigConfig gig_config;
  gig_config.corner_limit = args.corner_limit;

  const auto make_attributor = [&]() -> PairAttributor {
    switch (*method) {
      case Method::Gig:
        return make_gig_attributor(model, gig_config);
      case Method::ShapleyExact:
        return make_shapley_exact_attributor(model);
      case Method::ShapleyPermutation: {
        const Model* m = &model;
        return [m](std::span<const double> expl, std::span<const double> ref) {
          return shapley_permutation(*m, ref, expl);
        };
      }
      case Method::ShapleySampled: {
        const Model* m = &model;
        SampledOptions sampled;
        sampled.max_permutations = args.max_permutations;
        sampled.target_stderr = args.target_stderr > 0 ? args.target_stderr : 1e-3;
        const uint64_t base = args.seed;
        return [m, sampled, base](std::span<const double> expl,
                                  std::span<const double> ref) {
          SampledOptions per_ref = sampled;
          per_ref.seed = seed_for_point(base, ref);
          return shapley_sampled(*m, ref, expl, per_ref).attribution;
        };
      }
    }
    throw InputError("unknown method");
  };
  const PairAttributor attributor = make_attributor();

  Timer timer;
  std::vector<ConvergenceReport> reports(points.size());
  std::exception_ptr first_error = nullptr;
  const Exec exec = args.serial ? Exec::Serial : Exec::Parallel;
  const bool parallel_points = exec == Exec::Parallel && points.size() > 1;

#pragma omp parallel for schedule(dynamic) if (parallel_points)
  for (long i = 0; i < static_cast<long>(points.size()); ++i) {
    try {
      ExpectationOptions opts;
      opts.target_stderr = args.target_stderr;
      opts.shuffle_seed = derive_seed(args.seed, static_cast<uint64_t>(i));
      opts.exec = parallel_points ? Exec::Serial : exec;
      reports[i] = expected_attribution(attributor, refs, points[i], opts);
    } catch (...) {
#pragma omp critical
      {
        if (!first_error) first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  const int n = model.n_features();
  if (args.format == "csv") {
    std::ostringstream out;
    out << "point_idx";
    for (int f = 1; f <= n; ++f) out << ",phi" << f;
    for (int f = 1; f <= n; ++f) out << ",stderr" << f;
    out << ",n_used,n_failed,converged,efficiency_residual\n";
    for (size_t i = 0; i < reports.size(); ++i) {
      const ConvergenceReport& r = reports[i];
      out << i;
      for (int f = 0; f < n; ++f) out << ',' << io::format_double(r.mean_phi[f]);
      for (int f = 0; f < n; ++f) out << ',' << io::format_double(r.stderr_phi[f]);
      out << ',' << r.n_used << ',' << r.n_failed << ',' << (r.converged ? 1 : 0) << ','
          << io::format_double(r.mean_residual) << '\n';
    }
    io::atomic_write_text(args.out_path, out.str());
  } else {
    json rows = json::array();
    for (size_t i = 0; i < reports.size(); ++i) {
      const ConvergenceReport& r = reports[i];
      json row;
      row["point_idx"] = i;
      row["phi"] = r.mean_phi;
      row["stderr"] = r.stderr_phi;
      row["n_used"] = r.n_used;
      row["n_failed"] = r.n_failed;
      row["converged"] = r.converged;
      row["efficiency_residual"] = r.mean_residual;
      rows.push_back(std::move(row));
    }
    io::atomic_write_text(args.out_path, rows.dump(2) + "\n");
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["subcommand"] = "attribute";
  manifest["method"] = args.method;
  manifest["model"] = args.model_path;
  manifest["points"] = args.points_path;
  manifest["refs"] = args.refs_path;
  manifest["seeds"] = {{"seed", args.seed}};
  manifest["tolerances"] = {{"target_stderr", args.target_stderr},
                            {"corner_limit", args.corner_limit},
                            {"quadrature_rel_tol", gig_config.quadrature.rel_tol}};
  manifest["wall_time_seconds"] = timer.seconds();
  manifest["output"] = args.out_path;
  write_manifest(args.out_path, manifest);
  return kExitOk;
}

// ============================================================================
// gen-data
// ============================================================================

struct GenDataArgs {
  std::string gaussians = "default";
  int n_per_gaussian = 300;
  int background = 0;
  std::string bounds = "-1,2,-1,2";
  uint64_t seed = 0;
  std::string out_path;
};

synth::Bounds2D parse_bounds(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      vals.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("cannot parse bounds entry '" + item + "'");
    }
  }
  if (vals.size() != 4) throw InputError("bounds must be x1_lo,x1_hi,x2_lo,x2_hi");
  return synth::Bounds2D{vals[0], vals[1], vals[2], vals[3]};
}

int cmd_gen_data(const GenDataArgs& args) {
  synth::GaussianSpec g0 = synth::default_gaussian0();
  synth::GaussianSpec g1 = synth::default_gaussian1();
  if (args.gaussians != "default") {
    std::vector<double> vals;
    std::stringstream ss(args.gaussians);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (vals.size() != 8) {
      throw InputError(
          "--gaussians must be 'default' or mu0_x,mu0_y,mu1_x,mu1_y,"
          "sigma_major,sigma_minor,sigma_major,sigma_minor");
    }
    g0 = synth::GaussianSpec{{vals[0], vals[1]}, vals[4], vals[5]};
    g1 = synth::GaussianSpec{{vals[2], vals[3]}, vals[6], vals[7]};
  }
  const synth::Bounds2D bounds = parse_bounds(args.bounds);
  const synth::ToyFieldSpec field;

  Timer timer;
  std::vector<synth::LabeledSample> samples = synth::gen_double_gaussian(
      g0, g1, args.n_per_gaussian, field, derive_seed(args.seed, 0xDA7AULL));
  if (args.background > 0) {
    const auto background = synth::gen_uniform_background(
        args.background, bounds, field, derive_seed(args.seed, 0xBA09ULL));
    samples.insert(samples.end(), background.begin(), background.end());
  }
  io::write_dataset_csv(args.out_path, samples);

  json manifest;
  manifest["format_version"] = 1;
  manifest["subcommand"] = "gen-data";
  manifest["seeds"] = {{"seed", args.seed}};
  manifest["n_per_gaussian"] = args.n_per_gaussian;
  manifest["background"] = args.background;
  manifest["bounds"] = args.bounds;
  manifest["tolerances"] = json::object();
  manifest["wall_time_seconds"] = timer.seconds();
  manifest["output"] = args.out_path;
  write_manifest(args.out_path, manifest);
  return kExitOk;
}

// ============================================================================
// train
// ============================================================================

struct TrainArgs {
  std::string data_path;
  std::string out_path;
  int n_trees = 100;
  int max_depth = -1;
  int min_samples_split = 2;
  int n_candidate_features = -1;
  uint64_t seed = 0;
  bool serial = false;
};

int cmd_train(const TrainArgs& args) {
  const auto data = io::read_dataset_csv(args.data_path);
  synth::TrainerConfig config;
  config.n_trees = args.n_trees;
  config.max_depth = args.max_depth;
  config.min_samples_split = args.min_samples_split;
  config.n_candidate_features = args.n_candidate_features;
  config.seed = args.seed;
  config.exec = args.serial ? Exec::Serial : Exec::Parallel;

  Timer timer;
  const TreeEnsemble ensemble = synth::train_extra_trees(data, config);
  save_model_file(Model(ensemble), args.out_path);

  json manifest;
  manifest["format_version"] = 1;
  manifest["subcommand"] = "train";
  manifest["data"] = args.data_path;
  manifest["seeds"] = {{"seed", args.seed}};
  manifest["trainer"] = {{"n_trees", args.n_trees},
                         {"max_depth", args.max_depth},
                         {"min_samples_split", args.min_samples_split},
                         {"n_candidate_features", args.n_candidate_features}};
  manifest["tolerances"] = json::object();
  manifest["wall_time_seconds"] = timer.seconds();
  manifest["output"] = args.out_path;
  write_manifest(args.out_path, manifest);
  return kExitOk;
}

// ============================================================================
// experiment
// ============================================================================

struct ExperimentArgs {
  std::string background = "0,25,100,200";
  uint64_t seed = 7;
  int num_seeds = 1;
  int n_trees = 100;
  int n_points = 20;
  double band = 0.05;
  double target_stderr = 1e-3;
  std::string bounds = "-1,2,-1,2";
  std::string out_path;
  bool serial = false;
};

int cmd_experiment(const ExperimentArgs& args) {
  synth::ExperimentConfig config;
  config.background_counts = parse_int_list(args.background, "background");
  config.seeds.clear();
  for (int s = 0; s < args.num_seeds; ++s) {
    config.seeds.push_back(args.seed + static_cast<uint64_t>(s));
  }
  config.trainer.n_trees = args.n_trees;
  config.n_points = args.n_points;
  config.band = args.band;
  config.target_stderr = args.target_stderr;
  config.bounds = parse_bounds(args.bounds);
  config.exec = args.serial ? Exec::Serial : Exec::Parallel;

  Timer timer;
  const auto rows = synth::run_ratio_experiment(config);
  io::write_experiment_csv(args.out_path, rows);

  json manifest;
  manifest["format_version"] = 1;
  manifest["subcommand"] = "experiment";
  manifest["seeds"] = {{"base_seed", args.seed}, {"all_seeds", config.seeds}};
  manifest["background_counts"] = config.background_counts;
  manifest["trainer"] = {{"n_trees", config.trainer.n_trees},
                         {"max_depth", config.trainer.max_depth},
                         {"min_samples_split", config.trainer.min_samples_split}};
  manifest["selection"] = {{"n_points", config.n_points}, {"band", config.band}};
  manifest["bounds"] = args.bounds;
  manifest["tolerances"] = {{"target_stderr", config.target_stderr},
                            {"unstable_ratio_floor", 1e-6}};
  manifest["wall_time_seconds"] = timer.seconds();
  manifest["output"] = args.out_path;
  write_manifest(args.out_path, manifest);
  return kExitOk;
}

// ============================================================================
// bench
// ============================================================================

struct BenchArgs {
  std::string trees = "10,100,1000";
  int n_pairs = 200;
  int repeats = 5;
  uint64_t seed = 42;
  int n_features = 5;
};

TreeEnsemble random_stump_ensemble(int n_trees, int n_features, RandomStream& rng) {
  TreeEnsemble ensemble;
  ensemble.n_features = n_features;
  ensemble.link = Link::Identity;
  ensemble.aggregation = Aggregation::Sum;
  for (int t = 0; t < n_trees; ++t) {
    Tree tree;
    tree.feature = {static_cast<int>(rng.bounded(n_features)), -1, -1};
    tree.threshold = {rng.uniform(0.0, 1.0), 0.0, 0.0};
    tree.value = {0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    tree.left = {1, -1, -1};
    tree.right = {2, -1, -1};
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

int cmd_bench(const BenchArgs& args) {
  const std::vector<int> tree_counts = parse_int_list(args.trees, "trees");
  RandomStream rng(args.seed);

  std::vector<PointPair> pairs(args.n_pairs);
  for (PointPair& p : pairs) {
    p.ref.resize(args.n_features);
    p.expl.resize(args.n_features);
    for (double& v : p.ref) v = rng.uniform(-0.2, 1.2);
    for (double& v : p.expl) v = rng.uniform(-0.2, 1.2);
  }

  const auto time_lane = [&](const Model& model, Exec exec) {
    BatchOptions opts;
    opts.method = Method::Gig;
    opts.exec = exec;
    std::vector<double> samples;
    for (int r = 0; r < args.repeats; ++r) {
      Timer t;
      const auto results = attribute_pairs(model, pairs, opts);
      samples.push_back(t.seconds());
      if (results.empty()) throw ComputationError("bench produced no results");
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
  };

  std::cout << "gig attribution throughput (" << args.n_pairs << " pairs, median of "
            << args.repeats << " repeats)\n";
  std::cout << "trees    serial attr/s    parallel attr/s    us/attr (serial)\n";

  std::vector<double> per_attr_seconds;
  for (int n_trees : tree_counts) {
    const Model model(random_stump_ensemble(n_trees, args.n_features, rng));
    const double serial_s = time_lane(model, Exec::Serial);
    const double parallel_s = time_lane(model, Exec::Parallel);
    const double per_attr = serial_s / args.n_pairs;
    per_attr_seconds.push_back(per_attr);
    std::printf("%-8d %-16.0f %-18.0f %.2f\n", n_trees, args.n_pairs / serial_s,
                args.n_pairs / parallel_s, per_attr * 1e6);
  }

  // near-linear scaling in tree count: per-attribution time may not grow more
  // than 3x faster than the tree count does
  const auto [min_it, max_it] = std::minmax_element(tree_counts.begin(), tree_counts.end());
  const size_t lo = static_cast<size_t>(min_it - tree_counts.begin());
  const size_t hi = static_cast<size_t>(max_it - tree_counts.begin());
  const double count_ratio = static_cast<double>(*max_it) / *min_it;
  const double time_ratio = per_attr_seconds[hi] / per_attr_seconds[lo];
  const bool linear_ok = time_ratio <= 3.0 * count_ratio;
  std::printf("scaling %d -> %d trees: time ratio %.1f vs tree ratio %.0f (%s)\n", *min_it,
              *max_it, time_ratio, count_ratio, linear_ok ? "within 3x of linear" : "FAIL");
  return linear_ok ? kExitOk : kExitComputationError;
}

// ============================================================================
// model-info
// ============================================================================

int cmd_model_info(const std::string& model_path) {
  const Model model = load_model_file(model_path);
  if (const TreeEnsemble* ensemble = model.as_tree_ensemble()) {
    int nodes = 0;
    int leaves = 0;
    int depth = 0;
    for (const Tree& t : ensemble->trees) {
      nodes += t.node_count();
      leaves += t.leaf_count();
      depth = std::max(depth, t.depth());
    }
    std::cout << "kind: tree_ensemble\n"
              << "n_features: " << ensemble->n_features << "\n"
              << "link: " << (ensemble->link == Link::Identity ? "identity" : "logistic")
              << "\n"
              << "aggregation: "
              << (ensemble->aggregation == Aggregation::Sum ? "sum" : "mean") << "\n"
              << "trees: " << ensemble->trees.size() << "\n"
              << "total_nodes: " << nodes << "\n"
              << "total_leaves: " << leaves << "\n"
              << "max_depth: " << depth << "\n";
  } else {
    std::cout << "kind: analytic\n"
              << "n_features: " << model.n_features() << "\n";
  }
  return kExitOk;
}

}  // namespace

// ============================================================================
// main
// ============================================================================

int main(int argc, char** argv) {
  CLI::App app{"path-based feature attribution toolkit"};
  app.require_subcommand(1);

  AttributeArgs attr;
  CLI::App* attribute = app.add_subcommand("attribute", "attribute explanation points");
  attribute->add_option("--model", attr.model_path, "model JSON file")->required();
  attribute->add_option("--points", attr.points_path, "explanation points CSV")->required();
  attribute->add_option("--refs", attr.refs_path, "reference points CSV")->required();
  attribute->add_option("--method", attr.method, "gig | shapley-exact | shapley-sampled");
  attribute->add_option("--out", attr.out_path, "output file")->required();
  attribute->add_option("--format", attr.format, "csv | json");
  attribute->add_option("--seed", attr.seed, "base seed");
  attribute->add_option("--target-stderr", attr.target_stderr,
                        "early-stop threshold (0 = use every reference)");
  attribute->add_option("--corner-limit", attr.corner_limit, "max corner width");
  attribute->add_option("--max-permutations", attr.max_permutations,
                        "sampling cap (shapley-sampled)");
  attribute->add_flag("--serial", attr.serial, "force the serial lane");

  GenDataArgs gen;
  CLI::App* gen_data = app.add_subcommand("gen-data", "sample the synthetic dataset");
  gen_data->add_option("--gaussians", gen.gaussians, "'default' or 8 numbers");
  gen_data->add_option("--n", gen.n_per_gaussian, "points per gaussian");
  gen_data->add_option("--background", gen.background, "uniform background count");
  gen_data->add_option("--bounds", gen.bounds, "x1_lo,x1_hi,x2_lo,x2_hi");
  gen_data->add_option("--seed", gen.seed, "seed");
  gen_data->add_option("--out", gen.out_path, "output CSV")->required();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train an extra-trees classifier");
  train_cmd->add_option("--data", train.data_path, "dataset CSV")->required();
  train_cmd->add_option("--out", train.out_path, "model JSON output")->required();
  train_cmd->add_option("--trees", train.n_trees, "number of trees");
  train_cmd->add_option("--max-depth", train.max_depth, "max depth (-1 = unlimited)");
  train_cmd->add_option("--min-samples-split", train.min_samples_split,
                        "minimum node size to split");
  train_cmd->add_option("--candidates", train.n_candidate_features,
                        "candidate features per node (-1 = all)");
  train_cmd->add_option("--seed", train.seed, "seed");
  train_cmd->add_flag("--serial", train.serial, "force the serial lane");

  ExperimentArgs experiment;
  CLI::App* experiment_cmd =
      app.add_subcommand("experiment", "run the attribution-ratio experiment");
  experiment_cmd->add_option("--background", experiment.background,
                             "background counts, e.g. 0,25,100,200");
  experiment_cmd->add_option("--seed", experiment.seed, "base seed");
  experiment_cmd->add_option("--num-seeds", experiment.num_seeds,
                             "run seeds base..base+k-1");
  experiment_cmd->add_option("--trees", experiment.n_trees, "trees per model");
  experiment_cmd->add_option("--points", experiment.n_points, "centerline points");
  experiment_cmd->add_option("--band", experiment.band, "centerline band half-width");
  experiment_cmd->add_option("--target-stderr", experiment.target_stderr,
                             "expectation early-stop threshold");
  experiment_cmd->add_option("--bounds", experiment.bounds, "background bounds");
  experiment_cmd->add_option("--out", experiment.out_path, "output table CSV")->required();
  experiment_cmd->add_flag("--serial", experiment.serial, "force the serial lane");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "attribution throughput benchmark");
  bench_cmd->add_option("--trees", bench.trees, "stump counts, e.g. 10,100,1000");
  bench_cmd->add_option("--pairs", bench.n_pairs, "point pairs per measurement");
  bench_cmd->add_option("--repeats", bench.repeats, "repeats (median reported)");
  bench_cmd->add_option("--seed", bench.seed, "seed");
  bench_cmd->add_option("--features", bench.n_features, "input dimension");

  std::string info_model;
  CLI::App* info_cmd = app.add_subcommand("model-info", "describe a model file");
  info_cmd->add_option("--model", info_model, "model JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  try {
    if (*attribute) return cmd_attribute(attr);
    if (*gen_data) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*experiment_cmd) return cmd_experiment(experiment);
    if (*bench_cmd) return cmd_bench(bench);
    if (*info_cmd) return cmd_model_info(info_model);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const ComputationError& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return kExitComputationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputationError;
  }
  return kExitInputError;
}
