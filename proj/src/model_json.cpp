#include "pathattr/model_json.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pathattr {

using nlohmann::json;

namespace {

const json& require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(where + "." + key, "missing required field");
  }
  return *it;
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number_integer()) {
    throw SchemaError(where + "." + key, "expected an integer");
  }
  return v.get<int>();
}

double require_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where, "expected a number");
  return v.get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> require_double_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    out.push_back(require_double(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> require_int_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where, "expected an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) {
      throw SchemaError(where + "[" + std::to_string(i) + "]", "expected an integer");
    }
    out.push_back(v[i].get<int>());
  }
  return out;
}

TreeEnsemble parse_tree_ensemble(const json& doc) {
  TreeEnsemble ensemble;
  ensemble.n_features = require_int(doc, "n_features", "$");

  const std::string link = require_string(doc, "link", "$");
  if (link == "identity") {
    ensemble.link = Link::Identity;
  } else if (link == "logistic") {
    ensemble.link = Link::Logistic;
  } else {
    throw SchemaError("$.link", "unknown link '" + link + "'");
  }

  const std::string agg = require_string(doc, "aggregation", "$");
  if (agg == "sum") {
    ensemble.aggregation = Aggregation::Sum;
  } else if (agg == "mean") {
    ensemble.aggregation = Aggregation::Mean;
  } else {
    throw SchemaError("$.aggregation", "unknown aggregation '" + agg + "'");
  }

  const json& trees = require_field(doc, "trees", "$");
  if (!trees.is_array()) throw SchemaError("$.trees", "expected an array");
  for (size_t t = 0; t < trees.size(); ++t) {
    const std::string where = "$.trees[" + std::to_string(t) + "]";
    const json& tj = trees[t];
    Tree tree;
    tree.feature = require_int_array(require_field(tj, "feature", where), where + ".feature");
    tree.threshold =
        require_double_array(require_field(tj, "threshold", where), where + ".threshold");
    tree.value = require_double_array(require_field(tj, "value", where), where + ".value");
    tree.left = require_int_array(require_field(tj, "left", where), where + ".left");
    tree.right = require_int_array(require_field(tj, "right", where), where + ".right");
    ensemble.trees.push_back(std::move(tree));
  }
  ensemble.validate();
  return ensemble;
}

AnalyticModel parse_analytic_node(const json& node, const std::string& where) {
  const std::string type = require_string(node, "type", where);
  if (type == "linear") {
    auto weights =
        require_double_array(require_field(node, "weights", where), where + ".weights");
    const double bias = require_double(require_field(node, "bias", where), where + ".bias");
    return AnalyticModel::linear(std::move(weights), bias);
  }
  if (type == "separable") {
    const json& terms = require_field(node, "terms", where);
    if (!terms.is_array() || terms.empty()) {
      throw SchemaError(where + ".terms", "expected a non-empty array of coefficient arrays");
    }
    std::vector<Polynomial> polys;
    for (size_t i = 0; i < terms.size(); ++i) {
      polys.emplace_back(
          require_double_array(terms[i], where + ".terms[" + std::to_string(i) + "]"));
    }
    return AnalyticModel::separable(std::move(polys));
  }
  if (type == "bilinear") {
    const json& matrix = require_field(node, "matrix", where);
    if (!matrix.is_array() || matrix.empty()) {
      throw SchemaError(where + ".matrix", "expected a non-empty square matrix");
    }
    const int n = static_cast<int>(matrix.size());
    std::vector<double> m;
    m.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      const std::string row_path = where + ".matrix[" + std::to_string(i) + "]";
      auto row = require_double_array(matrix[i], row_path);
      if (static_cast<int>(row.size()) != n) {
        throw SchemaError(row_path, "matrix rows must all have length " + std::to_string(n));
      }
      m.insert(m.end(), row.begin(), row.end());
    }
    return AnalyticModel::bilinear(n, std::move(m));
  }
  if (type == "tanh_field") {
    const double delta = require_double(require_field(node, "delta", where), where + ".delta");
    if (!(delta > 0.0)) throw SchemaError(where + ".delta", "must be positive");
    auto centerline =
        require_double_array(require_field(node, "centerline", where), where + ".centerline");
    return AnalyticModel::tanh_field(delta, Polynomial(std::move(centerline)));
  }
  if (type == "combination") {
    auto coeffs =
        require_double_array(require_field(node, "coeffs", where), where + ".coeffs");
    const json& parts = require_field(node, "parts", where);
    if (!parts.is_array()) throw SchemaError(where + ".parts", "expected an array");
    if (parts.size() != coeffs.size()) {
      throw SchemaError(where + ".parts", "needs one entry per coefficient");
    }
    std::vector<AnalyticModel> sub;
    for (size_t i = 0; i < parts.size(); ++i) {
      sub.push_back(parse_analytic_node(parts[i], where + ".parts[" + std::to_string(i) + "]"));
    }
    return AnalyticModel::combination(std::move(coeffs), std::move(sub));
  }
  throw SchemaError(where + ".type", "unknown analytic model type '" + type + "'");
}

json analytic_to_json(const AnalyticModel& model) {
  return std::visit(
      [&](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        json node;
        if constexpr (std::is_same_v<T, AnalyticModel::Linear>) {
          node["type"] = "linear";
          node["weights"] = m.weights;
          node["bias"] = m.bias;
        } else if constexpr (std::is_same_v<T, AnalyticModel::Separable>) {
          node["type"] = "separable";
          json terms = json::array();
          for (const Polynomial& p : m.terms) {
            terms.push_back(std::vector<double>(p.coeffs().begin(), p.coeffs().end()));
          }
          node["terms"] = std::move(terms);
        } else if constexpr (std::is_same_v<T, AnalyticModel::Bilinear>) {
          node["type"] = "bilinear";
          json matrix = json::array();
          for (int i = 0; i < m.n; ++i) {
            matrix.push_back(std::vector<double>(m.m.begin() + static_cast<long>(i) * m.n,
                                                 m.m.begin() + static_cast<long>(i + 1) * m.n));
          }
          node["matrix"] = std::move(matrix);
        } else if constexpr (std::is_same_v<T, AnalyticModel::TanhField>) {
          node["type"] = "tanh_field";
          node["delta"] = m.delta;
          node["centerline"] =
              std::vector<double>(m.centerline.coeffs().begin(), m.centerline.coeffs().end());
        } else {
          node["type"] = "combination";
          node["coeffs"] = m.coeffs;
          json parts = json::array();
          for (const AnalyticModel& p : m.parts) parts.push_back(analytic_to_json(p));
          node["parts"] = std::move(parts);
        }
        return node;
      },
      model.spec());
}

}  // namespace

Model load_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("malformed JSON: ") + e.what());
  }

  const int version = require_int(doc, "format_version", "$");
  if (version != 1) {
    throw SchemaError("$.format_version",
                      "unsupported format_version " + std::to_string(version));
  }

  const std::string kind = require_string(doc, "kind", "$");
  if (kind == "tree_ensemble") {
    return Model(parse_tree_ensemble(doc));
  }
  if (kind == "analytic") {
    const int n = require_int(doc, "n_features", "$");
    AnalyticModel model = parse_analytic_node(require_field(doc, "model", "$"), "$.model");
    if (model.n_features() != n) {
      throw SchemaError("$.n_features", "declared dimension " + std::to_string(n) +
                                            " does not match model dimension " +
                                            std::to_string(model.n_features()));
    }
    return Model(std::move(model));
  }
  throw SchemaError("$.kind", "unknown kind '" + kind + "'");
}

Model load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_model(buffer.str());
}

std::string save_model(const Model& model) {
  json doc;
  doc["format_version"] = 1;
  if (const TreeEnsemble* ensemble = model.as_tree_ensemble()) {
    doc["kind"] = "tree_ensemble";
    doc["n_features"] = ensemble->n_features;
    doc["link"] = ensemble->link == Link::Identity ? "identity" : "logistic";
    doc["aggregation"] = ensemble->aggregation == Aggregation::Sum ? "sum" : "mean";
    json trees = json::array();
    for (const Tree& t : ensemble->trees) {
      json tj;
      tj["feature"] = t.feature;
      tj["threshold"] = t.threshold;
      tj["value"] = t.value;
      tj["left"] = t.left;
      tj["right"] = t.right;
      trees.push_back(std::move(tj));
    }
    doc["trees"] = std::move(trees);
  } else if (const AnalyticModel* analytic = model.as_analytic()) {
    doc["kind"] = "analytic";
    doc["n_features"] = analytic->n_features();
    doc["model"] = analytic_to_json(*analytic);
  } else {
    throw UnsupportedOperation("only single-part models have a document form");
  }
  return doc.dump(2) + "\n";
}

void save_model_file(const Model& model, const std::filesystem::path& path) {
  const std::string text = save_model(model);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write model file: " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pathattr
