#pragma once

#include <filesystem>
#include <string>

#include "pathattr/model.hpp"

namespace pathattr {

// Versioned model document ("format_version": 1).
//
// Tree ensembles:
//   {"format_version": 1, "kind": "tree_ensemble", "n_features": N,
//    "link": "identity"|"logistic", "aggregation": "sum"|"mean",
//    "trees": [{"feature": [int], "threshold": [float], "value": [float],
//               "left": [int], "right": [int]}, ...]}
//
// Analytic models:
//   {"format_version": 1, "kind": "analytic", "n_features": N, "model": <node>}
//   <node> ::= {"type": "linear", "weights": [...], "bias": b}
//            | {"type": "separable", "terms": [[c0, c1, ...], ...]}
//            | {"type": "bilinear", "matrix": [[...], ...]}
//            | {"type": "tanh_field", "delta": d, "centerline": [c0, c1, ...]}
//            | {"type": "combination", "coeffs": [...], "parts": [<node>, ...]}
//
// Floats are serialized with shortest-round-trip precision, so save/load is
// bit-exact. Malformed documents raise SchemaError carrying the path of the
// offending field.
Model load_model(const std::string& json_text);
Model load_model_file(const std::filesystem::path& path);

// Only single-part models (a plain ensemble or analytic model) have a
// document form; combinations raise UnsupportedOperation.
std::string save_model(const Model& model);
void save_model_file(const Model& model, const std::filesystem::path& path);

}  // namespace pathattr
