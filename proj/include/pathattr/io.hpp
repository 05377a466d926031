#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pathattr/shapley.hpp"
#include "pathattr/synth.hpp"

namespace pathattr::io {

// Shortest-round-trip-safe float formatting (17 significant digits).
std::string format_double(double v);

// Writes text to `path` via a temp file + rename, so partial files are never
// left behind.
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

// Dataset CSV, header "x1,x2,label,source".
void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<synth::LabeledSample>& samples);
std::vector<synth::LabeledSample> read_dataset_csv(const std::filesystem::path& path);

// Experiment table CSV, header
// "background_n,seed,point_idx,x1,x2,method,phi1,phi2,ratio,stderr1,stderr2,
//  efficiency_residual,converged". Unstable rows carry ratio=nan.
void write_experiment_csv(const std::filesystem::path& path,
                          const std::vector<synth::ExperimentRow>& rows);

// Point list from any CSV with x1..xn columns (extra columns such as
// label/source are ignored), so datasets double as reference/point files.
std::vector<std::vector<double>> read_points_csv(const std::filesystem::path& path);

}  // namespace pathattr::io
