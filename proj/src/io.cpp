#include "pathattr/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pathattr::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << text;
    if (!out) throw InputError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

// ============================================================================
// Dataset CSV
// ============================================================================

void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<synth::LabeledSample>& samples) {
  std::ostringstream out;
  out << "x1,x2,label,source\n";
  for (const synth::LabeledSample& s : samples) {
    out << format_double(s.x1) << ',' << format_double(s.x2) << ',' << s.label << ','
        << synth::source_name(s.source) << '\n';
  }
  atomic_write_text(path, out.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_field_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(where + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

std::vector<synth::LabeledSample> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "x1" || header[1] != "x2" ||
      header[2] != "label" || header[3] != "source") {
    throw InputError(path.string() + ": expected header x1,x2,label,source");
  }

  std::vector<synth::LabeledSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 4) throw InputError(where + ": expected 4 fields");
    synth::LabeledSample s;
    s.x1 = parse_field_double(fields[0], where);
    s.x2 = parse_field_double(fields[1], where);
    if (fields[2] == "1") {
      s.label = 1;
    } else if (fields[2] == "2") {
      s.label = 2;
    } else {
      throw InputError(where + ": label must be 1 or 2");
    }
    if (fields[3] == "gaussian0") {
      s.source = synth::SampleSource::Gaussian0;
    } else if (fields[3] == "gaussian1") {
      s.source = synth::SampleSource::Gaussian1;
    } else if (fields[3] == "uniform") {
      s.source = synth::SampleSource::Uniform;
    } else {
      throw InputError(where + ": unknown source '" + fields[3] + "'");
    }
    samples.push_back(s);
  }
  return samples;
}

// ============================================================================
// Experiment CSV
// ============================================================================

void write_experiment_csv(const std::filesystem::path& path,
                          const std::vector<synth::ExperimentRow>& rows) {
  std::ostringstream out;
  out << "background_n,seed,point_idx,x1,x2,method,phi1,phi2,ratio,stderr1,stderr2,"
         "efficiency_residual,converged\n";
  for (const synth::ExperimentRow& r : rows) {
    out << r.background_n << ',' << r.seed << ',' << r.point_idx << ','
        << format_double(r.x1) << ',' << format_double(r.x2) << ','
        << method_name(r.method) << ',' << format_double(r.phi1) << ','
        << format_double(r.phi2) << ',' << format_double(r.ratio) << ','
        << format_double(r.stderr1) << ',' << format_double(r.stderr2) << ','
        << format_double(r.efficiency_residual) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  atomic_write_text(path, out.str());
}

// ============================================================================
// Generic point files
// ============================================================================

std::vector<std::vector<double>> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open points file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  const auto header = split_csv_line(line);

  // x1..xn columns, contiguous from x1
  std::vector<int> columns;
  for (int dim = 1;; ++dim) {
    const std::string name = "x" + std::to_string(dim);
    int found = -1;
    for (size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) {
        found = static_cast<int>(c);
        break;
      }
    }
    if (found < 0) break;
    columns.push_back(found);
  }
  if (columns.empty()) {
    throw InputError(path.string() + ": no x1..xn columns found in header");
  }

  std::vector<std::vector<double>> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<double> p;
    p.reserve(columns.size());
    for (int c : columns) {
      if (c >= static_cast<int>(fields.size())) {
        throw InputError(where + ": too few fields");
      }
      p.push_back(parse_field_double(fields[c], where));
    }
    points.push_back(std::move(p));
  }
  if (points.empty()) throw InputError(path.string() + ": no data rows");
  return points;
}

}  // namespace pathattr::io
