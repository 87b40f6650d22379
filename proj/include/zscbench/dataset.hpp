#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "zscbench/csv.hpp"
#include "zscbench/errors.hpp"

namespace zsc {

// A zero-shot classification dataset: sample features, global class labels,
// and one attribute (class embedding) row per class. Class ids are global and
// stable; subsetting never re-indexes them. Values are immutable once built.
struct Dataset {
  Eigen::MatrixXd features;    // N x D
  std::vector<int> labels;     // N entries in [0, C)
  Eigen::MatrixXd attributes;  // C x E
  std::vector<std::string> class_names;  // optional, C entries when present

  Eigen::Index num_samples() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  Eigen::Index num_classes() const { return attributes.rows(); }
  Eigen::Index attr_dim() const { return attributes.cols(); }
};

inline void validate(const Dataset& d) {
  if (d.feature_dim() < 1) throw ConfigError("dataset: feature_dim must be >= 1");
  if (d.attr_dim() < 1) throw ConfigError("dataset: attr_dim must be >= 1");
  if (d.num_classes() < 2) throw ConfigError("dataset: num_classes must be >= 2");
  if (static_cast<Eigen::Index>(d.labels.size()) != d.num_samples())
    throw ConfigError("dataset: label count does not match feature row count");
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    if (d.labels[i] < 0 || d.labels[i] >= d.num_classes())
      throw ConfigError("label out of range, row " + std::to_string(i));
  }
  if (!d.features.allFinite()) throw ConfigError("dataset: non-finite entry in features");
  if (!d.attributes.allFinite()) throw ConfigError("dataset: non-finite entry in attributes");
  if (!d.class_names.empty() &&
      static_cast<Eigen::Index>(d.class_names.size()) != d.num_classes())
    throw ConfigError("dataset: class name count does not match num_classes");
}

namespace detail {

inline Eigen::MatrixXd load_matrix(const std::string& path, Eigen::Index rows,
                                   Eigen::Index cols) {
  const auto lines = csv::read_lines(path);
  if (static_cast<Eigen::Index>(lines.size()) != rows)
    throw ConfigError(path + ": expected " + std::to_string(rows) + " rows, got " +
                      std::to_string(lines.size()));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto cells = csv::split_line(lines[static_cast<std::size_t>(r)]);
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      throw ConfigError(path + ": dimension mismatch, row " + std::to_string(r) + " has " +
                        std::to_string(cells.size()) + " values, expected " +
                        std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = csv::parse_double(cells[static_cast<std::size_t>(c)], path,
                                  static_cast<std::size_t>(r));
  }
  return m;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& dir) {
  const std::string meta_path = dir + "/meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ConfigError("missing file: " + meta_path);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path + ": " + e.what());
  }
  for (const char* key : {"num_samples", "feature_dim", "num_classes", "attr_dim"}) {
    if (!meta.contains(key) || !meta[key].is_number_integer())
      throw ConfigError(meta_path + ": missing or non-integer field \"" + key + "\"");
  }
  const auto n = meta["num_samples"].get<Eigen::Index>();
  const auto d = meta["feature_dim"].get<Eigen::Index>();
  const auto c = meta["num_classes"].get<Eigen::Index>();
  const auto e = meta["attr_dim"].get<Eigen::Index>();

  Dataset ds;
  ds.features = detail::load_matrix(dir + "/features.csv", n, d);
  ds.attributes = detail::load_matrix(dir + "/attributes.csv", c, e);

  const std::string labels_path = dir + "/labels.csv";
  const auto label_lines = csv::read_lines(labels_path);
  if (static_cast<Eigen::Index>(label_lines.size()) != n)
    throw ConfigError(labels_path + ": expected " + std::to_string(n) + " rows, got " +
                      std::to_string(label_lines.size()));
  ds.labels.reserve(label_lines.size());
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    const double v = csv::parse_double(label_lines[i], labels_path, i);
    const int label = static_cast<int>(v);
    if (static_cast<double>(label) != v)
      throw ConfigError(labels_path + ": non-integer label, row " + std::to_string(i));
    if (label < 0 || label >= c)
      throw ConfigError(labels_path + ": label out of range, row " + std::to_string(i));
    ds.labels.push_back(label);
  }

  std::ifstream names_in(dir + "/classes.txt");
  if (names_in) {
    std::string line;
    while (std::getline(names_in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      ds.class_names.push_back(line);
    }
  }

  validate(ds);
  return ds;
}

inline void save_dataset(const Dataset& d, const std::string& dir) {
  nlohmann::json meta{{"num_samples", d.num_samples()},
                      {"feature_dim", d.feature_dim()},
                      {"num_classes", d.num_classes()},
                      {"attr_dim", d.attr_dim()}};
  csv::write_file(dir + "/meta.json", meta.dump(2) + "\n");

  const auto dump_matrix = [](const Eigen::MatrixXd& m) {
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ',';
        out += csv::format_double(m(r, c));
      }
      out += '\n';
    }
    return out;
  };
  csv::write_file(dir + "/features.csv", dump_matrix(d.features));
  csv::write_file(dir + "/attributes.csv", dump_matrix(d.attributes));

  std::string labels_out;
  for (const int l : d.labels) labels_out += std::to_string(l) + "\n";
  csv::write_file(dir + "/labels.csv", labels_out);

  if (!d.class_names.empty()) {
    std::string names_out;
    for (const auto& name : d.class_names) names_out += name + "\n";
    csv::write_file(dir + "/classes.txt", names_out);
  }
}

// Scales every feature row and attribute row to unit Euclidean norm.
// Near-zero rows are a hard error: a zero attribute vector would make every
// compatibility score identically zero.
inline Dataset l2_normalize(const Dataset& d) {
  constexpr double kMinNorm = 1e-12;
  Dataset out = d;
  for (Eigen::Index r = 0; r < out.features.rows(); ++r) {
    const double norm = out.features.row(r).norm();
    if (norm <= kMinNorm)
      throw RuntimeError("degenerate row in features, row " + std::to_string(r));
    out.features.row(r) /= norm;
  }
  for (Eigen::Index r = 0; r < out.attributes.rows(); ++r) {
    const double norm = out.attributes.row(r).norm();
    if (norm <= kMinNorm)
      throw RuntimeError("degenerate row in attributes, row " + std::to_string(r));
    out.attributes.row(r) /= norm;
  }
  return out;
}

// Keeps only samples whose label is in `keep`. Global class ids are preserved:
// the attribute matrix stays whole and labels keep their original values.
inline Dataset restrict_to_classes(const Dataset& d, const std::set<int>& keep) {
  if (keep.empty()) throw ConfigError("restrict_to_classes: empty class set");
  for (const int id : keep) {
    if (id < 0 || id >= d.num_classes())
      throw ConfigError("restrict_to_classes: class id out of range: " + std::to_string(id));
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    if (keep.contains(d.labels[i])) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d.feature_dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
    out.labels.push_back(d.labels[static_cast<std::size_t>(rows[i])]);
  }
  out.attributes = d.attributes;
  out.class_names = d.class_names;
  return out;
}

inline std::vector<std::size_t> class_sample_counts(const Dataset& d) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(d.num_classes()), 0);
  for (const int l : d.labels) counts[static_cast<std::size_t>(l)]++;
  return counts;
}

}  // namespace zsc
