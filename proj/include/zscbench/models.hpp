#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "zscbench/csv.hpp"
#include "zscbench/dataset.hpp"
#include "zscbench/errors.hpp"
#include "zscbench/rng.hpp"

namespace zsc {

// Bilinear compatibility map: F(x, z) = x' * weight * z.
struct CompatibilityModel {
  Eigen::MatrixXd weight;  // D x E
  std::set<int> trained_classes;
};

struct EszslParams {
  double gamma = 1.0;   // feature-side ridge
  double lambda = 1.0;  // attribute-side ridge
};

struct SjeParams {
  double eta = 0.1;
  int epochs = 50;
  SeedSpec seed;  // shuffle order
};

namespace detail {

inline std::vector<int> sorted_present_classes(const Dataset& train) {
  std::set<int> present(train.labels.begin(), train.labels.end());
  return std::vector<int>(present.begin(), present.end());
}

inline void check_trainable(const Dataset& train, const std::vector<int>& classes) {
  if (train.num_samples() == 0) throw ConfigError("training set is empty");
  if (classes.size() < 2) throw ConfigError("training set has fewer than 2 distinct classes");
}

}  // namespace detail

// Closed-form ridge solution:
//   W = (X'X + gamma*I)^-1 X' Y S (S'S + lambda*I)^-1
// with X the N x D training features, S the C_tr x E attribute rows of the
// training classes (ascending class id), and Y the N x C_tr sign matrix with
// +1 at the sample's own class and -1 elsewhere. Both systems are SPD for any
// positive ridge and solved by Cholesky factorization.
inline CompatibilityModel train_eszsl(const Dataset& train, const EszslParams& params) {
  if (!(params.gamma > 0.0) || !(params.lambda > 0.0))
    throw ConfigError("eszsl: gamma and lambda must be > 0");
  const auto classes = detail::sorted_present_classes(train);
  detail::check_trainable(train, classes);

  const Eigen::Index n = train.num_samples();
  const Eigen::Index e = train.attr_dim();
  const auto c_tr = static_cast<Eigen::Index>(classes.size());

  Eigen::MatrixXd s(c_tr, e);
  for (Eigen::Index j = 0; j < c_tr; ++j)
    s.row(j) = train.attributes.row(classes[static_cast<std::size_t>(j)]);

  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, c_tr, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = std::lower_bound(classes.begin(), classes.end(),
                                     train.labels[static_cast<std::size_t>(i)]);
    y(i, static_cast<Eigen::Index>(it - classes.begin())) = 1.0;
  }

  const Eigen::MatrixXd& x = train.features;
  Eigen::MatrixXd lhs = x.transpose() * x;
  lhs.diagonal().array() += params.gamma;
  Eigen::MatrixXd rhs = s.transpose() * s;
  rhs.diagonal().array() += params.lambda;

  const Eigen::MatrixXd mid = x.transpose() * y * s;
  Eigen::MatrixXd w = lhs.llt().solve(mid);
  w = rhs.llt().solve(w.transpose()).transpose();

  if (!w.allFinite()) throw RuntimeError("eszsl: non-finite weight produced");
  CompatibilityModel model;
  model.weight = std::move(w);
  model.trained_classes.insert(classes.begin(), classes.end());
  return model;
}

// Structured margin-ranking SGD. Zero init; each epoch visits samples in a
// seeded shuffled order; per sample the single violator
//   y* = argmax_{y'} [ delta(y, y') + x'Wz_{y'} ],  delta = 0/1,
// is found (ties to smallest class id) and, if y* != y,
//   W <- W + eta * x * (z_y - z_{y*})'.
inline CompatibilityModel train_sje(const Dataset& train, const SjeParams& params) {
  if (!(params.eta > 0.0)) throw ConfigError("sje: eta must be > 0");
  if (params.epochs < 1) throw ConfigError("sje: epochs must be >= 1");
  const auto classes = detail::sorted_present_classes(train);
  detail::check_trainable(train, classes);

  const Eigen::Index n = train.num_samples();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(train.feature_dim(), train.attr_dim());

  Eigen::MatrixXd attrs(static_cast<Eigen::Index>(classes.size()), train.attr_dim());
  for (std::size_t j = 0; j < classes.size(); ++j)
    attrs.row(static_cast<Eigen::Index>(j)) = train.attributes.row(classes[j]);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  Rng rng(params.seed);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (const Eigen::Index i : order) {
      const int label = train.labels[static_cast<std::size_t>(i)];
      const Eigen::RowVectorXd scores = train.features.row(i) * w * attrs.transpose();
      std::size_t best = 0;
      double best_value = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < classes.size(); ++j) {
        const double value =
            scores(static_cast<Eigen::Index>(j)) + (classes[j] == label ? 0.0 : 1.0);
        if (value > best_value) {  // strict: ties keep the smallest class id
          best_value = value;
          best = j;
        }
      }
      if (classes[best] != label) {
        const Eigen::RowVectorXd z_diff =
            train.attributes.row(label) - attrs.row(static_cast<Eigen::Index>(best));
        w.noalias() += params.eta * train.features.row(i).transpose() * z_diff;
      }
    }
  }

  if (!w.allFinite()) throw RuntimeError("sje: non-finite weight produced");
  CompatibilityModel model;
  model.weight = std::move(w);
  model.trained_classes.insert(classes.begin(), classes.end());
  return model;
}

// Scores every sample against every candidate class, candidates enumerated in
// ascending class id. Entry (i, j) = x_i' * W * z_{c_j}.
inline Eigen::MatrixXd score_matrix(const CompatibilityModel& model,
                                    const Eigen::MatrixXd& features,
                                    const Eigen::MatrixXd& attributes,
                                    const std::set<int>& candidates) {
  if (candidates.empty()) throw ConfigError("score_matrix: empty candidate set");
  for (const int id : candidates) {
    if (id < 0 || id >= attributes.rows())
      throw ConfigError("score_matrix: candidate class out of range: " + std::to_string(id));
  }
  Eigen::MatrixXd cand_attrs(static_cast<Eigen::Index>(candidates.size()), attributes.cols());
  Eigen::Index j = 0;
  for (const int id : candidates) cand_attrs.row(j++) = attributes.row(id);
  return features * model.weight * cand_attrs.transpose();
}

inline std::vector<int> argmax_rows(const Eigen::MatrixXd& scores,
                                    const std::set<int>& candidates) {
  const std::vector<int> ids(candidates.begin(), candidates.end());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out.push_back(ids[static_cast<std::size_t>(best)]);
  }
  return out;
}

// Per-sample argmax over candidate classes; ties break to the smallest id.
inline std::vector<int> predict(const CompatibilityModel& model, const Eigen::MatrixXd& features,
                                const Eigen::MatrixXd& attributes,
                                const std::set<int>& candidates) {
  return argmax_rows(score_matrix(model, features, attributes, candidates), candidates);
}

inline void save_model(const CompatibilityModel& model, const std::string& dir) {
  std::string out;
  for (Eigen::Index r = 0; r < model.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weight.cols(); ++c) {
      if (c) out += ',';
      out += csv::format_double(model.weight(r, c));
    }
    out += '\n';
  }
  csv::write_file(dir + "/model.csv", out);
  nlohmann::json meta{{"trained_classes", model.trained_classes},
                      {"rows", model.weight.rows()},
                      {"cols", model.weight.cols()}};
  csv::write_file(dir + "/model_meta.json", meta.dump(2) + "\n");
}

inline CompatibilityModel load_model(const std::string& dir) {
  std::ifstream meta_in(dir + "/model_meta.json");
  if (!meta_in) throw ConfigError("missing file: " + dir + "/model_meta.json");
  nlohmann::json meta;
  meta_in >> meta;
  CompatibilityModel model;
  model.weight = detail::load_matrix(dir + "/model.csv", meta["rows"].get<Eigen::Index>(),
                                     meta["cols"].get<Eigen::Index>());
  for (const auto& id : meta["trained_classes"]) model.trained_classes.insert(id.get<int>());
  return model;
}

}  // namespace zsc
