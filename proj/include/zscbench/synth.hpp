#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>

#include "zscbench/csv.hpp"
#include "zscbench/dataset.hpp"
#include "zscbench/errors.hpp"
#include "zscbench/rng.hpp"

namespace zsc {

struct SynthSpec {
  int num_classes = 20;
  int attr_dim = 8;
  int feature_dim = 16;
  int samples_per_class = 50;
  double noise_sigma = 0.0;
  double min_attr_separation = 0.5;
  std::uint64_t seed = 0;
};

inline void validate(const SynthSpec& spec) {
  if (spec.num_classes < 4) throw ConfigError("synth: num_classes must be >= 4");
  if (spec.samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
  if (spec.attr_dim < 1) throw ConfigError("synth: attr_dim must be >= 1");
  if (spec.feature_dim < spec.attr_dim)
    throw ConfigError("synth: feature_dim must be >= attr_dim");
  if (spec.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (!(spec.min_attr_separation > 0.0))
    throw ConfigError("synth: min_attr_separation must be > 0");
}

namespace detail {

inline Eigen::RowVectorXd unit_sphere_row(Rng& rng, int dim) {
  Eigen::RowVectorXd v(dim);
  double norm = 0.0;
  while (norm <= 1e-12) {
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace detail

// Generates a dataset with a known linear ground truth: class embeddings z_c
// uniform on the unit sphere (redrawn until pairwise separated), a hidden
// standard-normal map M, samples x = M z_c + noise, then L2 normalization.
// ESZSL's model class contains this generator, so noiseless recovery is an
// end-to-end oracle.
inline Dataset generate(const SynthSpec& spec) {
  validate(spec);
  constexpr int kRetryBudget = 1000;
  Rng rng(SeedSpec{spec.seed, 0});

  Eigen::MatrixXd attrs(spec.num_classes, spec.attr_dim);
  double best_separation = 0.0;
  bool separated = false;
  for (int attempt = 0; attempt < kRetryBudget && !separated; ++attempt) {
    for (int c = 0; c < spec.num_classes; ++c)
      attrs.row(c) = detail::unit_sphere_row(rng, spec.attr_dim);
    double min_dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.num_classes; ++i) {
      for (int j = i + 1; j < spec.num_classes; ++j)
        min_dist = std::min(min_dist, (attrs.row(i) - attrs.row(j)).norm());
    }
    best_separation = std::max(best_separation, min_dist);
    separated = min_dist >= spec.min_attr_separation;
  }
  if (!separated) {
    throw RuntimeError("synth: could not achieve attribute separation " +
                       csv::format_double(spec.min_attr_separation) + " within " +
                       std::to_string(kRetryBudget) + " attempts; best was " +
                       csv::format_double(best_separation));
  }

  Eigen::MatrixXd hidden_map(spec.feature_dim, spec.attr_dim);
  for (int r = 0; r < spec.feature_dim; ++r)
    for (int c = 0; c < spec.attr_dim; ++c) hidden_map(r, c) = rng.normal();

  const int n = spec.num_classes * spec.samples_per_class;
  Dataset d;
  d.features.resize(n, spec.feature_dim);
  d.labels.reserve(static_cast<std::size_t>(n));
  d.attributes = attrs;
  int row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    const Eigen::VectorXd base = hidden_map * attrs.row(c).transpose();
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int k = 0; k < spec.feature_dim; ++k)
        d.features(row, k) = base(k) + spec.noise_sigma * rng.normal();
      d.labels.push_back(c);
    }
  }
  return l2_normalize(d);
}

}  // namespace zsc
