#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "zscbench/dataset.hpp"
#include "zscbench/errors.hpp"
#include "zscbench/models.hpp"
#include "zscbench/rng.hpp"
#include "zscbench/splits.hpp"

namespace zsc {

enum class Voting { hard, soft };

inline Voting parse_voting(const std::string& s) {
  if (s == "hard") return Voting::hard;
  if (s == "soft") return Voting::soft;
  throw ConfigError("unknown voting scheme: " + s);
}

// Trains a member model on a given class-restricted view; the SeedSpec is the
// member's private stream (used by SJE shuffling; ESZSL ignores it).
using MemberTrainer = std::function<CompatibilityModel(const Dataset&, SeedSpec)>;

struct EnsembleMember {
  CompatibilityModel model;
  std::set<int> subset_classes;
};

struct Ensemble {
  std::vector<EnsembleMember> members;
  Voting voting = Voting::soft;
};

// Bagging over class subsets: member i trains on a random proportion-s subset
// of train_classes drawn from stream (base_seed, i). Members depend only on
// their own stream, so training order or parallel scheduling cannot change
// the result.
inline Ensemble train_bagged(const Dataset& train, const std::set<int>& train_classes, int n,
                             double s, const MemberTrainer& trainer, std::uint64_t base_seed,
                             Voting voting = Voting::soft) {
  if (n < 1) throw ConfigError("ensemble size must be >= 1");
  Ensemble e;
  e.voting = voting;
  e.members.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const SeedSpec member_seed{base_seed, static_cast<std::uint64_t>(i)};
    std::set<int> subset = sample_subset_classes(train_classes, s, member_seed);
    try {
      EnsembleMember member;
      member.model = trainer(restrict_to_classes(train, subset),
                             SeedSpec{stream_seed(member_seed), 1});
      member.subset_classes = std::move(subset);
      e.members.push_back(std::move(member));
    } catch (const std::exception& ex) {
      throw RuntimeError("ensemble member " + std::to_string(i) + ": " + ex.what());
    }
  }
  return e;
}

// Majority vote over member argmax predictions; ties among the most frequent
// classes break to the smallest class id.
inline std::vector<int> predict_hard(const Ensemble& e, const Eigen::MatrixXd& features,
                                     const Eigen::MatrixXd& attributes,
                                     const std::set<int>& candidates) {
  if (e.members.empty()) throw ConfigError("ensemble has no members");
  std::vector<std::vector<int>> votes;
  votes.reserve(e.members.size());
  for (const auto& m : e.members)
    votes.push_back(predict(m.model, features, attributes, candidates));

  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    std::map<int, int> tally;  // ordered: first max key is the smallest class id
    for (const auto& v : votes) tally[v[static_cast<std::size_t>(i)]]++;
    int best_class = tally.begin()->first;
    int best_count = tally.begin()->second;
    for (const auto& [cls, count] : tally) {
      if (count > best_count) {
        best_class = cls;
        best_count = count;
      }
    }
    out.push_back(best_class);
  }
  return out;
}

// Argmax of entrywise-summed raw member scores; no per-member normalization.
inline std::vector<int> predict_soft(const Ensemble& e, const Eigen::MatrixXd& features,
                                     const Eigen::MatrixXd& attributes,
                                     const std::set<int>& candidates) {
  if (e.members.empty()) throw ConfigError("ensemble has no members");
  Eigen::MatrixXd total = score_matrix(e.members.front().model, features, attributes, candidates);
  for (std::size_t i = 1; i < e.members.size(); ++i)
    total += score_matrix(e.members[i].model, features, attributes, candidates);
  return argmax_rows(total, candidates);
}

inline std::vector<int> predict_ensemble(const Ensemble& e, const Eigen::MatrixXd& features,
                                         const Eigen::MatrixXd& attributes,
                                         const std::set<int>& candidates) {
  return e.voting == Voting::hard ? predict_hard(e, features, attributes, candidates)
                                  : predict_soft(e, features, attributes, candidates);
}

}  // namespace zsc
