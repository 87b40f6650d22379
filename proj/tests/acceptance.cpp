// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
// process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "zscbench/ensemble.hpp"
#include "zscbench/evaluation.hpp"
#include "zscbench/models.hpp"
#include "zscbench/runner.hpp"
#include "zscbench/splits.hpp"
#include "zscbench/synth.hpp"

using namespace zsc;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Analytic gradient of the ESZSL objective (independent of the solver path).
Eigen::MatrixXd eszsl_gradient(const Dataset& train, const EszslParams& params,
                               const Eigen::MatrixXd& w) {
  std::set<int> present(train.labels.begin(), train.labels.end());
  const std::vector<int> classes(present.begin(), present.end());
  Eigen::MatrixXd s(static_cast<Eigen::Index>(classes.size()), train.attr_dim());
  for (std::size_t j = 0; j < classes.size(); ++j)
    s.row(static_cast<Eigen::Index>(j)) = train.attributes.row(classes[j]);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(
      train.num_samples(), static_cast<Eigen::Index>(classes.size()), -1.0);
  for (Eigen::Index i = 0; i < train.num_samples(); ++i) {
    const auto pos = std::lower_bound(classes.begin(), classes.end(),
                                      train.labels[static_cast<std::size_t>(i)]) -
                     classes.begin();
    y(i, static_cast<Eigen::Index>(pos)) = 1.0;
  }
  const Eigen::MatrixXd& x = train.features;
  return 2.0 * (x.transpose() * (x * w * s.transpose() - y) * s +
                params.gamma * w * s.transpose() * s +
                params.lambda * x.transpose() * x * w + params.gamma * params.lambda * w);
}

// Full 2^n enumeration of sign assignments over the realized average ranks.
double wilcoxon_oracle(const std::vector<double>& d) {
  std::vector<double> abs_d;
  for (const double v : d)
    if (v != 0.0) abs_d.push_back(std::abs(v));
  const std::size_t n = abs_d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  double total = 0.0, w_plus = 0.0;
  {
    std::size_t ri = 0;
    for (const double v : d) {
      if (v == 0.0) continue;
      if (v > 0.0) w_plus += ranks[ri];
      ++ri;
    }
  }
  for (const double r : ranks) total += r;
  const double observed = std::min(w_plus, total - w_plus);
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double wp = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) wp += ranks[i];
    if (std::min(wp, total - wp) <= observed + 1e-12) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::size_t{1} << n);
}

SynthSpec recovery_spec(double noise_sigma, std::uint64_t seed) {
  SynthSpec spec;
  spec.num_classes = 20;
  spec.attr_dim = 8;
  spec.feature_dim = 16;
  spec.samples_per_class = 50;
  spec.noise_sigma = noise_sigma;
  spec.min_attr_separation = 0.5;
  spec.seed = seed;
  return spec;
}

ExperimentConfig trend_variability_config() {
  ExperimentConfig cfg;
  cfg.synth = recovery_spec(0.3, 8);
  cfg.models = {ModelConfig{"eszsl", {}, {}}, ModelConfig{"sje", {}, {}}};
  VariabilityProtocol proto;
  proto.num_partitions = 22;
  proto.test_class_count = 5;
  cfg.protocol = proto;
  cfg.base_seed = 8;
  cfg.workers = 1;
  return cfg;
}

ExperimentConfig trend_ensemble_config() {
  // SJE base with 8 training classes: subsets at s=0.3 then cover only 2 of
  // the 8 seen classes, which visibly costs zero-shot accuracy, while s=0.9
  // trains members on nearly the full seen set and tracks the baseline.
  ExperimentConfig cfg;
  cfg.synth = recovery_spec(0.3, 8);
  EnsembleProtocol proto;
  proto.base_model = ModelConfig{"sje", {}, {}};
  proto.n_list = {90};
  proto.s_list = {0.3, 0.5, 0.7, 0.9};
  proto.repeats = 4;
  proto.test_class_count = 12;
  proto.voting = Voting::soft;
  proto.metric = Metric::per_class;
  cfg.protocol = proto;
  cfg.base_seed = 8;
  cfg.workers = 1;
  return cfg;
}

bool criterion_eszsl_stationarity(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const double regs[] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  for (unsigned instance = 0; instance < 20; ++instance) {
    const Dataset train = testutil::random_dataset(instance * 31 + 7, 50, 10, 8, 5);
    const EszslParams params{regs[instance % 3], regs[instance % 3]};
    const auto model = train_eszsl(train, params);
    const double ratio =
        eszsl_gradient(train, params, model.weight).norm() / (1.0 + model.weight.norm());
    worst = std::max(worst, ratio);
  }
  const double elapsed = seconds_since(start);
  detail = "worst gradient ratio " + std::to_string(worst) + ", " + std::to_string(elapsed) + "s";
  return worst <= 1e-6 && elapsed < 1.0;
}

bool criterion_eszsl_hand_case(std::string& detail) {
  Dataset hand;
  hand.features.resize(2, 1);
  hand.features << 2.0, 0.0;
  hand.labels = {0, 1};
  hand.attributes.resize(2, 1);
  hand.attributes << 1.0, 0.0;
  const auto model = train_eszsl(hand, EszslParams{1.0, 1.0});
  detail = "weight " + std::to_string(model.weight(0, 0));
  return std::abs(model.weight(0, 0) - 0.2) <= 1e-12;
}

bool criterion_synthetic_recovery(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset d = generate(recovery_spec(0.0, 42));
  double worst = 1.0;
  for (int i = 0; i < 10; ++i) {
    const auto p = sample_partition(20, 5, SeedSpec{42, static_cast<std::uint64_t>(i)});
    const auto model =
        train_eszsl(restrict_to_classes(d, p.train_classes), EszslParams{1e-3, 1e-3});
    const Dataset test = restrict_to_classes(d, p.test_classes);
    const auto preds = predict(model, test.features, test.attributes, p.test_classes);
    worst = std::min(worst, per_class_accuracy(preds, test.labels));
  }
  const double elapsed = seconds_since(start);
  detail = "worst per-class accuracy " + std::to_string(worst) + ", " + std::to_string(elapsed) +
           "s";
  return worst >= 0.99 && elapsed < 5.0;
}

bool criterion_sje_hand_case(std::string& detail) {
  Dataset d;
  d.features.resize(2, 2);
  d.features << 1.0, 0.0,
                0.0, 0.0;
  d.labels = {0, 1};
  d.attributes.resize(2, 2);
  d.attributes << 1.0, 0.0,
                  0.0, 1.0;
  SjeParams params;
  params.eta = 0.1;
  params.epochs = 1;
  const auto model = train_sje(d, params);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.1, -0.1,
              0.0, 0.0;
  detail = "max deviation " + std::to_string((model.weight - expected).cwiseAbs().maxCoeff());
  return model.weight == expected;
}

bool criterion_wilcoxon(std::string& detail) {
  // d = (1..5) must be exactly 2/32
  {
    const std::vector<double> a{1, 2, 3, 4, 5}, b(5, 0.0);
    if (wilcoxon_signed_rank(a, b).p_two_sided != 0.0625) {
      detail = "d=(1..5) case wrong";
      return false;
    }
  }
  Rng rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + static_cast<int>(rng.bounded(6));
    std::vector<double> d;
    for (int i = 0; i < n; ++i) {
      const double mag = 1.0 + static_cast<double>(rng.bounded(5));
      d.push_back(rng.bounded(2) ? mag : -mag);
    }
    const std::vector<double> zeros(d.size(), 0.0);
    const auto result = wilcoxon_signed_rank(d, zeros);
    const double oracle = wilcoxon_oracle(d);
    if (result.method != TestMethod::exact || std::abs(result.p_two_sided - oracle) > 1e-12) {
      detail = "mismatch at trial " + std::to_string(trial) + ": got " +
               std::to_string(result.p_two_sided) + ", oracle " + std::to_string(oracle);
      return false;
    }
  }
  // n = 22 exact mode timing
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> a, b;
  for (int i = 0; i < 22; ++i) {
    a.push_back(rng.uniform01());
    b.push_back(rng.uniform01());
  }
  const auto r22 = wilcoxon_signed_rank(a, b);
  const double elapsed = seconds_since(start);
  detail = "200 oracle matches; n=22 exact in " + std::to_string(elapsed) + "s";
  return r22.method == TestMethod::exact && elapsed < 10.0;
}

bool criterion_ensemble_degenerate(std::string& detail) {
  const Dataset d = generate(recovery_spec(0.3, 5));
  const auto p = sample_partition(20, 5, SeedSpec{5, 0});
  const Dataset train = restrict_to_classes(d, p.train_classes);
  const Dataset test = restrict_to_classes(d, p.test_classes);
  const MemberTrainer trainer = [](const Dataset& subset, SeedSpec) {
    return train_eszsl(subset, EszslParams{1.0, 1.0});
  };
  // (a) n = 1 reproduces the single member under both votings
  const auto e1 = train_bagged(train, p.train_classes, 1, 0.5, trainer, 3);
  const auto single = predict(e1.members[0].model, test.features, test.attributes, p.test_classes);
  if (predict_hard(e1, test.features, test.attributes, p.test_classes) != single ||
      predict_soft(e1, test.features, test.attributes, p.test_classes) != single) {
    detail = "n=1 ensemble diverged from its member";
    return false;
  }
  // (b) s = 1.0 soft ensembles match the baseline metric exactly in the
  // ensemble protocol output
  auto cfg = trend_ensemble_config();
  auto& proto = std::get<EnsembleProtocol>(cfg.protocol);
  proto.base_model = ModelConfig{"eszsl", {}, {}};  // deterministic base trainer
  proto.n_list = {5};
  proto.s_list = {1.0};
  proto.repeats = 2;
  testutil::TempDir dir;
  const auto report = cmd_ensemble(cfg, dir.str() + "/out");
  for (const auto& cell : report.cells) {
    if (cell.ensemble_metric != cell.baseline_metric) {
      detail = "s=1.0 cell differs from baseline";
      return false;
    }
  }
  detail = "n=1 and s=1.0 equalities hold";
  return true;
}

bool criterion_majority(std::string& detail) {
  Rng rng(13);
  const int num_candidates = 6;
  const Eigen::MatrixXd attrs = Eigen::MatrixXd::Identity(num_candidates, num_candidates);
  Eigen::MatrixXd x(1, num_candidates);
  x.setOnes();
  std::set<int> cands;
  for (int c = 0; c < num_candidates; ++c) cands.insert(c);
  int wins = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + static_cast<int>(rng.bounded(10));
    const int majority_class = static_cast<int>(rng.bounded(num_candidates));
    const int majority_votes = n / 2 + 1;
    Ensemble e;
    for (int i = 0; i < n; ++i) {
      const int vote = i < majority_votes ? majority_class
                                          : static_cast<int>(rng.bounded(num_candidates));
      CompatibilityModel m;
      m.weight = Eigen::MatrixXd::Zero(num_candidates, num_candidates);
      m.weight(0, vote) = 1.0;
      e.members.push_back({m, cands});
    }
    wins += predict_hard(e, x, attrs, cands) == std::vector<int>{majority_class};
  }
  detail = std::to_string(wins) + "/1000 strict majorities honored";
  return wins == 1000;
}

bool criterion_variability_trend(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  testutil::TempDir dir;

  // (a) positive cross-partition std for both models
  const auto var_report = cmd_variability(trend_variability_config(), dir.str() + "/var");
  for (const auto& [model, metric, mean, std_dev] : var_report.summary) {
    if (metric == "per_class_accuracy" && !(std_dev > 0.0)) {
      detail = "zero variability for " + model;
      return false;
    }
  }

  // (b) s-trend: s=0.9 near baseline, s=0.3 no better than s=0.9
  const auto ens_report = cmd_ensemble(trend_ensemble_config(), dir.str() + "/ens");
  std::vector<double> baselines;
  for (const auto& cell : ens_report.cells)
    if (cell.s == 0.3) baselines.push_back(cell.baseline_metric);
  double baseline_mean = 0.0;
  for (const double v : baselines) baseline_mean += v;
  baseline_mean /= static_cast<double>(baselines.size());
  double mean_s03 = 0.0, mean_s09 = 0.0;
  for (const auto& [n, s, mean, std_dev] : ens_report.summary) {
    if (s == 0.3) mean_s03 = mean;
    if (s == 0.9) mean_s09 = mean;
  }
  const double elapsed = seconds_since(start);
  detail = "baseline " + std::to_string(baseline_mean * 100) + ", s=0.3 " +
           std::to_string(mean_s03 * 100) + ", s=0.9 " + std::to_string(mean_s09 * 100) + " (" +
           std::to_string(elapsed) + "s)";
  return std::abs(mean_s09 - baseline_mean) <= 0.03 && mean_s03 <= mean_s09 && elapsed < 600.0;
}

bool criterion_determinism(std::string& detail) {
  testutil::TempDir dir;
  // synthetic generation (criterion 3 input) twice
  cmd_synth(recovery_spec(0.0, 42), dir.str() + "/synth_a");
  cmd_synth(recovery_spec(0.0, 42), dir.str() + "/synth_b");
  for (const char* name : {"/features.csv", "/labels.csv", "/attributes.csv", "/meta.json"}) {
    if (read_file(dir.str() + "/synth_a" + name) != read_file(dir.str() + "/synth_b" + name)) {
      detail = std::string("synth mismatch in ") + name;
      return false;
    }
  }
  // the trend protocols (criterion 8) twice, and with 1 vs 4 workers
  auto var_cfg = trend_variability_config();
  auto ens_cfg = trend_ensemble_config();
  var_cfg.workers = 1;
  ens_cfg.workers = 1;
  cmd_variability(var_cfg, dir.str() + "/var_a");
  cmd_ensemble(ens_cfg, dir.str() + "/ens_a");
  cmd_variability(var_cfg, dir.str() + "/var_b");
  cmd_ensemble(ens_cfg, dir.str() + "/ens_b");
  var_cfg.workers = 4;
  ens_cfg.workers = 4;
  cmd_variability(var_cfg, dir.str() + "/var_c");
  cmd_ensemble(ens_cfg, dir.str() + "/ens_c");
  for (const char* name : {"/records.csv", "/summary.csv", "/tests.csv"}) {
    const auto base = read_file(dir.str() + "/var_a" + name);
    if (base != read_file(dir.str() + "/var_b" + name) ||
        base != read_file(dir.str() + "/var_c" + name)) {
      detail = std::string("variability mismatch in ") + name;
      return false;
    }
  }
  for (const char* name : {"/ensemble.csv", "/ensemble_summary.csv"}) {
    const auto base = read_file(dir.str() + "/ens_a" + name);
    if (base != read_file(dir.str() + "/ens_b" + name) ||
        base != read_file(dir.str() + "/ens_c" + name)) {
      detail = std::string("ensemble mismatch in ") + name;
      return false;
    }
  }
  detail = "all emitted files byte-identical across reruns and worker counts";
  return true;
}

bool criterion_external_sun(std::string& detail) {
  const char* sun_dir = std::getenv("ZSCBENCH_SUN_DIR");
  if (sun_dir == nullptr) {
    detail = "SKIP: set ZSCBENCH_SUN_DIR to a converted SUN dataset directory to enable";
    return true;
  }
  ExperimentConfig cfg;
  cfg.dataset_path = sun_dir;
  cfg.models = {ModelConfig{"eszsl", {}, {}}};
  VariabilityProtocol proto;
  proto.num_partitions = 22;
  proto.test_class_count = 72;  // standard SUN unseen-class count
  cfg.protocol = proto;
  cfg.base_seed = 0;
  testutil::TempDir dir;
  const auto report = cmd_variability(cfg, dir.str() + "/sun");
  for (const auto& [model, metric, mean, std_dev] : report.summary) {
    if (metric == "per_class_accuracy") {
      detail = "SUN per-class accuracy " + std::to_string(mean * 100);
      return std::abs(mean * 100 - 55.92) <= 3.0;
    }
  }
  detail = "no per-class summary produced";
  return false;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria{
      {"1 eszsl stationarity", criterion_eszsl_stationarity},
      {"2 eszsl closed-form hand case", criterion_eszsl_hand_case},
      {"3 synthetic recovery oracle", criterion_synthetic_recovery},
      {"4 sje single-step hand case", criterion_sje_hand_case},
      {"5 wilcoxon oracle equivalence", criterion_wilcoxon},
      {"6 ensemble degenerate equalities", criterion_ensemble_degenerate},
      {"7 majority property", criterion_majority},
      {"8 variability and s-trend", criterion_variability_trend},
      {"9 determinism", criterion_determinism},
      {"10 external SUN reproduction (optional)", criterion_external_sun},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %s: %s\n", ok ? "PASS" : "FAIL", c.name, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}
