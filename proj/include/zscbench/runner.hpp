#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <tuple>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "zscbench/csv.hpp"
#include "zscbench/dataset.hpp"
#include "zscbench/ensemble.hpp"
#include "zscbench/errors.hpp"
#include "zscbench/evaluation.hpp"
#include "zscbench/models.hpp"
#include "zscbench/rng.hpp"
#include "zscbench/splits.hpp"
#include "zscbench/synth.hpp"

namespace zsc {

enum class Metric { top1, per_class };

inline Metric parse_metric(const std::string& s) {
  if (s == "top1") return Metric::top1;
  if (s == "per_class") return Metric::per_class;
  throw ConfigError("unknown metric: " + s);
}

struct ModelConfig {
  std::string name;  // "eszsl" or "sje"
  EszslParams eszsl;
  SjeParams sje;
};

struct VariabilityProtocol {
  int num_partitions = 22;
  int test_class_count = 0;
};

struct EnsembleProtocol {
  ModelConfig base_model;
  std::vector<int> n_list;
  std::vector<double> s_list;
  int repeats = 4;
  int test_class_count = 0;
  Voting voting = Voting::soft;
  Metric metric = Metric::per_class;
};

struct ExperimentConfig {
  std::optional<std::string> dataset_path;
  std::optional<SynthSpec> synth;
  std::vector<ModelConfig> models;
  // monostate = no protocol configured (dataset-generation-only configs)
  std::variant<std::monostate, VariabilityProtocol, EnsembleProtocol> protocol;
  std::uint64_t base_seed = 0;
  int workers = 0;  // 0 = hardware concurrency
};

namespace detail {

inline bool log_enabled() {
  const char* v = std::getenv("ZSCBENCH_LOG");
  return v != nullptr && std::string(v) != "" && std::string(v) != "off" &&
         std::string(v) != "quiet";
}

inline void log(const std::string& msg) {
  if (log_enabled()) std::fprintf(stderr, "[zscbench] %s\n", msg.c_str());
}

// Runs fn(job_index) for every index on a bounded pool. Jobs must be pure;
// each derives its own RNG stream from its index, so results are independent
// of scheduling and worker count.
template <typename Fn>
void parallel_for(std::size_t num_jobs, int workers, Fn&& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  const auto pool = std::min<std::size_t>(static_cast<std::size_t>(workers), num_jobs);
  if (pool <= 1) {
    for (std::size_t i = 0; i < num_jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (std::size_t t = 0; t < pool; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= num_jobs || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

inline ModelConfig parse_model(const nlohmann::json& j) {
  ModelConfig m;
  if (j.is_string()) {
    m.name = j.get<std::string>();
  } else if (j.is_object()) {
    if (!j.contains("name")) throw ConfigError("model entry missing \"name\"");
    m.name = j["name"].get<std::string>();
    if (j.contains("gamma")) m.eszsl.gamma = j["gamma"].get<double>();
    if (j.contains("lambda")) m.eszsl.lambda = j["lambda"].get<double>();
    if (j.contains("eta")) m.sje.eta = j["eta"].get<double>();
    if (j.contains("epochs")) m.sje.epochs = j["epochs"].get<int>();
  } else {
    throw ConfigError("model entry must be a string or object");
  }
  if (m.name != "eszsl" && m.name != "sje") throw ConfigError("unknown model: " + m.name);
  return m;
}

inline SynthSpec parse_synth(const nlohmann::json& j) {
  SynthSpec s;
  if (j.contains("num_classes")) s.num_classes = j["num_classes"].get<int>();
  if (j.contains("attr_dim")) s.attr_dim = j["attr_dim"].get<int>();
  if (j.contains("feature_dim")) s.feature_dim = j["feature_dim"].get<int>();
  if (j.contains("samples_per_class")) s.samples_per_class = j["samples_per_class"].get<int>();
  if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("min_attr_separation"))
    s.min_attr_separation = j["min_attr_separation"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  validate(s);
  return s;
}

}  // namespace detail

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ConfigError(path + ": config must declare \"version\": 1");

  ExperimentConfig cfg;
  if (j.contains("dataset_path")) cfg.dataset_path = j["dataset_path"].get<std::string>();
  if (j.contains("synth")) cfg.synth = detail::parse_synth(j["synth"]);
  if (cfg.dataset_path.has_value() == cfg.synth.has_value())
    throw ConfigError(path + ": exactly one of \"dataset_path\" / \"synth\" is required");

  if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();

  if (j.contains("models")) {
    for (const auto& m : j["models"]) cfg.models.push_back(detail::parse_model(m));
  }

  if (!j.contains("protocol")) {
    if (!cfg.synth)
      throw ConfigError(path + ": missing \"protocol\" object");
    return cfg;  // generation-only config
  }
  if (!j["protocol"].is_object()) throw ConfigError(path + ": \"protocol\" must be an object");
  const auto& p = j["protocol"];
  const auto type = p.value("type", std::string{});
  if (type == "variability") {
    VariabilityProtocol v;
    if (!p.contains("num_partitions") || !p.contains("test_class_count"))
      throw ConfigError(path + ": variability protocol needs num_partitions, test_class_count");
    v.num_partitions = p["num_partitions"].get<int>();
    v.test_class_count = p["test_class_count"].get<int>();
    if (v.num_partitions < 2)
      throw ConfigError(path + ": num_partitions must be >= 2");
    if (cfg.models.empty())
      throw ConfigError(path + ": variability protocol needs at least one model");
    cfg.protocol = v;
  } else if (type == "ensemble") {
    EnsembleProtocol e;
    if (!p.contains("base_model") || !p.contains("n_list") || !p.contains("s_list") ||
        !p.contains("test_class_count"))
      throw ConfigError(path +
                        ": ensemble protocol needs base_model, n_list, s_list, test_class_count");
    e.base_model = detail::parse_model(p["base_model"]);
    e.n_list = p["n_list"].get<std::vector<int>>();
    e.s_list = p["s_list"].get<std::vector<double>>();
    e.test_class_count = p["test_class_count"].get<int>();
    if (p.contains("repeats")) e.repeats = p["repeats"].get<int>();
    if (p.contains("voting")) e.voting = parse_voting(p["voting"].get<std::string>());
    if (p.contains("metric")) e.metric = parse_metric(p["metric"].get<std::string>());
    if (e.n_list.empty() || e.s_list.empty())
      throw ConfigError(path + ": n_list and s_list must be nonempty");
    if (e.repeats < 1) throw ConfigError(path + ": repeats must be >= 1");
    cfg.protocol = e;
  } else {
    throw ConfigError(path + ": unknown protocol type \"" + type + "\"");
  }
  return cfg;
}

namespace detail {

inline Dataset prepare_dataset(const ExperimentConfig& cfg) {
  Dataset d = cfg.dataset_path ? load_dataset(*cfg.dataset_path) : generate(*cfg.synth);
  return l2_normalize(d);
}

// Seed fan-out tree (documented in the README): partition i draws from stream
// (base_seed, 1000 + i); per-partition model shuffles from
// (partition_stream, 500 + model_index); per-(n,s)-cell ensembles from
// (partition_stream, 2000 + cell_index) with member j on (cell_stream, j).
constexpr std::uint64_t kPartitionSeedOffset = 1000;
constexpr std::uint64_t kModelSeedOffset = 500;
constexpr std::uint64_t kCellSeedOffset = 2000;

inline CompatibilityModel train_model(const ModelConfig& mc, const Dataset& train,
                                      SeedSpec shuffle_seed) {
  if (mc.name == "eszsl") return train_eszsl(train, mc.eszsl);
  SjeParams params = mc.sje;
  params.seed = shuffle_seed;
  return train_sje(train, params);
}

inline double evaluate_metric(Metric metric, const std::vector<int>& preds,
                              const std::vector<int>& truth) {
  return metric == Metric::top1 ? top1_accuracy(preds, truth) : per_class_accuracy(preds, truth);
}

inline std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace detail

struct VariabilityReport {
  std::vector<EvalRecord> records;
  // (model, metric_name, mean, std)
  std::vector<std::tuple<std::string, std::string, double, double>> summary;
  // (model_a, model_b, metric_name, result)
  std::vector<std::tuple<std::string, std::string, std::string, TestResult>> tests;
};

// Variability protocol: k random partitions, every configured model trained
// and evaluated on each, both accuracy metrics recorded, paired Wilcoxon
// tests between every model pair.
inline VariabilityReport cmd_variability(const ExperimentConfig& cfg,
                                         const std::string& out_dir) {
  const auto& proto = std::get<VariabilityProtocol>(cfg.protocol);
  const Dataset data = detail::prepare_dataset(cfg);
  const auto k = static_cast<std::size_t>(proto.num_partitions);
  const auto num_models = cfg.models.size();

  VariabilityReport report;
  report.records.resize(k * num_models);
  detail::parallel_for(k * num_models, cfg.workers, [&](std::size_t job) {
    const auto pi = job / num_models;
    const auto mi = job % num_models;
    const SeedSpec partition_seed{cfg.base_seed, detail::kPartitionSeedOffset + pi};
    ClassPartition partition;
    try {
      partition = sample_partition(static_cast<int>(data.num_classes()),
                                   proto.test_class_count, partition_seed);
      const Dataset train = restrict_to_classes(data, partition.train_classes);
      const Dataset test = restrict_to_classes(data, partition.test_classes);
      const auto model = detail::train_model(
          cfg.models[mi], train,
          SeedSpec{stream_seed(partition_seed), detail::kModelSeedOffset + mi});
      const auto preds = predict(model, test.features, test.attributes, partition.test_classes);
      EvalRecord rec;
      rec.partition_index = static_cast<int>(pi);
      rec.model_name = cfg.models[mi].name;
      rec.accuracy = top1_accuracy(preds, test.labels);
      rec.per_class_accuracy = per_class_accuracy(preds, test.labels);
      report.records[job] = rec;
      detail::log("partition " + std::to_string(pi) + " model " + cfg.models[mi].name +
                  " per-class acc " + detail::pct(rec.per_class_accuracy));
    } catch (const std::exception& e) {
      throw RuntimeError("partition " + std::to_string(pi) + ", model " + cfg.models[mi].name +
                         ": " + e.what());
    }
  });

  // per-model aggregates
  for (std::size_t mi = 0; mi < num_models; ++mi) {
    std::vector<double> acc, pc;
    for (std::size_t pi = 0; pi < k; ++pi) {
      acc.push_back(report.records[pi * num_models + mi].accuracy);
      pc.push_back(report.records[pi * num_models + mi].per_class_accuracy);
    }
    const auto [am, as] = mean_std(acc);
    const auto [pm, ps] = mean_std(pc);
    report.summary.emplace_back(cfg.models[mi].name, "accuracy", am, as);
    report.summary.emplace_back(cfg.models[mi].name, "per_class_accuracy", pm, ps);
  }

  // paired tests per model pair and metric
  for (std::size_t a = 0; a < num_models; ++a) {
    for (std::size_t b = a + 1; b < num_models; ++b) {
      for (const bool per_class : {false, true}) {
        std::vector<double> va, vb;
        for (std::size_t pi = 0; pi < k; ++pi) {
          const auto& ra = report.records[pi * num_models + a];
          const auto& rb = report.records[pi * num_models + b];
          va.push_back(per_class ? ra.per_class_accuracy : ra.accuracy);
          vb.push_back(per_class ? rb.per_class_accuracy : rb.accuracy);
        }
        report.tests.emplace_back(cfg.models[a].name, cfg.models[b].name,
                                  per_class ? "per_class_accuracy" : "accuracy",
                                  wilcoxon_signed_rank(va, vb));
      }
    }
  }

  // persist
  std::filesystem::create_directories(out_dir);
  std::string records = "partition_index,model,accuracy,per_class_accuracy\n";
  for (const auto& r : report.records) {
    records += std::to_string(r.partition_index) + "," + r.model_name + "," +
               csv::format_double(r.accuracy) + "," + csv::format_double(r.per_class_accuracy) +
               "\n";
  }
  csv::write_file(out_dir + "/records.csv", records);

  std::string summary = "model,metric,mean,std\n";
  for (const auto& [model, metric, mean, std_dev] : report.summary) {
    summary += model + "," + metric + "," + csv::format_double(mean) + "," +
               csv::format_double(std_dev) + "\n";
  }
  csv::write_file(out_dir + "/summary.csv", summary);

  if (!report.tests.empty()) {
    std::string tests = "model_a,model_b,metric,statistic_w,p_two_sided,n_effective,method\n";
    for (const auto& [ma, mb, metric, t] : report.tests) {
      tests += ma + "," + mb + "," + metric + "," + csv::format_double(t.statistic_w) + "," +
               csv::format_double(t.p_two_sided) + "," + std::to_string(t.n_effective) + "," +
               (t.method == TestMethod::exact ? "exact" : "normal_approx") + "\n";
    }
    csv::write_file(out_dir + "/tests.csv", tests);
  }

  // text table
  std::printf("Variability over %zu partitions (values in %%):\n", k);
  std::printf("%-24s %-10s %s\n", "metric", "model", "mean (std)");
  for (const auto& [model, metric, mean, std_dev] : report.summary) {
    std::printf("%-24s %-10s %s (%s)\n", metric.c_str(), model.c_str(),
                detail::pct(mean).c_str(), detail::pct(std_dev).c_str());
  }
  for (const auto& [ma, mb, metric, t] : report.tests) {
    std::printf("%-24s %s vs %s  p-value %.8g\n", metric.c_str(), ma.c_str(), mb.c_str(),
                t.p_two_sided);
  }
  return report;
}

struct EnsembleCell {
  int n = 0;
  double s = 0.0;
  int repeat = 0;
  double ensemble_metric = 0.0;
  double baseline_metric = 0.0;
};

struct EnsembleReport {
  std::vector<EnsembleCell> cells;
  // (n, s, mean, std) over repeats of the ensemble metric
  std::vector<std::tuple<int, double, double, double>> summary;
};

// Ensemble protocol: per repeat, one fixed random partition; per (n, s) cell,
// a bagged ensemble and the single-model baseline trained on that same
// partition and compared on the held-out classes.
inline EnsembleReport cmd_ensemble(const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto& proto = std::get<EnsembleProtocol>(cfg.protocol);
  const Dataset data = detail::prepare_dataset(cfg);
  const auto repeats = static_cast<std::size_t>(proto.repeats);
  const auto cells_per_repeat = proto.n_list.size() * proto.s_list.size();

  struct RepeatContext {
    ClassPartition partition;
    Dataset train, test;
    double baseline_metric = 0.0;
    std::uint64_t partition_stream = 0;
  };
  std::vector<RepeatContext> contexts(repeats);
  detail::parallel_for(repeats, cfg.workers, [&](std::size_t r) {
    auto& ctx = contexts[r];
    const SeedSpec partition_seed{cfg.base_seed, detail::kPartitionSeedOffset + r};
    ctx.partition_stream = stream_seed(partition_seed);
    ctx.partition = sample_partition(static_cast<int>(data.num_classes()),
                                     proto.test_class_count, partition_seed);
    ctx.train = restrict_to_classes(data, ctx.partition.train_classes);
    ctx.test = restrict_to_classes(data, ctx.partition.test_classes);
    const auto baseline = detail::train_model(
        proto.base_model, ctx.train, SeedSpec{ctx.partition_stream, detail::kModelSeedOffset});
    const auto preds =
        predict(baseline, ctx.test.features, ctx.test.attributes, ctx.partition.test_classes);
    ctx.baseline_metric = detail::evaluate_metric(proto.metric, preds, ctx.test.labels);
  });

  EnsembleReport report;
  report.cells.resize(repeats * cells_per_repeat);
  detail::parallel_for(repeats * cells_per_repeat, cfg.workers, [&](std::size_t job) {
    const auto r = job / cells_per_repeat;
    const auto cell = job % cells_per_repeat;
    const auto ni = cell / proto.s_list.size();
    const auto si = cell % proto.s_list.size();
    const int n = proto.n_list[ni];
    const double s = proto.s_list[si];
    const auto& ctx = contexts[r];
    try {
      const MemberTrainer trainer = [&](const Dataset& subset, SeedSpec seed) {
        return detail::train_model(proto.base_model, subset, seed);
      };
      const auto ens = train_bagged(
          ctx.train, ctx.partition.train_classes, n, s, trainer,
          stream_seed(SeedSpec{ctx.partition_stream, detail::kCellSeedOffset + cell}),
          proto.voting);
      const auto preds =
          predict_ensemble(ens, ctx.test.features, ctx.test.attributes, ctx.partition.test_classes);
      EnsembleCell out;
      out.n = n;
      out.s = s;
      out.repeat = static_cast<int>(r);
      out.ensemble_metric = detail::evaluate_metric(proto.metric, preds, ctx.test.labels);
      out.baseline_metric = ctx.baseline_metric;
      report.cells[job] = out;
      detail::log("repeat " + std::to_string(r) + " n=" + std::to_string(n) + " s=" +
                  csv::format_double(s) + " metric " + detail::pct(out.ensemble_metric));
    } catch (const std::exception& e) {
      throw RuntimeError("(n=" + std::to_string(n) + ", s=" + csv::format_double(s) +
                         ", repeat=" + std::to_string(r) + "): " + e.what());
    }
  });

  // aggregate over repeats per (n, s); repeats may be 1, in which case std is 0
  for (std::size_t ni = 0; ni < proto.n_list.size(); ++ni) {
    for (std::size_t si = 0; si < proto.s_list.size(); ++si) {
      std::vector<double> values;
      for (std::size_t r = 0; r < repeats; ++r)
        values.push_back(report.cells[r * cells_per_repeat + ni * proto.s_list.size() + si]
                             .ensemble_metric);
      double mean = 0.0, std_dev = 0.0;
      if (values.size() >= 2) {
        std::tie(mean, std_dev) = mean_std(values);
      } else {
        mean = values.front();
      }
      report.summary.emplace_back(proto.n_list[ni], proto.s_list[si], mean, std_dev);
    }
  }

  std::filesystem::create_directories(out_dir);
  // cells.csv ordered by (n, s, repeat) for stable diffing
  std::string cells = "n,s,repeat,ensemble_metric,baseline_metric\n";
  for (std::size_t ni = 0; ni < proto.n_list.size(); ++ni) {
    for (std::size_t si = 0; si < proto.s_list.size(); ++si) {
      for (std::size_t r = 0; r < repeats; ++r) {
        const auto& c = report.cells[r * cells_per_repeat + ni * proto.s_list.size() + si];
        cells += std::to_string(c.n) + "," + csv::format_double(c.s) + "," +
                 std::to_string(c.repeat) + "," + csv::format_double(c.ensemble_metric) + "," +
                 csv::format_double(c.baseline_metric) + "\n";
      }
    }
  }
  csv::write_file(out_dir + "/ensemble.csv", cells);

  std::string summary = "n,s,mean,std\n";
  for (const auto& [n, s, mean, std_dev] : report.summary) {
    summary += std::to_string(n) + "," + csv::format_double(s) + "," + csv::format_double(mean) +
               "," + csv::format_double(std_dev) + "\n";
  }
  csv::write_file(out_dir + "/ensemble_summary.csv", summary);

  // text grid: one row per n, one column per s
  std::vector<double> baselines;
  for (const auto& ctx : contexts) baselines.push_back(ctx.baseline_metric);
  double base_mean = baselines.front(), base_std = 0.0;
  if (baselines.size() >= 2) std::tie(base_mean, base_std) = mean_std(baselines);
  std::printf("Baseline (%s): %s (%s)\n", proto.base_model.name.c_str(),
              detail::pct(base_mean).c_str(), detail::pct(base_std).c_str());
  std::printf("%-6s", "n \\ s");
  for (const double s : proto.s_list) std::printf(" %14.2f", s);
  std::printf("\n");
  for (std::size_t ni = 0; ni < proto.n_list.size(); ++ni) {
    std::printf("%-6d", proto.n_list[ni]);
    for (std::size_t si = 0; si < proto.s_list.size(); ++si) {
      const auto& [n, s, mean, std_dev] = report.summary[ni * proto.s_list.size() + si];
      std::printf("  %s (%s)", detail::pct(mean).c_str(), detail::pct(std_dev).c_str());
    }
    std::printf("\n");
  }
  return report;
}

inline void cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  const Dataset d = generate(spec);
  std::filesystem::create_directories(out_dir);
  save_dataset(d, out_dir);
  std::printf("wrote synthetic dataset: %lld samples, %lld classes -> %s\n",
              static_cast<long long>(d.num_samples()), static_cast<long long>(d.num_classes()),
              out_dir.c_str());
}

}  // namespace zsc
