#include "gnmr/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "binary_io.hpp"
#include "gnmr/error.hpp"

namespace gnmr {
namespace {

nlohmann::json grid_to_json(const GridSpec& g) {
  return {{"hidden", g.hidden}, {"steps", g.steps}, {"gru_layers", g.gru_layers}};
}

std::size_t count_windows(std::span<const EngineRun> runs, const PreparedDataset& d) {
  std::size_t n = 0;
  for (const auto& r : runs) n += make_windows(r, d.windows, d.pad_values).size();
  return n;
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"dataset", cfg.dataset},
          {"data_dir", cfg.data_dir.string()},
          {"graph", cfg.graph_path.string()},
          {"variant", cfg.variant},
          {"graph_seed", cfg.graph_seed},
          {"cache_dir", cfg.cache_dir.string()},
          {"out_dir", cfg.out_dir.string()},
          {"split_seed", cfg.split_seed},
          {"split_ratio", cfg.split_ratio},
          {"window", {{"length", cfg.windows.length}, {"shift", cfg.windows.shift}, {"rul_cap", cfg.windows.rul_cap}}},
          {"train", to_json(cfg.train)},
          {"grid", grid_to_json(cfg.grid)},
          {"clamp_predictions", cfg.clamp_predictions}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& doc, ExperimentConfig cfg) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::vector<std::string> known{"dataset",  "data_dir",    "graph",  "variant", "graph_seed",
                                              "cache_dir", "out_dir",    "split_seed", "split_ratio", "window",
                                              "train",    "grid",        "clamp_predictions"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown experiment config field '" + key + "'");
    }
  }
  try {
    if (doc.contains("dataset")) cfg.dataset = doc["dataset"].get<std::string>();
    if (doc.contains("data_dir")) cfg.data_dir = doc["data_dir"].get<std::string>();
    if (doc.contains("graph")) cfg.graph_path = doc["graph"].get<std::string>();
    if (doc.contains("variant")) cfg.variant = doc["variant"].get<std::string>();
    if (doc.contains("graph_seed")) cfg.graph_seed = doc["graph_seed"].get<std::uint64_t>();
    if (doc.contains("cache_dir")) cfg.cache_dir = doc["cache_dir"].get<std::string>();
    if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
    if (doc.contains("split_seed")) cfg.split_seed = doc["split_seed"].get<std::uint64_t>();
    if (doc.contains("split_ratio")) cfg.split_ratio = doc["split_ratio"].get<double>();
    if (doc.contains("window")) {
      const auto& w = doc["window"];
      if (w.contains("length")) cfg.windows.length = w["length"].get<std::size_t>();
      if (w.contains("shift")) cfg.windows.shift = w["shift"].get<std::size_t>();
      if (w.contains("rul_cap")) cfg.windows.rul_cap = w["rul_cap"].get<double>();
    }
    if (doc.contains("train")) cfg.train = train_config_from_json(doc["train"], cfg.train);
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      if (g.contains("hidden")) cfg.grid.hidden = g["hidden"].get<std::vector<std::size_t>>();
      if (g.contains("steps")) cfg.grid.steps = g["steps"].get<std::vector<int>>();
      if (g.contains("gru_layers")) cfg.grid.gru_layers = g["gru_layers"].get<std::vector<std::size_t>>();
    }
    if (doc.contains("clamp_predictions")) cfg.clamp_predictions = doc["clamp_predictions"].get<bool>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("experiment config: ") + ex.what());
  }
  if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (cfg.windows.length == 0 || cfg.windows.shift == 0) throw ConfigError("window length and shift must be positive");
  if (!(cfg.windows.rul_cap > 0.0)) throw ConfigError("rul_cap must be positive");
  cfg.train.rul_cap = cfg.windows.rul_cap;
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config " + path.string() + ": " + ex.what());
  }
  return experiment_from_json(doc, std::move(base));
}

EquipmentGraph resolve_graph(const ExperimentConfig& cfg) {
  Rng rng(cfg.graph_seed);
  return graph_variant(load_graph_config(cfg.graph_path), cfg.variant, rng);
}

std::filesystem::path dataset_cache_path(const ExperimentConfig& cfg, std::uint64_t graph_hash) {
  const nlohmann::json key{{"dataset", cfg.dataset},         {"split_seed", cfg.split_seed},
                           {"split_ratio", cfg.split_ratio}, {"length", cfg.windows.length},
                           {"shift", cfg.windows.shift},     {"rul_cap", cfg.windows.rul_cap},
                           {"graph_hash", hash_hex(graph_hash)}};
  const std::string text = key.dump();
  return cfg.cache_dir / (cfg.dataset + "_" + hash_hex(detail::fnv1a(text.data(), text.size())) + ".gnmrcache");
}

nlohmann::json to_json(const DatasetSummary& s) {
  return {{"dataset", s.dataset},
          {"train_units", s.train_units},
          {"test_units", s.test_units},
          {"split_train_units", s.split_train_units},
          {"split_val_units", s.split_val_units},
          {"train_windows", s.train_windows},
          {"val_windows", s.val_windows},
          {"train_val_windows", s.train_windows + s.val_windows},
          {"test_windows", s.test_windows},
          {"graph_hash", s.graph_hash},
          {"cache_file", s.cache_file}};
}

namespace {

DatasetSummary summarize(const PreparedDataset& d, const DatasetWindows& w, const std::filesystem::path& cache) {
  DatasetSummary s;
  s.dataset = d.dataset_id;
  s.split_train_units = d.train.size();
  s.split_val_units = d.val.size();
  s.train_units = d.train.size() + d.val.size();
  s.test_units = d.test.size();
  s.train_windows = w.train.size();
  s.val_windows = w.val.size();
  s.test_windows = w.test.size();
  s.graph_hash = hash_hex(d.graph_hash);
  s.cache_file = cache.filename().string();
  return s;
}

}  // namespace

LoadedDataset load_cached_dataset(const std::filesystem::path& cache_file) {
  LoadedDataset out;
  out.prepared = load_dataset_cache(cache_file);
  out.windows = build_windows(out.prepared);
  out.summary = summarize(out.prepared, out.windows, cache_file);
  out.from_cache = true;
  return out;
}

LoadedDataset load_or_prepare(const ExperimentConfig& cfg, const EquipmentGraph& graph) {
  const std::uint64_t gh = graph_hash(graph);
  const auto cache = dataset_cache_path(cfg, gh);
  if (std::filesystem::exists(cache)) {
    auto loaded = load_cached_dataset(cache);
    if (loaded.prepared.graph_hash != gh) {
      throw CompatibilityError("cache " + cache.string() + " was built for graph " + hash_hex(loaded.prepared.graph_hash));
    }
    return loaded;
  }
  if (cfg.data_dir.empty()) throw ConfigError("no cached dataset at " + cache.string() + " and no data directory given");
  const auto raw = load_cmapss_dir(cfg.data_dir, cfg.dataset);
  LoadedDataset out;
  out.prepared = prepare_dataset(raw, cfg.dataset, cfg.windows, cfg.split_seed, cfg.split_ratio, gh);
  std::filesystem::create_directories(cfg.cache_dir);
  save_dataset_cache(out.prepared, cache);
  out.windows = build_windows(out.prepared);
  out.summary = summarize(out.prepared, out.windows, cache);
  return out;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "epoch,loss,val_rmse,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_rmse) << ','
        << format_double(r.lr) << '\n';
  }
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const EquipmentGraph& graph, const LoadedDataset& data,
                          const std::filesystem::path& out_dir, bool verbose) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.json");
    auto resolved = to_json(cfg);
    resolved["out_dir"] = out_dir.string();
    resolved["resolved_graph"] = graph_to_json(graph);
    resolved["graph_hash"] = hash_hex(graph_hash(graph));
    resolved["cache_file"] = data.summary.cache_file;
    out << resolved.dump(2) << '\n';
  }
  std::optional<PcaTransform> pca;
  if (cfg.train.model == ModelKind::pca_gru_mr) pca = pca_fit_runs(data.prepared.train, cfg.train.model_cfg.pca_components);
  auto model = make_model(cfg.train.model, graph, cfg.train.model_cfg, pca);
  Rng init_rng(Rng::derive(cfg.train.seed, 0));
  model->init_parameters(init_rng);

  const auto on_epoch = [&](const EpochRecord& r) {
    if (verbose) {
      std::fprintf(stderr, "epoch %3zu  loss %.6f  val_rmse %.3f  lr %.2e  (%.1fs)\n", r.epoch, r.train_loss,
                   r.val_rmse, r.lr, r.wall_seconds);
    }
  };
  RunOutcome outcome;
  outcome.result = train(*model, data.windows.train, data.windows.val, cfg.train, on_epoch);
  write_history_csv(outcome.result.history, out_dir / "history.csv");
  save_checkpoint(*outcome.result.best, out_dir / "best.ckpt");
  outcome.test_report = evaluate(*outcome.result.best, data.windows.test, cfg.windows.rul_cap, cfg.clamp_predictions);
  write_eval_report_csv(outcome.test_report, out_dir / "eval_report.csv");
  write_metrics_csv(outcome.test_report, out_dir / "metrics.csv");
  return outcome;
}

}  // namespace gnmr
