#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnmr/cmapss.hpp"
#include "gnmr/evaluation.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/trainer.hpp"

namespace gnmr {

/// Everything one training or grid run needs. Relative paths resolve against
/// the working directory.
struct ExperimentConfig {
  std::string dataset = "FD001";
  std::filesystem::path data_dir;
  std::filesystem::path graph_path = "configs/turbofan_8.json";
  std::string variant = "original";
  std::uint64_t graph_seed = 0;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t split_seed = 0;
  double split_ratio = 0.8;
  WindowConfig windows;
  TrainConfig train;
  GridSpec grid;
  bool clamp_predictions = true;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base = {});

EquipmentGraph resolve_graph(const ExperimentConfig& cfg);

/// Cache file name for a (dataset, split, windowing, graph) combination.
std::filesystem::path dataset_cache_path(const ExperimentConfig& cfg, std::uint64_t graph_hash);

struct DatasetSummary {
  std::string dataset;
  std::size_t train_units = 0;  // before the train/val split
  std::size_t test_units = 0;
  std::size_t split_train_units = 0;
  std::size_t split_val_units = 0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  std::size_t test_windows = 0;
  std::string graph_hash;
  std::string cache_file;
};

nlohmann::json to_json(const DatasetSummary& s);

struct LoadedDataset {
  PreparedDataset prepared;
  DatasetWindows windows;
  DatasetSummary summary;
  bool from_cache = false;
};

/// Reuses the cache under cfg.cache_dir when present, otherwise parses the
/// raw files from cfg.data_dir and writes the cache.
LoadedDataset load_or_prepare(const ExperimentConfig& cfg, const EquipmentGraph& graph);

/// Loads a cache file and rebuilds its windows.
LoadedDataset load_cached_dataset(const std::filesystem::path& cache_file);

struct RunOutcome {
  TrainResult result;
  EvalReport test_report;
};

/// Fits the configured model, then writes config.json, history.csv,
/// best.ckpt, eval_report.csv and metrics.csv into `out_dir`.
RunOutcome run_experiment(const ExperimentConfig& cfg, const EquipmentGraph& graph, const LoadedDataset& data,
                          const std::filesystem::path& out_dir, bool verbose = false);

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace gnmr
