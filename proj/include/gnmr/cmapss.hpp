#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnmr/channels.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/rng.hpp"

namespace gnmr {

/// One engine's trajectory: cycles x 24 channels, row-major, cycle 1 first.
struct EngineRun {
  int unit_id = 0;
  /// Last cycle for training runs; last observed cycle + provided RUL for test runs.
  int failure_cycle = 0;
  std::vector<double> channels;

  std::size_t cycles() const { return channels.size() / kChannelCount; }
  double at(std::size_t cycle_index, std::size_t channel) const {
    return channels[cycle_index * kChannelCount + channel];
  }
};

struct CmapssData {
  std::vector<EngineRun> train;
  std::vector<EngineRun> test;
};

/// Reads whitespace-separated rows (unit, cycle, 3 settings, 21 sensors).
/// `source` names the stream in error messages.
std::vector<EngineRun> parse_runs(std::istream& in, const std::string& source);
std::vector<int> parse_rul(std::istream& in, const std::string& source);
CmapssData parse_cmapss(const std::filesystem::path& train_path, const std::filesystem::path& test_path,
                        const std::filesystem::path& rul_path);
/// Looks up train_<id>.txt, test_<id>.txt, RUL_<id>.txt under `dir`.
CmapssData load_cmapss_dir(const std::filesystem::path& dir, const std::string& dataset_id);

/// Unit-level split: floor(n * ratio) units go to training, the rest to validation.
std::pair<std::vector<EngineRun>, std::vector<EngineRun>> split_train_val(std::vector<EngineRun> runs,
                                                                          double ratio, Rng& rng);

struct NormalizationStats {
  std::array<double, kChannelCount> min{};
  std::array<double, kChannelCount> max{};
};

NormalizationStats fit_normalization(std::span<const EngineRun> train);
/// x -> 2 (x - min) / (max - min) - 1; constant channels map to 0. No clipping.
EngineRun apply_normalization(const EngineRun& run, const NormalizationStats& stats);
std::vector<EngineRun> apply_normalization(std::span<const EngineRun> runs, const NormalizationStats& stats);
/// Per-channel mean over every row of the (normalized) runs; used as padding.
std::vector<double> channel_means(std::span<const EngineRun> runs);

struct WindowConfig {
  std::size_t length = 100;
  std::size_t shift = 5;
  double rul_cap = 130.0;

  bool operator==(const WindowConfig&) const = default;
};

struct WindowSample {
  std::vector<double> channels;  // length x 24, row-major, oldest row first
  double target = 0.0;           // min(RUL, cap) / cap
  double raw_rul = 0.0;          // unclipped RUL in cycles at the last step
  double age = 0.0;              // cycle index of the last step
  int unit_id = 0;
  bool is_test = false;

  std::size_t length() const { return channels.size() / kChannelCount; }
};

std::vector<WindowSample> make_windows(const EngineRun& run, const WindowConfig& cfg,
                                       std::span<const double> pad_values, bool is_test = false);
/// Exactly one window per run, ending at its last observed cycle.
std::vector<WindowSample> make_test_windows(std::span<const EngineRun> test_runs, const WindowConfig& cfg,
                                            std::span<const double> pad_values);

/// Channel columns fed to each node: S_j in config order, then the global channels.
std::vector<std::vector<std::size_t>> node_columns(const EquipmentGraph& g);
/// Per-node series, each length x p_j row-major.
std::vector<std::vector<double>> partition_by_node(const WindowSample& w, const EquipmentGraph& g);

struct PcaTransform {
  std::vector<double> mean;                 // dim
  std::vector<double> components;           // k x dim, rows orthonormal
  std::vector<double> explained_ratio;      // k, descending
  std::size_t dim = 0;
  std::size_t k = 0;

  double cumulative_explained() const;
};

/// PCA over `rows` (n x dim, row-major).
PcaTransform pca_fit_rows(std::span<const double> rows, std::size_t dim, std::size_t k);
/// Pools every time step of every training window as one row.
PcaTransform pca_fit(std::span<const WindowSample> train_windows, std::size_t k);
/// Pools every cycle of every (normalized) training run as one row.
PcaTransform pca_fit_runs(std::span<const EngineRun> runs, std::size_t k);
/// Projects an n x dim block to n x k.
std::vector<double> pca_apply(std::span<const double> rows, const PcaTransform& t);
std::vector<double> pca_reconstruct(std::span<const double> projected, const PcaTransform& t);

/// Everything preprocessing produces, before windowing.
struct PreparedDataset {
  std::string dataset_id;
  WindowConfig windows;
  std::uint64_t seed = 0;
  double split_ratio = 0.8;
  std::uint64_t graph_hash = 0;
  NormalizationStats stats;
  std::vector<double> pad_values;
  std::vector<EngineRun> train;  // normalized
  std::vector<EngineRun> val;
  std::vector<EngineRun> test;
};

PreparedDataset prepare_dataset(const CmapssData& raw, const std::string& dataset_id, const WindowConfig& cfg,
                                std::uint64_t seed, double split_ratio, std::uint64_t graph_hash);

struct DatasetWindows {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::vector<WindowSample> test;
};

DatasetWindows build_windows(const PreparedDataset& data);

/// Versioned binary cache. Layout: magic "GNMRDSC1", u32 version, u64 header
/// length, JSON header (key, stats, padding, unit lists), then for each of
/// train/val/test a u32 run count followed by per run: i32 unit, i32 failure
/// cycle, u32 cycles, cycles*24 little-endian f64.
void save_dataset_cache(const PreparedDataset& data, const std::filesystem::path& path);
PreparedDataset load_dataset_cache(const std::filesystem::path& path);
std::string dataset_cache_name(const PreparedDataset& data);
/// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace gnmr
