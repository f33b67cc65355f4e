#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnmr/cmapss.hpp"
#include "gnmr/model.hpp"

namespace gnmr {

struct TrainConfig {
  ModelKind model = ModelKind::gnmr;
  ModelConfig model_cfg;
  std::size_t batch_size = 32;
  double lr0 = 1e-3;
  double lr_decay = 0.70710678118654752440;  // 1/sqrt(2)
  std::size_t lr_decay_every = 10;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  double rul_cap = 130.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the fields present in `doc` onto `base`.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

/// lr0 * decay^floor(epoch / every).
double lr_at(const TrainConfig& cfg, std::size_t epoch);

struct AdamState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const std::vector<NamedTensor>& params, double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8);
/// Bias-corrected Adam update from each parameter's accumulated gradient.
/// Throws NumericalError naming the first tensor whose gradient is not finite.
void adam_step(std::vector<NamedTensor>& params, AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;  // cycles
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<RulModel> best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
};

/// RMSE in cycles of clamped predictions against capped targets, eval mode.
double validation_rmse(const RulModel& model, std::span<const WindowSample> windows, double rul_cap,
                       std::size_t chunk = 64);

/// Mini-batch Adam on L_D; `model` must already be initialized and is
/// updated in place. Returns a copy of the lowest-validation-RMSE snapshot.
TrainResult train(RulModel& model, std::span<const WindowSample> train_windows,
                  std::span<const WindowSample> val_windows, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct GridSpec {
  std::vector<std::size_t> hidden{30, 60};
  std::vector<int> steps{0, 2, 4};
  std::vector<std::size_t> gru_layers{2, 3, 4};
};

/// One config per grid point, ordered by (d, tau, layers), each with a seed
/// derived from base.seed and its index.
std::vector<TrainConfig> expand_grid(const TrainConfig& base, const GridSpec& grid);

struct GridOutcome {
  TrainConfig cfg;
  double val_rmse = 0.0;
  std::unique_ptr<RulModel> model;
  std::vector<EpochRecord> history;
};

using GridRunner = std::function<GridOutcome(const TrainConfig& cfg, std::size_t index)>;

struct GridResult {
  std::vector<GridOutcome> runs;
  std::size_t best = 0;
};

/// Lowest validation RMSE; ties go to smaller d, then smaller tau, then fewer layers.
std::size_t select_best(std::span<const GridOutcome> runs);
/// Runs every point (up to `jobs` at a time) and selects the best.
GridResult grid_search(const std::vector<TrainConfig>& points, const GridRunner& runner, std::size_t jobs = 1);

}  // namespace gnmr
