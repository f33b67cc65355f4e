#include "gnmr/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "gnmr/error.hpp"
#include "gnmr/evaluation.hpp"

namespace gnmr {

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"model", to_string(cfg.model)},
          {"model_config", to_json(cfg.model_cfg)},
          {"batch_size", cfg.batch_size},
          {"lr0", cfg.lr0},
          {"lr_decay", cfg.lr_decay},
          {"lr_decay_every", cfg.lr_decay_every},
          {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},
          {"seed", cfg.seed},
          {"grad_clip", cfg.grad_clip},
          {"rul_cap", cfg.rul_cap},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"epsilon", cfg.epsilon}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig cfg) {
  try {
    if (doc.contains("model")) cfg.model = model_kind_from_string(doc["model"].get<std::string>());
    if (doc.contains("model_config")) cfg.model_cfg = model_config_from_json(doc["model_config"], cfg.model_cfg);
    if (doc.contains("batch_size")) cfg.batch_size = doc["batch_size"].get<std::size_t>();
    if (doc.contains("lr0")) cfg.lr0 = doc["lr0"].get<double>();
    if (doc.contains("lr_decay")) cfg.lr_decay = doc["lr_decay"].get<double>();
    if (doc.contains("lr_decay_every")) cfg.lr_decay_every = doc["lr_decay_every"].get<std::size_t>();
    if (doc.contains("max_epochs")) cfg.max_epochs = doc["max_epochs"].get<std::size_t>();
    if (doc.contains("patience")) cfg.patience = doc["patience"].get<std::size_t>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("grad_clip")) cfg.grad_clip = doc["grad_clip"].get<double>();
    if (doc.contains("rul_cap")) cfg.rul_cap = doc["rul_cap"].get<double>();
    if (doc.contains("beta1")) cfg.beta1 = doc["beta1"].get<double>();
    if (doc.contains("beta2")) cfg.beta2 = doc["beta2"].get<double>();
    if (doc.contains("epsilon")) cfg.epsilon = doc["epsilon"].get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("train config: ") + ex.what());
  }
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.lr_decay_every == 0) throw ConfigError("lr_decay_every must be positive");
  return cfg;
}

double lr_at(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
}

AdamState make_adam_state(const std::vector<NamedTensor>& params, double beta1, double beta2, double epsilon) {
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const auto& p : params) {
    s.first.emplace_back(p.value.numel(), 0.0);
    s.second.emplace_back(p.value.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<NamedTensor>& params, AdamState& state, double lr) {
  if (state.first.size() != params.size()) throw ContractError("adam: state does not match parameters");
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double v : p.value.impl()->grad) {
      if (!std::isfinite(v)) throw NumericalError("adam: non-finite gradient in '" + p.name + "'");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    if (state.first[i].size() != p.numel()) throw ContractError("adam: shape mismatch for " + params[i].name);
    if (!p.has_grad()) continue;
    const auto& g = p.impl()->grad;
    auto w = p.mutable_values();
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.epsilon);
    }
  }
}

double validation_rmse(const RulModel& model, std::span<const WindowSample> windows, double rul_cap,
                       std::size_t chunk) {
  if (windows.empty()) throw ContractError("validation set is empty");
  std::vector<double> errors;
  errors.reserve(windows.size());
  std::vector<const WindowSample*> ptrs;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const std::size_t end = std::min(windows.size(), start + chunk);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&windows[i]);
    const auto inf = model.infer(ptrs);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      const double pred = denormalize_prediction(inf.prediction[i], rul_cap);
      errors.push_back(pred - ptrs[i]->target * rul_cap);
    }
  }
  return rmse(errors);
}

namespace {

void clip_gradients(std::vector<NamedTensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.impl()->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double k = max_norm / norm;
  for (auto& p : params) {
    for (double& g : p.value.impl()->grad) g *= k;
  }
}

}  // namespace

TrainResult train(RulModel& model, std::span<const WindowSample> train_windows,
                  std::span<const WindowSample> val_windows, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_windows.empty()) throw ConfigError("training set is empty");
  if (val_windows.empty()) throw ConfigError("validation set is empty");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");

  auto params = model.parameters();
  AdamState adam = make_adam_state(params, cfg.beta1, cfg.beta2, cfg.epsilon);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snapshot = model.snapshot();
  std::vector<const WindowSample*> batch;
  model.zero_grad();

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(cfg, epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      std::vector<double> targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_windows[order[i]]);
        targets.push_back(train_windows[order[i]].target);
      }
      Tape tape;
      const Tensor pred = model.predict(tape, batch, rng, true);
      const Tensor loss = tape.mse_loss(pred, Tensor::from({batch.size(), 1}, std::move(targets)));
      loss.check_finite("training loss (epoch " + std::to_string(epoch) + ")");
      tape.backward(loss);
      if (cfg.grad_clip > 0.0) clip_gradients(params, cfg.grad_clip);
      adam_step(params, adam, lr);
      model.zero_grad();
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_rmse = validation_rmse(model, val_windows, cfg.rul_cap);
    rec.lr = lr;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_rmse < result.best_val_rmse) {
      result.best_val_rmse = rec.val_rmse;
      result.best_epoch = epoch;
      best_snapshot = model.snapshot();
    } else if (epoch - result.best_epoch >= cfg.patience) {
      break;
    }
  }
  result.best = model.clone();
  result.best->restore(best_snapshot);
  return result;
}

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const GridSpec& grid) {
  std::vector<TrainConfig> out;
  for (auto d : grid.hidden) {
    for (auto tau : grid.steps) {
      for (auto layers : grid.gru_layers) {
        TrainConfig cfg = base;
        cfg.model_cfg.hidden = d;
        cfg.model_cfg.steps = tau;
        cfg.model_cfg.gru_layers = layers;
        cfg.seed = Rng::derive(base.seed, out.size());
        out.push_back(cfg);
      }
    }
  }
  return out;
}

std::size_t select_best(std::span<const GridOutcome> runs) {
  if (runs.empty()) throw ConfigError("grid is empty");
  const auto key = [](const GridOutcome& r) {
    return std::make_tuple(r.val_rmse, r.cfg.model_cfg.hidden, r.cfg.model_cfg.steps, r.cfg.model_cfg.gru_layers);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (key(runs[i]) < key(runs[best])) best = i;
  }
  return best;
}

GridResult grid_search(const std::vector<TrainConfig>& points, const GridRunner& runner, std::size_t jobs) {
  if (points.empty()) throw ConfigError("grid is empty");
  GridResult result;
  result.runs.resize(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        result.runs[i] = runner(points[i], i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, points.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  result.best = select_best(result.runs);
  return result;
}

}  // namespace gnmr
