#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnmr/cmapss.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/layers.hpp"
#include "gnmr/rng.hpp"
#include "gnmr/tensor.hpp"

namespace gnmr {

enum class ModelKind { gnmr, gru_mr, pca_gru_mr };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelConfig {
  std::size_t hidden = 30;      // d: width of every feedforward and recurrent layer
  std::size_t gru_layers = 2;
  int steps = 2;                // message propagation steps (GNMR only)
  double dropout = 0.2;
  double leaky_slope = 0.01;
  bool tie_edges = false;       // share edge functions per (source type, target type)
  double age_scale = 130.0;     // readout age input = last cycle / age_scale
  std::size_t pca_components = 5;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig base = {});

/// Per-sample outputs of an evaluation pass; predictions are normalized (r / r_u).
struct Inference {
  std::vector<double> prediction;
  std::vector<std::vector<double>> weights;         // empty for baselines
  std::vector<std::vector<double>> node_estimates;  // empty for baselines
};

using WindowBatch = std::span<const WindowSample* const>;

/// Common surface of every RUL regressor the trainer can fit.
class RulModel {
 public:
  virtual ~RulModel() = default;

  virtual ModelKind kind() const = 0;
  virtual const ModelConfig& config() const = 0;
  /// Parameter handles in declaration order; they alias the model's storage.
  virtual std::vector<NamedTensor> parameters() const = 0;
  /// Batch prediction (B x 1) on normalized scale.
  virtual Tensor predict(Tape& tape, WindowBatch batch, Rng& rng, bool training) const = 0;
  /// Eval-mode pass without a gradient tape.
  virtual Inference infer(WindowBatch batch) const;
  virtual std::unique_ptr<RulModel> clone() const = 0;
  /// Checkpoint header fields beyond the config.
  virtual nlohmann::json header() const = 0;

  void init_parameters(Rng& rng);
  std::size_t parameter_count() const;
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();
};

/// Stacked per-node inputs for a batch: each series is (T*B) x p_j with rows
/// ordered (t, b); age is B x 1.
struct NodeBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<Tensor> series;
  Tensor age;
};

NodeBatch make_node_batch(WindowBatch windows, const std::vector<std::vector<std::size_t>>& columns,
                          double age_scale);

/// Optional instrumentation of the propagation steps.
struct PropagationProbe {
  std::optional<double> pinned_update;
  std::vector<GateTrace> gates;          // one per step, rows stacked node-major
  std::vector<Tensor> states;            // V^0..V^tau stacked node-major
};

struct GnmrOutput {
  Tensor prediction;      // B x 1
  Tensor weights;         // B x |V|
  Tensor node_estimates;  // B x |V|
};

/// Gated graph network regressor: node encoders M_j feeding a shared GRU,
/// tau rounds of gated message passing, and an attention readout.
class GnmrModel final : public RulModel {
 public:
  GnmrModel(EquipmentGraph graph, ModelConfig cfg);

  ModelKind kind() const override { return ModelKind::gnmr; }
  const ModelConfig& config() const override { return cfg_; }
  std::vector<NamedTensor> parameters() const override;
  Tensor predict(Tape& tape, WindowBatch batch, Rng& rng, bool training) const override;
  Inference infer(WindowBatch batch) const override;
  std::unique_ptr<RulModel> clone() const override;
  nlohmann::json header() const override;

  const EquipmentGraph& graph() const { return graph_; }
  const AdjacencyPair& adjacency() const { return adjacency_; }
  std::size_t edge_function_count() const { return edge_functions_.size(); }
  /// Index into the edge-function sets used by edge e.
  std::size_t edge_function_of(std::size_t edge) const { return edge_slot_[edge]; }

  /// Initial representations for every node (each B x d).
  std::vector<Tensor> encode(Tape& tape, const NodeBatch& batch, Rng& rng, bool training) const;
  /// Single node, single sample: x is T x p_j.
  Tensor encode_node(Tape& tape, std::size_t node, const Tensor& x) const;
  std::vector<Tensor> propagate(Tape& tape, std::vector<Tensor> states, const AdjacencyPair& adj, int steps,
                                Rng& rng, bool training, PropagationProbe* probe = nullptr) const;
  GnmrOutput readout(Tape& tape, const std::vector<Tensor>& initial, const std::vector<Tensor>& final,
                     const Tensor& age, Rng& rng, bool training) const;
  GnmrOutput forward(Tape& tape, const NodeBatch& batch, Rng& rng, bool training,
                     PropagationProbe* probe = nullptr) const;
  /// One pre-partitioned sample: per-node T x p_j series, age in cycles.
  GnmrOutput forward_sample(Tape& tape, const std::vector<std::vector<double>>& node_series,
                            double age_cycles) const;

 private:
  struct ReadoutHead {
    Dense hidden;
    Dense output;
  };

  Tensor head(Tape& tape, const ReadoutHead& h, const Tensor& x, Rng& rng, bool training) const;

  EquipmentGraph graph_;
  ModelConfig cfg_;
  AdjacencyPair adjacency_;
  std::vector<std::vector<std::size_t>> columns_;
  std::vector<FeedForward> node_encoders_;
  GruStack shared_gru_;
  std::vector<FeedForward> edge_functions_;
  std::vector<std::size_t> edge_slot_;
  GruCell propagation_cell_;
  ReadoutHead attention_head_;
  ReadoutHead estimate_head_;
};

/// GRU over the flat channel window, final state through two leaky-ReLU
/// layers to a scalar. With a PCA transform the channels are projected first.
class GruMrModel final : public RulModel {
 public:
  GruMrModel(ModelConfig cfg, std::optional<PcaTransform> pca = std::nullopt);

  ModelKind kind() const override { return pca_ ? ModelKind::pca_gru_mr : ModelKind::gru_mr; }
  const ModelConfig& config() const override { return cfg_; }
  std::vector<NamedTensor> parameters() const override;
  Tensor predict(Tape& tape, WindowBatch batch, Rng& rng, bool training) const override;
  std::unique_ptr<RulModel> clone() const override;
  nlohmann::json header() const override;

  std::size_t input_dim() const { return input_dim_; }
  const std::optional<PcaTransform>& pca() const { return pca_; }
  /// x is (T*B) x input_dim with rows ordered (t, b).
  Tensor forward_rows(Tape& tape, const Tensor& x, std::size_t steps, std::size_t batch, Rng& rng,
                      bool training) const;

 private:
  ModelConfig cfg_;
  std::optional<PcaTransform> pca_;
  std::size_t input_dim_;
  GruStack gru_;
  FeedForward head_;
  Dense output_;
};

std::unique_ptr<RulModel> make_model(ModelKind kind, const EquipmentGraph& graph, const ModelConfig& cfg,
                                     std::optional<PcaTransform> pca = std::nullopt);

/// Versioned binary checkpoint: magic "GNMRCKP1", u32 version, JSON header
/// (kind, config, graph, graph hash, PCA), u32 tensor count, then for each
/// tensor its name, u32 rank, u64 dims and little-endian f64 values.
std::string serialize_model(const RulModel& model);
std::unique_ptr<RulModel> deserialize_model(const std::string& bytes);
void save_checkpoint(const RulModel& model, const std::filesystem::path& path);
std::unique_ptr<RulModel> load_checkpoint(const std::filesystem::path& path);
/// Graph hash recorded in a checkpoint header (0 for baselines).
std::uint64_t checkpoint_graph_hash(const std::filesystem::path& path);

}  // namespace gnmr
