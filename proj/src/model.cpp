#include "gnmr/model.hpp"

#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "gnmr/error.hpp"

namespace gnmr {
namespace {

constexpr char kCheckpointMagic[8] = {'G', 'N', 'M', 'R', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::size_t kEncoderDepth = 2;
constexpr std::size_t kEdgeDepth = 2;
constexpr std::size_t kHeadDepth = 2;

nlohmann::json pca_to_json(const PcaTransform& t) {
  return {{"dim", t.dim}, {"k", t.k}, {"mean", t.mean}, {"components", t.components},
          {"explained_ratio", t.explained_ratio}};
}

PcaTransform pca_from_json(const nlohmann::json& j) {
  PcaTransform t;
  t.dim = j.at("dim").get<std::size_t>();
  t.k = j.at("k").get<std::size_t>();
  t.mean = j.at("mean").get<std::vector<double>>();
  t.components = j.at("components").get<std::vector<double>>();
  t.explained_ratio = j.at("explained_ratio").get<std::vector<double>>();
  return t;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gnmr: return "gnmr";
    case ModelKind::gru_mr: return "gru_mr";
    case ModelKind::pca_gru_mr: return "pca_gru_mr";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "gnmr") return ModelKind::gnmr;
  if (name == "gru_mr") return ModelKind::gru_mr;
  if (name == "pca_gru_mr") return ModelKind::pca_gru_mr;
  throw ConfigError("unknown model kind '" + name + "' (expected gnmr, gru_mr or pca_gru_mr)");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"hidden", cfg.hidden},           {"gru_layers", cfg.gru_layers}, {"steps", cfg.steps},
          {"dropout", cfg.dropout},         {"leaky_slope", cfg.leaky_slope}, {"tie_edges", cfg.tie_edges},
          {"age_scale", cfg.age_scale},     {"pca_components", cfg.pca_components}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig cfg) {
  try {
    if (doc.contains("hidden")) cfg.hidden = doc["hidden"].get<std::size_t>();
    if (doc.contains("gru_layers")) cfg.gru_layers = doc["gru_layers"].get<std::size_t>();
    if (doc.contains("steps")) cfg.steps = doc["steps"].get<int>();
    if (doc.contains("dropout")) cfg.dropout = doc["dropout"].get<double>();
    if (doc.contains("leaky_slope")) cfg.leaky_slope = doc["leaky_slope"].get<double>();
    if (doc.contains("tie_edges")) cfg.tie_edges = doc["tie_edges"].get<bool>();
    if (doc.contains("age_scale")) cfg.age_scale = doc["age_scale"].get<double>();
    if (doc.contains("pca_components")) cfg.pca_components = doc["pca_components"].get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("model config: ") + ex.what());
  }
  return cfg;
}

// --- RulModel ---------------------------------------------------------------

Inference RulModel::infer(WindowBatch batch) const {
  Tape tape(false);
  Rng unused(0);
  const Tensor y = predict(tape, batch, unused, false);
  Inference out;
  out.prediction.assign(y.values().begin(), y.values().end());
  return out;
}

void RulModel::init_parameters(Rng& rng) {
  auto params = parameters();
  init_uniform(params, rng);
}

std::size_t RulModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.numel();
  return n;
}

std::vector<std::vector<double>> RulModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

void RulModel::restore(const std::vector<std::vector<double>>& values) {
  auto params = parameters();
  if (params.size() != values.size()) throw ContractError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].value.mutable_values();
    if (dst.size() != values[i].size()) throw ContractError("restore: size mismatch for " + params[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void RulModel::zero_grad() {
  for (auto& p : parameters()) p.value.zero_grad();
}

// --- batching ---------------------------------------------------------------

NodeBatch make_node_batch(WindowBatch windows, const std::vector<std::vector<std::size_t>>& columns,
                          double age_scale) {
  if (windows.empty()) throw ContractError("empty batch");
  NodeBatch nb;
  nb.batch = windows.size();
  nb.length = windows[0]->length();
  for (const auto* w : windows) {
    if (w->length() != nb.length) throw DimensionError("windows in a batch must share one length");
  }
  for (const auto& cols : columns) {
    const std::size_t p = cols.size();
    std::vector<double> x(nb.length * nb.batch * p);
    for (std::size_t t = 0; t < nb.length; ++t) {
      for (std::size_t b = 0; b < nb.batch; ++b) {
        const double* row = windows[b]->channels.data() + t * kChannelCount;
        double* dst = x.data() + (t * nb.batch + b) * p;
        for (std::size_t k = 0; k < p; ++k) dst[k] = row[cols[k]];
      }
    }
    nb.series.push_back(Tensor::from({nb.length * nb.batch, p}, std::move(x)));
  }
  std::vector<double> age(nb.batch);
  for (std::size_t b = 0; b < nb.batch; ++b) age[b] = windows[b]->age / age_scale;
  nb.age = Tensor::from({nb.batch, 1}, std::move(age));
  return nb;
}

// --- GNMR -------------------------------------------------------------------

GnmrModel::GnmrModel(EquipmentGraph graph, ModelConfig cfg)
    : graph_(std::move(graph)), cfg_(cfg) {
  validate(graph_);
  if (cfg_.steps < 0) throw ConfigError("propagation steps must be >= 0");
  if (cfg_.hidden == 0) throw ConfigError("hidden size must be positive");
  if (!(cfg_.dropout >= 0.0 && cfg_.dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  adjacency_ = build_adjacency(graph_);
  columns_ = node_columns(graph_);
  const std::size_t d = cfg_.hidden;
  for (const auto& cols : columns_) node_encoders_.emplace_back(cols.size(), d, kEncoderDepth);
  shared_gru_ = GruStack(d, d, cfg_.gru_layers);

  std::map<std::pair<std::string, std::string>, std::size_t> by_type;
  for (const auto& [from, to] : graph_.edges) {
    if (cfg_.tie_edges) {
      const auto key = std::make_pair(graph_.nodes[from].node_type, graph_.nodes[to].node_type);
      auto [it, inserted] = by_type.try_emplace(key, edge_functions_.size());
      if (inserted) edge_functions_.emplace_back(d, d, kEdgeDepth);
      edge_slot_.push_back(it->second);
    } else {
      edge_slot_.push_back(edge_functions_.size());
      edge_functions_.emplace_back(d, d, kEdgeDepth);
    }
  }
  propagation_cell_ = GruCell(2 * d, d);
  const std::size_t readout_in = 2 * d + 1 + graph_.size();
  attention_head_ = ReadoutHead{Dense(readout_in, d), Dense(d, 1)};
  estimate_head_ = ReadoutHead{Dense(readout_in, d), Dense(d, 1)};
}

std::vector<NamedTensor> GnmrModel::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t j = 0; j < node_encoders_.size(); ++j) {
    node_encoders_[j].collect("encoder." + std::to_string(j), out);
  }
  shared_gru_.collect("gru_ts", out);
  for (std::size_t s = 0; s < edge_functions_.size(); ++s) edge_functions_[s].collect("edge." + std::to_string(s), out);
  propagation_cell_.collect("cell", out);
  attention_head_.hidden.collect("attention.hidden", out);
  attention_head_.output.collect("attention.output", out);
  estimate_head_.hidden.collect("estimate.hidden", out);
  estimate_head_.output.collect("estimate.output", out);
  return out;
}

std::unique_ptr<RulModel> GnmrModel::clone() const {
  auto copy = std::make_unique<GnmrModel>(graph_, cfg_);
  copy->restore(snapshot());
  return copy;
}

nlohmann::json GnmrModel::header() const {
  return {{"graph", graph_to_json(graph_)}, {"graph_hash", hash_hex(graph_hash(graph_))}};
}

std::vector<Tensor> GnmrModel::encode(Tape& tape, const NodeBatch& batch, Rng& rng, bool training) const {
  const std::size_t n = graph_.size();
  if (batch.series.size() != n) {
    throw ContractError("batch has " + std::to_string(batch.series.size()) + " node series for a graph with " +
                        std::to_string(n) + " nodes");
  }
  std::vector<Tensor> mapped;
  mapped.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (batch.series[j].cols() != columns_[j].size()) {
      throw DimensionError("node '" + graph_.nodes[j].name + "' expects " + std::to_string(columns_[j].size()) +
                           " columns, got " + std::to_string(batch.series[j].cols()));
    }
    mapped.push_back(node_encoders_[j].forward(tape, batch.series[j], cfg_.leaky_slope, cfg_.dropout, rng, training));
  }
  const std::size_t steps = batch.length, b = batch.batch;
  Tensor stacked;
  if (n == 1) {
    stacked = mapped[0];
  } else {
    // Reorder rows from (node, t, b) to (t, node, b) so each step is one contiguous block.
    std::vector<std::size_t> order(n * steps * b);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < b; ++i) order[(t * n + j) * b + i] = (j * steps + t) * b + i;
      }
    }
    stacked = tape.permute_rows(tape.concat_rows(mapped), order);
  }
  const Tensor h = shared_gru_.final_state(tape, stacked, steps, n * b);
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) out.push_back(n == 1 ? h : tape.slice_rows(h, j * b, (j + 1) * b));
  return out;
}

Tensor GnmrModel::encode_node(Tape& tape, std::size_t node, const Tensor& x) const {
  if (node >= graph_.size()) throw ContractError("node index out of range");
  if (x.rank() != 2 || x.cols() != columns_[node].size()) {
    throw DimensionError("node '" + graph_.nodes[node].name + "' expects " + std::to_string(columns_[node].size()) +
                         " columns, got " + shape_to_string(x.shape()));
  }
  Rng unused(0);
  const Tensor mapped = node_encoders_[node].forward(tape, x, cfg_.leaky_slope, cfg_.dropout, unused, false);
  return shared_gru_.final_state(tape, mapped, x.rows(), 1);
}

std::vector<Tensor> GnmrModel::propagate(Tape& tape, std::vector<Tensor> states, const AdjacencyPair& adj, int steps,
                                         Rng& rng, bool training, PropagationProbe* probe) const {
  if (steps < 0) throw ConfigError("propagation steps must be >= 0, got " + std::to_string(steps));
  const std::size_t n = graph_.size();
  if (states.size() != n || adj.n != n) throw ContractError("propagate: node count mismatch");
  const std::size_t b = states[0].rows(), d = cfg_.hidden;
  if (probe) probe->states.push_back(tape.concat_rows(states));

  for (int m = 0; m < steps; ++m) {
    std::vector<Tensor> incoming(n), outgoing(n);
    const auto accumulate = [&](Tensor& slot, const Tensor& term) {
      slot = slot.defined() ? tape.add(slot, term) : term;
    };
    for (std::size_t e = 0; e < graph_.edges.size(); ++e) {
      const auto [from, to] = graph_.edges[e];
      // One pass of f over [v_from; v_to]: the first half is the message into
      // `to`, the second half the message `from` receives over its outgoing edge.
      const std::vector<Tensor> pair{states[from], states[to]};
      const Tensor msg = edge_functions_[edge_slot_[e]].forward(tape, tape.concat_rows(pair), cfg_.leaky_slope,
                                                                cfg_.dropout, rng, training);
      accumulate(incoming[to], tape.scale(tape.slice_rows(msg, 0, b), adj.in(to, from)));
      accumulate(outgoing[from], tape.scale(tape.slice_rows(msg, b, 2 * b), adj.out(from, to)));
    }
    std::vector<Tensor> aggregates;
    aggregates.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (!incoming[j].defined()) incoming[j] = Tensor::zeros({b, d});
      if (!outgoing[j].defined()) outgoing[j] = Tensor::zeros({b, d});
      const std::vector<Tensor> parts{incoming[j], outgoing[j]};
      aggregates.push_back(tape.concat_lastdim(parts));
    }
    const Tensor a = tape.concat_rows(aggregates);
    const Tensor h = tape.concat_rows(states);
    GateTrace trace;
    const Tensor next = propagation_cell_.step(tape, propagation_cell_.project(tape, a), h,
                                               probe ? probe->pinned_update : std::nullopt,
                                               probe ? &trace : nullptr);
    if (probe) {
      probe->gates.push_back(trace);
      probe->states.push_back(next);
    }
    for (std::size_t j = 0; j < n; ++j) states[j] = n == 1 ? next : tape.slice_rows(next, j * b, (j + 1) * b);
  }
  return states;
}

Tensor GnmrModel::head(Tape& tape, const ReadoutHead& h, const Tensor& x, Rng& rng, bool training) const {
  const Tensor hidden = tape.dropout(tape.leaky_relu(h.hidden.forward(tape, x), cfg_.leaky_slope), cfg_.dropout,
                                     rng, training);
  return h.output.forward(tape, hidden);
}

GnmrOutput GnmrModel::readout(Tape& tape, const std::vector<Tensor>& initial, const std::vector<Tensor>& final,
                              const Tensor& age, Rng& rng, bool training) const {
  const std::size_t n = graph_.size();
  if (initial.size() != n || final.size() != n) throw ContractError("readout: node count mismatch");
  const std::size_t b = initial[0].rows();
  if (age.rows() != b || age.cols() != 1) throw DimensionError("readout: age must be B x 1");
  std::vector<Tensor> features;
  features.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> onehot(b * n, 0.0);
    for (std::size_t i = 0; i < b; ++i) onehot[i * n + j] = 1.0;
    const std::vector<Tensor> parts{initial[j], final[j], age, Tensor::from({b, n}, std::move(onehot))};
    features.push_back(tape.concat_lastdim(parts));
  }
  const Tensor stacked = tape.concat_rows(features);
  const Tensor scores = tape.transpose(tape.reshape(head(tape, attention_head_, stacked, rng, training), {n, b}));
  const Tensor estimates = tape.transpose(tape.reshape(head(tape, estimate_head_, stacked, rng, training), {n, b}));
  const Tensor weights = tape.softmax_lastdim(scores);
  return GnmrOutput{tape.sum_lastdim(tape.mul(weights, estimates)), weights, estimates};
}

GnmrOutput GnmrModel::forward(Tape& tape, const NodeBatch& batch, Rng& rng, bool training,
                              PropagationProbe* probe) const {
  const auto initial = encode(tape, batch, rng, training);
  const auto final = propagate(tape, initial, adjacency_, cfg_.steps, rng, training, probe);
  return readout(tape, initial, final, batch.age, rng, training);
}

GnmrOutput GnmrModel::forward_sample(Tape& tape, const std::vector<std::vector<double>>& node_series,
                                     double age_cycles) const {
  if (node_series.size() != graph_.size()) {
    throw ContractError("sample has " + std::to_string(node_series.size()) + " node series for a graph with " +
                        std::to_string(graph_.size()) + " nodes");
  }
  NodeBatch nb;
  nb.batch = 1;
  for (std::size_t j = 0; j < node_series.size(); ++j) {
    const std::size_t p = columns_[j].size();
    if (node_series[j].size() % p != 0) {
      throw DimensionError("node '" + graph_.nodes[j].name + "' series is not a multiple of " + std::to_string(p) +
                           " columns");
    }
    const std::size_t len = node_series[j].size() / p;
    if (j == 0) nb.length = len;
    if (len != nb.length) throw DimensionError("node series lengths differ");
    nb.series.push_back(Tensor::from({len, p}, node_series[j]));
  }
  nb.age = Tensor::from({1, 1}, {age_cycles / cfg_.age_scale});
  Rng unused(0);
  return forward(tape, nb, unused, false);
}

Tensor GnmrModel::predict(Tape& tape, WindowBatch batch, Rng& rng, bool training) const {
  return forward(tape, make_node_batch(batch, columns_, cfg_.age_scale), rng, training).prediction;
}

Inference GnmrModel::infer(WindowBatch batch) const {
  Tape tape(false);
  Rng unused(0);
  const auto out = forward(tape, make_node_batch(batch, columns_, cfg_.age_scale), unused, false);
  Inference inf;
  inf.prediction.assign(out.prediction.values().begin(), out.prediction.values().end());
  const std::size_t n = graph_.size();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto w = out.weights.values().subspan(i * n, n);
    const auto e = out.node_estimates.values().subspan(i * n, n);
    inf.weights.emplace_back(w.begin(), w.end());
    inf.node_estimates.emplace_back(e.begin(), e.end());
  }
  return inf;
}

// --- GRU-MR -----------------------------------------------------------------

GruMrModel::GruMrModel(ModelConfig cfg, std::optional<PcaTransform> pca)
    : cfg_(cfg), pca_(std::move(pca)), input_dim_(pca_ ? pca_->k : kChannelCount) {
  if (cfg_.hidden == 0) throw ConfigError("hidden size must be positive");
  if (!(cfg_.dropout >= 0.0 && cfg_.dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  gru_ = GruStack(input_dim_, cfg_.hidden, cfg_.gru_layers);
  head_ = FeedForward(cfg_.hidden, cfg_.hidden, kHeadDepth);
  output_ = Dense(cfg_.hidden, 1);
}

std::vector<NamedTensor> GruMrModel::parameters() const {
  std::vector<NamedTensor> out;
  gru_.collect("gru", out);
  head_.collect("head", out);
  output_.collect("output", out);
  return out;
}

std::unique_ptr<RulModel> GruMrModel::clone() const {
  auto copy = std::make_unique<GruMrModel>(cfg_, pca_);
  copy->restore(snapshot());
  return copy;
}

nlohmann::json GruMrModel::header() const {
  nlohmann::json h = nlohmann::json::object();
  if (pca_) h["pca"] = pca_to_json(*pca_);
  return h;
}

Tensor GruMrModel::forward_rows(Tape& tape, const Tensor& x, std::size_t steps, std::size_t batch, Rng& rng,
                                bool training) const {
  if (x.rank() != 2 || x.cols() != input_dim_) {
    throw DimensionError("gru_mr expects " + std::to_string(input_dim_) + " input columns, got " +
                         shape_to_string(x.shape()));
  }
  const Tensor h = gru_.final_state(tape, x, steps, batch);
  return output_.forward(tape, head_.forward(tape, h, cfg_.leaky_slope, cfg_.dropout, rng, training));
}

Tensor GruMrModel::predict(Tape& tape, WindowBatch batch, Rng& rng, bool training) const {
  if (batch.empty()) throw ContractError("empty batch");
  const std::size_t len = batch[0]->length(), b = batch.size();
  std::vector<double> x(len * b * input_dim_);
  for (std::size_t i = 0; i < b; ++i) {
    if (batch[i]->length() != len) throw DimensionError("windows in a batch must share one length");
    std::vector<double> projected;
    const double* src = batch[i]->channels.data();
    if (pca_) {
      projected = pca_apply(batch[i]->channels, *pca_);
      src = projected.data();
    }
    for (std::size_t t = 0; t < len; ++t) {
      std::copy_n(src + t * input_dim_, input_dim_, x.data() + (t * b + i) * input_dim_);
    }
  }
  return forward_rows(tape, Tensor::from({len * b, input_dim_}, std::move(x)), len, b, rng, training);
}

std::unique_ptr<RulModel> make_model(ModelKind kind, const EquipmentGraph& graph, const ModelConfig& cfg,
                                     std::optional<PcaTransform> pca) {
  switch (kind) {
    case ModelKind::gnmr: return std::make_unique<GnmrModel>(graph, cfg);
    case ModelKind::gru_mr: return std::make_unique<GruMrModel>(cfg);
    case ModelKind::pca_gru_mr:
      if (!pca) throw ConfigError("pca_gru_mr needs a fitted PCA transform");
      return std::make_unique<GruMrModel>(cfg, std::move(pca));
  }
  throw ConfigError("unknown model kind");
}

// --- checkpoints ------------------------------------------------------------

std::string serialize_model(const RulModel& model) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  nlohmann::json header = model.header();
  header["kind"] = to_string(model.kind());
  header["config"] = to_json(model.config());
  detail::write_string(out, header.dump());
  const auto params = model.parameters();
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::write_string(out, p.name);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto dim : p.value.shape()) detail::write_pod<std::uint64_t>(out, dim);
    const auto v = p.value.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  return out.str();
}

namespace {

nlohmann::json read_checkpoint_header(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kCheckpointMagic)) throw LoadError("not a GNMR checkpoint");
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  try {
    return nlohmann::json::parse(detail::read_string(in, "header"));
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(std::string("corrupt checkpoint header: ") + ex.what());
  }
}

}  // namespace

std::unique_ptr<RulModel> deserialize_model(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  const auto header = read_checkpoint_header(in);
  std::unique_ptr<RulModel> model;
  try {
    const auto kind = model_kind_from_string(header.at("kind").get<std::string>());
    const auto cfg = model_config_from_json(header.at("config"));
    EquipmentGraph graph;
    std::optional<PcaTransform> pca;
    if (kind == ModelKind::gnmr) graph = graph_from_json(header.at("graph"));
    if (header.contains("pca")) pca = pca_from_json(header["pca"]);
    model = make_model(kind, graph, cfg, std::move(pca));
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(std::string("corrupt checkpoint header: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw LoadError(std::string("checkpoint describes an invalid model: ") + ex.what());
  } catch (const ValidationError& ex) {
    throw LoadError(std::string("checkpoint graph invalid: ") + ex.what());
  }
  auto params = model->parameters();
  const auto count = detail::read_pod<std::uint32_t>(in, "tensor count");
  if (count != params.size()) throw LoadError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                                              std::to_string(params.size()));
  for (auto& p : params) {
    const auto name = detail::read_string(in, "tensor name", 1 << 16);
    if (name != p.name) throw LoadError("tensor '" + name + "' where '" + p.name + "' was expected");
    const auto rank = detail::read_pod<std::uint32_t>(in, "rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(detail::read_pod<std::uint64_t>(in, "dim"));
    if (shape != p.value.shape()) throw LoadError("tensor '" + name + "' has shape " + shape_to_string(shape));
    auto values = detail::read_doubles(in, p.value.numel(), "tensor values");
    std::copy(values.begin(), values.end(), p.value.mutable_values().begin());
    p.value.check_finite("checkpoint tensor '" + name + "'");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after checkpoint payload");
  return model;
}

void save_checkpoint(const RulModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::unique_ptr<RulModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

std::uint64_t checkpoint_graph_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const auto header = read_checkpoint_header(in);
  if (!header.contains("graph_hash")) return 0;
  return std::stoull(header["graph_hash"].get<std::string>(), nullptr, 16);
}

}  // namespace gnmr
