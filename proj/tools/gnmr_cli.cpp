#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "gnmr/error.hpp"
#include "gnmr/experiment.hpp"

namespace {

using namespace gnmr;

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitCompat = 3;
constexpr int kExitNumeric = 4;

std::filesystem::path default_data_dir() {
  const char* env = std::getenv("GNMR_DATA_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::path("data");
}

struct Overrides {
  std::optional<std::string> dataset;
  std::optional<std::string> data_dir;
  std::optional<std::string> graph;
  std::optional<std::string> variant;
  std::optional<std::string> cache_dir;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> hidden;
  std::optional<int> steps;
  std::optional<std::size_t> layers;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "FD001..FD004");
    cmd->add_option("--data-dir", data_dir, "Directory with the raw text files");
    cmd->add_option("--graph", graph, "Base graph config");
    cmd->add_option("--variant", variant, "original | reduced4 | increased13 | per_sensor | single_node");
    cmd->add_option("--cache-dir", cache_dir, "Dataset cache directory");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--model", model, "gnmr | gru_mr | pca_gru_mr");
    cmd->add_option("--seed", seed, "Training seed");
    cmd->add_option("--epochs", epochs, "Maximum epochs");
    cmd->add_option("--hidden", hidden, "Hidden size d");
    cmd->add_option("--steps", steps, "Propagation steps");
    cmd->add_option("--gru-layers", layers, "GRU layers");
  }

  void apply(ExperimentConfig& cfg) const {
    if (dataset) cfg.dataset = *dataset;
    if (data_dir) cfg.data_dir = *data_dir;
    if (graph) cfg.graph_path = *graph;
    if (variant) cfg.variant = *variant;
    if (cache_dir) cfg.cache_dir = *cache_dir;
    if (out) cfg.out_dir = *out;
    if (model) cfg.train.model = model_kind_from_string(*model);
    if (seed) cfg.train.seed = *seed;
    if (epochs) cfg.train.max_epochs = *epochs;
    if (hidden) cfg.train.model_cfg.hidden = *hidden;
    if (steps) cfg.train.model_cfg.steps = *steps;
    if (layers) cfg.train.model_cfg.gru_layers = *layers;
  }
};

ExperimentConfig resolve_config(const std::string& config_path, const Overrides& o) {
  ExperimentConfig cfg;
  cfg.data_dir = default_data_dir();
  if (!config_path.empty()) cfg = load_experiment(config_path, cfg);
  o.apply(cfg);
  return cfg;
}

void print_summary(const DatasetSummary& s) {
  std::printf("dataset            %s\n", s.dataset.c_str());
  std::printf("train units        %zu (split %zu train / %zu val)\n", s.train_units, s.split_train_units,
              s.split_val_units);
  std::printf("test units         %zu\n", s.test_units);
  std::printf("train windows      %zu\n", s.train_windows);
  std::printf("val windows        %zu\n", s.val_windows);
  std::printf("train+val windows  %zu\n", s.train_windows + s.val_windows);
  std::printf("test windows       %zu\n", s.test_windows);
  std::printf("graph hash         %s\n", s.graph_hash.c_str());
  std::printf("cache              %s\n", s.cache_file.c_str());
}

int cmd_prepare(const std::string& dataset, const std::string& data_dir, const std::string& graph_path,
                const std::string& variant, const std::string& out, std::uint64_t split_seed) {
  ExperimentConfig cfg;
  cfg.dataset = dataset;
  cfg.data_dir = data_dir.empty() ? default_data_dir() : std::filesystem::path(data_dir);
  cfg.graph_path = graph_path;
  cfg.variant = variant;
  cfg.cache_dir = out;
  cfg.split_seed = split_seed;
  for (const char* prefix : {"train_", "test_", "RUL_"}) {
    const auto f = cfg.data_dir / (prefix + dataset + ".txt");
    if (!std::filesystem::exists(f)) throw ConfigError("missing input file " + f.string());
  }
  const auto graph = resolve_graph(cfg);
  const auto cache = dataset_cache_path(cfg, graph_hash(graph));
  std::filesystem::remove(cache);
  const auto data = load_or_prepare(cfg, graph);
  std::ofstream(std::filesystem::path(out) / (dataset + "_summary.json")) << to_json(data.summary).dump(2) << '\n';
  print_summary(data.summary);
  std::printf("cache hash         %s\n", hash_hex(file_hash(cache)).c_str());
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, bool quiet) {
  const auto graph = resolve_graph(cfg);
  const auto data = load_or_prepare(cfg, graph);
  const auto outcome = run_experiment(cfg, graph, data, cfg.out_dir, !quiet);
  std::printf("best epoch %zu  val_rmse %.4f  test rmse %.4f  S %.4f\n", outcome.result.best_epoch,
              outcome.result.best_val_rmse, outcome.test_report.rmse, outcome.test_report.score_s);
  std::printf("run directory %s\n", cfg.out_dir.string().c_str());
  return kExitOk;
}

std::filesystem::path find_cache_for_checkpoint(const std::filesystem::path& ckpt, const std::string& dataset,
                                                const std::string& explicit_cache) {
  if (!explicit_cache.empty()) return explicit_cache;
  const auto config = ckpt.parent_path() / "config.json";
  if (!std::filesystem::exists(config)) {
    throw ConfigError("no --cache given and no config.json next to " + ckpt.string());
  }
  std::ifstream in(config);
  const auto doc = nlohmann::json::parse(in);
  const auto cfg = experiment_from_json(
      [&] {
        auto d = doc;
        for (const char* k : {"resolved_graph", "graph_hash", "cache_file"}) d.erase(k);
        return d;
      }());
  if (!dataset.empty() && dataset != cfg.dataset) {
    throw ConfigError("checkpoint was trained on " + cfg.dataset + ", pass --cache to evaluate on " + dataset);
  }
  return cfg.cache_dir / doc.at("cache_file").get<std::string>();
}

int cmd_evaluate(const std::string& ckpt, const std::string& dataset, const std::string& cache_arg,
                 const std::string& out_arg, bool no_clamp) {
  if (!std::filesystem::exists(ckpt)) throw ConfigError("checkpoint " + ckpt + " not found");
  const auto cache = find_cache_for_checkpoint(ckpt, dataset, cache_arg);
  if (!std::filesystem::exists(cache)) throw ConfigError("dataset cache " + cache.string() + " not found");
  const auto data = load_cached_dataset(cache);
  if (!dataset.empty() && data.prepared.dataset_id != dataset) {
    throw ConfigError("cache holds " + data.prepared.dataset_id + ", not " + dataset);
  }
  const auto model = load_checkpoint(ckpt);
  const std::uint64_t ckpt_hash = checkpoint_graph_hash(ckpt);
  if (model->kind() == ModelKind::gnmr && ckpt_hash != data.prepared.graph_hash) {
    throw CompatibilityError("checkpoint graph " + hash_hex(ckpt_hash) + " does not match dataset graph " +
                             hash_hex(data.prepared.graph_hash));
  }
  const auto report = evaluate(*model, data.windows.test, data.prepared.windows.rul_cap, !no_clamp);
  const std::filesystem::path out = out_arg.empty() ? std::filesystem::path(ckpt).parent_path() : std::filesystem::path(out_arg);
  std::filesystem::create_directories(out);
  write_eval_report_csv(report, out / "eval_report.csv");
  write_metrics_csv(report, out / "metrics.csv");
  std::printf("rmse %.6f\nS %.6f\nn %zu\n", report.rmse, report.score_s, report.records.size());
  return kExitOk;
}

int cmd_grid(const ExperimentConfig& cfg, std::size_t jobs) {
  const auto graph = resolve_graph(cfg);
  const auto data = load_or_prepare(cfg, graph);
  const auto points = expand_grid(cfg.train, cfg.grid);
  const auto runs_dir = cfg.out_dir / "runs";
  const auto runner = [&](const TrainConfig& tc, std::size_t index) {
    ExperimentConfig point = cfg;
    point.train = tc;
    const auto outcome = run_experiment(point, graph, data, runs_dir / std::to_string(index), false);
    std::fprintf(stderr, "point %zu: d=%zu tau=%d layers=%zu val_rmse %.4f\n", index, tc.model_cfg.hidden,
                 tc.model_cfg.steps, tc.model_cfg.gru_layers, outcome.result.best_val_rmse);
    GridOutcome o;
    o.cfg = tc;
    o.val_rmse = outcome.result.best_val_rmse;
    o.history = outcome.result.history;
    return o;
  };
  const auto result = grid_search(points, runner, jobs);
  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir / "grid_results.csv");
    out << "index,hidden,steps,gru_layers,seed,val_rmse,epochs,best\n";
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      const auto& r = result.runs[i];
      out << i << ',' << r.cfg.model_cfg.hidden << ',' << r.cfg.model_cfg.steps << ',' << r.cfg.model_cfg.gru_layers
          << ',' << r.cfg.seed << ',' << format_double(r.val_rmse) << ',' << r.history.size() << ','
          << (i == result.best ? 1 : 0) << '\n';
    }
  }
  const auto best_dir = runs_dir / std::to_string(result.best);
  std::filesystem::remove_all(cfg.out_dir / "best");
  std::filesystem::copy(best_dir, cfg.out_dir / "best", std::filesystem::copy_options::recursive);
  const auto& b = result.runs[result.best];
  std::printf("best point %zu: d=%zu tau=%d layers=%zu val_rmse %.4f\n", result.best, b.cfg.model_cfg.hidden,
              b.cfg.model_cfg.steps, b.cfg.model_cfg.gru_layers, b.val_rmse);
  return kExitOk;
}

int cmd_perturb(const std::string& base, const std::string& variant, std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  const auto g = graph_variant(load_graph_config(base), variant, rng);
  save_graph_config(g, out);
  std::printf("variant %s: %zu nodes, %zu edges, hash %s\n", variant.c_str(), g.size(), g.edges.size(),
              hash_hex(graph_hash(g)).c_str());
  return kExitOk;
}

std::size_t resolve_fault_node(const EvalReport& report, const std::string& name) {
  const auto& names = report.node_names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  // Merged or split variants: "HPC+Combustor", "HPC_1".
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::stringstream parts(names[i]);
    std::string part;
    while (std::getline(parts, part, '+')) {
      if (part == name || part.rfind(name + "_", 0) == 0) return i;
    }
  }
  if (!name.empty() && std::all_of(name.begin(), name.end(), ::isdigit)) return std::stoul(name);
  throw ConfigError("fault node '" + name + "' not found in the report");
}

int cmd_attention(const std::string& report_path, const std::string& fault, const std::vector<double>& bins,
                  const std::string& out_arg) {
  if (!std::filesystem::exists(report_path)) throw ConfigError("report " + report_path + " not found");
  const auto report = read_eval_report_csv(report_path);
  if (report.node_names.empty()) throw ConfigError("report has no attention columns (baseline model?)");
  const std::size_t node = resolve_fault_node(report, fault);
  const auto edges = bins.empty() ? default_rul_bins() : bins;
  const auto profile = attention_profile(report, node, edges);
  const std::filesystem::path out =
      out_arg.empty() ? std::filesystem::path(report_path).parent_path() / "attention_profile.csv" : std::filesystem::path(out_arg);
  write_attention_profile_csv(profile, out);
  std::printf("fault node %s (index %zu), %zu bins -> %s\n", report.node_names[node].c_str(), node,
              profile.bins.size(), out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Tape buffers are allocated and freed every batch; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Gated graph regression for remaining useful life"};
  app.require_subcommand(1);

  std::string dataset = "FD001", data_dir, graph = "configs/turbofan_8.json", variant = "original", out;
  std::uint64_t seed = 0;
  auto* prepare = app.add_subcommand("prepare", "Parse, split, normalize and cache a dataset");
  prepare->add_option("--dataset", dataset)->required();
  prepare->add_option("--data-dir", data_dir, "Defaults to $GNMR_DATA_DIR or ./data");
  prepare->add_option("--graph", graph);
  prepare->add_option("--variant", variant);
  prepare->add_option("--out", out, "Cache directory")->required();
  prepare->add_option("--seed", seed, "Split seed");

  std::string config_path;
  bool quiet = false;
  Overrides overrides;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--config", config_path);
  train_cmd->add_flag("--quiet", quiet);
  overrides.add_to(train_cmd);

  std::string ckpt, cache, eval_dataset;
  bool no_clamp = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  eval_cmd->add_option("--checkpoint", ckpt)->required();
  eval_cmd->add_option("--dataset", eval_dataset);
  eval_cmd->add_option("--cache", cache, "Dataset cache file");
  eval_cmd->add_option("--out", out);
  eval_cmd->add_flag("--no-clamp", no_clamp);

  std::size_t jobs = 1;
  Overrides grid_overrides;
  auto* grid_cmd = app.add_subcommand("grid", "Grid search over d, tau and GRU layers");
  grid_cmd->add_option("--config", config_path);
  grid_cmd->add_option("--jobs", jobs);
  grid_overrides.add_to(grid_cmd);

  std::string base = "configs/turbofan_8.json", perturb_variant;
  auto* perturb = app.add_subcommand("perturb-graph", "Write a structural variant of a graph config");
  perturb->add_option("--base", base);
  perturb->add_option("--variant", perturb_variant)->required();
  perturb->add_option("--seed", seed);
  perturb->add_option("--out", out)->required();

  std::string report_path, fault = "HPC";
  std::vector<double> bins;
  auto* attention = app.add_subcommand("attention-report", "Bin attention weights by true RUL");
  attention->add_option("--report", report_path)->required();
  attention->add_option("--fault-node", fault);
  attention->add_option("--bins", bins, "Bin edges")->delimiter(',');
  attention->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUser;
  }

  try {
    if (*prepare) return cmd_prepare(dataset, data_dir, graph, variant, out, seed);
    if (*train_cmd) return cmd_train(resolve_config(config_path, overrides), quiet);
    if (*eval_cmd) return cmd_evaluate(ckpt, eval_dataset, cache, out, no_clamp);
    if (*grid_cmd) return cmd_grid(resolve_config(config_path, grid_overrides), jobs);
    if (*perturb) return cmd_perturb(base, perturb_variant, seed, out);
    if (*attention) return cmd_attention(report_path, fault, bins, out);
  } catch (const CompatibilityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCompat;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  }
  return kExitUser;
}
