#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gnmr/cmapss.hpp"
#include "gnmr/model.hpp"

namespace gnmr {

/// clamp(p, 0, 1) * cap, or p * cap when clamping is disabled.
double denormalize_prediction(double normalized, double rul_cap, bool clamp = true);

double rmse(std::span<const double> errors);

/// Sum of exp(|e| / u) - 1 with u = u1 for early (e < 0) and u2 for late predictions.
double timeliness_score(std::span<const double> errors, double u1 = 13.0, double u2 = 10.0);

struct EvalRecord {
  int unit_id = 0;
  double true_rul = 0.0;       // cycles
  double predicted_rul = 0.0;  // cycles
  double error = 0.0;          // predicted - true
  std::vector<double> weights;         // attention per node (GNMR only)
  std::vector<double> node_estimates;  // per-node RUL in cycles (GNMR only)
};

struct EvalReport {
  double rmse = 0.0;
  double score_s = 0.0;
  std::vector<std::string> node_names;
  std::vector<EvalRecord> records;
};

/// Eval-mode forward over the test windows (one per instance), metrics in cycles
/// against the raw test RUL.
EvalReport evaluate(const RulModel& model, std::span<const WindowSample> test_windows, double rul_cap,
                    bool clamp = true, std::size_t chunk = 64);

/// Builds the report from precomputed records (recomputes both metrics).
EvalReport make_report(std::vector<EvalRecord> records, std::vector<std::string> node_names);

struct AttentionBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_w_fault = 0.0;
  double mean_w_others = 0.0;
  double mean_rhat_fault = 0.0;
  double mean_rhat_others = 0.0;
};

struct AttentionProfile {
  std::size_t fault_node = 0;
  std::vector<AttentionBin> bins;  // non-empty bins only
};

/// Width-10 edges over [0, 130].
std::vector<double> default_rul_bins();

/// Bins instances by true RUL ([edge_k, edge_k+1); values past the last edge
/// join the last bin) and averages the fault node against the mean of the rest.
AttentionProfile attention_profile(const EvalReport& report, std::size_t fault_node, std::span<const double> edges);

void write_eval_report_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_eval_report_csv(const std::filesystem::path& path);
void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path);
void write_attention_profile_csv(const AttentionProfile& profile, const std::filesystem::path& path);

/// Shortest round-trip text form of a double.
std::string format_double(double v);

}  // namespace gnmr
