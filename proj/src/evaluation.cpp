#include "gnmr/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gnmr/error.hpp"

namespace gnmr {

double denormalize_prediction(double normalized, double rul_cap, bool clamp) {
  return (clamp ? std::clamp(normalized, 0.0, 1.0) : normalized) * rul_cap;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw ContractError("rmse of an empty error list");
  double sq = 0.0;
  for (double e : errors) sq += e * e;
  return std::sqrt(sq / static_cast<double>(errors.size()));
}

double timeliness_score(std::span<const double> errors, double u1, double u2) {
  if (errors.empty()) throw ContractError("timeliness score of an empty error list");
  double s = 0.0;
  for (double e : errors) s += std::expm1(std::abs(e) / (e < 0.0 ? u1 : u2));
  return s;
}

EvalReport make_report(std::vector<EvalRecord> records, std::vector<std::string> node_names) {
  EvalReport report;
  report.node_names = std::move(node_names);
  report.records = std::move(records);
  std::vector<double> errors;
  for (const auto& r : report.records) errors.push_back(r.error);
  report.rmse = rmse(errors);
  report.score_s = timeliness_score(errors);
  return report;
}

EvalReport evaluate(const RulModel& model, std::span<const WindowSample> test_windows, double rul_cap, bool clamp,
                    std::size_t chunk) {
  if (test_windows.empty()) throw ContractError("no test windows");
  std::vector<std::string> names;
  if (const auto* g = dynamic_cast<const GnmrModel*>(&model)) {
    for (const auto& n : g->graph().nodes) names.push_back(n.name);
  }
  std::vector<EvalRecord> records;
  std::vector<const WindowSample*> ptrs;
  for (std::size_t start = 0; start < test_windows.size(); start += chunk) {
    const std::size_t end = std::min(test_windows.size(), start + chunk);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&test_windows[i]);
    const auto inf = model.infer(ptrs);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      EvalRecord r;
      r.unit_id = ptrs[i]->unit_id;
      r.true_rul = ptrs[i]->raw_rul;
      r.predicted_rul = denormalize_prediction(inf.prediction[i], rul_cap, clamp);
      r.error = r.predicted_rul - r.true_rul;
      if (!inf.weights.empty()) {
        r.weights = inf.weights[i];
        for (double e : inf.node_estimates[i]) r.node_estimates.push_back(e * rul_cap);
      }
      records.push_back(std::move(r));
    }
  }
  return make_report(std::move(records), std::move(names));
}

std::vector<double> default_rul_bins() {
  std::vector<double> edges;
  for (int e = 0; e <= 130; e += 10) edges.push_back(e);
  return edges;
}

AttentionProfile attention_profile(const EvalReport& report, std::size_t fault_node, std::span<const double> edges) {
  if (edges.size() < 2) throw ContractError("attention profile needs at least two bin edges");
  if (!std::is_sorted(edges.begin(), edges.end())) throw ContractError("bin edges must be ascending");
  const std::size_t n_nodes = report.node_names.size();
  if (fault_node >= n_nodes) {
    throw ContractError("fault node " + std::to_string(fault_node) + " outside a graph of " +
                        std::to_string(n_nodes) + " nodes");
  }
  const std::size_t n_bins = edges.size() - 1;
  std::vector<AttentionBin> bins(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    bins[k].lower = edges[k];
    bins[k].upper = edges[k + 1];
  }
  for (const auto& r : report.records) {
    if (r.weights.size() != n_nodes || r.node_estimates.size() != n_nodes) {
      throw ContractError("report record for unit " + std::to_string(r.unit_id) + " lacks attention data");
    }
    if (r.true_rul < edges.front()) continue;
    const auto it = std::upper_bound(edges.begin(), edges.end(), r.true_rul);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, n_bins - 1);
    double w_others = 0.0, rhat_others = 0.0;
    for (std::size_t j = 0; j < n_nodes; ++j) {
      if (j == fault_node) continue;
      w_others += r.weights[j];
      rhat_others += r.node_estimates[j];
    }
    if (n_nodes > 1) {
      w_others /= static_cast<double>(n_nodes - 1);
      rhat_others /= static_cast<double>(n_nodes - 1);
    }
    auto& b = bins[k];
    ++b.count;
    b.mean_w_fault += r.weights[fault_node];
    b.mean_w_others += w_others;
    b.mean_rhat_fault += r.node_estimates[fault_node];
    b.mean_rhat_others += rhat_others;
  }
  AttentionProfile profile;
  profile.fault_node = fault_node;
  for (auto& b : bins) {
    if (b.count == 0) continue;
    const double c = static_cast<double>(b.count);
    b.mean_w_fault /= c;
    b.mean_w_others /= c;
    b.mean_rhat_fault /= c;
    b.mean_rhat_others /= c;
    profile.bins.push_back(b);
  }
  return profile;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_eval_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "unit,r,r_hat,e";
  for (const auto& n : report.node_names) out << ",w_" << n;
  for (const auto& n : report.node_names) out << ",rhat_" << n;
  out << '\n';
  for (const auto& r : report.records) {
    out << r.unit_id << ',' << format_double(r.true_rul) << ',' << format_double(r.predicted_rul) << ','
        << format_double(r.error);
    for (double w : r.weights) out << ',' << format_double(w);
    for (double e : r.node_estimates) out << ',' << format_double(e);
    out << '\n';
  }
}

EvalReport read_eval_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty report");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header[0] != "unit") throw ParseError(path.string() + ": unexpected header");
  std::vector<std::string> names;
  for (std::size_t i = 4; i < header.size(); ++i) {
    if (header[i].rfind("w_", 0) == 0) names.push_back(header[i].substr(2));
  }
  if (header.size() != 4 + 2 * names.size()) throw ParseError(path.string() + ": unbalanced attention columns");
  std::vector<EvalRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      cells.push_back(v);
    }
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    EvalRecord r;
    r.unit_id = static_cast<int>(cells[0]);
    r.true_rul = cells[1];
    r.predicted_rul = cells[2];
    r.error = cells[3];
    r.weights.assign(cells.begin() + 4, cells.begin() + 4 + static_cast<std::ptrdiff_t>(names.size()));
    r.node_estimates.assign(cells.begin() + 4 + static_cast<std::ptrdiff_t>(names.size()), cells.end());
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ParseError(path.string() + ": no records");
  return make_report(std::move(records), std::move(names));
}

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "rmse,S,n\n" << format_double(report.rmse) << ',' << format_double(report.score_s) << ','
      << report.records.size() << '\n';
}

void write_attention_profile_csv(const AttentionProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "bin,mean_w_fault,mean_w_others,mean_rhat_fault,mean_rhat_others,count\n";
  for (const auto& b : profile.bins) {
    out << format_double(b.lower) << '-' << format_double(b.upper) << ',' << format_double(b.mean_w_fault) << ','
        << format_double(b.mean_w_others) << ',' << format_double(b.mean_rhat_fault) << ','
        << format_double(b.mean_rhat_others) << ',' << b.count << '\n';
  }
}

}  // namespace gnmr
