#include "gnmr/cmapss.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "gnmr/error.hpp"

namespace gnmr {
namespace {

constexpr std::size_t kColumnsPerRow = 2 + kChannelCount;
constexpr char kCacheMagic[8] = {'G', 'N', 'M', 'R', 'D', 'S', 'C', '1'};
constexpr std::uint32_t kCacheVersion = 1;

std::vector<double> split_numbers(const std::string& line, const std::string& source, std::size_t line_no) {
  std::vector<double> out;
  const char* p = line.c_str();
  while (true) {
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p == '\0') break;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(p, &end);
    if (end == p || errno == ERANGE || !(*end == '\0' || *end == ' ' || *end == '\t' || *end == '\r')) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    out.push_back(v);
    p = end;
  }
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<EngineRun> parse_runs(std::istream& in, const std::string& source) {
  std::vector<EngineRun> runs;
  std::map<int, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_numbers(line, source, line_no);
    if (fields.empty()) continue;
    if (fields.size() != kColumnsPerRow) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(kColumnsPerRow) +
                       " fields, found " + std::to_string(fields.size()));
    }
    const int unit = static_cast<int>(fields[0]);
    const int cycle = static_cast<int>(fields[1]);
    if (unit != fields[0] || cycle != fields[1]) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": unit and cycle must be integers");
    }
    auto [it, inserted] = index.try_emplace(unit, runs.size());
    if (inserted) runs.push_back(EngineRun{unit, 0, {}});
    EngineRun& run = runs[it->second];
    if (static_cast<std::size_t>(cycle) != run.cycles() + 1) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": unit " + std::to_string(unit) + " cycle " +
                       std::to_string(cycle) + " breaks the contiguous sequence");
    }
    run.channels.insert(run.channels.end(), fields.begin() + 2, fields.end());
    run.failure_cycle = cycle;
  }
  if (runs.empty()) throw ParseError(source + ": no data rows");
  return runs;
}

std::vector<int> parse_rul(std::istream& in, const std::string& source) {
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_numbers(line, source, line_no);
    if (fields.empty()) continue;
    if (fields.size() != 1 || fields[0] < 0 || fields[0] != std::floor(fields[0])) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected one non-negative integer");
    }
    out.push_back(static_cast<int>(fields[0]));
  }
  if (out.empty()) throw ParseError(source + ": no data rows");
  return out;
}

CmapssData parse_cmapss(const std::filesystem::path& train_path, const std::filesystem::path& test_path,
                        const std::filesystem::path& rul_path) {
  CmapssData data;
  {
    auto in = open_or_throw(train_path);
    data.train = parse_runs(in, train_path.string());
  }
  {
    auto in = open_or_throw(test_path);
    data.test = parse_runs(in, test_path.string());
  }
  auto in = open_or_throw(rul_path);
  const auto rul = parse_rul(in, rul_path.string());
  if (rul.size() != data.test.size()) {
    throw ParseError(rul_path.string() + ":" + std::to_string(rul.size()) + ": RUL file has " +
                     std::to_string(rul.size()) + " entries for " + std::to_string(data.test.size()) +
                     " test units");
  }
  for (std::size_t i = 0; i < rul.size(); ++i) data.test[i].failure_cycle += rul[i];
  return data;
}

CmapssData load_cmapss_dir(const std::filesystem::path& dir, const std::string& dataset_id) {
  return parse_cmapss(dir / ("train_" + dataset_id + ".txt"), dir / ("test_" + dataset_id + ".txt"),
                      dir / ("RUL_" + dataset_id + ".txt"));
}

std::pair<std::vector<EngineRun>, std::vector<EngineRun>> split_train_val(std::vector<EngineRun> runs, double ratio,
                                                                          Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  // Small epsilon so e.g. 0.8 * 5 lands on 4 rather than 3.999...
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(runs.size()) * ratio + 1e-9));
  rng.shuffle(runs);
  std::vector<EngineRun> train(std::make_move_iterator(runs.begin()),
                               std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>(n_train)));
  std::vector<EngineRun> val(std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>(n_train)),
                             std::make_move_iterator(runs.end()));
  const auto by_unit = [](const EngineRun& a, const EngineRun& b) { return a.unit_id < b.unit_id; };
  std::sort(train.begin(), train.end(), by_unit);
  std::sort(val.begin(), val.end(), by_unit);
  return {std::move(train), std::move(val)};
}

NormalizationStats fit_normalization(std::span<const EngineRun> train) {
  NormalizationStats stats;
  stats.min.fill(std::numeric_limits<double>::infinity());
  stats.max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& run : train) {
    for (std::size_t t = 0; t < run.cycles(); ++t) {
      for (std::size_t c = 0; c < kChannelCount; ++c) {
        stats.min[c] = std::min(stats.min[c], run.at(t, c));
        stats.max[c] = std::max(stats.max[c], run.at(t, c));
      }
    }
  }
  if (!std::isfinite(stats.min[0])) throw ConfigError("cannot fit normalization on an empty training split");
  return stats;
}

EngineRun apply_normalization(const EngineRun& run, const NormalizationStats& stats) {
  EngineRun out = run;
  for (std::size_t i = 0; i < out.channels.size(); ++i) {
    const std::size_t c = i % kChannelCount;
    const double range = stats.max[c] - stats.min[c];
    out.channels[i] = range > 0.0 ? 2.0 * (run.channels[i] - stats.min[c]) / range - 1.0 : 0.0;
  }
  return out;
}

std::vector<EngineRun> apply_normalization(std::span<const EngineRun> runs, const NormalizationStats& stats) {
  std::vector<EngineRun> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(apply_normalization(r, stats));
  return out;
}

std::vector<double> channel_means(std::span<const EngineRun> runs) {
  std::vector<double> sum(kChannelCount, 0.0);
  std::size_t rows = 0;
  for (const auto& run : runs) {
    for (std::size_t t = 0; t < run.cycles(); ++t) {
      for (std::size_t c = 0; c < kChannelCount; ++c) sum[c] += run.at(t, c);
    }
    rows += run.cycles();
  }
  if (rows == 0) throw ConfigError("cannot compute channel means of an empty split");
  for (auto& s : sum) s /= static_cast<double>(rows);
  return sum;
}

namespace {

WindowSample window_ending_at(const EngineRun& run, std::size_t t_end, const WindowConfig& cfg,
                              std::span<const double> pad_values, bool is_test) {
  WindowSample w;
  w.channels.resize(cfg.length * kChannelCount);
  const std::size_t available = std::min(t_end, cfg.length);
  const std::size_t pad_rows = cfg.length - available;
  for (std::size_t r = 0; r < pad_rows; ++r) {
    std::copy(pad_values.begin(), pad_values.end(), w.channels.begin() + static_cast<std::ptrdiff_t>(r * kChannelCount));
  }
  const std::size_t first_cycle = t_end - available;  // zero-based index of the first real row
  std::copy_n(run.channels.begin() + static_cast<std::ptrdiff_t>(first_cycle * kChannelCount),
              available * kChannelCount,
              w.channels.begin() + static_cast<std::ptrdiff_t>(pad_rows * kChannelCount));
  w.raw_rul = static_cast<double>(run.failure_cycle) - static_cast<double>(t_end);
  w.target = std::min(w.raw_rul, cfg.rul_cap) / cfg.rul_cap;
  w.age = static_cast<double>(t_end);
  w.unit_id = run.unit_id;
  w.is_test = is_test;
  return w;
}

}  // namespace

std::vector<WindowSample> make_windows(const EngineRun& run, const WindowConfig& cfg,
                                       std::span<const double> pad_values, bool is_test) {
  if (cfg.length == 0 || cfg.shift == 0) throw ConfigError("window length and shift must be positive");
  if (pad_values.size() != kChannelCount) throw ConfigError("padding needs one value per channel");
  const std::size_t last = run.cycles();
  std::vector<WindowSample> out;
  if (last == 0) return out;
  if (last < cfg.length) {
    out.push_back(window_ending_at(run, last, cfg, pad_values, is_test));
    return out;
  }
  std::size_t t_end = cfg.length;
  for (; t_end <= last; t_end += cfg.shift) out.push_back(window_ending_at(run, t_end, cfg, pad_values, is_test));
  if (t_end - cfg.shift != last) out.push_back(window_ending_at(run, last, cfg, pad_values, is_test));
  return out;
}

std::vector<WindowSample> make_test_windows(std::span<const EngineRun> test_runs, const WindowConfig& cfg,
                                            std::span<const double> pad_values) {
  if (pad_values.size() != kChannelCount) throw ConfigError("padding needs one value per channel");
  std::vector<WindowSample> out;
  out.reserve(test_runs.size());
  for (const auto& run : test_runs) out.push_back(window_ending_at(run, run.cycles(), cfg, pad_values, true));
  return out;
}

std::vector<std::vector<std::size_t>> node_columns(const EquipmentGraph& g) {
  std::vector<std::vector<std::size_t>> cols;
  for (const auto& node : g.nodes) {
    std::vector<std::size_t> c;
    for (const auto& name : node.sensors) {
      const auto idx = channel_index(name);
      if (!idx) throw ConfigError("node '" + node.name + "': sensor '" + name + "' is not a C-MAPSS channel");
      c.push_back(*idx);
    }
    for (const auto& name : g.global_channels) {
      const auto idx = channel_index(name);
      if (!idx) throw ConfigError("global channel '" + name + "' is not a C-MAPSS channel");
      c.push_back(*idx);
    }
    cols.push_back(std::move(c));
  }
  return cols;
}

std::vector<std::vector<double>> partition_by_node(const WindowSample& w, const EquipmentGraph& g) {
  const auto cols = node_columns(g);
  const std::size_t len = w.length();
  std::vector<std::vector<double>> out;
  out.reserve(cols.size());
  for (const auto& c : cols) {
    std::vector<double> x(len * c.size());
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < c.size(); ++k) x[t * c.size() + k] = w.channels[t * kChannelCount + c[k]];
    }
    out.push_back(std::move(x));
  }
  return out;
}

double PcaTransform::cumulative_explained() const {
  return std::accumulate(explained_ratio.begin(), explained_ratio.end(), 0.0);
}

PcaTransform pca_fit_rows(std::span<const double> rows, std::size_t dim, std::size_t k) {
  if (dim == 0 || rows.size() % dim != 0) throw ConfigError("pca: row block is not a multiple of the dimension");
  if (k == 0 || k > dim) {
    throw ConfigError("pca: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(dim) + "]");
  }
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw ConfigError("pca: need at least two rows");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(rows.data(), n, dim);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd evecs = solver.eigenvectors();
  const double total = std::max(evals.sum(), 0.0);

  PcaTransform t;
  t.dim = dim;
  t.k = k;
  t.mean.assign(mean.data(), mean.data() + dim);
  t.components.resize(k * dim);
  for (std::size_t i = 0; i < k; ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(dim - 1 - i);
    Eigen::VectorXd v = evecs.col(col);
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t c = 0; c < dim; ++c) t.components[i * dim + c] = v(static_cast<Eigen::Index>(c));
    const double ev = std::max(evals(col), 0.0);
    t.explained_ratio.push_back(total > 0.0 ? ev / total : 0.0);
  }
  return t;
}

PcaTransform pca_fit(std::span<const WindowSample> train_windows, std::size_t k) {
  std::vector<double> rows;
  for (const auto& w : train_windows) rows.insert(rows.end(), w.channels.begin(), w.channels.end());
  return pca_fit_rows(rows, kChannelCount, k);
}

PcaTransform pca_fit_runs(std::span<const EngineRun> runs, std::size_t k) {
  std::vector<double> rows;
  for (const auto& r : runs) rows.insert(rows.end(), r.channels.begin(), r.channels.end());
  return pca_fit_rows(rows, kChannelCount, k);
}

std::vector<double> pca_apply(std::span<const double> rows, const PcaTransform& t) {
  if (rows.size() % t.dim != 0) throw DimensionError("pca_apply: input width does not match the transform");
  const std::size_t n = rows.size() / t.dim;
  std::vector<double> out(n * t.k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < t.k; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < t.dim; ++c) acc += (rows[r * t.dim + c] - t.mean[c]) * t.components[i * t.dim + c];
      out[r * t.k + i] = acc;
    }
  }
  return out;
}

std::vector<double> pca_reconstruct(std::span<const double> projected, const PcaTransform& t) {
  if (projected.size() % t.k != 0) throw DimensionError("pca_reconstruct: input width does not match the transform");
  const std::size_t n = projected.size() / t.k;
  std::vector<double> out(n * t.dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < t.dim; ++c) {
      double acc = t.mean[c];
      for (std::size_t i = 0; i < t.k; ++i) acc += projected[r * t.k + i] * t.components[i * t.dim + c];
      out[r * t.dim + c] = acc;
    }
  }
  return out;
}

PreparedDataset prepare_dataset(const CmapssData& raw, const std::string& dataset_id, const WindowConfig& cfg,
                                std::uint64_t seed, double split_ratio, std::uint64_t graph_hash) {
  PreparedDataset d;
  d.dataset_id = dataset_id;
  d.windows = cfg;
  d.seed = seed;
  d.split_ratio = split_ratio;
  d.graph_hash = graph_hash;
  Rng rng(seed);
  auto [train, val] = split_train_val(raw.train, split_ratio, rng);
  d.stats = fit_normalization(train);
  d.train = apply_normalization(train, d.stats);
  d.val = apply_normalization(val, d.stats);
  d.test = apply_normalization(raw.test, d.stats);
  d.pad_values = channel_means(d.train);
  return d;
}

DatasetWindows build_windows(const PreparedDataset& data) {
  DatasetWindows w;
  for (const auto& run : data.train) {
    auto win = make_windows(run, data.windows, data.pad_values);
    w.train.insert(w.train.end(), std::make_move_iterator(win.begin()), std::make_move_iterator(win.end()));
  }
  for (const auto& run : data.val) {
    auto win = make_windows(run, data.windows, data.pad_values);
    w.val.insert(w.val.end(), std::make_move_iterator(win.begin()), std::make_move_iterator(win.end()));
  }
  w.test = make_test_windows(data.test, data.windows, data.pad_values);
  return w;
}

namespace {

nlohmann::json cache_header(const PreparedDataset& d) {
  nlohmann::json h;
  h["dataset"] = d.dataset_id;
  h["window_length"] = d.windows.length;
  h["window_shift"] = d.windows.shift;
  h["rul_cap"] = d.windows.rul_cap;
  h["seed"] = d.seed;
  h["split_ratio"] = d.split_ratio;
  h["graph_hash"] = hash_hex(d.graph_hash);
  h["norm_min"] = d.stats.min;
  h["norm_max"] = d.stats.max;
  h["pad_values"] = d.pad_values;
  return h;
}

void write_runs(std::ostream& out, const std::vector<EngineRun>& runs) {
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(runs.size()));
  for (const auto& r : runs) {
    detail::write_pod<std::int32_t>(out, r.unit_id);
    detail::write_pod<std::int32_t>(out, r.failure_cycle);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.cycles()));
    detail::write_doubles(out, r.channels);
  }
}

std::vector<EngineRun> read_runs(std::istream& in) {
  const auto n = detail::read_pod<std::uint32_t>(in, "run count");
  std::vector<EngineRun> runs;
  runs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    EngineRun r;
    r.unit_id = detail::read_pod<std::int32_t>(in, "unit id");
    r.failure_cycle = detail::read_pod<std::int32_t>(in, "failure cycle");
    const auto cycles = detail::read_pod<std::uint32_t>(in, "cycle count");
    if (cycles > 1'000'000) throw LoadError("implausible cycle count in cache");
    r.channels = detail::read_doubles(in, std::size_t{cycles} * kChannelCount, "channels");
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace

std::string dataset_cache_name(const PreparedDataset& d) {
  const std::string key = cache_header(d).dump();
  return d.dataset_id + "_" + hash_hex(detail::fnv1a(key.data(), key.size())) + ".gnmrcache";
}

void save_dataset_cache(const PreparedDataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write cache " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  detail::write_pod<std::uint32_t>(out, kCacheVersion);
  detail::write_string(out, cache_header(d).dump());
  write_runs(out, d.train);
  write_runs(out, d.val);
  write_runs(out, d.test);
  if (!out) throw ConfigError("failed writing cache " + path.string());
}

PreparedDataset load_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open cache " + path.string());
  char magic[sizeof kCacheMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kCacheMagic)) {
    throw LoadError(path.string() + " is not a dataset cache");
  }
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != kCacheVersion) {
    throw LoadError("dataset cache version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCacheVersion) + ")");
  }
  PreparedDataset d;
  try {
    const auto h = nlohmann::json::parse(detail::read_string(in, "header"));
    d.dataset_id = h.at("dataset").get<std::string>();
    d.windows.length = h.at("window_length").get<std::size_t>();
    d.windows.shift = h.at("window_shift").get<std::size_t>();
    d.windows.rul_cap = h.at("rul_cap").get<double>();
    d.seed = h.at("seed").get<std::uint64_t>();
    d.split_ratio = h.at("split_ratio").get<double>();
    d.graph_hash = std::stoull(h.at("graph_hash").get<std::string>(), nullptr, 16);
    d.stats.min = h.at("norm_min").get<std::array<double, kChannelCount>>();
    d.stats.max = h.at("norm_max").get<std::array<double, kChannelCount>>();
    d.pad_values = h.at("pad_values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(std::string("corrupt cache header: ") + ex.what());
  }
  d.train = read_runs(in);
  d.val = read_runs(in);
  d.test = read_runs(in);
  return d;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = detail::fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace gnmr
