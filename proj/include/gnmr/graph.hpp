#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnmr/rng.hpp"

namespace gnmr {

struct NodeSpec {
  std::string name;
  std::string node_type;
  std::vector<std::string> sensors;  // S_j, in config order

  bool operator==(const NodeSpec&) const = default;
};

/// Directed edge (from, to) between node indices.
using Edge = std::pair<std::size_t, std::size_t>;

/// Directed graph of equipment modules. Node indices are positions in
/// `nodes`. `global_channels` (operating settings) are appended to every
/// node's input series but are not part of any S_j, so structural
/// perturbations only redistribute the physical sensors.
struct EquipmentGraph {
  std::vector<NodeSpec> nodes;
  std::vector<Edge> edges;
  std::vector<std::string> global_channels;

  std::size_t size() const { return nodes.size(); }
  bool has_edge(std::size_t from, std::size_t to) const;
  std::size_t index_of(const std::string& name) const;  // throws ContractError
  /// Union of all S_j, ordered by first appearance.
  std::vector<std::string> sensor_union() const;

  bool operator==(const EquipmentGraph&) const = default;
};

/// Row-normalized adjacency: a_in[j][i] = 1/indeg(j) for e_ij, a_out[j][k] = 1/outdeg(j) for e_jk.
struct AdjacencyPair {
  std::size_t n = 0;
  std::vector<double> a_in;   // n*n row-major
  std::vector<double> a_out;  // n*n row-major

  double in(std::size_t j, std::size_t i) const { return a_in[j * n + i]; }
  double out(std::size_t j, std::size_t k) const { return a_out[j * n + k]; }
};

/// Throws ValidationError naming the offending entry.
void validate(const EquipmentGraph& g);

EquipmentGraph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const EquipmentGraph& g);
EquipmentGraph load_graph_config(const std::filesystem::path& path);
void save_graph_config(const EquipmentGraph& g, const std::filesystem::path& path);

/// FNV-1a over the canonical JSON form.
std::uint64_t graph_hash(const EquipmentGraph& g);
std::string hash_hex(std::uint64_t h);

AdjacencyPair build_adjacency(const EquipmentGraph& g);

// Structural variants. All are pure.
EquipmentGraph split_nodes(const EquipmentGraph& g, Rng& rng);
EquipmentGraph merge_nodes(const EquipmentGraph& g, const std::vector<Edge>& pairs);
EquipmentGraph one_node_per_sensor(const EquipmentGraph& g);
EquipmentGraph single_node(const EquipmentGraph& g);

/// Resolve a named variant (original | reduced4 | increased13 | per_sensor |
/// single_node) from the 8-node base graph. reduced4 uses the shipped merge pairs.
EquipmentGraph graph_variant(const EquipmentGraph& base, const std::string& variant, Rng& rng);

/// Merge pairs that turn the shipped 8-node turbofan graph into the 4-node one.
std::vector<Edge> turbofan_reduction_pairs(const EquipmentGraph& base);

}  // namespace gnmr
