#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "gnmr/error.hpp"
#include "gnmr/graph.hpp"

namespace gnmr {
namespace {

EquipmentGraph turbofan() { return load_graph_config(std::filesystem::path(GNMR_SOURCE_DIR) / "configs/turbofan_8.json"); }

std::multiset<std::string> all_sensors(const EquipmentGraph& g) {
  std::multiset<std::string> out;
  for (const auto& n : g.nodes) out.insert(n.sensors.begin(), n.sensors.end());
  return out;
}

std::map<std::string, std::size_t> parent_by_sensor(const EquipmentGraph& g) {
  std::map<std::string, std::size_t> out;
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (const auto& s : g.nodes[j].sensors) out[s] = j;
  }
  return out;
}

TEST(Graph, ShippedConfigShape) {
  const auto g = turbofan();
  EXPECT_EQ(g.size(), 8u);
  EXPECT_EQ(g.edges.size(), 11u);
  EXPECT_EQ(g.sensor_union().size(), 21u);
  EXPECT_EQ(all_sensors(g).size(), 21u);
  EXPECT_EQ(g.global_channels.size(), 3u);
  EXPECT_TRUE(g.has_edge(g.index_of("HPC"), g.index_of("Combustor")));
}

TEST(Graph, JsonRoundTripAndHashStable) {
  const auto g = turbofan();
  const auto back = graph_from_json(graph_to_json(g));
  EXPECT_EQ(back, g);
  EXPECT_EQ(graph_hash(back), graph_hash(g));
  auto other = g;
  other.edges.pop_back();
  EXPECT_NE(graph_hash(other), graph_hash(g));
  EXPECT_EQ(hash_hex(0xabcULL), "0000000000000abc");
}

TEST(Graph, ValidationRejectsBadConfigs) {
  const nlohmann::json unknown_sensor = {{"nodes", {{{"name", "A"}, {"sensors", {"T2", "bogus"}}}}}};
  EXPECT_THROW(graph_from_json(unknown_sensor), ValidationError);
  const nlohmann::json dup = {{"nodes", {{{"name", "A"}, {"sensors", {"T2"}}}, {{"name", "A"}, {"sensors", {"T24"}}}}}};
  EXPECT_THROW(graph_from_json(dup), ValidationError);
  const nlohmann::json dangling = {{"nodes", {{{"name", "A"}, {"sensors", {"T2"}}}}}, {"edges", {{"A", "B"}}}};
  EXPECT_THROW(graph_from_json(dangling), ValidationError);
  const nlohmann::json loop = {{"nodes", {{{"name", "A"}, {"sensors", {"T2"}}}}}, {"edges", {{"A", "A"}}}};
  EXPECT_THROW(graph_from_json(loop), ValidationError);
  const nlohmann::json empty = {{"nodes", nlohmann::json::array()}};
  EXPECT_THROW(graph_from_json(empty), ValidationError);
  EXPECT_THROW(graph_from_json(nlohmann::json::object()), ValidationError);
}

TEST(Graph, AdjacencyRowsNormalized) {
  const auto g = turbofan();
  const auto adj = build_adjacency(g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t indeg = 0, outdeg = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      in_sum += adj.in(j, k);
      out_sum += adj.out(j, k);
      EXPECT_EQ(adj.in(j, k) > 0.0, g.has_edge(k, j));
      EXPECT_EQ(adj.out(j, k) > 0.0, g.has_edge(j, k));
      indeg += g.has_edge(k, j);
      outdeg += g.has_edge(j, k);
    }
    EXPECT_NEAR(in_sum, indeg ? 1.0 : 0.0, 1e-15);
    EXPECT_NEAR(out_sum, outdeg ? 1.0 : 0.0, 1e-15);
  }
}

TEST(Graph, SplitProducesThirteenNodesAndExpectedEdges) {
  const auto g = turbofan();
  Rng rng(3);
  const auto s = split_nodes(g, rng);
  EXPECT_EQ(s.size(), 13u);
  EXPECT_EQ(all_sensors(s), all_sensors(g));
  validate(s);

  // Brute-force oracle: children of one parent are mutually linked, children
  // of linked parents inherit the parent edge.
  const auto parent_of_sensor = parent_by_sensor(g);
  std::vector<std::size_t> parent(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) parent[i] = parent_of_sensor.at(s.nodes[i].sensors.front());
  for (std::size_t u = 0; u < s.size(); ++u) {
    for (std::size_t v = 0; v < s.size(); ++v) {
      if (u == v) continue;
      const bool expected = parent[u] == parent[v] || g.has_edge(parent[u], parent[v]);
      EXPECT_EQ(s.has_edge(u, v), expected) << s.nodes[u].name << " -> " << s.nodes[v].name;
    }
  }
}

TEST(Graph, SplitHalvesAreBalancedAndSeeded) {
  const auto g = turbofan();
  Rng a(11), b(11), c(12);
  const auto sa = split_nodes(g, a), sb = split_nodes(g, b), sc = split_nodes(g, c);
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.size(), sc.size());
  const auto fan1 = sa.nodes[sa.index_of("Fan_1")], fan2 = sa.nodes[sa.index_of("Fan_2")];
  EXPECT_EQ(fan1.sensors.size(), 3u);
  EXPECT_EQ(fan2.sensors.size(), 3u);
  EXPECT_EQ(fan1.node_type, "Fan");
}

TEST(Graph, MergeProducesFourNodes) {
  const auto g = turbofan();
  const auto m = merge_nodes(g, turbofan_reduction_pairs(g));
  EXPECT_EQ(m.size(), 4u);
  EXPECT_EQ(all_sensors(m), all_sensors(g));
  validate(m);
  // Group edges exist iff some original edge crosses the two groups.
  const auto parent_of_sensor = parent_by_sensor(g);
  std::vector<std::size_t> group(g.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (const auto& s : m.nodes[i].sensors) group[parent_of_sensor.at(s)] = i;
  }
  for (std::size_t u = 0; u < m.size(); ++u) {
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (u == v) continue;
      bool crossing = false;
      for (const auto& [a, b] : g.edges) crossing = crossing || (group[a] == u && group[b] == v);
      EXPECT_EQ(m.has_edge(u, v), crossing);
    }
  }
  EXPECT_NO_THROW(m.index_of("HPC+Combustor"));
}

TEST(Graph, MergeRejectsNonAdjacentOrOverlappingPairs) {
  const auto g = turbofan();
  EXPECT_THROW(merge_nodes(g, {{g.index_of("Fan"), g.index_of("Combustor")}}), ContractError);
  EXPECT_THROW(merge_nodes(g, {{g.index_of("Fan"), g.index_of("LPC")}, {g.index_of("LPC"), g.index_of("HPC")}}),
               ContractError);
  EXPECT_THROW(merge_nodes(g, {{0, 0}}), ContractError);
}

TEST(Graph, PerSensorProducesTwentyOneNodes) {
  const auto g = turbofan();
  const auto p = one_node_per_sensor(g);
  EXPECT_EQ(p.size(), 21u);
  EXPECT_EQ(all_sensors(p), all_sensors(g));
  validate(p);
  const auto parent_of_sensor = parent_by_sensor(g);
  for (std::size_t u = 0; u < p.size(); ++u) {
    EXPECT_EQ(p.nodes[u].sensors.size(), 1u);
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (u == v) continue;
      const auto a = parent_of_sensor.at(p.nodes[u].sensors[0]), b = parent_of_sensor.at(p.nodes[v].sensors[0]);
      EXPECT_EQ(p.has_edge(u, v), a == b || g.has_edge(a, b));
    }
  }
  // Single-sensor modules keep their module name.
  EXPECT_NO_THROW(p.index_of("LPC"));
  EXPECT_NO_THROW(p.index_of("T30"));
}

TEST(Graph, SingleNodeHoldsEverySensor) {
  const auto g = turbofan();
  const auto s = single_node(g);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_TRUE(s.edges.empty());
  EXPECT_EQ(all_sensors(s), all_sensors(g));
}

TEST(Graph, VariantCountsMatchTable) {
  const auto g = turbofan();
  Rng rng(5);
  const std::map<std::string, std::size_t> expected{
      {"single_node", 1}, {"reduced4", 4}, {"original", 8}, {"increased13", 13}, {"per_sensor", 21}};
  for (const auto& [name, count] : expected) EXPECT_EQ(graph_variant(g, name, rng).size(), count) << name;
  EXPECT_THROW(graph_variant(g, "bogus", rng), ConfigError);
}

TEST(Graph, ShippedFourNodeConfigMatchesMerge) {
  const auto g = turbofan();
  const auto four = load_graph_config(std::filesystem::path(GNMR_SOURCE_DIR) / "configs/turbofan_4.json");
  EXPECT_EQ(four, merge_nodes(g, turbofan_reduction_pairs(g)));
}

}  // namespace
}  // namespace gnmr
