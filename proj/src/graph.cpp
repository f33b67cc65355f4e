#include "gnmr/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "gnmr/channels.hpp"
#include "gnmr/error.hpp"

namespace gnmr {
namespace {

void add_edge_unique(std::vector<Edge>& edges, std::size_t from, std::size_t to) {
  if (from == to) return;
  const Edge e{from, to};
  if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
}

}  // namespace

bool EquipmentGraph::has_edge(std::size_t from, std::size_t to) const {
  return std::find(edges.begin(), edges.end(), Edge{from, to}) != edges.end();
}

std::size_t EquipmentGraph::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return i;
  }
  throw ContractError("no node named '" + name + "'");
}

std::vector<std::string> EquipmentGraph::sensor_union() const {
  std::vector<std::string> out;
  for (const auto& node : nodes) {
    for (const auto& s : node.sensors) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
  }
  return out;
}

void validate(const EquipmentGraph& g) {
  if (g.nodes.empty()) throw ValidationError("graph has no nodes");
  std::set<std::string> names;
  for (const auto& node : g.nodes) {
    if (node.name.empty()) throw ValidationError("node with empty name");
    if (!names.insert(node.name).second) throw ValidationError("duplicate node '" + node.name + "'");
    if (node.sensors.empty()) throw ValidationError("node '" + node.name + "' has no sensors");
    std::set<std::string> seen;
    for (const auto& s : node.sensors) {
      if (!channel_index(s)) throw ValidationError("node '" + node.name + "': unknown sensor '" + s + "'");
      if (!seen.insert(s).second) {
        throw ValidationError("node '" + node.name + "': sensor '" + s + "' listed twice");
      }
    }
  }
  for (const auto& c : g.global_channels) {
    if (!channel_index(c)) throw ValidationError("unknown global channel '" + c + "'");
  }
  std::set<Edge> edges;
  for (const auto& [from, to] : g.edges) {
    if (from >= g.size() || to >= g.size()) {
      throw ValidationError("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                            ") references a nonexistent node");
    }
    if (from == to) throw ValidationError("self-loop on node '" + g.nodes[from].name + "'");
    if (!edges.insert({from, to}).second) {
      throw ValidationError("duplicate edge " + g.nodes[from].name + " -> " + g.nodes[to].name);
    }
  }
}

EquipmentGraph graph_from_json(const nlohmann::json& doc) {
  EquipmentGraph g;
  try {
    for (const auto& n : doc.at("nodes")) {
      NodeSpec spec;
      spec.name = n.at("name").get<std::string>();
      spec.node_type = n.contains("node_type") ? n["node_type"].get<std::string>() : spec.name;
      spec.sensors = n.at("sensors").get<std::vector<std::string>>();
      g.nodes.push_back(std::move(spec));
    }
    if (doc.contains("global_channels")) {
      g.global_channels = doc["global_channels"].get<std::vector<std::string>>();
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].name, i);
    if (doc.contains("edges")) {
      for (const auto& e : doc["edges"]) {
        if (!e.is_array() || e.size() != 2) throw ValidationError("edge entries must be [from, to] pairs");
        const auto from = e[0].get<std::string>();
        const auto to = e[1].get<std::string>();
        for (const auto& name : {from, to}) {
          if (!index.count(name)) throw ValidationError("edge references unknown node '" + name + "'");
        }
        g.edges.emplace_back(index[from], index[to]);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed graph config: ") + ex.what());
  }
  validate(g);
  return g;
}

nlohmann::json graph_to_json(const EquipmentGraph& g) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    doc["nodes"].push_back({{"name", n.name}, {"node_type", n.node_type}, {"sensors", n.sensors}});
  }
  doc["edges"] = nlohmann::json::array();
  for (const auto& [from, to] : g.edges) doc["edges"].push_back({g.nodes[from].name, g.nodes[to].name});
  doc["global_channels"] = g.global_channels;
  return doc;
}

EquipmentGraph load_graph_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open graph config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("graph config " + path.string() + ": " + ex.what());
  }
  return graph_from_json(doc);
}

void save_graph_config(const EquipmentGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << graph_to_json(g).dump(2) << '\n';
}

std::uint64_t graph_hash(const EquipmentGraph& g) {
  const std::string text = graph_to_json(g).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AdjacencyPair build_adjacency(const EquipmentGraph& g) {
  const std::size_t n = g.size();
  AdjacencyPair adj{n, std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
  std::vector<std::size_t> indeg(n, 0), outdeg(n, 0);
  for (const auto& [from, to] : g.edges) {
    ++outdeg[from];
    ++indeg[to];
  }
  for (const auto& [from, to] : g.edges) {
    adj.a_in[to * n + from] = 1.0 / static_cast<double>(indeg[to]);
    adj.a_out[from * n + to] = 1.0 / static_cast<double>(outdeg[from]);
  }
  return adj;
}

EquipmentGraph split_nodes(const EquipmentGraph& g, Rng& rng) {
  EquipmentGraph out;
  out.global_channels = g.global_channels;
  std::vector<std::vector<std::size_t>> children(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const auto& node = g.nodes[j];
    if (node.sensors.size() <= 1) {
      children[j].push_back(out.nodes.size());
      out.nodes.push_back(node);
      continue;
    }
    auto sensors = node.sensors;
    rng.shuffle(sensors);
    const std::size_t first = (sensors.size() + 1) / 2;
    NodeSpec a{node.name + "_1", node.node_type, {sensors.begin(), sensors.begin() + first}};
    NodeSpec b{node.name + "_2", node.node_type, {sensors.begin() + first, sensors.end()}};
    const std::size_t ia = out.nodes.size();
    out.nodes.push_back(std::move(a));
    out.nodes.push_back(std::move(b));
    children[j] = {ia, ia + 1};
    add_edge_unique(out.edges, ia, ia + 1);
    add_edge_unique(out.edges, ia + 1, ia);
  }
  for (const auto& [from, to] : g.edges) {
    for (std::size_t a : children[from]) {
      for (std::size_t b : children[to]) add_edge_unique(out.edges, a, b);
    }
  }
  return out;
}

EquipmentGraph merge_nodes(const EquipmentGraph& g, const std::vector<Edge>& pairs) {
  const std::size_t none = g.size();
  std::vector<std::size_t> partner(g.size(), none);
  for (const auto& [a, b] : pairs) {
    if (a >= g.size() || b >= g.size() || a == b) {
      throw ContractError("merge pair (" + std::to_string(a) + ", " + std::to_string(b) + ") is invalid");
    }
    if (!g.has_edge(a, b) && !g.has_edge(b, a)) {
      throw ContractError("cannot merge non-adjacent nodes '" + g.nodes[a].name + "' and '" +
                          g.nodes[b].name + "'");
    }
    if (partner[a] != none || partner[b] != none) {
      throw ContractError("merge pairs must be disjoint");
    }
    partner[a] = b;
    partner[b] = a;
  }

  EquipmentGraph out;
  out.global_channels = g.global_channels;
  std::vector<std::size_t> group(g.size(), none);
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (group[j] != none) continue;
    NodeSpec node = g.nodes[j];
    group[j] = out.nodes.size();
    if (partner[j] != none) {
      const auto& other = g.nodes[partner[j]];
      node.name += "+" + other.name;
      node.node_type += "+" + other.node_type;
      for (const auto& s : other.sensors) {
        if (std::find(node.sensors.begin(), node.sensors.end(), s) == node.sensors.end()) {
          node.sensors.push_back(s);
        }
      }
      group[partner[j]] = out.nodes.size();
    }
    out.nodes.push_back(std::move(node));
  }
  for (const auto& [from, to] : g.edges) add_edge_unique(out.edges, group[from], group[to]);
  return out;
}

EquipmentGraph one_node_per_sensor(const EquipmentGraph& g) {
  const auto sensors = g.sensor_union();
  std::vector<std::vector<std::size_t>> parents(sensors.size());
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& ns = g.nodes[j].sensors;
      if (std::find(ns.begin(), ns.end(), sensors[s]) != ns.end()) parents[s].push_back(j);
    }
  }

  EquipmentGraph out;
  out.global_channels = g.global_channels;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const bool sole = parents[s].size() == 1 && g.nodes[parents[s][0]].sensors.size() == 1;
    if (sole) {
      out.nodes.push_back(g.nodes[parents[s][0]]);
    } else {
      out.nodes.push_back(NodeSpec{sensors[s], sensors[s], {sensors[s]}});
    }
  }
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    for (std::size_t t = 0; t < sensors.size(); ++t) {
      if (s == t) continue;
      bool linked = false;
      for (std::size_t p : parents[s]) {
        for (std::size_t q : parents[t]) linked = linked || p == q || g.has_edge(p, q);
      }
      if (linked) out.edges.emplace_back(s, t);
    }
  }
  return out;
}

EquipmentGraph single_node(const EquipmentGraph& g) {
  EquipmentGraph out;
  out.global_channels = g.global_channels;
  out.nodes.push_back(NodeSpec{"System", "System", g.sensor_union()});
  return out;
}

std::vector<Edge> turbofan_reduction_pairs(const EquipmentGraph& base) {
  return {{base.index_of("Fan"), base.index_of("LPC")},
          {base.index_of("HPC"), base.index_of("Combustor")},
          {base.index_of("HPT"), base.index_of("LPT")},
          {base.index_of("Bypass"), base.index_of("Nozzle")}};
}

EquipmentGraph graph_variant(const EquipmentGraph& base, const std::string& variant, Rng& rng) {
  if (variant == "original") return base;
  if (variant == "reduced4" || variant == "reduced") return merge_nodes(base, turbofan_reduction_pairs(base));
  if (variant == "increased13" || variant == "increased") return split_nodes(base, rng);
  if (variant == "per_sensor") return one_node_per_sensor(base);
  if (variant == "single_node") return single_node(base);
  throw ConfigError("unknown graph variant '" + variant +
                    "' (expected original, reduced4, increased13, per_sensor or single_node)");
}

}  // namespace gnmr
