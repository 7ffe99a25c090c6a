#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgflow/common.hpp"
#include "kgflow/knowledge_graph.hpp"
#include "kgflow/model.hpp"

namespace kgflow {

inline constexpr int kCheckpointVersion = 1;

// Trained model plus the vocabularies needed to interpret it.
struct Checkpoint {
  ModelParams params;
  std::vector<std::string> node_names;
  std::vector<std::string> node_types;  // type name per node
  std::vector<std::string> relation_names;
  std::vector<std::string> frozen_types;
  std::string policy;  // policy text, see format_policy()

  bool operator==(const Checkpoint&) const = default;
};

inline Checkpoint make_checkpoint(const ModelParams& params, const KnowledgeGraph& kg,
                                  std::vector<std::string> frozen_types, std::string policy) {
  if (kg.node_count() != params.dims().nodes) throw Error("checkpoint: graph/model node count mismatch");
  Checkpoint c{params, kg.node_names(), {}, {}, std::move(frozen_types), std::move(policy)};
  for (TypeId t : kg.node_types()) c.node_types.push_back(kg.schema().node_type_name(t));
  for (const auto& r : kg.schema().relations()) c.relation_names.push_back(r.name);
  return c;
}

inline void save_checkpoint(std::ostream& out, const Checkpoint& c) {
  using nlohmann::json;
  const auto& d = c.params.dims();
  const auto v = c.params.values();
  const auto emb_end = v.begin() + static_cast<std::ptrdiff_t>(c.params.embedding_size());
  const auto enc_end = v.begin() + static_cast<std::ptrdiff_t>(c.params.decoder_offset());
  std::vector<NodeId> frozen;
  for (NodeId i = 0; i < d.nodes; ++i) {
    if (c.params.frozen_row(i)) frozen.push_back(i);
  }
  json j;
  j["format"] = "kgflow-checkpoint";
  j["version"] = kCheckpointVersion;
  j["dims"] = {{"nodes", d.nodes},
               {"dim", d.dim},
               {"layers", d.layers},
               {"message_relations", d.message_relations},
               {"relations", d.relations}};
  j["node_names"] = c.node_names;
  j["node_types"] = c.node_types;
  j["relations"] = c.relation_names;
  j["frozen_types"] = c.frozen_types;
  j["frozen_rows"] = frozen;
  j["policy"] = c.policy;
  j["embeddings"] = std::vector<double>(v.begin(), emb_end);
  j["encoder"] = std::vector<double>(emb_end, enc_end);
  j["decoder"] = std::vector<double>(enc_end, v.end());
  out << j.dump() << '\n';
  if (!out) throw Error("checkpoint: write failed");
}

inline Checkpoint load_checkpoint(std::istream& in) {
  using nlohmann::json;
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "kgflow-checkpoint") throw Error("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error("checkpoint: unsupported version " + std::to_string(j.at("version").get<int>()));
    }
    const auto& jd = j.at("dims");
    const ModelDims dims{jd.at("nodes").get<std::size_t>(), jd.at("dim").get<std::size_t>(),
                         jd.at("layers").get<std::size_t>(),
                         jd.at("message_relations").get<std::size_t>(),
                         jd.at("relations").get<std::size_t>()};
    std::vector<bool> frozen(dims.nodes, false);
    for (auto i : j.at("frozen_rows").get<std::vector<NodeId>>()) frozen.at(i) = true;
    Checkpoint c{ModelParams(dims, std::move(frozen)),
                 j.at("node_names").get<std::vector<std::string>>(),
                 j.at("node_types").get<std::vector<std::string>>(),
                 j.at("relations").get<std::vector<std::string>>(),
                 j.at("frozen_types").get<std::vector<std::string>>(),
                 j.at("policy").get<std::string>()};
    std::vector<double> flat = j.at("embeddings").get<std::vector<double>>();
    for (const char* key : {"encoder", "decoder"}) {
      const auto part = j.at(key).get<std::vector<double>>();
      flat.insert(flat.end(), part.begin(), part.end());
    }
    if (flat.size() != c.params.size() || c.node_names.size() != dims.nodes ||
        c.node_types.size() != dims.nodes || c.relation_names.size() != dims.relations) {
      throw Error("checkpoint: array sizes do not match dims");
    }
    std::copy(flat.begin(), flat.end(), c.params.values().begin());
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace kgflow
