#include "tcl/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

namespace tcl {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "tcl-checkpoint";
constexpr int kVersion = 1;

const char* dtype_name() { return sizeof(ad::Real) == 8 ? "f64" : "f32"; }

json config_to_json(const EncoderConfig& c) {
  return {{"dim", c.dim},
          {"heads", c.heads},
          {"blocks", c.blocks},
          {"depth", c.depth},
          {"max_seq_len", c.max_seq_len},
          {"dropout", c.dropout},
          {"full_width_heads", c.full_width_heads},
          {"ablation", {{"no_te", c.ablation.no_te}, {"no_de", c.ablation.no_de}, {"no_ca", c.ablation.no_ca}}},
          {"seed", c.seed}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.depth = j.at("depth").get<int>();
  c.max_seq_len = j.value("max_seq_len", 0);
  c.dropout = j.at("dropout").get<double>();
  c.full_width_heads = j.value("full_width_heads", false);
  const json& a = j.at("ablation");
  c.ablation.no_te = a.value("no_te", false);
  c.ablation.no_de = a.value("no_de", false);
  c.ablation.no_ca = a.value("no_ca", false);
  c.seed = j.value("seed", std::uint64_t{0});
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const ModelParams& params, const Vocabulary& vocab) {
  if (vocab.table_size() != params.table_size()) {
    throw CheckpointError("vocabulary has " + std::to_string(vocab.table_size()) + " rows but the model has " +
                          std::to_string(params.table_size()));
  }
  Checkpoint ckpt;
  ckpt.config = params.config();
  ckpt.vocabulary = vocab.names();
  ckpt.bipartite = vocab.bipartite();
  for (const auto* p : params.parameters()) ckpt.tensors.emplace(p->name, p->value);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json tensors = json::array();
  for (const auto& [name, value] : checkpoint.tensors) {
    std::vector<ad::Real> values(value.data(), value.data() + value.size());
    tensors.push_back({{"name", name},
                       {"shape", {value.rows(), value.cols()}},
                       {"dtype", dtype_name()},
                       {"values", std::move(values)}});
  }
  json doc = {{"format", kFormat},
              {"version", kVersion},
              {"config", config_to_json(checkpoint.config)},
              {"bipartite", checkpoint.bipartite},
              {"vocabulary", checkpoint.vocabulary},
              {"tensors", std::move(tensors)}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", std::string{}) != kFormat) {
    throw CheckpointError(path.string() + " is not a tcl checkpoint");
  }
  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(doc.at("config"));
    ckpt.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    ckpt.bipartite = doc.value("bipartite", false);
    for (const auto& t : doc.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
      const auto values = t.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(values.size())) {
        throw CheckpointError("tensor " + name + ": value count does not match its shape");
      }
      ad::Matrix m(shape[0], shape[1]);
      for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = static_cast<ad::Real>(values[i]);
      ckpt.tensors.emplace(name, std::move(m));
    }
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& checkpoint, ModelParams& params) {
  for (auto* p : params.parameters()) {
    auto it = checkpoint.tensors.find(p->name);
    if (it == checkpoint.tensors.end()) throw CheckpointError("checkpoint is missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw CheckpointError("tensor " + p->name + ": checkpoint shape " + ad::shape_string(it->second) +
                            " does not match model shape " + ad::shape_string(p->value));
    }
    p->value = it->second;
    p->zero_grad();
  }
}

ModelParams model_from_checkpoint(const Checkpoint& checkpoint) {
  ModelParams params(checkpoint.config, checkpoint.vocabulary.size() + 1);
  apply_checkpoint(checkpoint, params);
  return params;
}

}  // namespace tcl
