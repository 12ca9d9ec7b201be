#include "pcc/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pcc/io_util.hpp"

namespace pcc {

static constexpr char kCheckpointMagic[4] = {'P', 'C', 'C', '1'};

static nlohmann::json config_json(const ModelConfig& config, bool has_projection) {
  return {
      {"vocab_size", config.vocab_size},   {"hidden_dim", config.hidden_dim},
      {"n_layers", config.n_layers},       {"n_heads", config.n_heads},
      {"max_context", config.max_context}, {"mlp_ratio", config.mlp_ratio},
      {"has_projection", has_projection},
  };
}

void save_checkpoint(const std::string& path, Model& model, const Projection* projection) {
  if (model.has_lora())
    throw std::logic_error("save_checkpoint: merge adapters before saving");

  std::map<std::string, Tensor> blobs;  // map gives the sorted-name order
  for (auto& [name, tensor] : model.named_params()) blobs.emplace(name, tensor);
  if (projection) {
    blobs.emplace("proj.w", projection->w);
    blobs.emplace("proj.b", projection->b);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kCheckpointMagic, 4);
  write_string(out, config_json(model.config(), projection != nullptr).dump());
  for (const auto& [name, tensor] : blobs) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int i = 0; i < tensor.rank(); ++i)
      write_u32(out, static_cast<std::uint32_t>(tensor.dim(i)));
    write_f32_span(out, tensor.values());
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint file (bad magic)");

  nlohmann::json config_doc = nlohmann::json::parse(read_string(in));
  ModelConfig config;
  config.vocab_size = config_doc.at("vocab_size").get<int>();
  config.hidden_dim = config_doc.at("hidden_dim").get<int>();
  config.n_layers = config_doc.at("n_layers").get<int>();
  config.n_heads = config_doc.at("n_heads").get<int>();
  config.max_context = config_doc.at("max_context").get<int>();
  config.mlp_ratio = config_doc.at("mlp_ratio").get<int>();
  const bool has_projection = config_doc.at("has_projection").get<bool>();

  LoadedCheckpoint loaded;
  Rng scratch(0);
  loaded.model = Model::init(config, scratch);
  if (has_projection) {
    Projection proj;
    proj.w = Tensor::zeros({config.hidden_dim, config.hidden_dim});
    proj.b = Tensor::zeros({config.hidden_dim});
    loaded.projection = std::move(proj);
  }

  std::map<std::string, Tensor> expected;
  for (auto& [name, tensor] : loaded.model.named_params()) expected.emplace(name, tensor);
  if (loaded.projection) {
    expected.emplace("proj.w", loaded.projection->w);
    expected.emplace("proj.b", loaded.projection->b);
  }

  std::map<std::string, bool> seen;
  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::string name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    std::vector<int> dims(rank);
    for (auto& d : dims) d = static_cast<int>(read_u32(in));
    auto it = expected.find(name);
    if (it == expected.end())
      throw std::runtime_error(path + ": unexpected parameter '" + name + "'");
    if (it->second.shape() != dims)
      throw std::runtime_error(path + ": parameter '" + name + "' has shape " + shape_str(dims) +
                               ", expected " + shape_str(it->second.shape()));
    read_f32_span(in, it->second.values());
    if (seen[name]) throw std::runtime_error(path + ": duplicate parameter '" + name + "'");
    seen[name] = true;
  }
  for (const auto& [name, tensor] : expected) {
    (void)tensor;
    if (!seen[name]) throw std::runtime_error(path + ": missing parameter '" + name + "'");
  }
  return loaded;
}

}  // namespace pcc
