#include "relamix/checkpoint.hpp"

#include <json.hpp>

#include "relamix/errors.hpp"
#include "relamix/tensor_file.hpp"

namespace relamix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_to_json(const TranRdConfig& c) {
  return {{"dim", c.dim},
          {"class_count", c.class_count},
          {"heads", c.heads},
          {"ffn_width", c.resolved_ffn_width()},
          {"dropout", c.dropout},
          {"ln_epsilon", c.ln_epsilon},
          {"head_mode", c.head_mode == HeadMode::kSum ? "sum" : "concat"},
          {"aggregator", c.aggregator == AggregatorKind::kTranRd ? "tran_rd" : "mean_pool"},
          {"relation_attention", c.relation_attention},
          {"scale_attention", c.scale_attention},
          {"relation_dropout", c.relation_dropout}};
}

TranRdConfig config_from_json(const json& j) {
  TranRdConfig c;
  c.dim = j.at("dim").get<int>();
  c.class_count = j.at("class_count").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_width = j.at("ffn_width").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.ln_epsilon = j.at("ln_epsilon").get<double>();
  c.head_mode = j.at("head_mode").get<std::string>() == "concat" ? HeadMode::kConcat : HeadMode::kSum;
  c.aggregator = j.at("aggregator").get<std::string>() == "mean_pool" ? AggregatorKind::kMeanPool
                                                                       : AggregatorKind::kTranRd;
  c.relation_attention = j.at("relation_attention").get<bool>();
  c.scale_attention = j.at("scale_attention").get<bool>();
  c.relation_dropout = j.at("relation_dropout").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const TranRdParameters& params, const fs::path& dir) {
  fs::create_directories(dir / "tensors");
  json tensors = json::array();
  for (std::size_t i = 0; i < params.slots().size(); ++i) {
    const auto& slot = params.slots()[i];
    const auto file = "tensors/" + slot.name + ".rmfx";
    write_tensor_file(dir / file, params.tensor(i).cast<float>());
    tensors.push_back({{"name", slot.name}, {"rows", slot.rows}, {"cols", slot.cols}, {"file", file}});
  }
  json manifest = {{"version", 1}, {"config", config_to_json(params.config())}, {"tensors", tensors}};
  write_file_atomic(dir / "checkpoint.json", manifest.dump(2) + "\n");
}

TranRdParameters load_checkpoint(const fs::path& dir) {
  const auto path = dir / "checkpoint.json";
  if (!fs::exists(path)) throw FormatError(path.string() + ": checkpoint manifest missing");
  json manifest;
  TranRdConfig config;
  try {
    const auto bytes = read_file_bytes(path);
    manifest = json::parse(bytes.begin(), bytes.end());
    config = config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  TranRdParameters params(config);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.slots().size())
    throw FormatError(path.string() + ": expected " + std::to_string(params.slots().size()) +
                      " tensors, found " + std::to_string(tensors.size()));
  for (std::size_t i = 0; i < params.slots().size(); ++i) {
    const auto& slot = params.slots()[i];
    const auto& entry = tensors[i];
    if (entry.at("name").get<std::string>() != slot.name)
      throw FormatError(path.string() + ": tensor " + std::to_string(i) + " is '" +
                        entry.at("name").get<std::string>() + "', expected '" + slot.name + "'");
    const auto file = dir / entry.at("file").get<std::string>();
    const Eigen::MatrixXf m = read_tensor_file(file);
    if (m.rows() != slot.rows || m.cols() != slot.cols)
      throw FormatError(file.string() + ": shape mismatch for " + slot.name);
    params.tensor(i) = m.cast<double>();
  }
  return params;
}

}  // namespace relamix
