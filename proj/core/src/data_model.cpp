#include "relamix/data_model.hpp"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <set>

#include <json.hpp>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"
#include "relamix/tensor_file.hpp"

namespace relamix {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::kSource: return "source";
    case Domain::kTarget: return "target";
    case Domain::kSynthesized: return "synthesized";
  }
  return "unknown";
}

Domain parse_domain(std::string_view s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  if (s == "synthesized") return Domain::kSynthesized;
  throw InvalidArgument("unknown domain '" + std::string(s) + "'");
}

FeatureDataset FeatureDataset::make(std::vector<SnippetSequence> sequences,
                                    int class_count) {
  if (sequences.empty())
    throw InvalidArgument("FeatureDataset::make: empty sequence list");
  const auto t = static_cast<int>(sequences.front().snippet_count());
  const auto d = static_cast<int>(sequences.front().dim());
  return make(std::move(sequences), class_count, t, d);
}

FeatureDataset FeatureDataset::make(std::vector<SnippetSequence> sequences,
                                    int class_count, int snippet_count,
                                    int dim) {
  if (class_count < 1) throw InvalidArgument("class_count must be >= 1");
  if (snippet_count < 1 || dim < 1)
    throw InvalidArgument("snippet_count and dim must be >= 1");
  std::set<std::string> seen;
  for (const auto& s : sequences) {
    if (s.features.rows() != snippet_count || s.features.cols() != dim)
      throw InvalidArgument("sequence " + s.sample_id + " has shape " +
                            std::to_string(s.features.rows()) + "x" +
                            std::to_string(s.features.cols()) + ", expected " +
                            std::to_string(snippet_count) + "x" +
                            std::to_string(dim));
    if (s.label < 0 || s.label >= class_count)
      throw InvalidArgument("sequence " + s.sample_id + " has label " +
                            std::to_string(s.label) + " outside [0, " +
                            std::to_string(class_count) + ")");
    if (!s.features.allFinite())
      throw InvalidArgument("sequence " + s.sample_id +
                            " contains non-finite features");
    if (!seen.insert(s.sample_id).second)
      throw InvalidArgument("duplicate sample_id " + s.sample_id);
  }
  std::sort(sequences.begin(), sequences.end(),
            [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  FeatureDataset ds;
  ds.sequences_ = std::move(sequences);
  ds.class_count_ = class_count;
  ds.snippet_count_ = snippet_count;
  ds.dim_ = dim;
  return ds;
}

std::vector<std::vector<std::size_t>> FeatureDataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(class_count_));
  for (std::size_t i = 0; i < sequences_.size(); ++i)
    out[static_cast<std::size_t>(sequences_[i].label)].push_back(i);
  return out;
}

FeatureDataset FeatureDataset::select(const std::vector<std::string>& ids) const {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<SnippetSequence> picked;
  for (const auto& s : sequences_)
    if (wanted.erase(s.sample_id)) picked.push_back(s);
  if (!wanted.empty())
    throw InvalidArgument("unknown sample_id " + *wanted.begin());
  return make(std::move(picked), class_count_, snippet_count_, dim_);
}

bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
  if (a.class_count_ != b.class_count_ || a.snippet_count_ != b.snippet_count_ ||
      a.dim_ != b.dim_ || a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.sequences_[i];
    const auto& y = b.sequences_[i];
    if (x.sample_id != y.sample_id || x.label != y.label || x.domain != y.domain)
      return false;
    // Bitwise comparison so that -0.0f and NaN payloads count.
    if (std::memcmp(x.features.data(), y.features.data(),
                    sizeof(float) * static_cast<std::size_t>(x.features.size())) != 0)
      return false;
  }
  return true;
}

std::vector<std::string> FewShotSplit::all_ids() const {
  std::vector<std::string> out;
  for (const auto& ids : selected_ids) out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

int snippet_count_for(int frame_count, int window, int stride, int pad) {
  if (frame_count < 1) throw InvalidArgument("window_snippets: need at least one frame");
  if (window < 1) throw InvalidArgument("window_snippets: window must be >= 1");
  if (stride < 1) throw InvalidArgument("window_snippets: stride must be >= 1");
  if (pad < 0) throw InvalidArgument("window_snippets: pad must be >= 0");
  const int padded = frame_count + 2 * pad;
  if (window > padded)
    throw InvalidArgument("window_snippets: window " + std::to_string(window) +
                          " exceeds padded length " + std::to_string(padded));
  return (padded - window) / stride + 1;
}

Eigen::MatrixXf window_snippets(const Eigen::MatrixXf& frame_features,
                                int window, int stride, int pad) {
  const int frames = static_cast<int>(frame_features.rows());
  const int count = snippet_count_for(frames, window, stride, pad);
  Eigen::MatrixXf out = Eigen::MatrixXf::Zero(count, frame_features.cols());
  for (int t = 0; t < count; ++t) {
    // Padded row p maps to frame p - pad; padding rows are zero.
    const int begin = std::max(t * stride - pad, 0);
    const int end = std::min(t * stride + window - pad, frames);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(frame_features.cols());
    for (int f = begin; f < end; ++f) acc += frame_features.row(f).cast<double>();
    out.row(t) = (acc / window).cast<float>();
  }
  return out;
}

FewShotSplit sample_few_shot_split(const FeatureDataset& dataset, int shot_count,
                                   std::uint64_t seed) {
  if (shot_count < 1) throw InvalidArgument("shot_count must be >= 1");
  FewShotSplit split;
  split.shot_count = shot_count;
  split.seed = seed;
  const auto by_class = dataset.indices_by_class();
  split.selected_ids.resize(by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& pool = by_class[c];
    if (pool.size() < static_cast<std::size_t>(shot_count)) {
      split.warnings.push_back("class " + std::to_string(c) + " has " +
                               std::to_string(pool.size()) +
                               " samples, fewer than shot_count " +
                               std::to_string(shot_count) + "; taking all");
    }
    Rng rng(derive_seed(seed, {tag(Stream::kSplit), c}));
    std::vector<std::size_t> picked;
    std::sample(pool.begin(), pool.end(), std::back_inserter(picked),
                static_cast<std::size_t>(shot_count), rng);
    for (auto i : picked) split.selected_ids[c].push_back(dataset[i].sample_id);
  }
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
  return split;
}

namespace {

std::string payload_name(std::size_t index) {
  std::string n = std::to_string(index);
  return std::string(n.size() < 6 ? 6 - n.size() : 0, '0') + n + ".rmfx";
}

int require_int(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw FormatError(file.string() + ": missing or non-integer field '" + key + "'");
  return j.at(key).get<int>();
}

}  // namespace

void write_dataset(const FeatureDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = kManifestVersion;
  manifest["class_count"] = dataset.class_count();
  manifest["snippet_count"] = dataset.snippet_count();
  manifest["dim"] = dataset.dim();
  json samples = json::array();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    const auto file = payload_name(i);
    write_tensor_file(dir / file, s.features);
    samples.push_back({{"sample_id", s.sample_id},
                       {"label", s.label},
                       {"domain", std::string(to_string(s.domain))},
                       {"file", file}});
  }
  manifest["samples"] = std::move(samples);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

FeatureDataset read_dataset(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw FormatError(dir.string() + ": manifest missing");
  json manifest;
  try {
    const auto bytes = read_file_bytes(manifest_path);
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  const int version = require_int(manifest, "version", manifest_path);
  if (version != kManifestVersion)
    throw FormatError(manifest_path.string() + ": unsupported manifest version " +
                      std::to_string(version));
  const int classes = require_int(manifest, "class_count", manifest_path);
  const int snippets = require_int(manifest, "snippet_count", manifest_path);
  const int dim = require_int(manifest, "dim", manifest_path);
  if (!manifest.contains("samples") || !manifest["samples"].is_array())
    throw FormatError(manifest_path.string() + ": missing 'samples' array");

  std::vector<SnippetSequence> sequences;
  for (const auto& entry : manifest["samples"]) {
    SnippetSequence s;
    try {
      s.sample_id = entry.at("sample_id").get<std::string>();
      s.label = entry.at("label").get<int>();
      s.domain = parse_domain(entry.at("domain").get<std::string>());
    } catch (const std::exception& e) {
      throw FormatError(manifest_path.string() + ": bad sample entry: " + e.what());
    }
    const auto payload = dir / entry.at("file").get<std::string>();
    s.features = read_tensor_file(payload);
    if (s.features.rows() != snippets || s.features.cols() != dim)
      throw FormatError(payload.string() + ": payload shape " +
                        std::to_string(s.features.rows()) + "x" +
                        std::to_string(s.features.cols()) +
                        " disagrees with manifest " + std::to_string(snippets) +
                        "x" + std::to_string(dim));
    sequences.push_back(std::move(s));
  }
  try {
    return FeatureDataset::make(std::move(sequences), classes, snippets, dim);
  } catch (const InvalidArgument& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace relamix
