#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "relamix/data_model.hpp"
#include "relamix/tensor_file.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    const char* root = std::getenv("RELAMIX_TEST_TMP");
    path_ = fs::path(root ? root : fs::temp_directory_path().string()) /
            ("relamix-" + name + "-" + std::to_string(std::random_device{}()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  const auto bytes = relamix::read_file_bytes(p);
  return {bytes.begin(), bytes.end()};
}

// counts[c] sequences of class c with N(0,1) features.
inline relamix::FeatureDataset random_dataset(const std::vector<int>& counts, int T, int d,
                                              unsigned seed,
                                              relamix::Domain domain = relamix::Domain::kSource) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.f, 1.f);
  std::vector<relamix::SnippetSequence> seqs;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int i = 0; i < counts[c]; ++i) {
      relamix::SnippetSequence s;
      s.sample_id = "c" + std::to_string(c) + "_" + std::to_string(i);
      s.label = static_cast<int>(c);
      s.domain = domain;
      s.features.resize(T, d);
      for (int k = 0; k < T * d; ++k) s.features.data()[k] = n(rng);
      seqs.push_back(std::move(s));
    }
  return relamix::FeatureDataset::make(std::move(seqs), static_cast<int>(counts.size()));
}

}  // namespace testing
