#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace relamix {

using RowMajorMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Payload container shared by datasets, frame-feature imports, statistics
// dumps and checkpoints:
//
//   offset 0   4 bytes   magic "RMFX"
//   offset 4   u16 LE    version (kTensorFileVersion)
//   offset 6   u32 LE    rows
//   offset 10  u32 LE    cols
//   offset 14  rows*cols IEEE-754 float32 LE, row-major
inline constexpr char kTensorMagic[4] = {'R', 'M', 'F', 'X'};
inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 14;

std::vector<std::uint8_t> encode_tensor(const Eigen::MatrixXf& m);
Eigen::MatrixXf decode_tensor(const std::vector<std::uint8_t>& bytes,
                              const std::string& source_name);

void write_tensor_file(const std::filesystem::path& path,
                       const Eigen::MatrixXf& m);
Eigen::MatrixXf read_tensor_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);
/// Writes to a sibling temporary and renames over the destination.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace relamix
