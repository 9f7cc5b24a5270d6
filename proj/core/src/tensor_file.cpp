#include "relamix/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "relamix/errors.hpp"

namespace relamix {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Eigen::MatrixXf& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + 4 * static_cast<std::size_t>(m.size()));
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u16(out, kTensorFileVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      put_u32(out, std::bit_cast<std::uint32_t>(m(r, c)));
  return out;
}

Eigen::MatrixXf decode_tensor(const std::vector<std::uint8_t>& bytes,
                              const std::string& source_name) {
  if (bytes.size() < kTensorHeaderBytes)
    throw FormatError(source_name + ": truncated header (" +
                      std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw FormatError(source_name + ": bad magic, expected RMFX");
  const std::uint16_t version =
      static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kTensorFileVersion)
    throw FormatError(source_name + ": unsupported version " +
                      std::to_string(version));
  const std::uint32_t rows = get_u32(bytes.data() + 6);
  const std::uint32_t cols = get_u32(bytes.data() + 10);
  const std::size_t count = std::size_t{rows} * cols;
  if (bytes.size() != kTensorHeaderBytes + 4 * count)
    throw FormatError(source_name + ": payload size " +
                      std::to_string(bytes.size() - kTensorHeaderBytes) +
                      " bytes does not match shape " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  Eigen::MatrixXf m(rows, cols);
  const std::uint8_t* p = bytes.data() + kTensorHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, p += 4)
      m(r, c) = std::bit_cast<float>(get_u32(p));
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(path.string() + ": write failed");
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp.string() + ": cannot open for writing");
    out << contents;
    if (!out) throw Error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

void write_tensor_file(const std::filesystem::path& path,
                       const Eigen::MatrixXf& m) {
  write_file_bytes(path, encode_tensor(m));
}

Eigen::MatrixXf read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor(read_file_bytes(path), path.string());
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace relamix
