#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "isonorm/matrix.hpp"
#include "isonorm/moments.hpp"

// On-disk formats. A tensor file is:
//   "ISON" | version u16 | dtype u8 (0=f32, 1=f64) | reserved u8
//   | rank u64 | dims u64[rank] | row-major payload | crc32 u32
// all little-endian, crc32 (zlib polynomial) over every preceding byte.
// Containers (normalizers, linear layers) are a JSON manifest plus embedded
// tensor-file blobs behind a single trailing crc32, so one file carries one
// artifact and a flipped bit anywhere is caught.
namespace isonorm::io {

constexpr std::uint16_t kTensorVersion = 1;
constexpr std::uint16_t kContainerVersion = 1;
inline constexpr const char* kLibraryVersion = "1.0.0";

std::uint32_t crc32(const void* data, std::size_t n);
std::string crc32_hex(const void* data, std::size_t n);

struct TensorData {
  std::vector<std::uint64_t> dims;
  Vector values;      // widened to f64 on read
  bool was_f32 = false;
};

std::vector<std::uint8_t> encode_tensor(const Matrix& m);
std::vector<std::uint8_t> encode_tensor(const Vector& v);
std::vector<std::uint8_t> encode_tensor_f32(const Matrix& m);
TensorData decode_tensor(const std::uint8_t* data, std::size_t n);

Matrix as_matrix(const TensorData& t);
Vector as_vector(const TensorData& t);

void atomic_write(const std::string& path, const void* data, std::size_t n);
void atomic_write(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::string& path);

void write_tensor_file(const std::string& path, const Matrix& m);
void write_tensor_file(const std::string& path, const Vector& v);
TensorData read_tensor_file(const std::string& path);

Matrix csv_import(const std::string& path, bool has_header);
void csv_export(const std::string& path, const Matrix& m);

// stats.json + <path>.cov.bin sidecar holding the covariance tensor.
void save_stats(const std::string& json_path, const moments::FinalizedMoments& stats);
moments::FinalizedMoments load_stats(const std::string& json_path);

struct Section {
  std::string name;
  std::vector<std::uint8_t> blob;  // an encoded tensor file
};

struct Container {
  nlohmann::json manifest;
  std::map<std::string, TensorData> tensors;
};

std::vector<std::uint8_t> encode_container(const std::string& kind,
                                           nlohmann::json manifest,
                                           const std::vector<Section>& sections);
Container decode_container(const std::uint8_t* data, std::size_t n,
                           const std::string& expect_kind);

}  // namespace isonorm::io
