#include "isonorm/tensor_io.hpp"

#include <zlib.h>
#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "isonorm/errors.hpp"

namespace isonorm::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint32_t crc32(const void* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0ul, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::string crc32_hex(const void* data, std::size_t n) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32(data, n));
  return buf;
}

namespace {

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> encode_tensor_impl(const std::vector<std::uint64_t>& dims,
                                             const double* values, bool as_f32) {
  std::uint64_t total = 1;
  for (auto d : dims) total *= d;
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * dims.size() + total * (as_f32 ? 4 : 8) + 4);
  put_bytes(out, "ISON", 4);
  put_le<std::uint16_t>(out, kTensorVersion);
  out.push_back(as_f32 ? 0 : 1);
  out.push_back(0);  // reserved
  put_le<std::uint64_t>(out, dims.size());
  for (auto d : dims) put_le<std::uint64_t>(out, d);
  if (as_f32) {
    for (std::uint64_t i = 0; i < total; ++i) {
      float f = static_cast<float>(values[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_le<std::uint32_t>(out, bits);
    }
  } else {
    for (std::uint64_t i = 0; i < total; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &values[i], 8);
      put_le<std::uint64_t>(out, bits);
    }
  }
  put_le<std::uint32_t>(out, crc32(out.data(), out.size()));
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Matrix& m) {
  return encode_tensor_impl({m.rows, m.cols}, m.data.data(), false);
}

std::vector<std::uint8_t> encode_tensor(const Vector& v) {
  return encode_tensor_impl({v.size()}, v.data(), false);
}

std::vector<std::uint8_t> encode_tensor_f32(const Matrix& m) {
  return encode_tensor_impl({m.rows, m.cols}, m.data.data(), true);
}

TensorData decode_tensor(const std::uint8_t* data, std::size_t n) {
  if (n < 20) throw ChecksumFailure("tensor: truncated (" + std::to_string(n) + " bytes)");
  if (std::memcmp(data, "ISON", 4) != 0) throw FormatError("tensor: bad magic");
  const auto version = get_le<std::uint16_t>(data + 4);
  if (version != kTensorVersion)
    throw FormatError("tensor: unsupported version " + std::to_string(version));
  const std::uint8_t dtype = data[6];
  if (dtype > 1) throw FormatError("tensor: unknown dtype " + std::to_string(dtype));
  const std::uint64_t rank = get_le<std::uint64_t>(data + 8);
  if (rank > 8) throw FormatError("tensor: implausible rank");
  std::size_t off = 16;
  if (n < off + 8 * rank + 4) throw ChecksumFailure("tensor: truncated header");
  TensorData t;
  t.was_f32 = (dtype == 0);
  std::uint64_t total = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    t.dims.push_back(get_le<std::uint64_t>(data + off));
    off += 8;
    total *= t.dims.back();
  }
  const std::size_t elem = t.was_f32 ? 4 : 8;
  if (n != off + total * elem + 4)
    throw ChecksumFailure("tensor: payload size does not match header");
  const std::uint32_t want = get_le<std::uint32_t>(data + n - 4);
  if (crc32(data, n - 4) != want) throw ChecksumFailure("tensor: crc32 mismatch");
  t.values.resize(total);
  if (t.was_f32) {
    for (std::uint64_t i = 0; i < total; ++i) {
      const std::uint32_t bits = get_le<std::uint32_t>(data + off + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      t.values[i] = f;
    }
  } else {
    for (std::uint64_t i = 0; i < total; ++i) {
      const std::uint64_t bits = get_le<std::uint64_t>(data + off + 8 * i);
      double d;
      std::memcpy(&d, &bits, 8);
      t.values[i] = d;
    }
  }
  return t;
}

Matrix as_matrix(const TensorData& t) {
  if (t.dims.size() == 2) {
    Matrix m(t.dims[0], t.dims[1]);
    m.data = t.values;
    return m;
  }
  if (t.dims.size() == 1) {
    Matrix m(1, t.dims[0]);
    m.data = t.values;
    return m;
  }
  throw FormatError("tensor: expected rank 1 or 2, got rank " +
                    std::to_string(t.dims.size()));
}

Vector as_vector(const TensorData& t) {
  if (t.dims.size() != 1)
    throw FormatError("tensor: expected rank 1, got rank " + std::to_string(t.dims.size()));
  return t.values;
}

void atomic_write(const std::string& path, const void* data, std::size_t n) {
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) {
      f.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename to " + path + " failed");
  }
}

void atomic_write(const std::string& path, const std::string& text) {
  atomic_write(path, text.data(), text.size());
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open " + path);
  const auto size = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(size));
  f.read(reinterpret_cast<char*>(out.data()), size);
  if (!f) throw IoError("read failed for " + path);
  return out;
}

void write_tensor_file(const std::string& path, const Matrix& m) {
  auto bytes = encode_tensor(m);
  atomic_write(path, bytes.data(), bytes.size());
}

void write_tensor_file(const std::string& path, const Vector& v) {
  auto bytes = encode_tensor(v);
  atomic_write(path, bytes.data(), bytes.size());
}

TensorData read_tensor_file(const std::string& path) {
  auto bytes = read_file(path);
  return decode_tensor(bytes.data(), bytes.size());
}

Matrix csv_import(const std::string& path, bool has_header) {
  auto bytes = read_file(path);
  const char* p = reinterpret_cast<const char*>(bytes.data());
  const char* end = p + bytes.size();
  std::vector<Vector> rows;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  while (p < end) {
    ++line_no;
    const char* eol = static_cast<const char*>(std::memchr(p, '\n', end - p));
    const char* line_end = eol ? eol : end;
    if (line_end > p && line_end[-1] == '\r') --line_end;
    const bool skip = (has_header && line_no == 1) || line_end == p;
    if (!skip) {
      Vector row;
      const char* cell = p;
      while (cell <= line_end) {
        const char* comma =
            static_cast<const char*>(std::memchr(cell, ',', line_end - cell));
        const char* cell_end = comma ? comma : line_end;
        const char* a = cell;
        while (a < cell_end && (*a == ' ' || *a == '\t')) ++a;
        const char* b = cell_end;
        while (b > a && (b[-1] == ' ' || b[-1] == '\t')) --b;
        double value;
        const auto res = std::from_chars(a, b, value);
        if (res.ec != std::errc() || res.ptr != b || a == b)
          throw ParseError(line_no, "csv: non-numeric cell at line " +
                                        std::to_string(line_no));
        row.push_back(value);
        if (!comma) break;
        cell = comma + 1;
      }
      if (cols == 0)
        cols = row.size();
      else if (row.size() != cols)
        throw ParseError(line_no, "csv: ragged row at line " + std::to_string(line_no) +
                                      " (" + std::to_string(row.size()) + " cells, expected " +
                                      std::to_string(cols) + ")");
      rows.push_back(std::move(row));
    }
    if (!eol) break;
    p = eol + 1;
  }
  if (rows.empty()) throw ParseError(line_no, "csv: no data rows");
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(m[i], rows[i].data(), cols * sizeof(double));
  return m;
}

void csv_export(const std::string& path, const Matrix& m) {
  std::string out;
  out.reserve(m.rows * m.cols * 20);
  char buf[40];
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  atomic_write(path, out);
}

void save_stats(const std::string& json_path, const moments::FinalizedMoments& stats) {
  const std::string cov_path = json_path + ".cov.bin";
  auto cov_bytes = encode_tensor(stats.covariance.cov);
  json doc;
  doc["kind"] = "isonorm-stats";
  doc["format_version"] = 1;
  doc["library_version"] = kLibraryVersion;
  doc["channels"] = stats.covariance.mean.size();
  doc["n_samples"] = stats.covariance.n_samples;
  doc["global_mu"] = stats.global_mu;
  doc["global_sigma"] = stats.global_sigma;
  doc["channel_mean"] = stats.covariance.mean;
  doc["per_channel_sigma"] = stats.per_channel_sigma;
  doc["cov"] = {{"path", fs::path(cov_path).filename().string()},
                {"crc32", crc32_hex(cov_bytes.data(), cov_bytes.size())}};
  atomic_write(cov_path, cov_bytes.data(), cov_bytes.size());
  atomic_write(json_path, doc.dump(2) + "\n");
}

moments::FinalizedMoments load_stats(const std::string& json_path) {
  json doc;
  try {
    auto bytes = read_file(json_path);
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("stats: invalid JSON in " + json_path + ": " + e.what());
  }
  try {
    if (doc.at("kind").get<std::string>() != "isonorm-stats")
      throw FormatError("stats: wrong kind field in " + json_path);
    moments::FinalizedMoments out;
    out.covariance.mean = doc.at("channel_mean").get<Vector>();
    out.per_channel_sigma = doc.at("per_channel_sigma").get<Vector>();
    out.covariance.n_samples = doc.at("n_samples").get<std::size_t>();
    out.global_mu = doc.at("global_mu").get<double>();
    out.global_sigma = doc.at("global_sigma").get<double>();
    const std::size_t c = doc.at("channels").get<std::size_t>();
    if (out.covariance.mean.size() != c || out.per_channel_sigma.size() != c)
      throw FormatError("stats: channel count mismatch in " + json_path);
    const std::string cov_name = doc.at("cov").at("path").get<std::string>();
    const std::string cov_path =
        (fs::path(json_path).parent_path() / cov_name).string();
    auto cov_bytes = read_file(cov_path);
    const std::string digest = crc32_hex(cov_bytes.data(), cov_bytes.size());
    if (digest != doc.at("cov").at("crc32").get<std::string>())
      throw ChecksumFailure("stats: covariance digest mismatch for " + cov_path);
    out.covariance.cov = as_matrix(decode_tensor(cov_bytes.data(), cov_bytes.size()));
    if (out.covariance.cov.rows != c || out.covariance.cov.cols != c)
      throw FormatError("stats: covariance shape mismatch in " + cov_path);
    return out;
  } catch (const json::exception& e) {
    throw FormatError("stats: missing or ill-typed field in " + json_path + ": " +
                      e.what());
  }
}

std::vector<std::uint8_t> encode_container(const std::string& kind,
                                           nlohmann::json manifest,
                                           const std::vector<Section>& sections) {
  manifest["kind"] = kind;
  manifest["format_version"] = kContainerVersion;
  manifest["library_version"] = kLibraryVersion;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& s : sections) {
    tensors.push_back({{"name", s.name},
                       {"offset", offset},
                       {"bytes", s.blob.size()},
                       {"crc32", crc32_hex(s.blob.data(), s.blob.size())}});
    offset += s.blob.size();
  }
  manifest["tensors"] = tensors;
  const std::string mtext = manifest.dump();
  std::vector<std::uint8_t> out;
  put_bytes(out, "ISNM", 4);
  put_le<std::uint16_t>(out, kContainerVersion);
  put_le<std::uint16_t>(out, 0);  // reserved
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mtext.size()));
  put_bytes(out, mtext.data(), mtext.size());
  for (const auto& s : sections) put_bytes(out, s.blob.data(), s.blob.size());
  put_le<std::uint32_t>(out, crc32(out.data(), out.size()));
  return out;
}

Container decode_container(const std::uint8_t* data, std::size_t n,
                           const std::string& expect_kind) {
  if (n < 16) throw ChecksumFailure("container: truncated");
  if (std::memcmp(data, "ISNM", 4) != 0) throw FormatError("container: bad magic");
  const auto version = get_le<std::uint16_t>(data + 4);
  if (version != kContainerVersion)
    throw FormatError("container: unsupported version " + std::to_string(version));
  const std::uint32_t want = get_le<std::uint32_t>(data + n - 4);
  if (crc32(data, n - 4) != want) throw ChecksumFailure("container: crc32 mismatch");
  const std::uint32_t mlen = get_le<std::uint32_t>(data + 8);
  if (12 + std::size_t(mlen) + 4 > n) throw ChecksumFailure("container: truncated manifest");
  Container out;
  try {
    out.manifest = json::parse(data + 12, data + 12 + mlen);
  } catch (const json::exception& e) {
    throw FormatError(std::string("container: manifest parse failure: ") + e.what());
  }
  try {
    if (out.manifest.at("kind").get<std::string>() != expect_kind)
      throw FormatError("container: expected kind '" + expect_kind + "', found '" +
                        out.manifest.at("kind").get<std::string>() + "'");
    const std::size_t base = 12 + mlen;
    for (const auto& entry : out.manifest.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
      const std::uint64_t len = entry.at("bytes").get<std::uint64_t>();
      if (base + off + len + 4 > n) throw ChecksumFailure("container: section out of range");
      const std::uint8_t* blob = data + base + off;
      if (crc32_hex(blob, len) != entry.at("crc32").get<std::string>())
        throw ChecksumFailure("container: section '" + name + "' digest mismatch");
      out.tensors.emplace(name, decode_tensor(blob, len));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("container: ill-formed manifest: ") + e.what());
  }
  return out;
}

}  // namespace isonorm::io
