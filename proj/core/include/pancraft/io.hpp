#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pancraft/tensor.hpp"

namespace pancraft {

// PCT1 tensor encoding:
//   "PCT1" | u8 dtype (0=f32, 1=f64) | u8 rank | rank x u32 LE extents | LE payload
std::vector<uint8_t> encode_pct1(const Tensor<float>& t);
std::vector<uint8_t> encode_pct1(const Tensor<double>& t);

/// Decodes either dtype, converting to T.
template <typename T>
Tensor<T> decode_pct1(const std::vector<uint8_t>& bytes);

/// dtype tag stored in a PCT1 blob.
DType pct1_dtype(const std::vector<uint8_t>& bytes);

template <typename T>
void write_pct1(const std::filesystem::path& path, const Tensor<T>& t);
template <typename T>
Tensor<T> read_pct1(const std::filesystem::path& path);

/// Named byte blobs in one file:
///   "PCA1" | u32 count | per entry: u32 name length, name, u64 size, bytes
/// Used for checkpoints (manifest.json + PCT1 params) and scene bundles.
class Archive {
 public:
  void put(const std::string& name, std::vector<uint8_t> bytes);
  void put_text(const std::string& name, const std::string& text);
  template <typename T>
  void put_tensor(const std::string& name, const Tensor<T>& t) {
    put(name, encode_pct1(t));
  }

  bool contains(const std::string& name) const;
  const std::vector<uint8_t>& get(const std::string& name) const;
  std::string get_text(const std::string& name) const;
  template <typename T>
  Tensor<T> get_tensor(const std::string& name) const {
    return decode_pct1<T>(get(name));
  }

  const std::vector<std::pair<std::string, std::vector<uint8_t>>>& entries() const { return entries_; }

  std::vector<uint8_t> serialize() const;
  static Archive deserialize(const std::vector<uint8_t>& bytes);

  /// Writes to a sibling temporary file and renames it into place.
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::vector<uint8_t>>> entries_;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);
/// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace pancraft
