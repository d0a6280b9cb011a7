#include "pancraft/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pancraft/error.hpp"

namespace pancraft {

static_assert(std::endian::native == std::endian::little, "PCT1 I/O assumes a little-endian host");

namespace {

constexpr char kTensorMagic[4] = {'P', 'C', 'T', '1'};
constexpr char kArchiveMagic[4] = {'P', 'C', 'A', '1'};

template <typename U>
void put_le(std::vector<uint8_t>& out, U v) {
  uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& b) : bytes_(b) {}
  template <typename U>
  U take() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  const uint8_t* take_bytes(size_t n) {
    need(n);
    const uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("truncated data");
  }
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

template <typename T>
std::vector<uint8_t> encode(const Tensor<T>& t) {
  if (t.empty()) throw DataError("cannot encode an empty tensor");
  std::vector<uint8_t> out(kTensorMagic, kTensorMagic + 4);
  out.push_back(static_cast<uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<uint8_t>(t.rank()));
  for (int64_t d : t.shape().dims()) put_le(out, static_cast<uint32_t>(d));
  const auto* p = reinterpret_cast<const uint8_t*>(t.data());
  out.insert(out.end(), p, p + t.numel() * static_cast<int64_t>(sizeof(T)));
  return out;
}

}  // namespace

std::vector<uint8_t> encode_pct1(const Tensor<float>& t) { return encode(t); }
std::vector<uint8_t> encode_pct1(const Tensor<double>& t) { return encode(t); }

DType pct1_dtype(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) throw DataError("not a PCT1 tensor");
  if (bytes[4] > 1) throw DataError("PCT1: unknown dtype tag " + std::to_string(bytes[4]));
  return static_cast<DType>(bytes[4]);
}

template <typename T>
Tensor<T> decode_pct1(const std::vector<uint8_t>& bytes) {
  const DType dt = pct1_dtype(bytes);
  Reader r(bytes);
  r.take_bytes(5);
  const auto rank = r.take<uint8_t>();
  if (rank < 1 || rank > Shape::kMaxRank) throw DataError("PCT1: invalid rank " + std::to_string(rank));
  std::vector<int64_t> dims;
  for (int i = 0; i < rank; ++i) dims.push_back(r.take<uint32_t>());
  Shape shape = [&] {
    try {
      return Shape(dims);
    } catch (const ShapeError& e) {
      throw DataError(std::string("PCT1: ") + e.what());
    }
  }();
  const auto n = static_cast<size_t>(shape.numel());
  std::vector<T> data(n);
  auto fill = [&](auto tag) {
    using S = decltype(tag);
    const uint8_t* p = r.take_bytes(n * sizeof(S));
    std::vector<S> raw(n);
    std::memcpy(raw.data(), p, n * sizeof(S));
    for (size_t i = 0; i < n; ++i) data[i] = static_cast<T>(raw[i]);
  };
  if (dt == DType::F32) fill(float{});
  else fill(double{});
  if (!r.done()) throw DataError("PCT1: trailing bytes");
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
void write_pct1(const std::filesystem::path& path, const Tensor<T>& t) {
  write_file_atomic(path, encode_pct1(t));
}

template <typename T>
Tensor<T> read_pct1(const std::filesystem::path& path) {
  return decode_pct1<T>(read_file(path));
}

void Archive::put(const std::string& name, std::vector<uint8_t> bytes) {
  for (auto& [n, b] : entries_) {
    if (n == name) {
      b = std::move(bytes);
      return;
    }
  }
  entries_.emplace_back(name, std::move(bytes));
}

void Archive::put_text(const std::string& name, const std::string& text) {
  put(name, std::vector<uint8_t>(text.begin(), text.end()));
}

bool Archive::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

const std::vector<uint8_t>& Archive::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw DataError("archive has no entry '" + name + "'");
}

std::string Archive::get_text(const std::string& name) const {
  const auto& b = get(name);
  return std::string(b.begin(), b.end());
}

std::vector<uint8_t> Archive::serialize() const {
  std::vector<uint8_t> out(kArchiveMagic, kArchiveMagic + 4);
  put_le(out, static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, bytes] : entries_) {
    put_le(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, static_cast<uint64_t>(bytes.size()));
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

Archive Archive::deserialize(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) throw DataError("not a PCA1 archive");
  Reader r(bytes);
  r.take_bytes(4);
  const auto count = r.take<uint32_t>();
  Archive a;
  for (uint32_t i = 0; i < count; ++i) {
    const auto nlen = r.take<uint32_t>();
    const uint8_t* np = r.take_bytes(nlen);
    std::string name(reinterpret_cast<const char*>(np), nlen);
    const auto size = r.take<uint64_t>();
    const uint8_t* p = r.take_bytes(static_cast<size_t>(size));
    a.entries_.emplace_back(std::move(name), std::vector<uint8_t>(p, p + size));
  }
  if (!r.done()) throw DataError("PCA1: trailing bytes");
  return a;
}

void Archive::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Archive Archive::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

template Tensor<float> decode_pct1<float>(const std::vector<uint8_t>&);
template Tensor<double> decode_pct1<double>(const std::vector<uint8_t>&);
template void write_pct1<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_pct1<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_pct1<float>(const std::filesystem::path&);
template Tensor<double> read_pct1<double>(const std::filesystem::path&);

}  // namespace pancraft
