#include "mgc/container.hpp"

#include <bit>
#include <cstring>

#include "mgc/csv.hpp"

namespace mgc {

template <typename T>
Entry Entry::from_tensor(std::string name, const Tensor<T>& t) {
  Entry e;
  e.name = std::move(name);
  e.dtype = dtype_of<T>();
  e.shape = t.shape();
  auto d = t.data();
  if constexpr (std::is_same_v<T, float>) {
    e.f32.assign(d.begin(), d.end());
  } else if constexpr (std::is_same_v<T, double>) {
    e.f64.assign(d.begin(), d.end());
  } else {
    e.i32.assign(d.begin(), d.end());
  }
  return e;
}

template <typename T>
Tensor<T> Entry::to_tensor() const {
  if (dtype != dtype_of<T>()) {
    throw FormatError("entry '" + name + "' holds " + dtype_name(dtype) + ", expected " +
                      dtype_name(dtype_of<T>()));
  }
  if constexpr (std::is_same_v<T, float>) {
    return Tensor<float>(shape, f32);
  } else if constexpr (std::is_same_v<T, double>) {
    return Tensor<double>(shape, f64);
  } else {
    return Tensor<std::int32_t>(shape, i32);
  }
}

template Entry Entry::from_tensor<float>(std::string, const Tensor<float>&);
template Entry Entry::from_tensor<double>(std::string, const Tensor<double>&);
template Tensor<float> Entry::to_tensor<float>() const;
template Tensor<double> Entry::to_tensor<double>() const;
template Entry Entry::from_tensor<std::int32_t>(std::string, const Tensor<std::int32_t>&);
template Tensor<std::int32_t> Entry::to_tensor<std::int32_t>() const;

namespace {

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container: need ") + std::to_string(n) + " bytes for " + what +
                        " at offset " + std::to_string(pos_) + ", file has " + std::to_string(b_.size()));
    }
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow32(std::size_t v, const std::string& what) {
  if (v > 0xFFFFFFFFu) throw FormatError(what + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_container(const std::array<char, 4>& magic, const std::vector<Entry>& entries) {
  std::string out(magic.begin(), magic.end());
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, narrow32(entries.size(), "entry count"));
  for (const Entry& e : entries) {
    put<std::uint32_t>(out, narrow32(e.name.size(), "name length"));
    out += e.name;
    out.push_back(static_cast<char>(e.dtype));
    for (std::size_t d : {e.shape.n, e.shape.c, e.shape.h, e.shape.w}) put<std::uint32_t>(out, narrow32(d, "dimension"));
    const std::size_t n = e.shape.numel();
    switch (e.dtype) {
      case DType::f32:
        if (e.f32.size() != n) throw FormatError("entry '" + e.name + "' value count does not match its shape");
        for (float v : e.f32) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
        break;
      case DType::f64:
        if (e.f64.size() != n) throw FormatError("entry '" + e.name + "' value count does not match its shape");
        for (double v : e.f64) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        break;
      case DType::i32:
        if (e.i32.size() != n) throw FormatError("entry '" + e.name + "' value count does not match its shape");
        for (std::int32_t v : e.i32) put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
        break;
    }
  }
  return out;
}

std::vector<Entry> decode_container(const std::array<char, 4>& magic, const std::string& bytes) {
  Reader r(bytes);
  const std::string m = r.take(4, "magic");
  if (m != std::string(magic.begin(), magic.end())) {
    throw FormatError("bad magic '" + m + "', expected '" + std::string(magic.begin(), magic.end()) + "'");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw FormatError("unsupported format version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kContainerVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<Entry> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    Entry e;
    const auto len = r.get<std::uint32_t>("name length");
    e.name = r.take(len, "name");
    const auto tag = r.get<std::uint8_t>("dtype");
    if (tag > static_cast<std::uint8_t>(DType::i32)) {
      throw FormatError("entry '" + e.name + "' has unknown dtype tag " + std::to_string(tag));
    }
    e.dtype = static_cast<DType>(tag);
    std::array<std::size_t, 4> dims{};
    for (auto& d : dims) d = r.get<std::uint32_t>("shape");
    e.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
    const std::size_t n = e.shape.numel();
    const std::size_t width = e.dtype == DType::f64 ? 8 : 4;
    if (n != 0 && (bytes.size() - r.pos()) / width < n) {
      throw FormatError("truncated container: entry '" + e.name + "' needs " + std::to_string(n * width) +
                        " value bytes, " + std::to_string(bytes.size() - r.pos()) + " remain");
    }
    switch (e.dtype) {
      case DType::f32:
        e.f32.resize(n);
        for (float& v : e.f32) v = std::bit_cast<float>(r.get<std::uint32_t>("values"));
        break;
      case DType::f64:
        e.f64.resize(n);
        for (double& v : e.f64) v = std::bit_cast<double>(r.get<std::uint64_t>("values"));
        break;
      case DType::i32:
        e.i32.resize(n);
        for (std::int32_t& v : e.i32) v = static_cast<std::int32_t>(r.get<std::uint32_t>("values"));
        break;
    }
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("trailing bytes after the last entry at offset " + std::to_string(r.pos()));
  return entries;
}

void write_container(const std::string& path, const std::array<char, 4>& magic, const std::vector<Entry>& entries) {
  csv::write_file(path, encode_container(magic, entries));
}

std::vector<Entry> read_container(const std::string& path, const std::array<char, 4>& magic) {
  std::string bytes;
  try {
    bytes = csv::read_file(path);
  } catch (const std::runtime_error& e) {
    throw FormatError(e.what());
  }
  return decode_container(magic, bytes);
}

}  // namespace mgc
