#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgc/tensor.hpp"

namespace mgc {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::array<char, 4> kCheckpointMagic = {'M', 'V', 'G', '2'};
inline constexpr std::array<char, 4> kDatasetMagic = {'M', 'V', 'G', 'D'};

/// One named rank-4 array. Exactly one of the value vectors is filled,
/// chosen by dtype.
struct Entry {
  std::string name;
  DType dtype = DType::f32;
  Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;
  std::vector<std::int32_t> i32;

  template <typename T>
  static Entry from_tensor(std::string name, const Tensor<T>& t);
  template <typename T>
  Tensor<T> to_tensor() const;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Layout: magic, u32 version, u32 count, then per entry u32 name length,
/// name bytes, u8 dtype, 4 x u32 shape, values. All integers and values are
/// little-endian.
std::string encode_container(const std::array<char, 4>& magic, const std::vector<Entry>& entries);
/// Throws FormatError on bad magic, unknown version or dtype, or truncation.
std::vector<Entry> decode_container(const std::array<char, 4>& magic, const std::string& bytes);

void write_container(const std::string& path, const std::array<char, 4>& magic, const std::vector<Entry>& entries);
std::vector<Entry> read_container(const std::string& path, const std::array<char, 4>& magic);

}  // namespace mgc
