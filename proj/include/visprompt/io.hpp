#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "visprompt/image.hpp"

namespace visprompt {

/// Dense float32 tensor as stored in the raw-tensor container.
struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<float> values;

  std::uint64_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Raw-tensor container layout (all integers little-endian):
///
///     "GIPT"  u8 version (=1)  u8 ndim  ndim x u64 dims  prod(dims) x f32
///
/// A named archive is a plain concatenation of records
///     u32 name_length  name bytes (UTF-8)  tensor record
/// read until end of file.
inline constexpr char kTensorMagic[4] = {'G', 'I', 'P', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;

using TensorArchive = std::vector<std::pair<std::string, Tensor>>;

void write_tensor(std::ostream& os, const Tensor& t);
/// `source` and `base_offset` only feed error messages.
Tensor read_tensor(std::istream& is, const std::string& source, std::uint64_t base_offset = 0);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);
const Tensor& find_tensor(const TensorArchive& archive, const std::string& name);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

/// Binary PPM (P6, maxval 255). Values are quantized with round(v * 255)
/// on write and mapped back with v / 255 on read.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

/// Reads either format, chosen by extension (.ppm, otherwise raw tensor).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

/// Quantizes an image exactly as a PPM roundtrip would.
Image quantize8(const Image& img);

}  // namespace visprompt
