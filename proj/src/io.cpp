#include "visprompt/io.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "visprompt/error.hpp"

namespace visprompt {

namespace fs = std::filesystem;

namespace {

template <typename UInt>
void put_le(std::ostream& os, UInt v) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(buf.data(), buf.size());
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

std::string where(const std::string& source, std::uint64_t offset) {
  return source + " at byte offset " + std::to_string(offset);
}

// Reads exactly n bytes or throws with the offset of the short read.
void read_exact(std::istream& is, void* dst, std::size_t n, const std::string& source,
                std::uint64_t offset, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw IoError("truncated " + std::string(what) + " in " + where(source, offset) +
                  ": expected " + std::to_string(n) + " bytes, got " +
                  std::to_string(is.gcount()));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string() + " for reading");
  return is;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.shape.size() > 255) throw ShapeError("tensor rank exceeds 255");
  if (t.element_count() != t.values.size()) {
    throw ShapeError("tensor shape does not match value count");
  }
  os.write(kTensorMagic, 4);
  os.put(static_cast<char>(kTensorVersion));
  os.put(static_cast<char>(t.shape.size()));
  for (auto d : t.shape) put_le<std::uint64_t>(os, d);
  for (float v : t.values) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

Tensor read_tensor(std::istream& is, const std::string& source, std::uint64_t base_offset) {
  std::uint64_t off = base_offset;
  std::array<unsigned char, 6> head{};
  read_exact(is, head.data(), head.size(), source, off, "tensor header");
  if (std::memcmp(head.data(), kTensorMagic, 4) != 0) {
    throw IoError("bad tensor magic in " + where(source, off));
  }
  if (head[4] != kTensorVersion) {
    throw IoError("unsupported tensor version " + std::to_string(head[4]) + " in " +
                  where(source, off + 4));
  }
  const std::size_t ndim = head[5];
  off += head.size();

  Tensor t;
  t.shape.resize(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    std::array<unsigned char, 8> b{};
    read_exact(is, b.data(), b.size(), source, off, "tensor dimension");
    t.shape[i] = get_le<std::uint64_t>(b.data());
    if (t.shape[i] != 0 && count > std::numeric_limits<std::uint64_t>::max() / 4 / t.shape[i]) {
      throw IoError("tensor dimension overflow in " + where(source, off));
    }
    count *= t.shape[i];
    off += 8;
  }
  // Refuse absurd sizes before allocating.
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;
  if (count > kMaxElements) {
    throw IoError("tensor element count " + std::to_string(count) + " too large in " +
                  where(source, off));
  }
  std::vector<unsigned char> raw(count * 4);
  read_exact(is, raw.data(), raw.size(), source, off, "tensor payload");
  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(&raw[i * 4]));
  }
  return t;
}

void save_tensor(const fs::path& path, const Tensor& t) {
  auto os = open_out(path);
  write_tensor(os, t);
  if (!os) throw IoError("write failed for " + path.string());
}

Tensor load_tensor(const fs::path& path) {
  auto is = open_in(path);
  return read_tensor(is, path.string());
}

void save_archive(const fs::path& path, const TensorArchive& archive) {
  auto os = open_out(path);
  for (const auto& [name, t] : archive) {
    if (name.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw IoError("tensor name too long");
    }
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

TensorArchive load_archive(const fs::path& path) {
  auto is = open_in(path);
  const std::string source = path.string();
  TensorArchive archive;
  std::uint64_t off = 0;
  while (is.peek() != std::char_traits<char>::eof()) {
    std::array<unsigned char, 4> b{};
    read_exact(is, b.data(), b.size(), source, off, "name length");
    const auto len = get_le<std::uint32_t>(b.data());
    off += 4;
    if (len > (1u << 16)) throw IoError("implausible tensor name length in " + where(source, off - 4));
    std::string name(len, '\0');
    read_exact(is, name.data(), len, source, off, "tensor name");
    off += len;
    Tensor t = read_tensor(is, source, off);
    off += 6 + 8 * t.shape.size() + 4 * t.values.size();
    archive.emplace_back(std::move(name), std::move(t));
  }
  return archive;
}

const Tensor& find_tensor(const TensorArchive& archive, const std::string& name) {
  for (const auto& [n, t] : archive) {
    if (n == name) return t;
  }
  throw IoError("tensor '" + name + "' not found in archive");
}

Tensor image_to_tensor(const Image& img) {
  return Tensor{{static_cast<std::uint64_t>(img.height), static_cast<std::uint64_t>(img.width), 3},
                img.data};
}

Image tensor_to_image(const Tensor& t) {
  if (t.shape.size() != 3 || t.shape[2] != 3 || t.shape[0] == 0 || t.shape[1] == 0 ||
      t.shape[0] > (1u << 16) || t.shape[1] > (1u << 16)) {
    throw ShapeError("tensor is not an HxWx3 image");
  }
  Image img(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
  img.data = t.values;
  return img;
}

namespace {

// Skips whitespace and '#' comments in a PPM header.
void skip_ws(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
}

std::uint64_t read_header_int(const std::string& buf, std::size_t& pos, const std::string& source,
                              const char* what) {
  skip_ws(buf, pos);
  const std::size_t start = pos;
  std::uint64_t v = 0;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    v = v * 10 + static_cast<std::uint64_t>(buf[pos] - '0');
    if (v > (1u << 20)) throw IoError("PPM " + std::string(what) + " overflow in " + where(source, start));
    ++pos;
  }
  if (pos == start) {
    throw IoError("malformed PPM header: expected " + std::string(what) + " in " + where(source, start));
  }
  return v;
}

}  // namespace

Image read_ppm(const fs::path& path) {
  auto is = open_in(path);
  const std::string source = path.string();
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') {
    throw IoError("malformed PPM header: missing P6 magic in " + where(source, 0));
  }
  std::size_t pos = 2;
  const auto w = read_header_int(buf, pos, source, "width");
  const auto h = read_header_int(buf, pos, source, "height");
  const auto maxval = read_header_int(buf, pos, source, "maxval");
  if (w == 0 || h == 0) throw IoError("PPM has zero dimension in " + where(source, pos));
  if (maxval != 255) {
    throw IoError("unsupported PPM maxval " + std::to_string(maxval) + " (need 255) in " +
                  where(source, pos));
  }
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw IoError("malformed PPM header: missing separator in " + where(source, pos));
  }
  ++pos;
  const std::uint64_t expected = w * h * 3;
  const std::uint64_t available = buf.size() - pos;
  if (available < expected) {
    throw IoError("truncated PPM pixel data in " + where(source, pos) + ": expected " +
                  std::to_string(expected) + " bytes, got " + std::to_string(available));
  }
  Image img(static_cast<int>(h), static_cast<int>(w));
  for (std::uint64_t i = 0; i < expected; ++i) {
    img.data[i] = static_cast<float>(static_cast<unsigned char>(buf[pos + i]) / 255.0);
  }
  return img;
}

void write_ppm(const fs::path& path, const Image& img) {
  auto os = open_out(path);
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::isnan(img.data[i]) ? 0.0 : clamp01(static_cast<double>(img.data[i]));
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Image read_image(const fs::path& path) {
  if (path.extension() == ".ppm") return read_ppm(path);
  return tensor_to_image(load_tensor(path));
}

void write_image(const fs::path& path, const Image& img) {
  if (path.extension() == ".ppm") {
    write_ppm(path, img);
  } else {
    save_tensor(path, image_to_tensor(img));
  }
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) {
    const double c = std::isnan(v) ? 0.0 : clamp01(static_cast<double>(v));
    v = static_cast<float>(static_cast<double>(std::lround(c * 255.0)) / 255.0);
  }
  return out;
}

}  // namespace visprompt
