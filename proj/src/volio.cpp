#include "tibcad/volio.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tibcad/keyvalue.hpp"

namespace tibcad {
namespace {

template <class T>
struct DType;
template <>
struct DType<std::int16_t> {
  static constexpr const char* name = "int16le";
};
template <>
struct DType<std::uint8_t> {
  static constexpr const char* name = "uint8";
};
template <>
struct DType<float> {
  static constexpr const char* name = "float32le";
};

template <class T>
void encode_le(const T& value, unsigned char* out) {
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    for (int b = 0; b < 4; ++b) out[b] = static_cast<unsigned char>(bits >> (8 * b));
  } else {
    using U = std::make_unsigned_t<T>;
    const auto bits = static_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) out[b] = static_cast<unsigned char>(bits >> (8 * b));
  }
}

template <class T>
T decode_le(const unsigned char* in) {
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(in[b]) << (8 * b);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
  } else {
    using U = std::make_unsigned_t<T>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) bits = static_cast<U>(bits | (static_cast<U>(in[b]) << (8 * b)));
    return static_cast<T>(bits);
  }
}

template <class G>
std::vector<unsigned char> payload_bytes(const G& grid) {
  using T = typename G::value_type;
  std::vector<unsigned char> bytes(grid.size() * sizeof(T));
  for (std::size_t i = 0; i < grid.size(); ++i) encode_le<T>(grid[i], bytes.data() + i * sizeof(T));
  return bytes;
}

template <class G>
void write_grid(const std::filesystem::path& header, const G& grid) {
  using T = typename G::value_type;
  std::filesystem::path raw = header;
  raw.replace_extension(".raw");

  KeyValues kv;
  const auto& d = grid.dims();
  const auto& s = grid.spacing();
  kv.set("dims", std::to_string(d.nx) + " " + std::to_string(d.ny) + " " + std::to_string(d.nz));
  kv.set("spacing", format_double(s.sx) + " " + format_double(s.sy) + " " + format_double(s.sz));
  kv.set("dtype", std::string(DType<T>::name));
  kv.set("order", std::string("xyz"));
  kv.set("data", raw.filename().string());
  kv.save(header);

  const auto bytes = payload_bytes(grid);
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw DataError("cannot write " + raw.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + raw.string());
}

template <class G>
G read_grid(const std::filesystem::path& header) {
  using T = typename G::value_type;
  if (!std::filesystem::exists(header)) throw DataError("missing header file " + header.string());
  const KeyValues kv = KeyValues::load(header);

  const auto dimsList = kv.get_ints("dims");
  if (dimsList.size() != 3) throw DataError(header.string() + ": dims needs three values");
  for (auto v : dimsList)
    if (v < 1 || v > (1 << 20)) throw DataError(header.string() + ": dims must be >= 1");
  const Dims dims{static_cast<int>(dimsList[0]), static_cast<int>(dimsList[1]), static_cast<int>(dimsList[2])};

  const auto spacingList = kv.get_doubles("spacing");
  if (spacingList.size() != 3) throw DataError(header.string() + ": spacing needs three values");
  const Spacing spacing{spacingList[0], spacingList[1], spacingList[2]};
  if (!spacing.valid()) throw DataError(header.string() + ": spacing must be positive");

  const std::string dtype = kv.get("dtype");
  if (dtype != DType<T>::name)
    throw DataError(header.string() + ": dtype '" + dtype + "' where '" + DType<T>::name + "' was expected");
  const std::string order = kv.get_or("order", "xyz");
  if (order != "xyz") throw DataError(header.string() + ": unsupported order '" + order + "'");

  const auto raw = payload_path(header);
  std::ifstream in(raw, std::ios::binary);
  if (!in) throw DataError("missing data file " + raw.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = dims.count() * sizeof(T);
  if (bytes.size() != expected)
    throw DataError(raw.string() + ": size mismatch, " + std::to_string(bytes.size()) + " bytes for " +
                    std::to_string(expected) + " expected");

  std::vector<T> voxels(dims.count());
  for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = decode_le<T>(bytes.data() + i * sizeof(T));
  return G(dims, spacing, std::move(voxels));
}

} // namespace

std::size_t count_nonzero(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.voxels()) n += v != 0;
  return n;
}

std::filesystem::path payload_path(const std::filesystem::path& header) {
  if (std::filesystem::exists(header)) {
    const KeyValues kv = KeyValues::load(header);
    if (kv.has("data")) {
      std::filesystem::path data = kv.get("data");
      return data.is_absolute() ? data : header.parent_path() / data;
    }
  }
  std::filesystem::path raw = header;
  raw.replace_extension(".raw");
  return raw;
}

void write_volume(const std::filesystem::path& header, const Volume& volume) { write_grid(header, volume); }
Volume read_volume(const std::filesystem::path& header) { return read_grid<Volume>(header); }
void write_mask(const std::filesystem::path& header, const Mask& mask) { write_grid(header, mask); }
Mask read_mask(const std::filesystem::path& header) { return read_grid<Mask>(header); }
void write_scale_map(const std::filesystem::path& header, const ScaleMap& scale) { write_grid(header, scale); }
ScaleMap read_scale_map(const std::filesystem::path& header) { return read_grid<ScaleMap>(header); }
void write_float_map(const std::filesystem::path& header, const FloatMap& map) { write_grid(header, map); }
FloatMap read_float_map(const std::filesystem::path& header) { return read_grid<FloatMap>(header); }

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t state) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= bytes[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t state) { return fnv1a(text.data(), text.size(), state); }

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::uint64_t checksum(const Volume& volume) {
  const auto bytes = payload_bytes(volume);
  return fnv1a(bytes.data(), bytes.size());
}

std::uint64_t checksum(const Mask& mask) { return fnv1a(mask.voxels().data(), mask.size()); }

std::vector<std::uint8_t> extract_window(const Mask& mask, int z, int x0, int y0, int n) {
  const auto& d = mask.dims();
  if (!d.contains(x0, y0, z) || !d.contains(x0 + n - 1, y0 + n - 1, z))
    throw DataError("window outside mask bounds");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) bits[static_cast<std::size_t>(y) * n + x] = mask.at(x0 + x, y0 + y, z) ? 1 : 0;
  return bits;
}

Patch extract_patch(const Volume& volume, const Mask& lungMask, int z, int x0, int y0, int n) {
  if (!same_shape(volume, lungMask)) throw DataError("lung mask dimensions do not match the volume");
  if (n < 1) throw ConfigError("patch size must be positive");
  const auto& d = volume.dims();
  if (!d.contains(x0, y0, z) || !d.contains(x0 + n - 1, y0 + n - 1, z))
    throw DataError("patch outside volume bounds");
  Patch patch;
  patch.z = z;
  patch.x0 = x0;
  patch.y0 = y0;
  patch.n = n;
  patch.spacing = volume.spacing();
  patch.pixels.resize(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) patch.pixels[static_cast<std::size_t>(y) * n + x] = volume.at(x0 + x, y0 + y, z);
  patch.maskBits = extract_window(lungMask, z, x0, y0, n);
  return patch;
}

std::vector<Patch> tile_patches(const Volume& volume, const Mask& lungMask, int n) {
  if (!same_shape(volume, lungMask)) throw DataError("lung mask dimensions do not match the volume");
  const auto& d = volume.dims();
  if (n < 1 || n % 2 == 0) throw ConfigError("patch size must be odd, got " + std::to_string(n));
  if (n > std::min(d.nx, d.ny))
    throw ConfigError("patch size " + std::to_string(n) + " exceeds the slice extent");

  std::vector<Patch> patches;
  for (int z = 0; z < d.nz; ++z) {
    for (int y0 = 0; y0 + n <= d.ny; y0 += n) {
      for (int x0 = 0; x0 + n <= d.nx; x0 += n) {
        bool touches = false;
        for (int y = y0; y < y0 + n && !touches; ++y)
          for (int x = x0; x < x0 + n; ++x)
            if (lungMask.at(x, y, z)) {
              touches = true;
              break;
            }
        if (touches) patches.push_back(extract_patch(volume, lungMask, z, x0, y0, n));
      }
    }
  }
  return patches;
}

} // namespace tibcad
