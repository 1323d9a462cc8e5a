#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tibcad/error.hpp"

namespace tibcad {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::size_t slice_count() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Physical voxel size in millimetres.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  bool valid() const { return sx > 0.0 && sy > 0.0 && sz > 0.0; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct VolumeTag {};
struct MaskTag {};
struct ScaleTag {};
struct FloatTag {};

/// Dense 3D grid, x fastest. The tag keeps volumes, masks and scale maps
/// from being mixed up even when they share a voxel type.
template <class T, class Tag>
class Grid {
public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing), voxels_(dims.count(), fill) {
    if (!dims.valid()) throw DataError("grid dimensions must be >= 1");
    if (!spacing.valid()) throw DataError("grid spacing must be positive");
  }
  Grid(Dims dims, Spacing spacing, std::vector<T> voxels)
      : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
    if (!dims.valid()) throw DataError("grid dimensions must be >= 1");
    if (!spacing.valid()) throw DataError("grid spacing must be positive");
    if (voxels_.size() != dims.count()) throw DataError("grid voxel count does not match dimensions");
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return voxels_.size(); }

  T& operator[](std::size_t i) { return voxels_[i]; }
  const T& operator[](std::size_t i) const { return voxels_[i]; }
  T& at(int x, int y, int z) { return voxels_[dims_.index(x, y, z)]; }
  const T& at(int x, int y, int z) const { return voxels_[dims_.index(x, y, z)]; }

  const std::vector<T>& voxels() const { return voxels_; }
  std::vector<T>& voxels() { return voxels_; }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> voxels_;
};

/// CT intensities in Hounsfield units.
using Volume = Grid<std::int16_t, VolumeTag>;
/// Binary mask, one byte per voxel holding 0 or 1.
using Mask = Grid<std::uint8_t, MaskTag>;
/// Per-voxel ball-scale radius in voxels, 0 outside the lung.
using ScaleMap = Grid<std::uint8_t, ScaleTag>;
/// Real-valued map, used to export curvature maps for inspection.
using FloatMap = Grid<float, FloatTag>;

template <class A, class B>
bool same_shape(const A& a, const B& b) {
  return a.dims() == b.dims();
}

std::size_t count_nonzero(const Mask& mask);

// Two-file format: a "key: value" text header (dims, spacing, dtype, order,
// data) plus a raw little-endian payload named by the "data" key, resolved
// relative to the header. Without a data key the payload is the header path
// with extension ".raw".
void write_volume(const std::filesystem::path& header, const Volume& volume);
Volume read_volume(const std::filesystem::path& header);
void write_mask(const std::filesystem::path& header, const Mask& mask);
Mask read_mask(const std::filesystem::path& header);
void write_scale_map(const std::filesystem::path& header, const ScaleMap& scale);
ScaleMap read_scale_map(const std::filesystem::path& header);
void write_float_map(const std::filesystem::path& header, const FloatMap& map);
FloatMap read_float_map(const std::filesystem::path& header);

/// Path of the raw payload belonging to a header (without reading it).
std::filesystem::path payload_path(const std::filesystem::path& header);

/// 64-bit FNV-1a over bytes; used for checksums, schema hashes and cache keys.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t state = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(const std::string& text, std::uint64_t state = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t value);

/// Checksum of a volume's little-endian payload, independent of host order.
std::uint64_t checksum(const Volume& volume);
std::uint64_t checksum(const Mask& mask);

/// n x n axial window of a volume with the matching lung-mask window.
struct Patch {
  int z = 0;
  int x0 = 0;
  int y0 = 0;
  int n = 0;
  Spacing spacing{};
  std::vector<std::int16_t> pixels;  ///< row-major, y outer
  std::vector<std::uint8_t> maskBits;

  std::int16_t pixel(int x, int y) const { return pixels[static_cast<std::size_t>(y) * n + x]; }
  bool in_mask(int x, int y) const { return maskBits[static_cast<std::size_t>(y) * n + x] != 0; }
};

/// Cuts a window without any lung-mask requirement. Throws when it does not
/// fit inside the volume.
Patch extract_patch(const Volume& volume, const Mask& lungMask, int z, int x0, int y0, int n);

/// Same window of any mask, row-major.
std::vector<std::uint8_t> extract_window(const Mask& mask, int z, int x0, int y0, int n);

/// Non-overlapping n x n tiling of every axial slice (stride n, tiles that
/// would cross the slice edge are not formed). Only tiles touching the lung
/// mask are returned, ordered by (z, y0, x0).
std::vector<Patch> tile_patches(const Volume& volume, const Mask& lungMask, int n);

} // namespace tibcad
