#include "tibcad/fcseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace tibcad {
namespace {

struct Offset {
  int dx, dy, dz;
};

std::vector<Offset> neighbour_offsets(Adjacency adjacency) {
  std::vector<Offset> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (adjacency == Adjacency::Six && manhattan != 1) continue;
        offsets.push_back({dx, dy, dz});
      }
  return offsets;
}

} // namespace

double Affinity::operator()(double a, double b) const {
  const double diff = a - b;
  const double mean = 0.5 * (a + b) - meanObject;
  return std::exp(-diff * diff / (2.0 * sigmaIntensity * sigmaIntensity)) *
         std::exp(-mean * mean / (2.0 * sigmaObject * sigmaObject));
}

void Affinity::validate() const {
  if (!(sigmaIntensity > 0.0) || !(sigmaObject > 0.0)) throw ConfigError("affinity sigmas must be positive");
}

std::vector<std::vector<std::size_t>> interior_air_components(const Volume& volume, double airThreshold) {
  const Dims& d = volume.dims();
  std::vector<int> label(d.count(), -1);
  std::vector<std::vector<std::size_t>> interior;
  const auto offsets = neighbour_offsets(Adjacency::Six);
  std::vector<std::size_t> stack;

  for (std::size_t seed = 0; seed < d.count(); ++seed) {
    if (label[seed] >= 0 || volume[seed] >= airThreshold) continue;
    std::vector<std::size_t> members;
    bool touchesBorder = false;
    label[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      members.push_back(v);
      const int x = static_cast<int>(v % d.nx);
      const int y = static_cast<int>((v / d.nx) % d.ny);
      const int z = static_cast<int>(v / d.slice_count());
      if (x == 0 || y == 0 || x == d.nx - 1 || y == d.ny - 1) touchesBorder = true;
      for (const auto& o : offsets) {
        const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
        if (!d.contains(nx, ny, nz)) continue;
        const std::size_t u = d.index(nx, ny, nz);
        if (label[u] >= 0 || volume[u] >= airThreshold) continue;
        label[u] = 1;
        stack.push_back(u);
      }
    }
    if (!touchesBorder) {
      std::sort(members.begin(), members.end());
      interior.push_back(std::move(members));
    }
  }
  std::stable_sort(interior.begin(), interior.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return interior;
}

LungSeeds auto_seeds(const Volume& volume, double airThreshold) {
  auto components = interior_air_components(volume, airThreshold);
  if (components.size() < 2)
    throw DataError("lung recognition failed: found " + std::to_string(components.size()) +
                    " interior air component(s), need two");

  const Dims& d = volume.dims();
  struct Placed {
    SeedSet seeds;
    double centroidX;
  };
  auto place = [&](const std::vector<std::size_t>& members) {
    double cx = 0, cy = 0, cz = 0;
    for (auto v : members) {
      cx += static_cast<double>(v % d.nx);
      cy += static_cast<double>((v / d.nx) % d.ny);
      cz += static_cast<double>(v / d.slice_count());
    }
    const double n = static_cast<double>(members.size());
    cx /= n;
    cy /= n;
    cz /= n;
    std::size_t best = members.front();
    double bestDist = std::numeric_limits<double>::infinity();
    for (auto v : members) {  // members are sorted, so ties keep the lowest index
      const double dx = static_cast<double>(v % d.nx) - cx;
      const double dy = static_cast<double>((v / d.nx) % d.ny) - cy;
      const double dz = static_cast<double>(v / d.slice_count()) - cz;
      const double dist = dx * dx + dy * dy + dz * dz;
      if (dist < bestDist) {
        bestDist = dist;
        best = v;
      }
    }
    SeedSet seeds{best};
    const int x = static_cast<int>(best % d.nx);
    const int y = static_cast<int>((best / d.nx) % d.ny);
    const int z = static_cast<int>(best / d.slice_count());
    for (const auto& o : neighbour_offsets(Adjacency::Six)) {
      if (!d.contains(x + o.dx, y + o.dy, z + o.dz)) continue;
      const std::size_t u = d.index(x + o.dx, y + o.dy, z + o.dz);
      if (std::binary_search(members.begin(), members.end(), u)) seeds.push_back(u);
    }
    std::sort(seeds.begin(), seeds.end());
    return Placed{std::move(seeds), cx};
  };

  Placed a = place(components[0]);
  Placed b = place(components[1]);
  if (b.centroidX < a.centroidX) std::swap(a, b);
  return LungSeeds{std::move(a.seeds), std::move(b.seeds)};
}

ConnectivityMap fc_connectivity(const Volume& volume, const SeedSet& seeds, const Affinity& affinity,
                                Adjacency adjacency) {
  affinity.validate();
  if (seeds.empty()) throw DataError("fuzzy connectedness needs at least one seed");
  const Dims& d = volume.dims();
  for (auto s : seeds)
    if (s >= d.count()) throw DataError("seed index outside the volume");

  ConnectivityMap map{d, std::vector<double>(d.count(), 0.0)};
  std::vector<char> done(d.count(), 0);

  struct Entry {
    double strength;
    std::size_t index;
  };
  // Max-heap on strength; among equal strengths the lower index pops first.
  auto lower = [](const Entry& a, const Entry& b) {
    if (a.strength != b.strength) return a.strength < b.strength;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> heap(lower);
  for (auto s : seeds) {
    map.strength[s] = 1.0;
    heap.push({1.0, s});
  }

  const auto offsets = neighbour_offsets(adjacency);
  while (!heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    if (done[top.index] || top.strength < map.strength[top.index]) continue;
    done[top.index] = 1;
    const std::size_t v = top.index;
    const int x = static_cast<int>(v % d.nx);
    const int y = static_cast<int>((v / d.nx) % d.ny);
    const int z = static_cast<int>(v / d.slice_count());
    const double iv = volume[v];
    for (const auto& o : offsets) {
      const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
      if (!d.contains(nx, ny, nz)) continue;
      const std::size_t u = d.index(nx, ny, nz);
      if (done[u]) continue;
      const double candidate = std::min(top.strength, affinity(iv, volume[u]));
      if (candidate > map.strength[u]) {
        map.strength[u] = candidate;
        heap.push({candidate, u});
      }
    }
  }
  return map;
}

Mask fc_segment(const Volume& volume, const SeedSet& seeds, const Affinity& affinity, double theta,
                Adjacency adjacency) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("fuzzy connectedness threshold must lie in [0, 1]");
  const ConnectivityMap map = fc_connectivity(volume, seeds, affinity, adjacency);
  Mask mask(volume.dims(), volume.spacing(), std::uint8_t{0});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = map.strength[i] >= theta ? 1 : 0;
  return mask;
}

Mask fill_holes_per_slice(const Mask& mask) {
  const Dims& d = mask.dims();
  Mask filled = mask;
  std::vector<char> outside(d.slice_count());
  std::vector<std::pair<int, int>> stack;
  for (int z = 0; z < d.nz; ++z) {
    std::fill(outside.begin(), outside.end(), 0);
    auto visit = [&](int x, int y) {
      const std::size_t i = static_cast<std::size_t>(y) * d.nx + x;
      if (outside[i] || mask.at(x, y, z)) return;
      outside[i] = 1;
      stack.emplace_back(x, y);
    };
    for (int x = 0; x < d.nx; ++x) {
      visit(x, 0);
      visit(x, d.ny - 1);
    }
    for (int y = 0; y < d.ny; ++y) {
      visit(0, y);
      visit(d.nx - 1, y);
    }
    while (!stack.empty()) {
      auto [x, y] = stack.back();
      stack.pop_back();
      if (x > 0) visit(x - 1, y);
      if (x + 1 < d.nx) visit(x + 1, y);
      if (y > 0) visit(x, y - 1);
      if (y + 1 < d.ny) visit(x, y + 1);
    }
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        if (!outside[static_cast<std::size_t>(y) * d.nx + x]) filled.at(x, y, z) = 1;
  }
  return filled;
}

Mask segment_lungs(const Volume& volume, const LungSegmentationParams& params) {
  const LungSeeds seeds = auto_seeds(volume, params.airThreshold);
  SeedSet all = seeds.left;
  all.insert(all.end(), seeds.right.begin(), seeds.right.end());
  std::sort(all.begin(), all.end());
  Mask lungs = fc_segment(volume, all, params.affinity, params.theta, params.adjacency);
  return params.fillHoles ? fill_holes_per_slice(lungs) : lungs;
}

} // namespace tibcad
