#include "tibcad/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tibcad/error.hpp"
#include "tibcad/random.hpp"

namespace tibcad {
namespace {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

/// Squared distance between segments p1-q1 and p2-q2.
double segment_distance2(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.dot(d1), e = d2.dot(d2), f = d2.dot(r);
  constexpr double tiny = 1e-12;
  double s = 0.0, t = 0.0;
  if (a <= tiny && e <= tiny) return r.dot(r);
  if (a <= tiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= tiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > tiny ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  const Vec3 diff = (p1 + d1 * s) - (p2 + d2 * t);
  return diff.dot(diff);
}

struct Tube {
  Vec3 a, b;
  double radius;
};

struct Ball {
  Vec3 c;
  double radius;
};

/// Voxel geometry: in-plane point at (x sx, y sy), slab [z sz - sz/2, z sz + sz/2].
class Raster {
public:
  Raster(const Dims& d, const Spacing& s) : d_(d), s_(s) {}

  template <class Fn>
  void tube(const Tube& t, Fn&& visit) const {
    const Vec3 lo{std::min(t.a.x, t.b.x) - t.radius, std::min(t.a.y, t.b.y) - t.radius,
                  std::min(t.a.z, t.b.z) - t.radius};
    const Vec3 hi{std::max(t.a.x, t.b.x) + t.radius, std::max(t.a.y, t.b.y) + t.radius,
                  std::max(t.a.z, t.b.z) + t.radius};
    box(lo, hi, [&](int x, int y, int z) {
      const Vec3 p0{x * s_.sx, y * s_.sy, z * s_.sz - 0.5 * s_.sz};
      const Vec3 p1{x * s_.sx, y * s_.sy, z * s_.sz + 0.5 * s_.sz};
      if (segment_distance2(t.a, t.b, p0, p1) <= t.radius * t.radius) visit(x, y, z);
    });
  }

  template <class Fn>
  void ball(const Ball& b, Fn&& visit) const {
    const Vec3 r{b.radius, b.radius, b.radius};
    box(b.c - r, b.c + r, [&](int x, int y, int z) {
      const double dx = x * s_.sx - b.c.x;
      const double dy = y * s_.sy - b.c.y;
      const double dz = std::max(0.0, std::abs(z * s_.sz - b.c.z) - 0.5 * s_.sz);
      if (dx * dx + dy * dy + dz * dz <= b.radius * b.radius) visit(x, y, z);
    });
  }

private:
  template <class Fn>
  void box(const Vec3& lo, const Vec3& hi, Fn&& fn) const {
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x / s_.sx)));
    const int x1 = std::min(d_.nx - 1, static_cast<int>(std::ceil(hi.x / s_.sx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y / s_.sy)));
    const int y1 = std::min(d_.ny - 1, static_cast<int>(std::ceil(hi.y / s_.sy)));
    const int z0 = std::max(0, static_cast<int>(std::floor(lo.z / s_.sz - 0.5)));
    const int z1 = std::min(d_.nz - 1, static_cast<int>(std::ceil(hi.z / s_.sz + 0.5)));
    for (int z = z0; z <= z1; ++z)
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) fn(x, y, z);
  }

  Dims d_;
  Spacing s_;
};

Vec3 direction(double azimuth, double elevation) {
  const Vec3 v{std::cos(azimuth), std::sin(azimuth), elevation};
  return v * (1.0 / v.norm());
}

} // namespace

void PhantomSpec::validate() const {
  if (!dims.valid()) throw ConfigError("phantom dims must be >= 1");
  if (!spacing.valid()) throw ConfigError("phantom spacing must be positive");
  if (noiseSigma < 0.0) throw ConfigError("phantom noise sigma must be >= 0");
  if (nTibClusters < 0 || nVessels < 0) throw ConfigError("phantom counts must be >= 0");
  if (branchSegmentsMin < 1 || branchSegmentsMax < branchSegmentsMin) throw ConfigError("invalid branch segment range");
  if (nodulesMin < 0 || nodulesMax < nodulesMin) throw ConfigError("invalid nodule count range");
  if (!(noduleDiameterMin >= 2.0 && noduleDiameterMax <= 3.0 && noduleDiameterMin <= noduleDiameterMax))
    throw ConfigError("micro-nodule diameters must lie within [2, 3] mm");
  if (!(branchThicknessMin > 0.0 && branchThicknessMax >= branchThicknessMin))
    throw ConfigError("invalid branch thickness range");
  if (!(branchLengthMin > 0.0 && branchLengthMax >= branchLengthMin)) throw ConfigError("invalid branch length range");
  if (!(vesselDiameterMin > 0.0 && vesselDiameterMax >= vesselDiameterMin))
    throw ConfigError("invalid vessel diameter range");
  if (!(vesselLengthMin > 0.0 && vesselLengthMax >= vesselLengthMin)) throw ConfigError("invalid vessel length range");
  if (!(lungSemiX > 0.0 && lungSemiY > 0.0 && lungSemiZ > 0.0 && bodySemiAxis > 0.0 && bodyExponent > 0.0))
    throw ConfigError("phantom body and lung axes must be positive");
}

KeyValues PhantomSpec::to_key_values() const {
  KeyValues kv;
  kv.set("dims", std::to_string(dims.nx) + " " + std::to_string(dims.ny) + " " + std::to_string(dims.nz));
  kv.set("spacing", format_double(spacing.sx) + " " + format_double(spacing.sy) + " " + format_double(spacing.sz));
  kv.set("airHU", airHU);
  kv.set("bodyHU", bodyHU);
  kv.set("lungHU", lungHU);
  kv.set("noiseSigma", noiseSigma);
  kv.set("bodySemiAxis", bodySemiAxis);
  kv.set("bodyExponent", bodyExponent);
  kv.set("lungOffsetX", lungOffsetX);
  kv.set("lungSemiX", lungSemiX);
  kv.set("lungSemiY", lungSemiY);
  kv.set("lungSemiZ", lungSemiZ);
  kv.set("nTibClusters", static_cast<long long>(nTibClusters));
  kv.set("branchSegmentsMin", static_cast<long long>(branchSegmentsMin));
  kv.set("branchSegmentsMax", static_cast<long long>(branchSegmentsMax));
  kv.set("branchThicknessMin", branchThicknessMin);
  kv.set("branchThicknessMax", branchThicknessMax);
  kv.set("branchLengthMin", branchLengthMin);
  kv.set("branchLengthMax", branchLengthMax);
  kv.set("nodulesMin", static_cast<long long>(nodulesMin));
  kv.set("nodulesMax", static_cast<long long>(nodulesMax));
  kv.set("noduleDiameterMin", noduleDiameterMin);
  kv.set("noduleDiameterMax", noduleDiameterMax);
  kv.set("clusterContrast", clusterContrast);
  kv.set("nVessels", static_cast<long long>(nVessels));
  kv.set("vesselDiameterMin", vesselDiameterMin);
  kv.set("vesselDiameterMax", vesselDiameterMax);
  kv.set("vesselLengthMin", vesselLengthMin);
  kv.set("vesselLengthMax", vesselLengthMax);
  kv.set("vesselHU", vesselHU);
  kv.set("seed", std::to_string(seed));
  return kv;
}

PhantomSpec PhantomSpec::from_key_values(const KeyValues& kv) try {
  PhantomSpec s;
  if (kv.has("dims")) {
    const auto v = kv.get_ints("dims");
    if (v.size() != 3) throw ConfigError("phantom dims needs three values");
    s.dims = {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
  }
  if (kv.has("spacing")) {
    const auto v = kv.get_doubles("spacing");
    if (v.size() != 3) throw ConfigError("phantom spacing needs three values");
    s.spacing = {v[0], v[1], v[2]};
  }
  auto d = [&](const char* key, double& field) { field = kv.get_double_or(key, field); };
  auto i = [&](const char* key, int& field) { field = static_cast<int>(kv.get_int_or(key, field)); };
  d("airHU", s.airHU);
  d("bodyHU", s.bodyHU);
  d("lungHU", s.lungHU);
  d("noiseSigma", s.noiseSigma);
  d("bodySemiAxis", s.bodySemiAxis);
  d("bodyExponent", s.bodyExponent);
  d("lungOffsetX", s.lungOffsetX);
  d("lungSemiX", s.lungSemiX);
  d("lungSemiY", s.lungSemiY);
  d("lungSemiZ", s.lungSemiZ);
  i("nTibClusters", s.nTibClusters);
  i("branchSegmentsMin", s.branchSegmentsMin);
  i("branchSegmentsMax", s.branchSegmentsMax);
  d("branchThicknessMin", s.branchThicknessMin);
  d("branchThicknessMax", s.branchThicknessMax);
  d("branchLengthMin", s.branchLengthMin);
  d("branchLengthMax", s.branchLengthMax);
  i("nodulesMin", s.nodulesMin);
  i("nodulesMax", s.nodulesMax);
  d("noduleDiameterMin", s.noduleDiameterMin);
  d("noduleDiameterMax", s.noduleDiameterMax);
  d("clusterContrast", s.clusterContrast);
  i("nVessels", s.nVessels);
  d("vesselDiameterMin", s.vesselDiameterMin);
  d("vesselDiameterMax", s.vesselDiameterMax);
  d("vesselLengthMin", s.vesselLengthMin);
  d("vesselLengthMax", s.vesselLengthMax);
  d("vesselHU", s.vesselHU);
  if (kv.has("seed")) s.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
  s.validate();
  return s;
} catch (const DataError& e) {
  throw ConfigError(e.what());
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;
  const Spacing& sp = spec.spacing;
  Rng rng(spec.seed);
  const Raster raster(d, sp);

  const double cx = 0.5 * (d.nx - 1) * sp.sx;
  const double cy = 0.5 * (d.ny - 1) * sp.sy;
  const double cz = 0.5 * (d.nz - 1) * sp.sz;
  const Vec3 lungCentre[2] = {{cx - spec.lungOffsetX, cy, cz}, {cx + spec.lungOffsetX, cy, cz}};

  auto inBody = [&](double px, double py) {
    const double u = std::abs(px - cx) / spec.bodySemiAxis;
    const double v = std::abs(py - cy) / spec.bodySemiAxis;
    return std::pow(u, spec.bodyExponent) + std::pow(v, spec.bodyExponent) <= 1.0;
  };
  auto inLung = [&](const Vec3& p, int lung, double margin) {
    const Vec3 q = p - lungCentre[lung];
    const double ax = spec.lungSemiX - margin, ay = spec.lungSemiY - margin, az = spec.lungSemiZ - margin;
    if (ax <= 0 || ay <= 0 || az <= 0) return false;
    return (q.x / ax) * (q.x / ax) + (q.y / ay) * (q.y / ay) + (q.z / az) * (q.z / az) <= 1.0;
  };

  Phantom ph{Volume(d, sp, static_cast<std::int16_t>(0)), Mask(d, sp, std::uint8_t{0}),
             Mask(d, sp, std::uint8_t{0})};
  std::vector<double> hu(d.count(), spec.airHU);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const Vec3 p{x * sp.sx, y * sp.sy, z * sp.sz};
        if (!inBody(p.x, p.y)) continue;
        const std::size_t idx = d.index(x, y, z);
        hu[idx] = spec.bodyHU;
        if (inLung(p, 0, 0.0) || inLung(p, 1, 0.0)) {
          hu[idx] = spec.lungHU;
          ph.lungMask[idx] = 1;
        }
      }

  // Uniform point inside one lung, shrunk by margin and kept clear of the
  // top and bottom of the field of view.
  auto samplePoint = [&](int lung, double margin) {
    const double zLo = std::max(lungCentre[lung].z - spec.lungSemiZ, margin);
    const double zHi = std::min(lungCentre[lung].z + spec.lungSemiZ, (d.nz - 1) * sp.sz - margin);
    for (;;) {
      const Vec3 p{rng.uniform(lungCentre[lung].x - spec.lungSemiX, lungCentre[lung].x + spec.lungSemiX),
                   rng.uniform(lungCentre[lung].y - spec.lungSemiY, lungCentre[lung].y + spec.lungSemiY),
                   rng.uniform(zLo, zHi)};
      if (inLung(p, lung, margin)) return p;
    }
  };

  // Decoy vessels: a trunk plus one side branch, clipped to the lung. Half run
  // mostly through-plane and look round in a slice.
  std::vector<char> vessel(d.count(), 0);
  for (int v = 0; v < spec.nVessels; ++v) {
    const int lung = static_cast<int>(rng.uniform_int(0, 1));
    const Vec3 start = samplePoint(lung, 1.0);
    const bool throughPlane = rng.uniform() < 0.5;
    const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double elevation = throughPlane ? rng.uniform(2.0, 6.0) * (rng.uniform() < 0.5 ? -1 : 1)
                                          : rng.uniform(-0.15, 0.15);
    const Vec3 dir = direction(azimuth, elevation);
    const double length = rng.uniform(spec.vesselLengthMin, spec.vesselLengthMax);
    const double radius = 0.5 * rng.uniform(spec.vesselDiameterMin, spec.vesselDiameterMax);
    const Tube trunk{start, start + dir * length, radius};
    const Vec3 mid = start + dir * (0.5 * length);
    const Vec3 branchDir = direction(azimuth + rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1 : 1), elevation);
    const Tube branch{mid, mid + branchDir * (0.5 * length), 0.7 * radius};
    for (const Tube& t : {trunk, branch})
      raster.tube(t, [&](int x, int y, int z) {
        const std::size_t idx = d.index(x, y, z);
        if (!ph.lungMask[idx]) return;
        vessel[idx] = 1;
        hu[idx] = spec.vesselHU;
      });
  }

  // Lung voxels at least one voxel away (in-plane) from the lung boundary.
  std::vector<char> interior(d.count(), 0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 1; y + 1 < d.ny; ++y)
      for (int x = 1; x + 1 < d.nx; ++x) {
        bool ok = true;
        for (int dy = -1; dy <= 1 && ok; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            if (!ph.lungMask.at(x + dx, y + dy, z)) {
              ok = false;
              break;
            }
        interior[d.index(x, y, z)] = ok;
      }

  // Occupied = existing TIB voxels and everything 26-adjacent to them, so a
  // new cluster never merges with an old one.
  std::vector<char> blocked(d.count(), 0);
  const double minTubeRadius = 0.5 * std::hypot(sp.sx, sp.sy) + 1e-6;
  for (int c = 0; c < spec.nTibClusters; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const int lung = static_cast<int>(rng.uniform_int(0, 1));
      const Vec3 root = samplePoint(lung, 2.0);
      const double thickness = rng.uniform(spec.branchThicknessMin, spec.branchThicknessMax);
      const double tubeRadius = std::max(0.5 * thickness, minTubeRadius);

      std::vector<Tube> tubes;
      std::vector<double> azimuths;
      const int segments = static_cast<int>(rng.uniform_int(spec.branchSegmentsMin, spec.branchSegmentsMax));
      for (int s = 0; s < segments; ++s) {
        Vec3 from = root;
        double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (s > 0) {
          const auto parent = static_cast<std::size_t>(rng.uniform_int(0, s - 1));
          from = tubes[parent].b;
          azimuth = azimuths[parent] + rng.uniform(0.45, 1.05) * (rng.uniform() < 0.5 ? -1 : 1);
        }
        const Vec3 dir = direction(azimuth, rng.uniform(-0.2, 0.2));
        const double length = rng.uniform(spec.branchLengthMin, spec.branchLengthMax);
        tubes.push_back({from, from + dir * length, tubeRadius});
        azimuths.push_back(azimuth);
      }
      std::vector<Ball> nodules;
      const int noduleCount = static_cast<int>(rng.uniform_int(spec.nodulesMin, spec.nodulesMax));
      for (int k = 0; k < noduleCount; ++k) {
        const auto& t = tubes[static_cast<std::size_t>(rng.uniform_int(0, segments - 1))];
        const double u = rng.uniform(0.5, 1.0);
        const double r = 0.5 * rng.uniform(spec.noduleDiameterMin, spec.noduleDiameterMax);
        const Vec3 along = t.b - t.a;
        Vec3 perp{-along.y, along.x, 0.0};
        perp = perp * (1.0 / std::max(perp.norm(), 1e-12));
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        nodules.push_back({t.a + along * u + perp * (side * (t.radius + 0.5 * r)), r});
      }

      std::vector<std::size_t> voxels;
      auto collect = [&](int x, int y, int z) { voxels.push_back(d.index(x, y, z)); };
      for (const auto& t : tubes) raster.tube(t, collect);
      for (const auto& b : nodules) raster.ball(b, collect);
      std::sort(voxels.begin(), voxels.end());
      voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());

      bool ok = !voxels.empty();
      for (auto idx : voxels)
        if (!interior[idx] || blocked[idx] || vessel[idx]) {
          ok = false;
          break;
        }
      if (!ok) continue;

      Mask piece(d, sp, std::uint8_t{0});
      for (auto idx : voxels) piece[idx] = 1;
      if (count_components(piece) != 1) continue;

      for (auto idx : voxels) {
        ph.tibMask[idx] = 1;
        hu[idx] = spec.lungHU + spec.clusterContrast;
        const int x = static_cast<int>(idx % d.nx);
        const int y = static_cast<int>((idx / d.nx) % d.ny);
        const int z = static_cast<int>(idx / d.slice_count());
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              if (d.contains(x + dx, y + dy, z + dz)) blocked[d.index(x + dx, y + dy, z + dz)] = 1;
      }
      placed = true;
    }
    if (!placed)
      throw DataError("could not place tree-in-bud cluster " + std::to_string(c + 1) + " inside the lungs after 1000 attempts");
  }

  for (std::size_t i = 0; i < d.count(); ++i) {
    const double v = std::round(hu[i] + spec.noiseSigma * rng.normal());
    ph.volume[i] = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
  }
  return ph;
}

std::size_t count_components(const Mask& mask) {
  const Dims& d = mask.dims();
  std::vector<char> seen(d.count(), 0);
  std::vector<std::size_t> stack;
  std::size_t components = 0;
  for (std::size_t start = 0; start < d.count(); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(v % d.nx);
      const int y = static_cast<int>((v / d.nx) % d.ny);
      const int z = static_cast<int>(v / d.slice_count());
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!d.contains(x + dx, y + dy, z + dz)) continue;
            const std::size_t u = d.index(x + dx, y + dy, z + dz);
            if (mask[u] && !seen[u]) {
              seen[u] = 1;
              stack.push_back(u);
            }
          }
    }
  }
  return components;
}

PatchLabel label_patch(const Patch& patch, const Mask& tibMask, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("labeling overlap fraction tau must lie in (0, 1]");
  std::size_t tib = 0;
  for (int y = 0; y < patch.n; ++y)
    for (int x = 0; x < patch.n; ++x) tib += tibMask.at(patch.x0 + x, patch.y0 + y, patch.z) != 0;
  if (tib == 0) return PatchLabel::Normal;
  const double fraction = static_cast<double>(tib) / static_cast<double>(patch.n * patch.n);
  return fraction >= tau ? PatchLabel::Abnormal : PatchLabel::Ambiguous;
}

std::vector<PatchLabel> label_patches(const std::vector<Patch>& patches, const Mask& tibMask, double tau) {
  std::vector<PatchLabel> labels;
  labels.reserve(patches.size());
  for (const auto& p : patches) labels.push_back(label_patch(p, tibMask, tau));
  return labels;
}

} // namespace tibcad
