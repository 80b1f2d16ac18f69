#include "pkw/solidmesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "pkw/error.hpp"

namespace pkw {

std::string_view to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::InletChannel: return "inlet_channel";
    case RegionKind::OutletChannel: return "outlet_channel";
    case RegionKind::Sidewall: return "sidewall";
    case RegionKind::UpstreamCrestWall: return "upstream_crest_wall";
    case RegionKind::DownstreamCrestWall: return "downstream_crest_wall";
  }
  return "unknown";
}

const ProfileSegment& Profile::segment_at(double x) const {
  if (segments.empty()) throw Error(ErrorCode::InvalidArgument, "empty profile");
  for (const auto& s : segments) {
    if (x < s.x1) return s;
  }
  return segments.back();
}

double Profile::value(const ProfileSegment& s, double x) {
  if (s.x1 == s.x0) return s.z0;
  return s.z0 + (s.z1 - s.z0) * (x - s.x0) / (s.x1 - s.x0);
}

// ---------------------------------------------------------------------------
// Region model

namespace {

constexpr double kBreakTol = 1e-12;

struct Elevations {
  double length;     // B
  double thickness;  // T_s; also slab thickness and crest-wall thickness
  double height;     // P
  double base_start; // B_o
  double base_end;   // B_o + B_b
  double span;       // B - T_s, horizontal extent of each ramp

  double inlet_ramp(double x) const { return std::clamp(height * x / span, 0.0, height); }
  double outlet_ramp(double x) const {
    return std::clamp(height * (length - x) / span, 0.0, height);
  }
  double slab_floor(double ramp) const { return std::max(0.0, ramp - thickness); }

  // `m` picks the branch (it is the midpoint of the piece being built).
  double inlet_bottom(double x, double m) const {
    return m <= base_end ? 0.0 : slab_floor(inlet_ramp(x));
  }
  double outlet_bottom(double x, double m) const {
    return m >= base_start ? 0.0 : slab_floor(outlet_ramp(x));
  }
  double wall_bottom(double x, double m) const {
    if (m < base_start) return slab_floor(outlet_ramp(x));
    if (m > base_end) return slab_floor(inlet_ramp(x));
    return 0.0;
  }

  std::vector<double> kinks() const {
    std::vector<double> k = {0.0,
                             thickness,
                             length - thickness,
                             length,
                             base_start,
                             base_end,
                             thickness * span / height,
                             length - thickness * span / height};
    std::erase_if(k, [&](double x) { return x < 0.0 || x > length; });
    std::sort(k.begin(), k.end());
    return k;
  }
};

template <typename Fn>
Profile make_profile(double x0, double x1, const std::vector<double>& kinks, Fn fn) {
  std::vector<double> xs{x0};
  for (double k : kinks) {
    if (k > x0 + kBreakTol && k < x1 - kBreakTol) xs.push_back(k);
  }
  xs.push_back(x1);
  Profile p;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i];
    const double b = xs[i + 1];
    const double m = 0.5 * (a + b);
    p.segments.push_back({a, b, fn(a, m), fn(b, m)});
  }
  return p;
}

}  // namespace

bool plan_is_meshable(const PkwDerived& d) {
  return outlet_half_width(d, 0.0) > kMinRegionWidth &&
         inlet_half_width(d, d.length) > kMinRegionWidth &&
         d.wall_thickness_transverse > kMinRegionWidth;
}

std::vector<PlanRegion> build_regions(const PkwDerived& d, const PkwFixed& fixed) {
  const Elevations e{d.length,          d.wall_thickness, fixed.height, d.outlet_overhang,
                     d.length - d.inlet_overhang, d.length - d.wall_thickness};
  const auto kinks = e.kinks();
  const double b = d.length;
  const double ts = d.wall_thickness;
  const double t = std::tan(d.sidewall_angle);
  const double wu = d.unit_width;
  const double p = fixed.height;

  auto top_flat = [p](double, double) { return p; };
  auto wall_lo = [&e](double x, double m) { return e.wall_bottom(x, m); };
  auto inlet_hi = [&e](double x, double) { return e.inlet_ramp(x); };
  auto inlet_lo = [&e](double x, double m) { return e.inlet_bottom(x, m); };
  auto outlet_hi = [&e](double x, double) { return e.outlet_ramp(x); };
  auto outlet_lo = [&e](double x, double m) { return e.outlet_bottom(x, m); };

  auto wall_region = [&](RegionKind kind, int unit, double x0, double x1, LinearFn lo,
                         LinearFn hi) {
    return PlanRegion{kind, unit, x0, x1, lo, hi, make_profile(x0, x1, kinks, wall_lo),
                      make_profile(x0, x1, kinks, top_flat)};
  };

  std::vector<PlanRegion> regions;
  for (int u = 0; u < fixed.units; ++u) {
    const double y0 = fixed.width * u / fixed.units;
    const double y1 = fixed.width * (u + 1) / fixed.units;
    const LinearFn boundary_lo{y0, 0.0};
    const LinearFn outlet_face_lo{y0 + 0.5 * d.outlet_width_up - ts * t, t};
    const LinearFn inlet_face_lo{y0 + 0.5 * (wu - d.inlet_width_up), t};
    const LinearFn inlet_face_hi{y0 + 0.5 * (wu + d.inlet_width_up), -t};
    const LinearFn outlet_face_hi{y1 - 0.5 * d.outlet_width_up + ts * t, -t};
    const LinearFn boundary_hi{y1, 0.0};

    for (const auto& [lo, hi] : {std::pair{boundary_lo, outlet_face_lo},
                                 std::pair{outlet_face_hi, boundary_hi}}) {
      regions.push_back(wall_region(RegionKind::UpstreamCrestWall, u, 0.0, ts, lo, hi));
      regions.push_back(PlanRegion{RegionKind::OutletChannel, u, ts, b, lo, hi,
                                   make_profile(ts, b, kinks, outlet_lo),
                                   make_profile(ts, b, kinks, outlet_hi)});
    }
    regions.push_back(wall_region(RegionKind::Sidewall, u, 0.0, b, outlet_face_lo, inlet_face_lo));
    regions.push_back(wall_region(RegionKind::Sidewall, u, 0.0, b, inlet_face_hi, outlet_face_hi));
    regions.push_back(PlanRegion{RegionKind::InletChannel, u, 0.0, b - ts, inlet_face_lo,
                                 inlet_face_hi, make_profile(0.0, b - ts, kinks, inlet_lo),
                                 make_profile(0.0, b - ts, kinks, inlet_hi)});
    regions.push_back(
        wall_region(RegionKind::DownstreamCrestWall, u, b - ts, b, inlet_face_lo, inlet_face_hi));
  }

  for (const auto& r : regions) {
    const double w = std::min(r.width(r.x0), r.width(r.x1));
    if (!(w > kMinRegionWidth) || !(r.x1 - r.x0 > kMinRegionWidth)) {
      throw Error(ErrorCode::DegenerateRegion,
                  std::string(to_string(r.kind)) + " of unit " + std::to_string(r.unit_index) +
                      " has footprint width " + std::to_string(w) + " m");
    }
  }
  return regions;
}

// ---------------------------------------------------------------------------
// Tessellation

namespace {

constexpr double kOrderTol = 1e-12;   // two elevations closer than this are one
constexpr double kWeldTol = 1e-9;     // z clustering on a plan node line

struct Lane {
  LinearFn lo;
  LinearFn hi;
  std::vector<const PlanRegion*> regions;
};

struct Cell {
  ProfileSegment lo;
  ProfileSegment hi;
};

// Linear function restricted to one slab, sampled at both ends and middle.
struct SlabFn {
  double a = 0.0;
  double b = 0.0;
  double mid = 0.0;
};

struct Piece {
  SlabFn bottom;
  SlabFn top;
};

std::vector<Piece> difference(const SlabFn& lo, const SlabFn& hi, const std::optional<Cell>& other,
                              const SlabFn& olo, const SlabFn& ohi) {
  std::vector<Piece> out;
  if (!(hi.mid - lo.mid > kOrderTol)) return out;
  if (!other) {
    out.push_back({lo, hi});
    return out;
  }
  if (lo.mid < olo.mid - kOrderTol) out.push_back({lo, hi.mid < olo.mid ? hi : olo});
  if (hi.mid > ohi.mid + kOrderTol) out.push_back({lo.mid > ohi.mid ? lo : ohi, hi});
  return out;
}

class Mesher {
 public:
  Mesher(const std::vector<PlanRegion>& regions, int x_segments) {
    build_lanes(regions);
    build_breakpoints(regions, x_segments);
    build_cells();
    insert_crossings();
    build_cells();
    build_clusters();
  }

  TriangleMesh run() {
    emit_caps();
    emit_interfaces();
    emit_cross_faces();
    return std::move(mesh_);
  }

 private:
  void build_lanes(const std::vector<PlanRegion>& regions) {
    if (regions.empty()) throw Error(ErrorCode::EmptyMesh, "no regions to tessellate");
    double xmin = regions.front().x0, xmax = regions.front().x1;
    for (const auto& r : regions) {
      xmin = std::min(xmin, r.x0);
      xmax = std::max(xmax, r.x1);
      auto it = std::find_if(lanes_.begin(), lanes_.end(),
                             [&](const Lane& l) { return l.lo == r.y_lo && l.hi == r.y_hi; });
      if (it == lanes_.end()) {
        lanes_.push_back(Lane{r.y_lo, r.y_hi, {}});
        it = std::prev(lanes_.end());
      }
      it->regions.push_back(&r);
    }
    const double xm = 0.5 * (xmin + xmax);
    std::sort(lanes_.begin(), lanes_.end(),
              [xm](const Lane& a, const Lane& b) { return a.lo(xm) < b.lo(xm); });
    lines_.push_back(lanes_.front().lo);
    for (std::size_t j = 0; j < lanes_.size(); ++j) {
      if (j + 1 < lanes_.size() && !(lanes_[j].hi == lanes_[j + 1].lo)) {
        throw Error(ErrorCode::StitchFailure,
                    "plan lanes " + std::to_string(j) + " and " + std::to_string(j + 1) +
                        " do not share a boundary line");
      }
      lines_.push_back(lanes_[j].hi);
    }
  }

  static void sort_unique(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    std::vector<double> out;
    for (double x : xs) {
      if (out.empty() || x - out.back() > kBreakTol) out.push_back(x);
    }
    xs = std::move(out);
  }

  void build_breakpoints(const std::vector<PlanRegion>& regions, int x_segments) {
    if (x_segments < 1) throw Error(ErrorCode::InvalidArgument, "x_segments must be >= 1");
    std::vector<double> xs;
    for (const auto& r : regions) {
      xs.push_back(r.x0);
      xs.push_back(r.x1);
      for (const auto* prof : {&r.z_lo, &r.z_hi}) {
        for (const auto& s : prof->segments) {
          xs.push_back(s.x0);
          xs.push_back(s.x1);
        }
      }
    }
    sort_unique(xs);
    xs_.clear();
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      for (int s = 0; s < x_segments; ++s) {
        xs_.push_back(xs[i] + (xs[i + 1] - xs[i]) * s / x_segments);
      }
    }
    xs_.push_back(xs.back());
  }

  std::optional<Cell> find_cell(std::size_t lane, double a, double b) const {
    const double m = 0.5 * (a + b);
    for (const PlanRegion* r : lanes_[lane].regions) {
      if (r->x0 <= m && m <= r->x1) return Cell{r->z_lo.segment_at(m), r->z_hi.segment_at(m)};
    }
    return std::nullopt;
  }

  void build_cells() {
    cells_.assign(slabs(), std::vector<std::optional<Cell>>(lanes_.size()));
    for (std::size_t k = 0; k < slabs(); ++k) {
      for (std::size_t j = 0; j < lanes_.size(); ++j) {
        cells_[k][j] = find_cell(j, xs_[k], xs_[k + 1]);
      }
    }
  }

  // Splits slabs where an elevation of one lane crosses an elevation of its
  // neighbour, so that every interface piece is a trapezoid.
  void insert_crossings() {
    std::vector<double> extra;
    for (std::size_t k = 0; k < slabs(); ++k) {
      const double a = xs_[k], b = xs_[k + 1];
      for (std::size_t j = 1; j < lanes_.size(); ++j) {
        const auto& ca = cells_[k][j - 1];
        const auto& cb = cells_[k][j];
        if (!ca || !cb) continue;
        for (const auto* f : {&ca->lo, &ca->hi}) {
          for (const auto* g : {&cb->lo, &cb->hi}) {
            const double da = Profile::value(*f, a) - Profile::value(*g, a);
            const double db = Profile::value(*f, b) - Profile::value(*g, b);
            if ((da > kOrderTol && db < -kOrderTol) || (da < -kOrderTol && db > kOrderTol)) {
              extra.push_back(a + (b - a) * da / (da - db));
            }
          }
        }
      }
    }
    xs_.insert(xs_.end(), extra.begin(), extra.end());
    sort_unique(xs_);
  }

  std::size_t slabs() const { return xs_.size() - 1; }
  std::size_t node(std::size_t k, std::size_t j) const { return k * lines_.size() + j; }

  void build_clusters() {
    reps_.assign(xs_.size() * lines_.size(), {});
    ids_.assign(reps_.size(), {});
    for (std::size_t k = 0; k < xs_.size(); ++k) {
      for (std::size_t j = 0; j < lines_.size(); ++j) {
        std::vector<double> zs;
        for (std::size_t lane : {j - 1, j}) {
          if (lane >= lanes_.size()) continue;  // wraps for j == 0
          for (std::size_t slab : {k - 1, k}) {
            if (slab >= slabs()) continue;
            const auto& c = cells_[slab][lane];
            if (!c) continue;
            zs.push_back(Profile::value(c->lo, xs_[k]));
            zs.push_back(Profile::value(c->hi, xs_[k]));
          }
        }
        std::sort(zs.begin(), zs.end());
        auto& reps = reps_[node(k, j)];
        std::size_t start = 0;
        for (std::size_t i = 1; i <= zs.size(); ++i) {
          if (i == zs.size() || zs[i] - zs[i - 1] > kWeldTol) {
            reps.push_back(representative(zs, start, i));
            start = i;
          }
        }
        ids_[node(k, j)].assign(reps.size(), -1);
      }
    }
  }

  // Most frequent value of zs[first, last); ties go to the smallest.
  static double representative(const std::vector<double>& zs, std::size_t first, std::size_t last) {
    double best = zs[first];
    std::size_t best_count = 0;
    for (std::size_t i = first; i < last;) {
      std::size_t k = i;
      while (k < last && zs[k] == zs[i]) ++k;
      if (k - i > best_count) {
        best_count = k - i;
        best = zs[i];
      }
      i = k;
    }
    return best;
  }

  std::size_t cluster(std::size_t k, std::size_t j, double z) const {
    const auto& reps = reps_[node(k, j)];
    std::size_t best = reps.size();
    double best_d = kWeldTol;
    for (std::size_t c = 0; c < reps.size(); ++c) {
      const double dist = std::abs(reps[c] - z);
      if (dist <= best_d) {
        best_d = dist;
        best = c;
      }
    }
    if (best == reps.size()) {
      throw Error(ErrorCode::StitchFailure, "elevation " + std::to_string(z) +
                                                " not registered at plan node (" +
                                                std::to_string(k) + "," + std::to_string(j) + ")");
    }
    return best;
  }

  std::uint32_t vertex(std::size_t k, std::size_t j, std::size_t c) {
    int& id = ids_[node(k, j)][c];
    if (id < 0) {
      id = static_cast<int>(mesh_.vertices.size());
      mesh_.vertices.push_back({xs_[k], lines_[j](xs_[k]), reps_[node(k, j)][c]});
    }
    return static_cast<std::uint32_t>(id);
  }

  std::vector<std::uint32_t> column(std::size_t k, std::size_t j, double z0, double z1) {
    std::size_t c0 = cluster(k, j, z0), c1 = cluster(k, j, z1);
    if (c0 > c1) std::swap(c0, c1);
    std::vector<std::uint32_t> out;
    for (std::size_t c = c0; c <= c1; ++c) out.push_back(vertex(k, j, c));
    return out;
  }

  void triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& outward) {
    const auto& va = mesh_.vertices[a];
    const Vec3 n = cross(mesh_.vertices[b] - va, mesh_.vertices[c] - va);
    if (dot(n, outward) < 0.0) std::swap(b, c);
    mesh_.triangles.push_back({a, b, c});
  }

  // Triangulates a planar face bounded by two vertical vertex columns that
  // share their bottom and top edges.
  void zipper(const std::vector<std::uint32_t>& left, const std::vector<std::uint32_t>& right,
              const Vec3& outward) {
    if (left.size() <= 1 && right.size() <= 1) return;
    std::size_t i = 0, j = 0;
    while (i + 1 < left.size() || j + 1 < right.size()) {
      const bool advance_left =
          j + 1 >= right.size() ||
          (i + 1 < left.size() && mesh_.vertices[left[i + 1]].z <= mesh_.vertices[right[j + 1]].z);
      if (advance_left) {
        triangle(left[i], right[j], left[i + 1], outward);
        ++i;
      } else {
        triangle(left[i], right[j], right[j + 1], outward);
        ++j;
      }
    }
  }

  void emit_caps() {
    for (std::size_t k = 0; k < slabs(); ++k) {
      const double a = xs_[k], b = xs_[k + 1];
      for (std::size_t j = 0; j < lanes_.size(); ++j) {
        const auto& c = cells_[k][j];
        if (!c) continue;
        for (const auto& [seg, up] : {std::pair{&c->hi, 1.0}, std::pair{&c->lo, -1.0}}) {
          const double za = Profile::value(*seg, a);
          const double zb = Profile::value(*seg, b);
          const std::uint32_t v00 = vertex(k, j, cluster(k, j, za));
          const std::uint32_t v01 = vertex(k, j + 1, cluster(k, j + 1, za));
          const std::uint32_t v10 = vertex(k + 1, j, cluster(k + 1, j, zb));
          const std::uint32_t v11 = vertex(k + 1, j + 1, cluster(k + 1, j + 1, zb));
          triangle(v00, v10, v11, {0.0, 0.0, up});
          triangle(v00, v11, v01, {0.0, 0.0, up});
        }
      }
    }
  }

  static SlabFn sample(const ProfileSegment& s, double a, double b) {
    return {Profile::value(s, a), Profile::value(s, b), Profile::value(s, 0.5 * (a + b))};
  }

  void emit_interfaces() {
    for (std::size_t k = 0; k < slabs(); ++k) {
      const double a = xs_[k], b = xs_[k + 1];
      for (std::size_t j = 0; j < lines_.size(); ++j) {
        const std::optional<Cell> below = j >= 1 ? cells_[k][j - 1] : std::nullopt;
        const std::optional<Cell> above = j < lanes_.size() ? cells_[k][j] : std::nullopt;
        SlabFn blo, bhi, alo, ahi;
        if (below) blo = sample(below->lo, a, b), bhi = sample(below->hi, a, b);
        if (above) alo = sample(above->lo, a, b), ahi = sample(above->hi, a, b);
        const Vec3 normal{-lines_[j].slope, 1.0, 0.0};
        if (below) {
          for (const auto& p : difference(blo, bhi, above, alo, ahi)) {
            zipper(column(k, j, p.bottom.a, p.top.a), column(k + 1, j, p.bottom.b, p.top.b), normal);
          }
        }
        if (above) {
          for (const auto& p : difference(alo, ahi, below, blo, bhi)) {
            zipper(column(k, j, p.bottom.a, p.top.a), column(k + 1, j, p.bottom.b, p.top.b),
                   normal * -1.0);
          }
        }
      }
    }
  }

  void emit_cross_faces() {
    for (std::size_t k = 0; k < xs_.size(); ++k) {
      const double x = xs_[k];
      for (std::size_t j = 0; j < lanes_.size(); ++j) {
        const std::optional<Cell> before = k >= 1 ? cells_[k - 1][j] : std::nullopt;
        const std::optional<Cell> after = k < slabs() ? cells_[k][j] : std::nullopt;
        auto flat = [x](const ProfileSegment& s) {
          const double v = Profile::value(s, x);
          return SlabFn{v, v, v};
        };
        SlabFn plo, phi, nlo, nhi;
        if (before) plo = flat(before->lo), phi = flat(before->hi);
        if (after) nlo = flat(after->lo), nhi = flat(after->hi);
        if (before) {
          for (const auto& p : difference(plo, phi, after, nlo, nhi)) {
            zipper(column(k, j, p.bottom.a, p.top.a), column(k, j + 1, p.bottom.a, p.top.a),
                   {1.0, 0.0, 0.0});
          }
        }
        if (after) {
          for (const auto& p : difference(nlo, nhi, before, plo, phi)) {
            zipper(column(k, j, p.bottom.a, p.top.a), column(k, j + 1, p.bottom.a, p.top.a),
                   {-1.0, 0.0, 0.0});
          }
        }
      }
    }
  }

  std::vector<Lane> lanes_;
  std::vector<LinearFn> lines_;
  std::vector<double> xs_;
  std::vector<std::vector<std::optional<Cell>>> cells_;
  std::vector<std::vector<double>> reps_;
  std::vector<std::vector<int>> ids_;
  TriangleMesh mesh_;
};

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

TriangleMesh tessellate(const std::vector<PlanRegion>& regions, int x_segments) {
  TriangleMesh mesh = Mesher(regions, x_segments).run();

  std::unordered_map<std::uint64_t, int> counts;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) ++counts[edge_key(t[e], t[(e + 1) % 3])];
  }
  std::vector<std::uint64_t> bad;
  for (const auto& [key, n] : counts) {
    if (n != 2) bad.push_back(key);
  }
  if (!bad.empty()) {
    std::sort(bad.begin(), bad.end());
    std::ostringstream msg;
    msg << bad.size() << " open or non-manifold edges:";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 16); ++i) {
      const auto a = mesh.vertices[bad[i] >> 32];
      const auto b = mesh.vertices[bad[i] & 0xffffffffu];
      msg << " [(" << a.x << "," << a.y << "," << a.z << ")-(" << b.x << "," << b.y << "," << b.z
          << ") x" << counts[bad[i]] << "]";
    }
    throw Error(ErrorCode::StitchFailure, msg.str());
  }
  return mesh;
}

TriangleMesh build_weir_mesh(const PkwDerived& derived, const PkwFixed& fixed, int x_segments) {
  return tessellate(build_regions(derived, fixed), x_segments);
}

double analytic_volume(const std::vector<PlanRegion>& regions) {
  double volume = 0.0;
  for (const auto& r : regions) {
    std::vector<double> xs{r.x0, r.x1};
    for (const auto* prof : {&r.z_lo, &r.z_hi}) {
      for (const auto& s : prof->segments) {
        xs.push_back(s.x0);
        xs.push_back(s.x1);
      }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const double a = xs[i], b = xs[i + 1];
      if (a < r.x0 || b > r.x1 || b <= a) continue;
      const double m = 0.5 * (a + b);
      const auto& lo = r.z_lo.segment_at(m);
      const auto& hi = r.z_hi.segment_at(m);
      auto f = [&](double x) { return (Profile::value(hi, x) - Profile::value(lo, x)) * r.width(x); };
      volume += (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    }
  }
  return volume;
}

double analytic_volume(const PkwDerived& derived, const PkwFixed& fixed) {
  return analytic_volume(build_regions(derived, fixed));
}

// ---------------------------------------------------------------------------
// Validation

double triangle_area(const TriangleMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const Vec3& a = mesh.vertices[tri[0]];
  return 0.5 * norm(cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a));
}

MeshReport validate_mesh(const TriangleMesh& mesh) {
  MeshReport report;
  report.n_vertices = mesh.vertices.size();
  report.n_triangles = mesh.triangles.size();

  struct EdgeUse {
    int count = 0;
    int direction = 0;  // +1 per traversal low->high, -1 per high->low
  };
  std::unordered_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e], b = t[(e + 1) % 3];
      auto& use = edges[edge_key(a, b)];
      ++use.count;
      use.direction += a < b ? 1 : -1;
    }
  }
  for (const auto& [key, use] : edges) {
    if (use.count == 1) ++report.n_boundary_edges;
    if (use.count > 2) ++report.n_nonmanifold_edges;
    if (use.count == 2 && use.direction != 0) ++report.n_inconsistent_edges;
  }
  report.watertight = report.n_boundary_edges == 0 && report.n_nonmanifold_edges == 0;

  if (!mesh.vertices.empty()) {
    const Vec3& v0 = mesh.vertices.front();
    report.bbox = {Interval{v0.x, v0.x}, Interval{v0.y, v0.y}, Interval{v0.z, v0.z}};
    for (const auto& v : mesh.vertices) {
      const double c[3] = {v.x, v.y, v.z};
      for (int i = 0; i < 3; ++i) {
        report.bbox[i].lo = std::min(report.bbox[i].lo, c[i]);
        report.bbox[i].hi = std::max(report.bbox[i].hi, c[i]);
      }
    }
  }

  double volume = 0.0;
  double min_area = mesh.triangles.empty() ? 0.0 : triangle_area(mesh, 0);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    volume += dot(a, cross(b, c));
    min_area = std::min(min_area, triangle_area(mesh, t));
  }
  report.signed_volume = volume / 6.0;
  report.min_triangle_area = min_area;
  return report;
}

// ---------------------------------------------------------------------------
// STL

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_stl(std::ostream& out, const TriangleMesh& mesh, std::string_view geometry_id) {
  std::string buf;
  buf.reserve(84 + 50 * mesh.triangles.size());
  std::string header = "pkwbench binary STL geometry=" + std::string(geometry_id);
  header.resize(80, '\0');
  buf += header;
  put_u32(buf, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = cross(b - a, c - a);
    const double len = norm(n);
    if (len > 0.0) n = n * (1.0 / len);
    for (const Vec3& v : {n, a, b, c}) {
      put_f32(buf, static_cast<float>(v.x));
      put_f32(buf, static_cast<float>(v.y));
      put_f32(buf, static_cast<float>(v.z));
    }
    buf.push_back('\0');
    buf.push_back('\0');
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing STL stream");
}

void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh,
               std::string_view geometry_id) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  write_stl(out, mesh, geometry_id);
}

TriangleMesh read_stl(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 84) throw Error(ErrorCode::MalformedStl, "file shorter than the 84-byte header");
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  const std::uint32_t count = get_u32(bytes + 80);
  const std::size_t expected = 84 + 50 * static_cast<std::size_t>(count);
  if (data.size() != expected) {
    throw Error(ErrorCode::MalformedStl,
                "declared " + std::to_string(count) + " triangles but payload holds " +
                    std::to_string((data.size() - 84) / 50) + " records (" +
                    std::to_string(data.size()) + " bytes)");
  }

  TriangleMesh mesh;
  std::map<std::array<std::uint32_t, 3>, std::uint32_t> welded;
  mesh.triangles.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const unsigned char* rec = bytes + 84 + 50 * static_cast<std::size_t>(t);
    std::array<std::uint32_t, 3> tri{};
    for (int v = 0; v < 3; ++v) {
      const unsigned char* p = rec + 12 + 12 * v;
      const std::array<std::uint32_t, 3> key{get_u32(p), get_u32(p + 4), get_u32(p + 8)};
      auto [it, inserted] = welded.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
      if (inserted) {
        mesh.vertices.push_back({std::bit_cast<float>(key[0]), std::bit_cast<float>(key[1]),
                                 std::bit_cast<float>(key[2])});
      }
      tri[v] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

TriangleMesh read_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_stl(in);
}

}  // namespace pkw
