#pragma once

// Watertight surface mesh of the type-A weir solid.
//
// The plan [0,B] x [0,W] is split into lanes bounded by straight lines
// y = a + b*x (unit boundaries, outlet faces, inlet faces). Every plan
// region is a column set: at a plan point it holds the solid interval
// [z_lo(x), z_hi(x)], both piecewise linear in x only. The solid is the
// union of all region columns.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pkw/geometry.hpp"
#include "pkw/vec3.hpp"

namespace pkw {

enum class RegionKind {
  InletChannel,
  OutletChannel,
  Sidewall,
  UpstreamCrestWall,
  DownstreamCrestWall,
};

std::string_view to_string(RegionKind kind);

struct LinearFn {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double x) const { return intercept + slope * x; }
  bool operator==(const LinearFn&) const = default;
};

struct ProfileSegment {
  double x0 = 0.0;
  double x1 = 0.0;
  double z0 = 0.0;
  double z1 = 0.0;
};

// Piecewise-linear elevation. Consecutive segments share x breakpoints but
// may jump in z there.
struct Profile {
  std::vector<ProfileSegment> segments;

  // Segment containing x; ties at a breakpoint resolve to the later segment.
  const ProfileSegment& segment_at(double x) const;
  // Linear value of `segment` extended to x.
  static double value(const ProfileSegment& segment, double x);
  double operator()(double x) const { return value(segment_at(x), x); }
};

struct PlanRegion {
  RegionKind kind = RegionKind::Sidewall;
  int unit_index = 0;
  double x0 = 0.0;
  double x1 = 0.0;
  LinearFn y_lo;
  LinearFn y_hi;
  Profile z_lo;
  Profile z_hi;

  double width(double x) const { return y_hi(x) - y_lo(x); }
};

inline constexpr double kMinRegionWidth = 1e-9;

// True when every lane keeps a width above kMinRegionWidth over [0, B]:
// the outlet half-width at x = 0 and the inlet half-width at x = B are the
// binding cases.
bool plan_is_meshable(const PkwDerived& derived);

// Throws DegenerateRegion when a footprint is thinner than kMinRegionWidth.
std::vector<PlanRegion> build_regions(const PkwDerived& derived, const PkwFixed& fixed);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

inline constexpr int kDefaultXSegments = 8;

// Meshes the union of the region columns. Throws StitchFailure if the
// result has boundary or non-manifold edges.
TriangleMesh tessellate(const std::vector<PlanRegion>& regions, int x_segments = kDefaultXSegments);

TriangleMesh build_weir_mesh(const PkwDerived& derived, const PkwFixed& fixed,
                             int x_segments = kDefaultXSegments);

// Closed-form volume from the region definitions (Simpson on each piece
// where the integrand is quadratic, hence exact).
double analytic_volume(const PkwDerived& derived, const PkwFixed& fixed);
double analytic_volume(const std::vector<PlanRegion>& regions);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MeshReport {
  bool watertight = false;
  std::size_t n_boundary_edges = 0;
  std::size_t n_nonmanifold_edges = 0;
  // Interior edges whose two triangles traverse them in the same direction.
  std::size_t n_inconsistent_edges = 0;
  double signed_volume = 0.0;
  std::array<Interval, 3> bbox{};
  double min_triangle_area = 0.0;
  std::size_t n_vertices = 0;
  std::size_t n_triangles = 0;
};

MeshReport validate_mesh(const TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, std::size_t t);

// Binary little-endian STL. Normals are recomputed from the winding.
void write_stl(std::ostream& out, const TriangleMesh& mesh, std::string_view geometry_id);
void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh,
               std::string_view geometry_id);
// Vertices with identical single-precision coordinates are welded.
TriangleMesh read_stl(std::istream& in);
TriangleMesh read_stl(const std::filesystem::path& path);

}  // namespace pkw
