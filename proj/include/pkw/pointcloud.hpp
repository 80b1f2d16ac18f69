#pragma once

// Area-weighted surface sampling, unit-cube normalization and cloud files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pkw/solidmesh.hpp"
#include "pkw/vec3.hpp"

namespace pkw {

enum class CloudFrame : std::uint8_t {
  World = 0,
  UnitCube = 1,
};

// Maps unit-cube coordinates back to world meters: world = offset + scale * u.
struct CloudTransform {
  Vec3 offset{0.0, 0.0, 0.0};
  double scale = 1.0;

  // Factor applied to world coordinates during normalization (1 / scale).
  double normalization_factor() const { return 1.0 / scale; }
};

struct PointCloud {
  std::vector<Vec3> points;
  CloudFrame frame = CloudFrame::World;
  CloudTransform transform;
  std::string source_geometry_id;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDatasetCloudPoints = 100'000;
inline constexpr std::size_t kModelCloudPoints = 5'000;

// Triangle picked with probability proportional to area, then a uniform
// barycentric position. `origin`, when given, receives the triangle index of
// each point.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                          std::vector<std::uint32_t>* origin = nullptr);

// Isotropic fit of the tight bounding box into [0,1]^3 (long axis spans
// exactly [0,1]). Throws DegenerateExtent when every extent is below 1e-12 m.
PointCloud normalize_unit_cube(const PointCloud& cloud);
PointCloud denormalize(const PointCloud& cloud);

// k points drawn without replacement, in draw order.
PointCloud subsample(const PointCloud& cloud, std::size_t k, std::uint64_t seed);

void write_cloud(std::ostream& out, const PointCloud& cloud);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud(std::istream& in);
PointCloud read_cloud(const std::filesystem::path& path);

// One "x,y,z" line per point; reads back as a world-frame cloud.
void write_cloud_text(std::ostream& out, const PointCloud& cloud);
PointCloud read_cloud_text(std::istream& in);

}  // namespace pkw
