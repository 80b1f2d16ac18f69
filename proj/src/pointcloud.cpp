#include "pkw/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>

#include "pkw/bytes.hpp"
#include "pkw/error.hpp"
#include "pkw/rng.hpp"
#include "pkw/text.hpp"

namespace pkw {

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                          std::vector<std::uint32_t>* origin) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no triangles");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += triangle_area(mesh, t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyMesh, "mesh has zero surface area");

  PointCloud cloud;
  cloud.seed = seed;
  cloud.points.reserve(n);
  if (origin) {
    origin->clear();
    origin->reserve(n);
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    const auto t = static_cast<std::size_t>(it - cumulative.begin());
    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    cloud.points.push_back(a + (mesh.vertices[tri[1]] - a) * u + (mesh.vertices[tri[2]] - a) * v);
    if (origin) origin->push_back(static_cast<std::uint32_t>(t));
  }
  return cloud;
}

PointCloud normalize_unit_cube(const PointCloud& cloud) {
  if (cloud.frame != CloudFrame::World) {
    throw Error(ErrorCode::InvalidArgument, "cloud is already in the unit-cube frame");
  }
  if (cloud.points.empty()) throw Error(ErrorCode::DegenerateExtent, "empty cloud");
  Vec3 lo = cloud.points.front(), hi = lo;
  for (const auto& p : cloud.points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (extent < 1e-12) throw Error(ErrorCode::DegenerateExtent, "all extents below 1e-12 m");

  PointCloud out = cloud;
  out.frame = CloudFrame::UnitCube;
  out.transform = {lo, extent};
  for (auto& p : out.points) p = (p - lo) * (1.0 / extent);
  return out;
}

PointCloud denormalize(const PointCloud& cloud) {
  if (cloud.frame != CloudFrame::UnitCube) return cloud;
  PointCloud out = cloud;
  out.frame = CloudFrame::World;
  for (auto& p : out.points) p = cloud.transform.offset + p * cloud.transform.scale;
  out.transform = {};
  return out;
}

PointCloud subsample(const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  if (k > cloud.points.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot draw " + std::to_string(k) + " of " +
                                              std::to_string(cloud.points.size()) + " points");
  }
  std::vector<std::size_t> idx(cloud.points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  PointCloud out = cloud;
  out.points.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.points[i] = cloud.points[idx[i]];
  return out;
}

// ---------------------------------------------------------------------------
// Binary format: "WNPC" | u16 version | u64 count | u8 frame |
// f64 offset[3] | f64 scale | count x 3 f32, all little-endian.

namespace {

constexpr std::uint16_t kCloudVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 8 + 1 + 4 * 8;

using bytes::get_le;
using bytes::put_le;

}  // namespace

void write_cloud(std::ostream& out, const PointCloud& cloud) {
  std::string buf = "WNPC";
  buf.reserve(kHeaderBytes + 12 * cloud.points.size());
  put_le<std::uint16_t>(buf, kCloudVersion);
  put_le<std::uint64_t>(buf, cloud.points.size());
  buf.push_back(static_cast<char>(cloud.frame));
  put_le(buf, cloud.transform.offset.x);
  put_le(buf, cloud.transform.offset.y);
  put_le(buf, cloud.transform.offset.z);
  put_le(buf, cloud.transform.scale);
  for (const auto& p : cloud.points) {
    put_le(buf, static_cast<float>(p.x));
    put_le(buf, static_cast<float>(p.y));
    put_le(buf, static_cast<float>(p.z));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing cloud stream");
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  write_cloud(out, cloud);
}

PointCloud read_cloud(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kHeaderBytes || data.compare(0, 4, "WNPC") != 0) {
    throw Error(ErrorCode::MalformedCloud, "missing WNPC header");
  }
  const auto* b = reinterpret_cast<const unsigned char*>(data.data());
  const auto version = get_le<std::uint16_t>(b + 4);
  if (version != kCloudVersion) {
    throw Error(ErrorCode::MalformedCloud, "unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(b + 6);
  const std::uint8_t frame = b[14];
  if (frame > 1) throw Error(ErrorCode::MalformedCloud, "unknown frame flag");
  if (count > (data.size() - kHeaderBytes) / 12 || data.size() != kHeaderBytes + 12 * count) {
    throw Error(ErrorCode::MalformedCloud, "declared " + std::to_string(count) +
                                               " points, payload has " +
                                               std::to_string(data.size() - kHeaderBytes) + " bytes");
  }
  PointCloud cloud;
  cloud.frame = static_cast<CloudFrame>(frame);
  cloud.transform.offset = {get_le<double>(b + 15), get_le<double>(b + 23), get_le<double>(b + 31)};
  cloud.transform.scale = get_le<double>(b + 39);
  if (!(cloud.transform.scale > 0.0)) throw Error(ErrorCode::MalformedCloud, "scale must be > 0");
  cloud.points.resize(count);
  const unsigned char* p = b + kHeaderBytes;
  for (auto& pt : cloud.points) {
    pt = {get_le<float>(p), get_le<float>(p + 4), get_le<float>(p + 8)};
    p += 12;
  }
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_cloud(in);
}

void write_cloud_text(std::ostream& out, const PointCloud& cloud) {
  for (const auto& p : cloud.points) {
    out << text::format_sig(p.x, 9) << ',' << text::format_sig(p.y, 9) << ','
        << text::format_sig(p.z, 9) << '\n';
  }
}

PointCloud read_cloud_text(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 3) throw Error(ErrorCode::MalformedCloud, "line " + std::to_string(row));
    const auto x = text::parse_double(f[0]), y = text::parse_double(f[1]),
               z = text::parse_double(f[2]);
    if (!x || !y || !z) throw Error(ErrorCode::MalformedCloud, "line " + std::to_string(row));
    cloud.points.push_back({*x, *y, *z});
  }
  return cloud;
}

}  // namespace pkw
