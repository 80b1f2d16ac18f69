#pragma once

// Versioned binary model container: "WNSM", u32 version, u32 kind, payload.
// All integers little-endian, reals as IEEE doubles.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <variant>

#include "pkw/pointnet.hpp"
#include "pkw/surrogates.hpp"

namespace pkw {

enum class ModelKind : std::uint32_t { Tree = 1, Forest = 2, Gbm = 3, PointNet = 4 };

using AnyModel = std::variant<RegressionTree, ForestModel, BoostedModel, PointNetMini>;

ModelKind kind_of(const AnyModel& model);
std::string_view to_string(ModelKind kind);

void write_model(std::ostream& out, const AnyModel& model);
void write_model(const std::filesystem::path& path, const AnyModel& model);
// Throws MalformedModel on a bad magic, unknown version or kind, or truncation.
AnyModel read_model(std::istream& in);
AnyModel read_model(const std::filesystem::path& path);

}  // namespace pkw
