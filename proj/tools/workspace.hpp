#pragma once

// Write-once artifact directory used by every pkwbench stage.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace pkw::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Provenance attached to each artifact as <artifact>.meta.json.
struct ArtifactMeta {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  std::string config_hash() const;  // FNV-1a of the canonical config dump
  nlohmann::json to_json() const;
};

class Workspace {
 public:
  Workspace(std::filesystem::path root, bool force);

  const std::filesystem::path& root() const { return root_; }
  bool force() const { return force_; }

  // workspace/<name>, created on demand.
  std::filesystem::path dir(std::string_view name) const;

  // Throws ArtifactExists when the file is already present and --force was
  // not given.
  void claim(const std::filesystem::path& path) const;

  // Claims, writes the content and its sidecar.
  void write_text(const std::filesystem::path& path, const std::string& content,
                  const ArtifactMeta& meta) const;
  void write_meta(const std::filesystem::path& path, const ArtifactMeta& meta) const;

  static std::string read_text(const std::filesystem::path& path);

 private:
  std::filesystem::path root_;
  bool force_ = false;
};

// Split names contain ':'; file names use '_' instead.
std::string split_file_stem(std::string_view split_name);

}  // namespace pkw::cli
