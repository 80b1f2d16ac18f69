#include "workspace.hpp"

#include <fstream>
#include <sstream>

#include "pkw/error.hpp"
#include "pkw/text.hpp"

namespace pkw::cli {

namespace fs = std::filesystem;

std::string ArtifactMeta::config_hash() const { return text::hex64(text::fnv1a(config.dump())); }

nlohmann::json ArtifactMeta::to_json() const {
  return {{"command", command},
          {"seed", seed},
          {"config", config},
          {"config_hash", config_hash()},
          {"tool_version", kToolVersion}};
}

Workspace::Workspace(fs::path root, bool force) : root_(std::move(root)), force_(force) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create workspace " + root_.string() + ": " + ec.message());
}

fs::path Workspace::dir(std::string_view name) const {
  const fs::path d = root_ / name;
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + d.string() + ": " + ec.message());
  return d;
}

void Workspace::claim(const fs::path& path) const {
  if (!force_ && fs::exists(path)) {
    throw Error(ErrorCode::ArtifactExists, path.string() + " already exists (use --force to overwrite)");
  }
}

void Workspace::write_text(const fs::path& path, const std::string& content, const ArtifactMeta& meta) const {
  claim(path);
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
  write_meta(path, meta);
}

void Workspace::write_meta(const fs::path& path, const ArtifactMeta& meta) const {
  const fs::path sidecar = path.string() + ".meta.json";
  std::ofstream out(sidecar, std::ios::binary);
  out << meta.to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + sidecar.string());
}

std::string Workspace::read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string split_file_stem(std::string_view split_name) {
  std::string s(split_name);
  for (char& c : s) {
    if (c == ':' || c == '/' || c == '+') c = '_';
  }
  return s;
}

}  // namespace pkw::cli
