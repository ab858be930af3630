#pragma once

// Simulated file system: file bytes plus a persistent per-file tag, the
// analog of tags kept in extended attributes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "offdift/error.hpp"

namespace offdift::toyisa {

struct SimFile {
  std::vector<std::uint8_t> bytes;
  std::uint32_t tag = 0;
  friend bool operator==(const SimFile&, const SimFile&) = default;
};

using SimFileSystem = std::map<std::uint32_t, SimFile>;

inline std::map<std::uint32_t, std::uint32_t> file_tags(const SimFileSystem& fs) {
  std::map<std::uint32_t, std::uint32_t> out;
  for (const auto& [id, f] : fs) out[id] = f.tag;
  return out;
}

inline std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_binary(path);
  return {bytes.begin(), bytes.end()};
}

// Manifest lines: `file_id,hex_tag,path-to-bytes`; relative paths resolve
// against `base_dir`. An empty path means an empty file.
inline SimFileSystem parse_fs_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  SimFileSystem fs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = offdift::detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto c1 = body.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : body.find(',', c1 + 1);
    if (c2 == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "fs manifest line " + std::to_string(lineno) + ": expected id,tag,path");
    const auto id = static_cast<std::uint32_t>(offdift::detail::parse_int(offdift::detail::trim(body.substr(0, c1))));
    auto tag_text = std::string(offdift::detail::trim(body.substr(c1 + 1, c2 - c1 - 1)));
    if (!tag_text.starts_with("0x")) tag_text = "0x" + tag_text;
    SimFile f;
    f.tag = static_cast<std::uint32_t>(offdift::detail::parse_int(tag_text));
    const auto path = std::string(offdift::detail::trim(body.substr(c2 + 1)));
    if (!path.empty()) f.bytes = read_binary(base_dir / path);
    fs[id] = std::move(f);
  }
  return fs;
}

}  // namespace offdift::toyisa
