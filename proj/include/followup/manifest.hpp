#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace followup {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// UTC, second precision, e.g. 2025-01-01T12:00:00Z.
std::string utc_timestamp();

/// Everything needed to repeat a run: the command, effective settings, seeds, backend
/// identities and digests of every file read or written.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> backends;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  /// Command-specific counts (records written, samples rejected, ...).
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  int exit_code = 0;

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

/// `<output>.manifest.json` next to the primary output.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace followup
