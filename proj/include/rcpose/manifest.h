#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rcpose/serialization.h"

namespace rcpose {

// Provenance block written at the top of every output artifact.
struct RunManifest {
    std::string command;
    Json config = Json::object();  // effective options, defaults filled in
    std::uint64_t seed = 0;
    std::string tool_version;
    // (path as given, lowercase hex SHA-256 of the file bytes)
    std::vector<std::pair<std::string, std::string>> input_digests;
    // Left empty by default so reruns stay byte-identical.
    std::optional<std::string> timestamp;

    void add_input(const std::filesystem::path &path);
    Json to_json() const;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path &path);

// JSON-lines files start with {"manifest": {...}}.
void write_manifest_line(std::ostream &out, const RunManifest &m);
// CSV files start with "# {...}"; the header row follows.
void write_manifest_comment(std::ostream &out, const RunManifest &m);

// Current UTC time as ISO 8601, for callers that opt into timestamps.
std::string utc_timestamp();

}  // namespace rcpose
