#pragma once

// Provenance record embedded in every output file.

#include <optional>
#include <string>

#include "json.hpp"

namespace kz {

inline constexpr const char* kVersion = "1.0.0";

struct Manifest {
    std::string command;
    nlohmann::json inputs;  ///< complete input echo; enough to redo the run
    std::string version = kVersion;
    std::string prng;
    std::optional<double> wall_seconds;

    /// FNV-1a 64 of the canonical (key-sorted, compact) JSON of command, inputs, version and prng.
    std::string input_hash() const;

    /// Everything except the wall time, so it is identical across re-runs.
    nlohmann::json deterministic_json() const;
    nlohmann::json to_json() const;

    /// One "# manifest: {...}" line for the top of a CSV file.
    std::string csv_comment() const;
};

Manifest make_manifest(std::string command, nlohmann::json inputs);

/// Accepts a manifest object, a report with a "manifest" member, or the text
/// of a CSV file whose first line is the manifest comment.
Manifest manifest_from_json(const nlohmann::json& j);
Manifest read_manifest(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace kz
