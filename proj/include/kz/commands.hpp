#pragma once

// Batch commands behind the CLI. Each takes the JSON input echo that is also
// stored in its manifest, so a manifest can be replayed verbatim.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "kz/manifest.hpp"

namespace kz {

struct CommandOutput {
    int exit_code = 0;  ///< 0 ok, 2 numeric non-convergence
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

/// Parses an integer count written either plainly or as "1e7".
std::uint64_t parse_count(const std::string& text, const std::string& what);

/// Inputs: top, bottom, steps, seeds, qr_period, batches, zero_floor, max_stderr_2, timing.
/// Writes lyap.csv and lyap.json.
CommandOutput run_lyap(const nlohmann::json& inputs, const std::filesystem::path& out);

/// Inputs: top, bottom, lengths|null, x0|null, seeds, first, last, per_decade, fit_lo, fit_hi,
/// forward_depth, backward_depth, compare|null. Writes deviate_series.csv,
/// deviate_slopes.csv, deviate_projection.csv and deviate.json.
CommandOutput run_deviate(const nlohmann::json& inputs, const std::filesystem::path& out);

/// Inputs: family, schedule, tolerance, max_patches. Writes boundary_sweep.csv and boundary.json.
CommandOutput run_boundary(const nlohmann::json& inputs, const std::filesystem::path& out);

/// Dispatches on manifest.command.
CommandOutput run_manifest(const Manifest& manifest, const std::filesystem::path& out);

/// Fills defaults so that the stored inputs are complete.
nlohmann::json lyap_defaults(nlohmann::json inputs);
nlohmann::json deviate_defaults(nlohmann::json inputs);
nlohmann::json boundary_defaults(nlohmann::json inputs);

}  // namespace kz
