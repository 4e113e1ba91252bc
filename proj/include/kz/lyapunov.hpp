#pragma once

// Lyapunov spectrum of the Zorich cocycle, normalized so that the top
// exponent is 1.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kz/errors.hpp"
#include "kz/iet.hpp"
#include "kz/int_matrix.hpp"

namespace kz {

/// Omega(a, b) = +1 if a precedes b on top and follows it on the bottom,
/// -1 in the reverse situation, 0 otherwise.
struct SymplecticStructure {
    IntMatrix omega;
    std::size_t rank;
};

SymplecticStructure symplectic_form(const Permutation& perm);

struct SpectrumOptions {
    std::uint64_t steps = 10'000'000;  ///< Zorich blocks, warm-up included
    std::uint64_t qr_period = 10;      ///< blocks between re-orthonormalizations
    std::size_t batches = 20;          ///< windows used for the standard errors
    double zero_floor = 0.02;          ///< |lambda| below max(floor, 3 stderr) counts as zero
    std::optional<double> max_stderr_2;
};

struct SpectrumEstimate {
    std::string perm_id;
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;
    std::uint64_t measured_steps = 0;
    std::uint64_t rauzy_steps = 0;
    std::uint64_t qr_period = 0;
    int genus = 0;
    int sigma = 0;

    std::vector<double> nu;              ///< all d exponents per Zorich step, descending
    std::vector<double> nu_stderr;
    std::vector<double> full_lambda;     ///< nu / nu_1
    std::vector<double> full_stderr;
    std::vector<double> lambda;          ///< symplectic part: full_lambda minus the sigma-1 closest to zero
    std::vector<double> lambda_stderr;
    int zero_count = 0;

    /// lambda_i + lambda_{2g+1-i}, i = 1..g.
    std::vector<double> symmetry_defects() const;
    double sym_defect_max() const;
    double stderr_2() const;
};

/// Thrown when options.max_stderr_2 is set and not met; carries the estimate.
class SpectrumNonConvergence : public NonConvergence {
public:
    SpectrumNonConvergence(const std::string& what, SpectrumEstimate estimate)
        : NonConvergence(what), estimate_(std::move(estimate)) {}
    const SpectrumEstimate& estimate() const noexcept { return estimate_; }

private:
    SpectrumEstimate estimate_;
};

/// Runs Zorich induction from simplex-uniform lengths drawn with `seed` and
/// tracks an orthonormal frame under the transposed block matrices.
SpectrumEstimate estimate_spectrum(const Permutation& perm, std::uint64_t seed, const SpectrumOptions& options);

/// Statistics over several seeds of one permutation.
struct SpectrumBatch {
    std::vector<double> mean;
    std::vector<double> spread;  ///< max - min per exponent
    std::vector<double> stddev;
    std::size_t runs = 0;
};

SpectrumBatch aggregate(const std::vector<SpectrumEstimate>& runs);

nlohmann::json spectrum_json(const SpectrumEstimate& e);
std::string spectrum_csv_header(int genus);
std::string spectrum_csv_row(const SpectrumEstimate& e, std::optional<double> wall_seconds);
std::string spectrum_csv_batch_rows(const std::vector<SpectrumEstimate>& runs);

}  // namespace kz
