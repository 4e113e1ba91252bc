#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace kz {

/// Identifier recorded in every manifest. The engine is std::mt19937_64, whose
/// output sequence is fixed by the C++ standard; the integer-to-double
/// conversion below is ours, so results do not depend on the standard library's
/// distribution implementations.
inline constexpr std::string_view kPrngId = "mt19937_64/open53";

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform_open();

    /// Uniform integer in [lo, hi] (inclusive), rejection sampled.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

    /// Uniform point of the open (d-1)-simplex {x_i > 0, sum x_i = 1}.
    std::vector<double> simplex(std::size_t d);

private:
    std::mt19937_64 engine_;
};

/// Fresh seed from the OS entropy source (used when the caller did not supply one).
std::uint64_t entropy_seed();

}  // namespace kz
