#include "kz/rng.hpp"

#include <cmath>

namespace kz {

double Rng::uniform_open()
{
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi)
{
    const std::uint64_t span = hi - lo;
    if (span == UINT64_MAX) return engine_();
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return lo + x % range;
}

std::vector<double> Rng::simplex(std::size_t d)
{
    std::vector<double> x(d);
    double total = 0.0;
    for (auto& v : x) {
        v = -std::log(uniform_open());
        total += v;
    }
    for (auto& v : x) v /= total;
    return x;
}

std::uint64_t entropy_seed()
{
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace kz
