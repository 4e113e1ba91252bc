#pragma once

// Interval exchange transformations: permutation data, the stratum attached to
// a permutation, evaluation and long visit-count orbits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kz {

inline constexpr std::size_t kMaxSymbols = 32;

/// Which of the two last intervals is longer in an induction step.
enum class StepKind : std::uint8_t { Top, Bottom };

char to_char(StepKind k);

/// Combinatorial datum of an IET: two orderings of the symbols 0..d-1.
/// Public constructors take the user-facing labels 1..d.
class Permutation {
public:
    /// Rejects non-bijections and reducible pairs.
    static Permutation make(std::span<const int> top, std::span<const int> bottom);

    /// Parses comma separated label lists, e.g. ("1,2,3,4", "4,3,2,1").
    static Permutation parse(std::string_view top, std::string_view bottom);

    /// Standard (d..1) reversal permutation on d symbols.
    static Permutation hyperelliptic(std::size_t d);

    std::size_t size() const noexcept { return d_; }

    /// Symbol (0-based) at a position.
    int top(std::size_t pos) const noexcept { return top_[pos]; }
    int bottom(std::size_t pos) const noexcept { return bottom_[pos]; }
    int top_last() const noexcept { return top_[d_ - 1]; }
    int bottom_last() const noexcept { return bottom_[d_ - 1]; }

    std::size_t top_position(int symbol) const noexcept { return top_pos_[symbol]; }
    std::size_t bottom_position(int symbol) const noexcept { return bottom_pos_[symbol]; }

    /// Rows swapped; the permutation of the inverse map.
    Permutation inverse() const;

    /// Elementary Rauzy move. Top: the bottom-last symbol moves right after the
    /// top-last symbol in the bottom row. Bottom: symmetric.
    void rauzy_move(StepKind kind) noexcept;

    std::string top_string() const;
    std::string bottom_string() const;
    /// "top/bottom" label form, e.g. "1,2,3,4/4,3,2,1".
    std::string id() const;

    friend bool operator==(const Permutation& a, const Permutation& b) noexcept;

private:
    Permutation() = default;
    void index_positions() noexcept;

    std::uint8_t d_ = 0;
    std::array<std::uint8_t, kMaxSymbols> top_{};
    std::array<std::uint8_t, kMaxSymbols> bottom_{};
    std::array<std::uint8_t, kMaxSymbols> top_pos_{};
    std::array<std::uint8_t, kMaxSymbols> bottom_pos_{};
};

/// True when some proper prefix of top and bottom holds the same symbols.
bool is_reducible(std::span<const int> top, std::span<const int> bottom);

/// Stratum data of the suspension of a permutation.
///
/// `sigma` counts every vertex class of the suspension, including removable
/// (angle 2 pi) points, so that d = 2g + sigma - 1 always holds.
/// `abelian_orders` lists the zero order of the abelian differential at each of
/// those points (0 for a removable point); `kappa` lists the orders of its
/// square, 2 * order, for the genuine zeros only, so that sum(kappa) = 4g - 4.
struct StratumSignature {
    int genus = 0;
    int sigma = 0;
    std::vector<int> abelian_orders;
    std::vector<int> kappa;

    int marked_points() const;
    std::string label() const;  // e.g. "Q(4) = H(2)"
};

StratumSignature stratum_of(const Permutation& perm);

enum class Continuity { Right, Strict };

/// Permutation plus a normalized positive length vector.
class Iet {
public:
    /// Normalizes the lengths to unit total; scale_log records log(1/total).
    static Iet make(Permutation perm, std::vector<double> lengths, double scale_log = 0.0);

    /// Uniformly random lengths from the simplex.
    static Iet random(Permutation perm, std::uint64_t seed);

    const Permutation& perm() const noexcept { return perm_; }
    std::span<const double> lengths() const noexcept { return lengths_; }
    double length(int symbol) const noexcept { return lengths_[symbol]; }
    double scale_log() const noexcept { return scale_log_; }
    std::size_t size() const noexcept { return perm_.size(); }

    /// Left endpoint of a symbol's interval in the domain (top) and image (bottom) partitions.
    double top_start(int symbol) const;
    double bottom_start(int symbol) const;

    /// Symbol whose half-open domain interval contains x.
    int interval_of(double x) const;

    Iet inverse() const;

private:
    Iet(Permutation perm, std::vector<double> lengths, double scale_log)
        : perm_(perm), lengths_(std::move(lengths)), scale_log_(scale_log) {}

    Permutation perm_;
    std::vector<double> lengths_;
    double scale_log_ = 0.0;
};

/// Image of x; x must lie in [0, 1). Right-continuous by default; the strict
/// convention throws OnDiscontinuity at interior breakpoints.
double evaluate(const Iet& iet, double x, Continuity continuity = Continuity::Right);

/// Visit counts of the first n iterates of x0 to each interval.
std::vector<std::int64_t> visit_vector(const Iet& iet, double x0, std::uint64_t n);

/// Long-orbit walker. The point is carried in double-double arithmetic and is
/// re-derived from the visit counts every `kResyncPeriod` iterates, so the
/// position error stays at the level of one rounding of the starting point.
class Orbit {
public:
    static constexpr std::uint64_t kResyncPeriod = 1'000'000;

    Orbit(const Iet& iet, double x0);

    /// Records the visit of the current point and moves to its image.
    /// Returns the visited symbol; throws HitDiscontinuity.
    int step();

    double position() const noexcept { return pos_hi_ + pos_lo_; }
    std::uint64_t iterate() const noexcept { return iterate_; }
    std::span<const std::int64_t> visits() const noexcept { return visits_; }

private:
    void resync();

    std::size_t d_;
    std::vector<double> break_hi_, break_lo_;  // interior breakpoints, d - 1 of them
    std::vector<int> order_;                   // symbol of the k-th domain interval
    std::vector<double> shift_hi_, shift_lo_;  // translation per symbol
    double x0_;
    double pos_hi_, pos_lo_;
    std::uint64_t iterate_ = 0;
    std::vector<std::int64_t> visits_;
};

nlohmann::json to_json(const Iet& iet);
Iet iet_from_json(const nlohmann::json& j);

}  // namespace kz
