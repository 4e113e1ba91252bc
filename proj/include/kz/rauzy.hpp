#pragma once

// Rauzy-Veech induction, its Zorich acceleration, and the integer cocycle.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kz/iet.hpp"
#include "kz/int_matrix.hpp"

namespace kz {

/// One Rauzy-Veech move. With E = identity + unit entry (winner, loser),
/// lengths_before = E * lengths_after (before renormalization).
struct InductionStep {
    StepKind kind;
    int winner;
    int loser;
    IntMatrix matrix;
    Permutation new_perm;
};

/// Maximal run of same-kind Rauzy moves. Every move of a block has the same
/// winner, so the product matrix is I + e_winner * counts^T, where
/// counts[b] is the number of moves lost by symbol b.
struct ZorichBlock {
    StepKind kind;
    int winner;
    std::uint64_t count;
    std::vector<std::int64_t> loser_counts;
    Permutation start_perm;
    Permutation end_perm;

    /// Product of the block's elementary matrices, in order.
    IntMatrix matrix() const;
};

/// Blocks whose counts would exceed this are split.
inline constexpr std::int64_t kMaxBlockEntry = std::int64_t{1} << 62;

std::pair<Iet, InductionStep> rauzy_step(const Iet& iet);
std::pair<Iet, ZorichBlock> zorich_step(const Iet& iet);

/// Action of a block on the cohomology lattice: the inverse transpose of the
/// block's length matrix. Unimodular, and with Omega the permutation's
/// symplectic matrix it satisfies M * Omega_end * M^T = Omega_start.
IntMatrix cocycle_on_cohomology(const ZorichBlock& block);

/// Mutable Zorich induction state for long runs. `advance` performs one block
/// without heap allocation: whole cycles of the losing tail are subtracted at
/// once, then the remainder is stepped move by move.
class ZorichEngine {
public:
    struct Block {
        StepKind kind = StepKind::Top;
        int winner = 0;
        std::uint64_t count = 0;
        std::array<std::int64_t, kMaxSymbols> counts{};
    };

    explicit ZorichEngine(const Iet& iet);

    const Block& advance();

    const Block& last() const noexcept { return block_; }
    const Permutation& perm() const noexcept { return perm_; }
    std::size_t size() const noexcept { return perm_.size(); }
    double length(int symbol) const noexcept { return lengths_[symbol]; }
    double scale_log() const noexcept { return scale_log_; }
    std::uint64_t blocks() const noexcept { return blocks_; }
    std::uint64_t rauzy_steps() const noexcept { return rauzy_steps_; }

    Iet state() const;

private:
    Permutation perm_;
    std::array<double, kMaxSymbols> lengths_{};
    double scale_log_ = 0.0;
    std::uint64_t blocks_ = 0;
    std::uint64_t rauzy_steps_ = 0;
    Block block_;
};

using Rational = boost::multiprecision::cpp_rational;

/// Sequence of move kinds; `tie_step` is set when the run stopped on a tie
/// (the move with that index could not be performed).
struct InductionPath {
    std::vector<StepKind> kinds;
    std::optional<std::uint64_t> tie_step;
};

struct ExactStep {
    InductionStep step;
    std::vector<Rational> lengths;  ///< after the move, not renormalized
};

/// One Rauzy-Veech move in rational arithmetic. Throws Tie.
ExactStep exact_rauzy_step(const Permutation& perm, const std::vector<Rational>& lengths);

/// Induction in exact rational arithmetic.
InductionPath exact_induction_path(const Permutation& perm, std::vector<Rational> lengths, std::uint64_t steps);

/// Same decisions taken in double precision. Lengths are never divided by
/// their total, only rescaled by powers of two, so dyadic inputs with at most
/// 52 bits are followed exactly.
InductionPath float_induction_path(const Iet& iet, std::uint64_t steps);
InductionPath float_induction_path(const Permutation& perm, std::vector<double> lengths, std::uint64_t steps);

struct TraceRow {
    std::uint64_t block;
    StepKind kind;
    std::uint64_t count;
    double scale_log;
};

std::vector<TraceRow> zorich_trace(const Iet& iet, std::uint64_t blocks);
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

}  // namespace kz
