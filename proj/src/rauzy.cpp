#include "kz/rauzy.hpp"

#include <cfloat>
#include <cmath>
#include <ostream>

#include "kz/errors.hpp"

namespace kz {

namespace {

void check_degenerate(std::span<const double> lengths, std::size_t d)
{
    for (std::size_t s = 0; s < d; ++s)
        if (lengths[s] < 1e-3 * DBL_EPSILON)
            throw DegenerateLengths("renormalized length of symbol " + std::to_string(s + 1) +
                                    " fell below 1e-3 machine epsilon");
}

// One move on unnormalized lengths; permutation and lengths are updated in place.
InductionStep move_in_place(Permutation& p, std::vector<double>& lengths)
{
    const int t = p.top_last();
    const int b = p.bottom_last();
    const double lt = lengths[t];
    const double lb = lengths[b];
    if (lt == lb) throw Tie("tie between symbols " + std::to_string(t + 1) + " and " + std::to_string(b + 1), 0);

    const StepKind kind = lt > lb ? StepKind::Top : StepKind::Bottom;
    const int winner = kind == StepKind::Top ? t : b;
    const int loser = kind == StepKind::Top ? b : t;
    lengths[winner] -= lengths[loser];
    p.rauzy_move(kind);

    IntMatrix e = IntMatrix::identity(p.size());
    e(winner, loser) = 1;
    return InductionStep{kind, winner, loser, std::move(e), p};
}

}  // namespace

IntMatrix ZorichBlock::matrix() const
{
    const std::size_t d = loser_counts.size();
    IntMatrix m = IntMatrix::identity(d);
    for (std::size_t b = 0; b < d; ++b) m(winner, b) += loser_counts[b];
    return m;
}

std::pair<Iet, InductionStep> rauzy_step(const Iet& iet)
{
    Permutation p = iet.perm();
    std::vector<double> lengths(iet.lengths().begin(), iet.lengths().end());
    auto step = move_in_place(p, lengths);
    Iet out = Iet::make(std::move(p), std::move(lengths), iet.scale_log());
    return {out, std::move(step)};
}

std::pair<Iet, ZorichBlock> zorich_step(const Iet& iet)
{
    ZorichEngine engine(iet);
    const auto& blk = engine.advance();
    ZorichBlock block{blk.kind,
                      blk.winner,
                      blk.count,
                      std::vector<std::int64_t>(blk.counts.begin(), blk.counts.begin() + iet.size()),
                      iet.perm(),
                      engine.perm()};
    return {engine.state(), std::move(block)};
}

IntMatrix cocycle_on_cohomology(const ZorichBlock& block)
{
    // Z = I + e_w c^T with c_w = 0, so Z^{-1} = I - e_w c^T and Z^{-T} = I - c e_w^T.
    const std::size_t d = block.loser_counts.size();
    IntMatrix m = IntMatrix::identity(d);
    for (std::size_t b = 0; b < d; ++b) m(b, block.winner) -= block.loser_counts[b];
    return m;
}

// --- engine ------------------------------------------------------------------

ZorichEngine::ZorichEngine(const Iet& iet) : perm_(iet.perm()), scale_log_(iet.scale_log())
{
    for (std::size_t s = 0; s < iet.size(); ++s) lengths_[s] = iet.length(static_cast<int>(s));
}

Iet ZorichEngine::state() const
{
    return Iet::make(perm_, std::vector<double>(lengths_.begin(), lengths_.begin() + size()), scale_log_);
}

const ZorichEngine::Block& ZorichEngine::advance()
{
    const std::size_t d = size();
    const int t = perm_.top_last();
    const int b = perm_.bottom_last();
    if (lengths_[t] == lengths_[b])
        throw Tie("tie between symbols " + std::to_string(t + 1) + " and " + std::to_string(b + 1) + " at Rauzy step " +
                      std::to_string(rauzy_steps_),
                  rauzy_steps_);

    Block& blk = block_;
    blk.kind = lengths_[t] > lengths_[b] ? StepKind::Top : StepKind::Bottom;
    blk.winner = blk.kind == StepKind::Top ? t : b;
    blk.count = 0;
    std::fill(blk.counts.begin(), blk.counts.begin() + d, 0);

    // The losers are the symbols after the winner in the other row; each move
    // rotates that tail by one, so after m moves the permutation is unchanged.
    const int w = blk.winner;
    const bool top = blk.kind == StepKind::Top;
    const std::size_t wpos = top ? perm_.bottom_position(w) : perm_.top_position(w);
    const std::size_t m = d - 1 - wpos;
    double tail = 0.0;
    for (std::size_t k = wpos + 1; k < d; ++k) tail += lengths_[top ? perm_.bottom(k) : perm_.top(k)];

    double remaining = lengths_[w];
    const double cycles_d = std::floor(remaining / tail) - 1.0;
    std::int64_t cycles = 0;
    if (cycles_d >= 1.0) {
        cycles = cycles_d > static_cast<double>(kMaxBlockEntry - 2) ? kMaxBlockEntry - 2
                                                                   : static_cast<std::int64_t>(cycles_d);
        for (std::size_t k = wpos + 1; k < d; ++k) blk.counts[top ? perm_.bottom(k) : perm_.top(k)] = cycles;
        remaining -= static_cast<double>(cycles) * tail;
        blk.count = static_cast<std::uint64_t>(cycles) * m;
    }

    const bool capped = cycles == kMaxBlockEntry - 2;
    while (!capped) {
        const int loser = top ? perm_.bottom_last() : perm_.top_last();
        const double l = lengths_[loser];
        if (remaining < l) break;
        if (remaining == l)
            throw Tie("tie between symbols " + std::to_string(w + 1) + " and " + std::to_string(loser + 1) +
                          " at Rauzy step " + std::to_string(rauzy_steps_ + blk.count),
                      rauzy_steps_ + blk.count);
        remaining -= l;
        ++blk.counts[loser];
        ++blk.count;
        perm_.rauzy_move(blk.kind);
    }
    lengths_[w] = remaining;

    double total = 0.0;
    for (std::size_t s = 0; s < d; ++s) total += lengths_[s];
    for (std::size_t s = 0; s < d; ++s) lengths_[s] /= total;
    scale_log_ -= std::log(total);
    check_degenerate(lengths_, d);

    ++blocks_;
    rauzy_steps_ += blk.count;
    return blk;
}

// --- oracle paths ----------------------------------------------------------------

ExactStep exact_rauzy_step(const Permutation& perm, const std::vector<Rational>& lengths)
{
    const int t = perm.top_last();
    const int b = perm.bottom_last();
    if (lengths[t] == lengths[b]) throw Tie("exact lengths of the last intervals are equal", 0);
    const StepKind kind = lengths[t] > lengths[b] ? StepKind::Top : StepKind::Bottom;
    const int winner = kind == StepKind::Top ? t : b;
    const int loser = kind == StepKind::Top ? b : t;
    ExactStep out{{kind, winner, loser, IntMatrix::identity(perm.size()), perm}, lengths};
    out.step.matrix(winner, loser) = 1;
    out.step.new_perm.rauzy_move(kind);
    out.lengths[winner] -= out.lengths[loser];
    return out;
}

InductionPath exact_induction_path(const Permutation& perm, std::vector<Rational> lengths, std::uint64_t steps)
{
    if (lengths.size() != perm.size()) throw InvalidInput("exact_induction_path: length vector size mismatch");
    for (const auto& l : lengths)
        if (l <= 0) throw InvalidInput("exact_induction_path: lengths must be positive");
    Permutation p = perm;
    InductionPath path;
    for (std::uint64_t k = 0; k < steps; ++k) {
        if (lengths[p.top_last()] == lengths[p.bottom_last()]) {
            path.tie_step = k;
            break;
        }
        auto next = exact_rauzy_step(p, lengths);
        Rational total = 0;
        for (const auto& l : next.lengths) total += l;
        for (auto& l : next.lengths) l /= total;
        lengths = std::move(next.lengths);
        p = next.step.new_perm;
        path.kinds.push_back(next.step.kind);
    }
    return path;
}

InductionPath float_induction_path(const Iet& iet, std::uint64_t steps)
{
    return float_induction_path(iet.perm(), std::vector<double>(iet.lengths().begin(), iet.lengths().end()), steps);
}

InductionPath float_induction_path(const Permutation& perm, std::vector<double> lengths, std::uint64_t steps)
{
    if (lengths.size() != perm.size()) throw InvalidInput("length vector does not match the permutation");
    for (double v : lengths)
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("IET lengths must be positive and finite");
    InductionPath path;
    Permutation p = perm;
    for (std::uint64_t k = 0; k < steps; ++k) {
        try {
            path.kinds.push_back(move_in_place(p, lengths).kind);
        } catch (const Tie&) {
            path.tie_step = k;
            break;
        }
        // Rescaling by powers of two is exact, so dyadic inputs stay exact.
        double total = 0.0;
        for (double v : lengths) total += v;
        const int shift = -std::ilogb(total);
        if (shift > 0)
            for (auto& v : lengths) v = std::ldexp(v, shift);
    }
    return path;
}

// --- trace ---------------------------------------------------------------------------

std::vector<TraceRow> zorich_trace(const Iet& iet, std::uint64_t blocks)
{
    ZorichEngine engine(iet);
    std::vector<TraceRow> rows;
    rows.reserve(blocks);
    for (std::uint64_t k = 0; k < blocks; ++k) {
        const auto& blk = engine.advance();
        rows.push_back({k, blk.kind, blk.count, engine.scale_log()});
    }
    return rows;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows)
{
    os << "step,kind,count,scale_log\n";
    const auto flags = os.flags();
    const auto prec = os.precision();
    os.precision(17);
    for (const auto& r : rows) os << r.block << ',' << to_char(r.kind) << ',' << r.count << ',' << r.scale_log << '\n';
    os.flags(flags);
    os.precision(prec);
}

}  // namespace kz
