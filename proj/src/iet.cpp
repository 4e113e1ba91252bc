#include "kz/iet.hpp"

#include <algorithm>
#include <charconv>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ddouble.hpp"
#include "kz/errors.hpp"
#include "kz/rng.hpp"

namespace kz {

using detail::DD;

char to_char(StepKind k) { return k == StepKind::Top ? 'T' : 'B'; }

bool is_reducible(std::span<const int> top, std::span<const int> bottom)
{
    const std::size_t d = top.size();
    std::vector<int> seen(d + 1, 0);
    int balance = 0;  // symbols seen in exactly one of the two prefixes
    for (std::size_t k = 0; k + 1 < d; ++k) {
        for (int s : {top[k], bottom[k]}) {
            if (seen[s] == 0) {
                seen[s] = 1;
                ++balance;
            } else if (seen[s] == 1) {
                seen[s] = 2;
                --balance;
            }
        }
        if (balance == 0) return true;
    }
    return false;
}

Permutation Permutation::make(std::span<const int> top, std::span<const int> bottom)
{
    const std::size_t d = top.size();
    if (d < 2) throw InvalidInput("permutation needs at least 2 symbols");
    if (bottom.size() != d) throw NotBijection("top and bottom rows have different lengths");
    if (d > kMaxSymbols) throw InvalidInput("permutation has more than " + std::to_string(kMaxSymbols) + " symbols");

    auto check_row = [d](std::span<const int> row, const char* name) {
        std::vector<bool> hit(d, false);
        for (int s : row) {
            if (s < 1 || static_cast<std::size_t>(s) > d || hit[s - 1])
                throw NotBijection(std::string(name) + " row is not a bijection of 1.." + std::to_string(d));
            hit[s - 1] = true;
        }
    };
    check_row(top, "top");
    check_row(bottom, "bottom");

    std::vector<int> t(d), b(d);
    for (std::size_t i = 0; i < d; ++i) {
        t[i] = top[i] - 1;
        b[i] = bottom[i] - 1;
    }
    if (is_reducible(t, b)) throw Reducible("permutation " + [&] {
        std::ostringstream os;
        for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << top[i];
        os << '/';
        for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << bottom[i];
        return os.str();
    }() + " is reducible");

    Permutation p;
    p.d_ = static_cast<std::uint8_t>(d);
    for (std::size_t i = 0; i < d; ++i) {
        p.top_[i] = static_cast<std::uint8_t>(t[i]);
        p.bottom_[i] = static_cast<std::uint8_t>(b[i]);
    }
    p.index_positions();
    return p;
}

namespace {

std::vector<int> parse_labels(std::string_view text)
{
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view tok = text.substr(pos, comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        int v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
            throw InvalidInput("cannot parse symbol '" + std::string(tok) + "' in '" + std::string(text) + "'");
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

}  // namespace

Permutation Permutation::parse(std::string_view top, std::string_view bottom)
{
    const auto t = parse_labels(top);
    const auto b = parse_labels(bottom);
    return make(t, b);
}

Permutation Permutation::hyperelliptic(std::size_t d)
{
    std::vector<int> t(d), b(d);
    std::iota(t.begin(), t.end(), 1);
    std::iota(b.rbegin(), b.rend(), 1);
    return make(t, b);
}

void Permutation::index_positions() noexcept
{
    for (std::size_t i = 0; i < d_; ++i) {
        top_pos_[top_[i]] = static_cast<std::uint8_t>(i);
        bottom_pos_[bottom_[i]] = static_cast<std::uint8_t>(i);
    }
}

Permutation Permutation::inverse() const
{
    Permutation p = *this;
    std::swap(p.top_, p.bottom_);
    std::swap(p.top_pos_, p.bottom_pos_);
    return p;
}

void Permutation::rauzy_move(StepKind kind) noexcept
{
    auto& row = kind == StepKind::Top ? bottom_ : top_;
    const auto& other = kind == StepKind::Top ? top_ : bottom_;
    const std::uint8_t winner = other[d_ - 1];
    const std::uint8_t loser = row[d_ - 1];
    std::size_t at = 0;
    while (row[at] != winner) ++at;
    for (std::size_t i = d_ - 1; i > at + 1; --i) row[i] = row[i - 1];
    row[at + 1] = loser;
    index_positions();
}

std::string Permutation::top_string() const
{
    std::string s;
    for (std::size_t i = 0; i < d_; ++i) s += (i ? "," : "") + std::to_string(top_[i] + 1);
    return s;
}

std::string Permutation::bottom_string() const
{
    std::string s;
    for (std::size_t i = 0; i < d_; ++i) s += (i ? "," : "") + std::to_string(bottom_[i] + 1);
    return s;
}

std::string Permutation::id() const { return top_string() + "/" + bottom_string(); }

bool operator==(const Permutation& a, const Permutation& b) noexcept
{
    return a.d_ == b.d_ && std::equal(a.top_.begin(), a.top_.begin() + a.d_, b.top_.begin()) &&
           std::equal(a.bottom_.begin(), a.bottom_.begin() + a.d_, b.bottom_.begin());
}

// --- stratum -----------------------------------------------------------------

int StratumSignature::marked_points() const
{
    return static_cast<int>(std::count(abelian_orders.begin(), abelian_orders.end(), 0));
}

std::string StratumSignature::label() const
{
    std::ostringstream os;
    os << "Q(";
    for (std::size_t i = 0; i < kappa.size(); ++i) os << (i ? "," : "") << kappa[i];
    os << ") = H(";
    for (std::size_t i = 0; i < abelian_orders.size(); ++i) os << (i ? "," : "") << abelian_orders[i];
    os << ")";
    return os.str();
}

// Vertices of the suspension polygon: top broken line P_0..P_d (ids 0..d) and
// bottom broken line Q_0..Q_d (ids d+1..2d+1). Gluing the two copies of each
// side identifies their endpoints. Walking once around a singular point sweeps
// the downward vertical direction exactly once per turn, and among polygon
// corners only the interior top vertices contain that direction, so the cone
// angle is 2 pi times the number of interior top vertices in the class.
StratumSignature stratum_of(const Permutation& perm)
{
    const std::size_t d = perm.size();
    std::vector<std::size_t> parent(2 * d + 2);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
    const std::size_t q0 = d + 1;
    unite(0, q0);
    unite(d, q0 + d);
    for (std::size_t a = 0; a < d; ++a) {
        const std::size_t i = perm.top_position(static_cast<int>(a));
        const std::size_t j = perm.bottom_position(static_cast<int>(a));
        unite(i, q0 + j);
        unite(i + 1, q0 + j + 1);
    }

    std::vector<int> turns(2 * d + 2, -1);
    for (std::size_t v = 0; v < 2 * d + 2; ++v) turns[find(v)] = std::max(turns[find(v)], 0);
    for (std::size_t i = 1; i < d; ++i) ++turns[find(i)];

    StratumSignature s;
    for (int t : turns) {
        if (t < 0) continue;
        s.abelian_orders.push_back(t - 1);
    }
    std::sort(s.abelian_orders.rbegin(), s.abelian_orders.rend());
    s.sigma = static_cast<int>(s.abelian_orders.size());
    s.genus = (static_cast<int>(d) - s.sigma + 1) / 2;
    for (int k : s.abelian_orders)
        if (k > 0) s.kappa.push_back(2 * k);
    return s;
}

// --- Iet -----------------------------------------------------------------------

Iet Iet::make(Permutation perm, std::vector<double> lengths, double scale_log)
{
    if (lengths.size() != perm.size())
        throw InvalidInput("length vector has " + std::to_string(lengths.size()) + " entries, permutation has " +
                           std::to_string(perm.size()) + " symbols");
    double total = 0.0;
    for (double v : lengths) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("IET lengths must be positive and finite");
        total += v;
    }
    for (auto& v : lengths) v /= total;
    for (double v : lengths)
        if (v < 1e-3 * DBL_EPSILON) throw DegenerateLengths("IET length below 1e-3 machine epsilon after normalization");
    return Iet(perm, std::move(lengths), scale_log - std::log(total));
}

Iet Iet::random(Permutation perm, std::uint64_t seed)
{
    Rng rng(seed);
    return make(perm, rng.simplex(perm.size()));
}

double Iet::top_start(int symbol) const
{
    double a = 0.0;
    for (std::size_t i = 0; perm_.top(i) != symbol; ++i) a += lengths_[perm_.top(i)];
    return a;
}

double Iet::bottom_start(int symbol) const
{
    double b = 0.0;
    for (std::size_t i = 0; perm_.bottom(i) != symbol; ++i) b += lengths_[perm_.bottom(i)];
    return b;
}

int Iet::interval_of(double x) const
{
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < size(); ++i) {
        a += lengths_[perm_.top(i)];
        if (x < a) return perm_.top(i);
    }
    return perm_.top_last();
}

Iet Iet::inverse() const { return Iet(perm_.inverse(), lengths_, scale_log_); }

double evaluate(const Iet& iet, double x, Continuity continuity)
{
    if (!(x >= 0.0 && x < 1.0)) throw InvalidInput("evaluate: point outside [0,1)");
    const auto& p = iet.perm();
    double a = 0.0;
    std::size_t pos = 0;
    for (; pos + 1 < p.size(); ++pos) {
        const double next = a + iet.length(p.top(pos));
        if (x < next) break;
        a = next;
    }
    if (continuity == Continuity::Strict && pos > 0 && x == a)
        throw OnDiscontinuity("evaluate: point is an interior breakpoint");
    const int symbol = p.top(pos);
    return x - a + iet.bottom_start(symbol);
}

std::vector<std::int64_t> visit_vector(const Iet& iet, double x0, std::uint64_t n)
{
    Orbit orbit(iet, x0);
    for (std::uint64_t k = 0; k < n; ++k) orbit.step();
    return {orbit.visits().begin(), orbit.visits().end()};
}

// --- Orbit ---------------------------------------------------------------------

Orbit::Orbit(const Iet& iet, double x0) : d_(iet.size()), x0_(x0), pos_hi_(x0), pos_lo_(0.0), visits_(iet.size(), 0)
{
    if (!(x0 >= 0.0 && x0 < 1.0)) throw InvalidInput("orbit start outside [0,1)");
    const auto& p = iet.perm();
    std::vector<DD> top_start(d_), bottom_start(d_);
    DD acc;
    for (std::size_t i = 0; i < d_; ++i) {
        top_start[p.top(i)] = acc;
        acc = detail::add(acc, DD{iet.length(p.top(i)), 0.0});
        order_.push_back(p.top(i));
        if (i + 1 < d_) {
            break_hi_.push_back(acc.hi);
            break_lo_.push_back(acc.lo);
        }
    }
    acc = DD{};
    for (std::size_t i = 0; i < d_; ++i) {
        bottom_start[p.bottom(i)] = acc;
        acc = detail::add(acc, DD{iet.length(p.bottom(i)), 0.0});
    }
    for (std::size_t s = 0; s < d_; ++s) {
        const DD shift = detail::add(bottom_start[s], detail::neg(top_start[s]));
        shift_hi_.push_back(shift.hi);
        shift_lo_.push_back(shift.lo);
    }
}

int Orbit::step()
{
    const DD pos{pos_hi_, pos_lo_};
    std::size_t k = 0;
    for (; k + 1 < d_; ++k) {
        const int c = detail::compare(pos, DD{break_hi_[k], break_lo_[k]});
        if (c < 0) break;
        if (c == 0)
            throw HitDiscontinuity("orbit hit an interior breakpoint at iterate " + std::to_string(iterate_), iterate_);
    }
    const int symbol = order_[k];
    const DD next = detail::add(pos, DD{shift_hi_[symbol], shift_lo_[symbol]});
    pos_hi_ = next.hi;
    pos_lo_ = next.lo;
    ++visits_[symbol];
    ++iterate_;
    if (iterate_ % kResyncPeriod == 0) resync();
    return symbol;
}

void Orbit::resync()
{
    DD acc{x0_, 0.0};
    for (std::size_t s = 0; s < d_; ++s) {
        const double v = static_cast<double>(visits_[s]);
        acc = detail::add(acc, detail::mul(DD{shift_hi_[s], shift_lo_[s]}, v));
    }
    pos_hi_ = acc.hi;
    pos_lo_ = acc.lo;
}

// --- serialization ---------------------------------------------------------------

nlohmann::json to_json(const Iet& iet)
{
    std::vector<int> top, bottom;
    for (std::size_t i = 0; i < iet.size(); ++i) {
        top.push_back(iet.perm().top(i) + 1);
        bottom.push_back(iet.perm().bottom(i) + 1);
    }
    return {{"top", top}, {"bottom", bottom}, {"lengths", std::vector<double>(iet.lengths().begin(), iet.lengths().end())}};
}

Iet iet_from_json(const nlohmann::json& j)
{
    const auto top = j.at("top").get<std::vector<int>>();
    const auto bottom = j.at("bottom").get<std::vector<int>>();
    return Iet::make(Permutation::make(top, bottom), j.at("lengths").get<std::vector<double>>());
}

}  // namespace kz
