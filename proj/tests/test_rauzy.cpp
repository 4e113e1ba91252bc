#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "kz/errors.hpp"
#include "kz/lyapunov.hpp"
#include "kz/rauzy.hpp"
#include "kz/rng.hpp"

using namespace kz;
using boost::multiprecision::cpp_int;

namespace {

using BigMatrix = std::vector<std::vector<cpp_int>>;

BigMatrix big(const IntMatrix& m)
{
    BigMatrix out(m.rows(), std::vector<cpp_int>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

BigMatrix mul(const BigMatrix& a, const BigMatrix& b)
{
    BigMatrix out(a.size(), std::vector<cpp_int>(b[0].size()));
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t k = 0; k < b.size(); ++k) {
            if (a[r][k] == 0) continue;
            for (std::size_t c = 0; c < b[0].size(); ++c) out[r][c] += a[r][k] * b[k][c];
        }
    return out;
}

BigMatrix transpose(const BigMatrix& a)
{
    BigMatrix out(a[0].size(), std::vector<cpp_int>(a.size()));
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < a[0].size(); ++c) out[c][r] = a[r][c];
    return out;
}

std::vector<Rational> rationals(std::initializer_list<std::pair<int, int>> values)
{
    std::vector<Rational> out;
    for (auto [p, q] : values) out.emplace_back(p, q);
    return out;
}

}  // namespace

TEST_CASE("single Rauzy move on the swap")
{
    const auto iet = Iet::make(Permutation::parse("1,2", "2,1"), {4.0 / 7.0, 3.0 / 7.0});
    const auto [next, step] = rauzy_step(iet);
    CHECK(step.kind == StepKind::Bottom);
    CHECK(step.winner == 0);
    CHECK(step.loser == 1);
    CHECK(step.matrix == IntMatrix{{1, 1}, {0, 1}});
    CHECK(next.perm().id() == "1,2/2,1");
    CHECK(next.length(0) == doctest::Approx(0.25));
    CHECK(next.length(1) == doctest::Approx(0.75));
}

TEST_CASE("top move on 1234/4321")
{
    const auto iet = Iet::make(Permutation::parse("1,2,3,4", "4,3,2,1"), {0.2, 0.3, 0.1, 0.4});
    const auto [next, step] = rauzy_step(iet);
    CHECK(step.kind == StepKind::Top);
    CHECK(step.winner == 3);
    CHECK(step.loser == 0);
    CHECK(next.perm().id() == "1,2,3,4/4,1,3,2");
    const std::vector<double> expect{0.2, 0.3, 0.1, 0.2};
    for (std::size_t s = 0; s < 4; ++s) CHECK(next.length(static_cast<int>(s)) == doctest::Approx(expect[s] / 0.8));
    CHECK(next.scale_log() == doctest::Approx(iet.scale_log() - std::log(0.8)));
}

TEST_CASE("Zorich block groups moves of one kind")
{
    const auto iet = Iet::make(Permutation::parse("1,2", "2,1"), {0.7, 0.3});
    const auto [next, block] = zorich_step(iet);
    CHECK(block.kind == StepKind::Bottom);
    CHECK(block.count == 2);
    CHECK(block.loser_counts == std::vector<std::int64_t>{0, 2});
    CHECK(block.matrix() == IntMatrix{{1, 2}, {0, 1}});
}

TEST_CASE("block matrix is the product of the elementary matrices")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Iet iet = Iet::random(Permutation::parse("1,2,3,4,5", "5,4,3,2,1"), seed);
        for (int b = 0; b < 10; ++b) {
            const auto [after, block] = zorich_step(iet);
            Iet cur = iet;
            IntMatrix product = IntMatrix::identity(iet.size());
            for (std::uint64_t k = 0; k < block.count; ++k) {
                auto [n, step] = rauzy_step(cur);
                REQUIRE(step.kind == block.kind);
                product = product * step.matrix;
                cur = n;
            }
            CHECK(product == block.matrix());
            CHECK(cur.perm() == block.end_perm);
            CHECK(determinant(block.matrix()) == 1);
            iet = after;
        }
    }
}

TEST_CASE("golden rotation has unit Zorich counts")
{
    const double phi = std::numbers::phi;
    Iet iet = Iet::make(Permutation::parse("1,2", "2,1"), {phi, 1.0});
    for (int b = 0; b < 20; ++b) {
        auto [next, block] = zorich_step(iet);
        CHECK(block.count == 1);
        iet = next;
    }
}

TEST_CASE("equal last lengths are a tie")
{
    const auto iet = Iet::make(Permutation::parse("1,2", "2,1"), {0.5, 0.5});
    CHECK_THROWS_AS(rauzy_step(iet), Tie);
    CHECK_THROWS_AS(zorich_step(iet), Tie);
    ZorichEngine engine(iet);
    CHECK_THROWS_AS(engine.advance(), Tie);
}

TEST_CASE("engine reproduces zorich_step")
{
    // Float induction amplifies rounding, so both are restarted from the same state every block.
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ZorichEngine engine(Iet::random(Permutation::parse("1,2,3,4,5,6", "6,5,4,3,2,1"), seed));
        for (int b = 0; b < 200; ++b) {
            const Iet iet = engine.state();
            ZorichEngine fresh(iet);
            auto [next, block] = zorich_step(iet);
            const auto& eb = fresh.advance();
            REQUIRE(eb.kind == block.kind);
            REQUIRE(eb.winner == block.winner);
            REQUIRE(eb.count == block.count);
            for (std::size_t s = 0; s < iet.size(); ++s) REQUIRE(eb.counts[s] == block.loser_counts[s]);
            REQUIRE(fresh.perm() == next.perm());
            CHECK(fresh.scale_log() == doctest::Approx(next.scale_log()).epsilon(1e-12));
            engine.advance();
        }
    }
}

TEST_CASE("cocycle preserves the symplectic form exactly")
{
    for (const auto& [top, bottom] : std::vector<std::pair<const char*, const char*>>{
             {"1,2,3,4", "4,3,2,1"}, {"1,2,3,4,5", "5,4,3,2,1"}, {"1,2,3,4,5,6", "6,5,4,3,2,1"}, {"1,2,3,4,5", "3,5,1,4,2"}}) {
        const auto perm = Permutation::parse(top, bottom);
        Iet iet = Iet::random(perm, 17);
        const auto omega_start = big(symplectic_form(perm).omega);
        BigMatrix total = big(IntMatrix::identity(perm.size()));
        for (int b = 0; b < 300; ++b) {
            auto [next, block] = zorich_step(iet);
            const auto m = cocycle_on_cohomology(block);
            CHECK(determinant(m) == 1);
            const auto om0 = big(symplectic_form(block.start_perm).omega);
            const auto om1 = big(symplectic_form(block.end_perm).omega);
            const auto bm = big(m);
            REQUIRE(mul(mul(bm, om1), transpose(bm)) == om0);
            total = mul(total, bm);
            iet = next;
        }
        const auto omega_end = big(symplectic_form(iet.perm()).omega);
        CHECK(mul(mul(total, omega_end), transpose(total)) == omega_start);
    }
}

TEST_CASE("cocycle of a two-move bottom block")
{
    const auto iet = Iet::make(Permutation::parse("1,2", "2,1"), {0.7, 0.3});
    const auto [next, block] = zorich_step(iet);
    const auto m = cocycle_on_cohomology(block);
    CHECK(m == IntMatrix{{1, 0}, {-2, 1}});
}

TEST_CASE("exact move satisfies lengths_before = E lengths_after")
{
    Rng rng(5);
    const auto perm = Permutation::parse("1,2,3,4,5", "5,3,1,4,2");
    std::vector<Rational> lengths;
    for (int s = 0; s < 5; ++s) lengths.emplace_back(static_cast<long long>(1 + rng.uniform_open() * 1e6), 1000);
    Permutation p = perm;
    for (int k = 0; k < 50; ++k) {
        const auto next = exact_rauzy_step(p, lengths);
        const auto& e = next.step.matrix;
        for (std::size_t r = 0; r < p.size(); ++r) {
            Rational acc = 0;
            for (std::size_t c = 0; c < p.size(); ++c) acc += Rational(e(r, c)) * next.lengths[c];
            REQUIRE(acc == lengths[r]);
        }
        lengths = next.lengths;
        p = next.step.new_perm;
    }
}

TEST_CASE("exact path of the 7/10 rotation")
{
    const auto perm = Permutation::parse("1,2", "2,1");
    const auto path = exact_induction_path(perm, rationals({{7, 10}, {3, 10}}), 10);
    CHECK(path.kinds == std::vector<StepKind>{StepKind::Bottom, StepKind::Bottom, StepKind::Top, StepKind::Top});
    REQUIRE(path.tie_step.has_value());
    CHECK(*path.tie_step == 4);
}

TEST_CASE("float and exact paths agree on generic rationals")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const auto perm = Permutation::parse("1,2,3,4", "4,3,2,1");
        std::vector<Rational> exact;
        std::vector<double> approx;
        for (int s = 0; s < 4; ++s) {
            const auto num = static_cast<long long>(1 + rng.uniform_open() * (1 << 20));
            exact.emplace_back(num, 1 << 20);
            approx.push_back(static_cast<double>(num) / (1 << 20));
        }
        const auto e = exact_induction_path(perm, exact, 25);
        const auto f = float_induction_path(Iet::make(perm, approx), 25);
        CHECK(e.kinds == f.kinds);
    }
}

TEST_CASE("dyadic lengths are followed exactly up to the tie")
{
    const auto perm = Permutation::parse("1,2,3,4,5", "5,4,3,2,1");
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        std::vector<Rational> exact;
        std::vector<double> approx;
        for (int s = 0; s < 5; ++s) {
            const auto num = static_cast<long long>(1 + rng.uniform_open() * ((1LL << 40) - 1));
            exact.emplace_back(num, 1LL << 40);
            approx.push_back(std::ldexp(static_cast<double>(num), -40));
        }
        const auto e = exact_induction_path(perm, exact, 1'000);
        const auto f = float_induction_path(perm, approx, 1'000);
        CHECK(e.kinds == f.kinds);
        CHECK(e.tie_step == f.tie_step);
    }
    CHECK_THROWS_AS(float_induction_path(perm, {0.1, 0.2}, 10), InvalidInput);
}

TEST_CASE("rounding can fake a tie that exact arithmetic resolves")
{
    const auto perm = Permutation::parse("1,2", "2,1");
    std::vector<Rational> exact{Rational(1) + Rational(1, cpp_int("100000000000000000")), Rational(1)};
    const auto e = exact_induction_path(perm, exact, 1);
    REQUIRE(e.kinds.size() == 1);
    CHECK(e.kinds[0] == StepKind::Bottom);
    CHECK_FALSE(e.tie_step.has_value());

    const auto f = float_induction_path(Iet::make(perm, {1.0 + 1e-17, 1.0}), 1);
    CHECK(f.kinds.empty());
    REQUIRE(f.tie_step.has_value());
    CHECK(*f.tie_step == 0);
}

TEST_CASE("trace CSV")
{
    const auto rows = zorich_trace(Iet::make(Permutation::parse("1,2", "2,1"), {0.7, 0.3}), 1);
    std::ostringstream os;
    write_trace_csv(os, rows);
    CHECK(os.str().rfind("step,kind,count,scale_log\n", 0) == 0);
    CHECK(os.str().find("\n0,B,2,") != std::string::npos);
}
