#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "kz/quadrature.hpp"

using namespace kz;

namespace {

Region annulus(double r0, double r1)
{
    auto map = std::make_shared<const std::function<MappedPoint(double, double)>>([](double r, double a) {
        return MappedPoint{std::polar(r, a), r};
    });
    return Region{map, r0, r1, 0.0, 2 * std::numbers::pi};
}

}  // namespace

TEST_CASE("polynomials on a rectangle are exact")
{
    const std::vector<Region> regions{cartesian_region(0.0, 1.0, 0.0, 2.0)};
    const auto r = integrate(regions, 2, [](Complex z, std::span<Complex> out) {
        const double x = z.real(), y = z.imag();
        out[0] = x * x * y;
        out[1] = Complex(std::pow(x, 6) * std::pow(y, 5), x);
    });
    CHECK(r.value[0].real() == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(r.value[1].real() == doctest::Approx(64.0 / 42.0).epsilon(1e-14));
    CHECK(r.value[1].imag() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.patches == 1);
}

TEST_CASE("mapped annulus")
{
    const std::vector<Region> regions{annulus(1.0, 2.0)};
    const auto r = integrate(regions, 2, [](Complex z, std::span<Complex> out) {
        out[0] = 1.0;
        out[1] = std::norm(z);
    });
    CHECK(r.value[0].real() == doctest::Approx(3 * std::numbers::pi).epsilon(1e-12));
    CHECK(r.value[1].real() == doctest::Approx(7.5 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("adaptive refinement resolves a corner singularity")
{
    const std::vector<Region> regions{cartesian_region(0.0, 1.0, 0.0, 1.0)};
    CubatureOptions o;
    o.rel_tol = 1e-10;
    const auto r = integrate(regions, 1, [](Complex z, std::span<Complex> out) { out[0] = 1.0 / std::abs(z); }, o);
    const double exact = 2.0 * std::log(1.0 + std::sqrt(2.0));
    CHECK(r.value[0].real() == doctest::Approx(exact).epsilon(1e-9));
    CHECK(r.error[0] < 1e-8);
    CHECK(r.patches > 1);
    CHECK(std::abs(r.value[0].real() - exact) <= 10 * r.error[0] + 1e-12);
}

TEST_CASE("several regions add up")
{
    const std::vector<Region> regions{cartesian_region(0.0, 0.5, 0.0, 1.0), cartesian_region(0.5, 1.0, 0.0, 1.0)};
    const auto r = integrate(regions, 1, [](Complex z, std::span<Complex> out) { out[0] = std::exp(z); });
    // Integral of e^(x + iy) over the unit square is (e - 1)(e^i - 1) / i.
    const Complex expect = (std::exp(1.0) - 1.0) * (std::exp(Complex(0, 1)) - 1.0) / Complex(0, 1);
    CHECK(std::abs(r.value[0] - expect) < 1e-12);
}

TEST_CASE("budget exhaustion reports the partial result")
{
    const std::vector<Region> regions{cartesian_region(0.0, 1.0, 0.0, 1.0)};
    CubatureOptions o;
    o.rel_tol = 1e-15;
    o.max_patches = 20;
    try {
        integrate(regions, 1, [](Complex z, std::span<Complex> out) { out[0] = 1.0 / std::sqrt(z.real()); }, o);
        FAIL("expected QuadratureBudgetExceeded");
    } catch (const QuadratureBudgetExceeded& e) {
        CHECK(e.partial().patches > 1);
        CHECK(e.partial().patches <= 20);
        CHECK(e.partial().error[0] > 0.0);
        CHECK(std::isfinite(e.partial().value[0].real()));
    }
}
