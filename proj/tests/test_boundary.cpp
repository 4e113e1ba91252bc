#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "kz/boundary.hpp"
#include "kz/errors.hpp"
#include "kz/rng.hpp"

using namespace kz;

namespace {

constexpr double kPi = std::numbers::pi;
const Complex kI(0.0, 1.0);

PinchingFamily make_family(std::vector<PuncturePair> pairs, std::vector<double> weights, double t)
{
    PinchingFamily f;
    f.name = "test";
    f.pairs = std::move(pairs);
    f.weights = std::move(weights);
    f.t.assign(f.pairs.size(), t);
    return f;
}

PinchingFamily g1_family(double t) { return make_family({{-0.5, 0.5}}, {1.0}, t); }

PinchingFamily cross_family(double t)
{
    return make_family({{{-0.5, 0.0}, {0.5, 0.0}}, {{0.0, -0.5}, {0.0, 0.5}}}, {1.0, 1.0}, t);
}

// Two pairs exchanged by z -> -z.
PinchingFamily mirror_family(double t)
{
    return make_family({{{-1.5, 0.0}, {-0.5, 0.3}}, {{1.5, 0.0}, {0.5, -0.3}}}, {1.0, 1.0}, t);
}

// Trapezoid rule for the contour integral of f around a circle; spectrally accurate.
template <class F>
Complex contour(F f, Complex center, double radius, int n = 512)
{
    Complex s = 0.0;
    for (int k = 0; k < n; ++k) {
        const Complex e = std::polar(1.0, 2 * kPi * k / n);
        s += f(center + radius * e) * kI * radius * e;
    }
    return s * (2 * kPi / n);
}

// Circle through the images of three points of |z - p| = r under w(z).
struct Circle {
    Complex center;
    double radius;
};

template <class W>
Circle image_circle(W w, Complex p, double r)
{
    const Complex a = w(p + r), b = w(p + kI * r), c = w(p - r);
    const Complex ab = b - a, ac = c - a;
    const double dd = 2.0 * (ab.real() * ac.imag() - ab.imag() * ac.real());
    const double ux = (ac.imag() * std::norm(ab) - ab.imag() * std::norm(ac)) / dd;
    const double uy = (ab.real() * std::norm(ac) - ac.real() * std::norm(ab)) / dd;
    const Complex center = a + Complex(ux, uy);
    return {center, std::abs(a - center)};
}

// Distance from 0 to the circle along direction alpha (0 inside the circle).
double ray_exit(const Circle& c, double alpha)
{
    const double proj = (c.center * std::polar(1.0, -alpha)).real();
    return proj + std::sqrt(proj * proj - std::norm(c.center) + c.radius * c.radius);
}

// Independent value of G_11 for one pair: with w = (z - p1) / (z - p2) the form is
// dw / (2 pi i w), so G = (1 / 4 pi^2) * integral over alpha of log(rho_out / rho_in).
double g1_gram_oracle(Complex p1, Complex p2, double t)
{
    auto w = [&](Complex z) { return (z - p1) / (z - p2); };
    const double r = std::sqrt(t);
    const Circle inner = image_circle(w, p1, r);
    const Circle outer = image_circle(w, p2, r);
    const int n = 4096;
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        const double alpha = 2 * kPi * k / n;
        s += std::log(ray_exit(outer, alpha) / ray_exit(inner, alpha));
    }
    return s * (2 * kPi / n) / (4 * kPi * kPi);
}

Eigen::MatrixXcd random_matrix(Rng& rng, int g)
{
    Eigen::MatrixXcd m(g, g);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) m(i, j) = Complex(rng.uniform_open() - 0.5, rng.uniform_open() - 0.5);
    return m;
}

Eigen::MatrixXcd random_unitary(Rng& rng, int g)
{
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_matrix(rng, g));
    return qr.householderQ();
}

}  // namespace

TEST_CASE("theta forms: coefficients and residues")
{
    const auto theta = theta_basis(g1_family(1e-2));
    REQUIRE(theta.size() == 1);
    CHECK(std::abs(theta[0].c - Complex(-1.0) / (2 * kPi * kI)) < 1e-15);
    CHECK(std::abs(theta[0].residue_p1() - 1.0 / (2 * kPi * kI)) < 1e-15);
    CHECK(std::abs(theta[0].residue_p1() + theta[0].residue_p2()) < 1e-15);
}

TEST_CASE("a-periods are the identity")
{
    const auto fam = cross_family(1e-2);
    const auto theta = theta_basis(fam);
    for (std::size_t i = 0; i < theta.size(); ++i)
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const Complex period = contour([&](Complex z) { return theta[i](z); }, fam.pairs[j].p1, 0.2);
            CHECK(std::abs(period - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("q0 has positive double-pole coefficients r^2 / 4 pi^2")
{
    for (const auto& fam : {g1_family(1e-2), cross_family(1e-2), make_family({{-0.5, 0.5}, {{0, -0.5}, {0, 0.5}}}, {2.0, -0.5}, 1e-2)}) {
        const auto q = q0_from_weights(fam);
        const auto res = q.residues();
        const auto pts = fam.punctures();
        REQUIRE(res.size() == pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const double r = fam.weights[k / 2];
            const double expect = r * r / (4 * kPi * kPi);
            CHECK(std::abs(res[k] - expect) < 1e-14);
            CHECK(std::abs(std::abs(res[k]) / res[k] - 1.0) < 1e-12);
            // (z - p)^2 q(z) near p, averaged over +-eps to cancel the simple-pole term.
            const double eps = 1e-5;
            const Complex num = 0.5 * (eps * eps * q(pts[k] + eps) + eps * eps * q(pts[k] - eps));
            CHECK(std::abs(num - expect) < 1e-8);
        }
        CHECK(q.decay_order() >= 4);
    }
    CHECK_THROWS_AS(q0_from_weights(make_family({{-0.5, 0.5}, {{0, -0.5}, {0, 0.5}}}, {1.0, 0.0}, 1e-2)),
                    SpuriousZeroAtPuncture);
}

TEST_CASE("family validation names the offending pair")
{
    auto check_message = [](const PinchingFamily& f, const std::string& part) {
        try {
            f.validate();
            FAIL("expected InvalidInput");
        } catch (const InvalidInput& e) {
            CHECK(std::string(e.what()).find(part) != std::string::npos);
        }
    };
    CHECK_NOTHROW(cross_family(1e-2).validate());
    check_message(make_family({{-0.5, 0.5}, {{0.5, 0.1}, {0, 0.5}}}, {1.0, 1.0}, 1e-2), "pair 2");
    check_message(make_family({{-0.5, 0.5}, {{0.5, 0.0}, {0, 0.5}}}, {1.0, 1.0}, 1e-2), "coincide");
    check_message(make_family({{-0.5, 0.5}, {{5.0, 0.0}, {0, 0.5}}}, {1.0, 1.0}, 1e-2), "p1 of pair 2");
    check_message(make_family({{-0.5, 0.5}}, {1.0}, 1.5), "pair 1");
}

TEST_CASE("family JSON round trip")
{
    auto fam = cross_family(1e-3);
    fam.schedule = {1e-2, 1e-3};
    const auto back = family_from_json(to_json(fam));
    REQUIRE(back.genus() == 2);
    CHECK(back.pairs[1].p2 == fam.pairs[1].p2);
    CHECK(back.t == fam.t);
    CHECK(back.schedule == fam.schedule);
    CHECK(back.weights == fam.weights);
}

TEST_CASE("one pair: G matches the conformal oracle and B = -G")
{
    for (double t : {1e-2, 1e-4, 1e-6}) {
        const auto fam = g1_family(t);
        const auto m = boundary_matrices(fam);
        const double oracle = g1_gram_oracle(fam.pairs[0].p1, fam.pairs[0].p2, t);
        CHECK(m.G(0, 0).real() == doctest::Approx(oracle).epsilon(1e-7));
        CHECK(std::abs(m.G(0, 0).imag()) < 1e-9);
        CHECK(std::abs(m.B(0, 0) + m.G(0, 0)) < 1e-7);
        const auto lam = lambda_eigs(m.B, m.G, m.B_err.norm(), m.G_err.norm());
        CHECK(lam.values[0] == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("entry integrals agree with the matrix assembly and refine stably")
{
    const auto fam = cross_family(1e-2);
    const auto m = boundary_matrices(fam);
    CubatureOptions coarse;
    coarse.rel_tol = 1e-5;
    const auto b01 = b_integral(fam, 0, 1, coarse);
    const auto g01 = gram_integral(fam, 0, 1, coarse);
    CHECK(std::abs(b01.value - m.B(0, 1)) < 1e-3 * std::abs(m.B(0, 1)) + 1e-6);
    CHECK(std::abs(g01.value - m.G(0, 1)) < 1e-3 * std::abs(m.G(0, 1)) + 1e-6);
    CHECK(std::isfinite(std::abs(b01.value)));

    CHECK(std::abs(m.B(0, 1) - m.B(1, 0)) < 1e-8);
    CHECK(std::abs(m.G(0, 1) - std::conj(m.G(1, 0))) < 1e-8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.G);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(m.B(i, j)) < std::sqrt(m.G(i, i).real() * m.G(j, j).real()));
}

TEST_CASE("mirror symmetry exchanges the two pairs")
{
    const auto m = boundary_matrices(mirror_family(1e-3));
    CHECK(std::abs(m.B(0, 0) - m.B(1, 1)) < 1e-8);
    CHECK(std::abs(m.G(0, 0) - m.G(1, 1)) < 1e-8);
}

TEST_CASE("lambda: identity and zero cases")
{
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(3, 3);
    g.diagonal() << 1.0, 2.5, 0.3;
    const auto ones = lambda_eigs(g, g);
    for (double v : ones.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ones.product == doctest::Approx(1.0));

    const auto zeros = lambda_eigs(Eigen::MatrixXcd::Zero(3, 3), g);
    for (double v : zeros.values) CHECK(v == 0.0);

    CHECK_THROWS_AS(lambda_eigs(g, Eigen::MatrixXcd::Zero(3, 3)), SingularGram);
    CHECK_THROWS_AS(lambda_eigs(2.0 * g, g), LambdaOvershoot);
}

TEST_CASE("lambda recovers planted values and the determinant identity")
{
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const int g = 1 + trial % 4;
        const Eigen::MatrixXcd m = random_matrix(rng, g);
        const Eigen::MatrixXcd G = m * m.adjoint() + 0.1 * Eigen::MatrixXcd::Identity(g, g);
        const Eigen::MatrixXcd L = G.llt().matrixL();
        std::vector<double> s(static_cast<std::size_t>(g));
        for (auto& x : s) x = rng.uniform_open();
        std::sort(s.rbegin(), s.rend());
        const Eigen::MatrixXcd W = random_unitary(rng, g);
        Eigen::VectorXcd sd(g);
        for (int i = 0; i < g; ++i) sd(i) = s[static_cast<std::size_t>(i)];
        const Eigen::MatrixXcd K = W * sd.asDiagonal() * W.transpose();
        const Eigen::MatrixXcd B = L * K * L.transpose();

        const auto lam = lambda_eigs(B, G);
        for (int i = 0; i < g; ++i) CHECK(lam.values[static_cast<std::size_t>(i)] == doctest::Approx(s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)]).epsilon(1e-9));

        const double lhs = std::abs(B.determinant());
        const double rhs = G.determinant().real() * std::sqrt(lam.product);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));

        // Real change of basis.
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(g, g);
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j) a(i, j) += 0.5 * (rng.uniform_open() - 0.5);
        const Eigen::MatrixXcd A = a.cast<Complex>();
        const auto moved = lambda_eigs(A * B * A.transpose(), A * G * A.transpose());
        for (int i = 0; i < g; ++i)
            CHECK(moved.values[static_cast<std::size_t>(i)] == doctest::Approx(lam.values[static_cast<std::size_t>(i)]).epsilon(1e-8));
    }
}

TEST_CASE("error bars propagate and clipping is flagged")
{
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Identity(2, 2);
    Eigen::MatrixXcd b = g;
    b(0, 0) = 1.0 + 1e-9;
    const auto lam = lambda_eigs(b, g, 1e-8, 1e-8);
    CHECK(lam.values[0] == 1.0);
    CHECK(lam.clipped[0]);
    CHECK_FALSE(lam.clipped[1]);
    CHECK(lam.errors[0] > 0.0);
    CHECK(lam.product_error > 0.0);
}

TEST_CASE("g = 2 sweep: product rises toward 1, diagonal rates 1 / 2 pi")
{
    auto fam = cross_family(1e-2);
    const std::vector<double> schedule{1e-2, 1e-4, 1e-6};
    const auto rows = degeneration_sweep(fam, schedule);
    REQUIRE(rows.size() == 3);
    for (std::size_t k = 1; k < rows.size(); ++k)
        CHECK(rows[k].lambda.product + rows[k].lambda.product_error + rows[k - 1].lambda.product_error >=
              rows[k - 1].lambda.product);
    for (const auto& r : rows)
        for (double v : r.lambda.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    // Successive differences remove the O(1) part of the diagonal.
    for (int i = 0; i < 2; ++i) {
        const double db = rows[2].matrices.B(i, i).real() - rows[1].matrices.B(i, i).real();
        const double dg = rows[2].matrices.G(i, i).real() - rows[1].matrices.G(i, i).real();
        const double dl = std::log(1e-6) - std::log(1e-4);
        CHECK(db / dl == doctest::Approx(1 / (2 * kPi)).epsilon(1e-3));
        CHECK(dg / -dl == doctest::Approx(1 / (2 * kPi)).epsilon(1e-3));
    }
    CHECK_THROWS_AS(degeneration_sweep(fam, {1e-4, 1e-2}), InvalidInput);
}

TEST_CASE("small perturbations of the punctures move Lambda a little")
{
    const auto base = cross_family(1e-2);
    auto moved = base;
    moved.pairs[0].p1 += Complex(1e-3, 0.0);
    moved.pairs[1].p2 += Complex(0.0, -1e-3);
    const auto a = boundary_matrices(base);
    const auto b = boundary_matrices(moved);
    const auto la = lambda_eigs(a.B, a.G, a.B_err.norm(), a.G_err.norm());
    const auto lb = lambda_eigs(b.B, b.G, b.B_err.norm(), b.G_err.norm());
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(la.values[i] - lb.values[i]) < 5e-2);
        CHECK(la.values[i] != lb.values[i]);
    }
}
