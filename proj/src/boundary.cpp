#include "kz/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "kz/parallel.hpp"

namespace kz {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

std::string puncture_name(std::size_t k)
{
    return std::string(k % 2 == 0 ? "p1" : "p2") + " of pair " + std::to_string(k / 2 + 1);
}

double cheb(Complex a) { return std::max(std::abs(a.real()), std::abs(a.imag())); }

// Half-width of the square around each puncture that is integrated in log-polar coordinates.
std::vector<double> square_half_widths(const std::vector<Complex>& pts, double box)
{
    std::vector<double> h(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < pts.size(); ++l)
            if (l != k) dmin = std::min(dmin, cheb(pts[k] - pts[l]));
        h[k] = std::min(0.45 * dmin, box - cheb(pts[k]));
    }
    return h;
}

Complex parse_point(const nlohmann::json& j)
{
    if (!j.is_array() || j.size() != 2) throw InvalidInput("a puncture must be given as [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

// --- family ----------------------------------------------------------------------

std::vector<Complex> PinchingFamily::punctures() const
{
    std::vector<Complex> out;
    for (const auto& p : pairs) {
        out.push_back(p.p1);
        out.push_back(p.p2);
    }
    return out;
}

void PinchingFamily::validate() const
{
    const std::size_t g = pairs.size();
    if (g < 1) throw InvalidInput("family needs at least one pair of punctures");
    if (weights.size() != g) throw InvalidInput("family needs one weight per pair");
    if (t.size() != g) throw InvalidInput("family needs one truncation parameter per pair");
    if (!(box_radius > 0.0)) throw InvalidInput("box_radius must be positive");
    for (std::size_t i = 0; i < g; ++i)
        if (!(t[i] > 0.0 && t[i] < 1.0))
            throw InvalidInput("truncation parameter of pair " + std::to_string(i + 1) + " must lie in (0, 1)");

    const auto pts = punctures();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (!std::isfinite(pts[k].real()) || !std::isfinite(pts[k].imag()))
            throw InvalidInput(puncture_name(k) + " is not finite");
        if (!(cheb(pts[k]) < box_radius))
            throw InvalidInput(puncture_name(k) + " lies outside the square |Re|, |Im| < " + std::to_string(box_radius));
    }
    for (std::size_t a = 0; a < pts.size(); ++a) {
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            const double ra = std::sqrt(t[a / 2]), rb = std::sqrt(t[b / 2]);
            const double dist = std::abs(pts[a] - pts[b]);
            if (dist == 0.0) throw InvalidInput(puncture_name(a) + " and " + puncture_name(b) + " coincide");
            if (!(dist > ra + rb))
                throw InvalidInput("disks around " + puncture_name(a) + " and " + puncture_name(b) + " overlap");
        }
    }
    const auto h = square_half_widths(pts, box_radius);
    for (std::size_t k = 0; k < pts.size(); ++k)
        if (!(std::sqrt(t[k / 2]) < h[k]))
            throw InvalidInput("disk around " + puncture_name(k) + " is too large for its neighbourhood");
}

PinchingFamily PinchingFamily::with_t(double value) const
{
    PinchingFamily f = *this;
    f.t.assign(pairs.size(), value);
    return f;
}

PinchingFamily family_from_json(const nlohmann::json& j)
{
    try {
        PinchingFamily f;
        f.name = j.value("name", std::string("family"));
        for (const auto& pair : j.at("punctures")) {
            if (!pair.is_array() || pair.size() != 2) throw InvalidInput("each entry of punctures must be a pair");
            f.pairs.push_back({parse_point(pair[0]), parse_point(pair[1])});
        }
        f.weights = j.at("weights").get<std::vector<double>>();
        f.schedule = j.value("schedule", std::vector<double>{});
        f.box_radius = j.value("box_radius", 4.0);
        if (j.contains("t")) {
            const auto& t = j.at("t");
            f.t = t.is_array() ? t.get<std::vector<double>>() : std::vector<double>(f.pairs.size(), t.get<double>());
        } else if (!f.schedule.empty()) {
            f.t.assign(f.pairs.size(), f.schedule.front());
        }
        f.validate();
        for (double t : f.schedule) f.with_t(t).validate();
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed family: ") + e.what());
    }
}

nlohmann::json to_json(const PinchingFamily& f)
{
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : f.pairs)
        pairs.push_back({{p.p1.real(), p.p1.imag()}, {p.p2.real(), p.p2.imag()}});
    return {{"name", f.name},           {"punctures", pairs},  {"weights", f.weights},
            {"t", f.t},                 {"schedule", f.schedule}, {"box_radius", f.box_radius}};
}

// --- differentials ---------------------------------------------------------------

std::vector<ThetaForm> theta_basis(const PinchingFamily& family)
{
    std::vector<ThetaForm> out;
    for (const auto& p : family.pairs) out.push_back({p.p1, p.p2, (p.p1 - p.p2) / (2.0 * kPi * kI)});
    return out;
}

Complex QuadraticDifferential::phi(Complex z) const
{
    Complex s = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) s += weights[k] * theta[k](z);
    return kI * s;
}

std::vector<Complex> QuadraticDifferential::residues() const
{
    // Near a puncture only the form of its own pair is singular, so the
    // double-pole coefficient of phi^2 is the square of i r_k Res(theta_k).
    std::vector<Complex> out;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const Complex a1 = kI * weights[k] * theta[k].residue_p1();
        const Complex a2 = kI * weights[k] * theta[k].residue_p2();
        out.push_back(a1 * a1);
        out.push_back(a2 * a2);
    }
    return out;
}

int QuadraticDifferential::decay_order() const
{
    // theta_k = c_k sum_n h_n(p1, p2) z^(-n-2), with h_n the complete homogeneous polynomial.
    double scale = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) scale += std::abs(weights[k] * theta[k].c);
    for (int n = 0; n < 2 * static_cast<int>(theta.size()) + 2; ++n) {
        Complex a = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            Complex h = 0.0;
            for (int e = 0; e <= n; ++e) h += std::pow(theta[k].p1, e) * std::pow(theta[k].p2, n - e);
            a += weights[k] * theta[k].c * h;
        }
        if (std::abs(a) > 1e-12 * scale) return 2 * (n + 2);
    }
    return 2 * (2 * static_cast<int>(theta.size()) + 3);
}

QuadraticDifferential q0_from_weights(const PinchingFamily& family)
{
    for (std::size_t k = 0; k < family.weights.size(); ++k)
        if (!(family.weights[k] != 0.0) || !std::isfinite(family.weights[k]))
            throw SpuriousZeroAtPuncture("weight of pair " + std::to_string(k + 1) +
                                         " vanishes, so q0 has no pole at its punctures");
    QuadraticDifferential q{theta_basis(family), family.weights};
    const auto res = q.residues();
    for (std::size_t k = 0; k < res.size(); ++k)
        if (!(std::abs(res[k]) > 0.0)) throw SpuriousZeroAtPuncture("q0 has no pole at " + puncture_name(k));
    return q;
}

// --- integrals -------------------------------------------------------------------

std::vector<Region> truncated_sphere_regions(const PinchingFamily& family)
{
    family.validate();
    const auto pts = family.punctures();
    const double box = family.box_radius;
    const auto h = square_half_widths(pts, box);
    std::vector<Region> regions;

    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Complex p = pts[k];
        const double log_rho = 0.5 * std::log(family.t[k / 2]);
        const double hk = h[k];
        auto map = std::make_shared<const std::function<MappedPoint(double, double)>>([p, log_rho, hk](double u, double a) {
            const double log_edge = std::log(hk / std::max(std::abs(std::cos(a)), std::abs(std::sin(a))));
            const double s = log_rho + u * (log_edge - log_rho);
            const double r = std::exp(s);
            return MappedPoint{p + std::polar(r, a), r * r * (log_edge - log_rho)};
        });
        for (int o = 0; o < 8; ++o) regions.push_back({map, 0.0, 1.0, o * kPi / 4, (o + 1) * kPi / 4});
    }

    std::set<double> xs{-box, box}, ys{-box, box};
    for (std::size_t k = 0; k < pts.size(); ++k) {
        xs.insert(pts[k].real() - h[k]);
        xs.insert(pts[k].real() + h[k]);
        ys.insert(pts[k].imag() - h[k]);
        ys.insert(pts[k].imag() + h[k]);
    }
    const std::vector<double> xv(xs.begin(), xs.end()), yv(ys.begin(), ys.end());
    for (std::size_t i = 0; i + 1 < xv.size(); ++i) {
        for (std::size_t j = 0; j + 1 < yv.size(); ++j) {
            const double cx = 0.5 * (xv[i] + xv[i + 1]), cy = 0.5 * (yv[j] + yv[j + 1]);
            bool inside = false;
            for (std::size_t k = 0; k < pts.size(); ++k)
                inside = inside || (std::abs(cx - pts[k].real()) < h[k] && std::abs(cy - pts[k].imag()) < h[k]);
            if (!inside) regions.push_back(cartesian_region(xv[i], xv[i + 1], yv[j], yv[j + 1]));
        }
    }

    auto outer = std::make_shared<const std::function<MappedPoint(double, double)>>([box](double u, double a) {
        const double edge = box / std::max(std::abs(std::cos(a)), std::abs(std::sin(a)));
        const double r = edge / u;
        return MappedPoint{std::polar(r, a), edge * edge / (u * u * u)};
    });
    for (int o = 0; o < 8; ++o) regions.push_back({outer, 0.0, 1.0, o * kPi / 4, (o + 1) * kPi / 4});
    return regions;
}

BoundaryMatrices boundary_matrices(const PinchingFamily& family, const CubatureOptions& options)
{
    const auto regions = truncated_sphere_regions(family);
    const auto q = q0_from_weights(family);
    const int g = family.genus();
    const auto gs = static_cast<std::size_t>(g);

    // Upper triangles of B and then G, row by row.
    std::vector<std::pair<int, int>> index;
    for (int i = 0; i < g; ++i)
        for (int j = i; j < g; ++j) index.emplace_back(i, j);
    const std::size_t half = index.size();

    const auto& theta = q.theta;
    const auto& weights = q.weights;
    const VectorIntegrand f = [&](Complex z, std::span<Complex> out) {
        Complex th[64];
        Complex phi = 0.0;
        for (std::size_t k = 0; k < gs; ++k) {
            th[k] = theta[k](z);
            phi += weights[k] * th[k];
        }
        phi *= kI;
        const Complex phase = std::conj(phi) / phi;
        for (std::size_t m = 0; m < half; ++m) {
            const auto [i, j] = index[m];
            out[m] = th[i] * th[j] * phase;
            out[half + m] = th[i] * std::conj(th[j]);
        }
    };
    if (g > 64) throw InvalidInput("genus above 64 is not supported");

    const CubatureResult r = integrate(regions, 2 * half, f, options);
    BoundaryMatrices m;
    m.B.resize(g, g);
    m.G.resize(g, g);
    m.B_err.resize(g, g);
    m.G_err.resize(g, g);
    for (std::size_t k = 0; k < half; ++k) {
        const auto [i, j] = index[k];
        m.B(i, j) = m.B(j, i) = r.value[k];
        m.B_err(i, j) = m.B_err(j, i) = r.error[k];
        m.G(i, j) = r.value[half + k];
        m.G(j, i) = std::conj(r.value[half + k]);
        m.G_err(i, j) = m.G_err(j, i) = r.error[half + k];
    }
    for (int i = 0; i < g; ++i) m.G(i, i) = m.G(i, i).real();
    m.patches = r.patches;
    m.evaluations = r.evaluations;
    return m;
}

Estimate b_integral(const PinchingFamily& family, int i, int j, const CubatureOptions& options)
{
    const auto m = boundary_matrices(family, options);
    return {m.B(i, j), m.B_err(i, j)};
}

Estimate gram_integral(const PinchingFamily& family, int i, int j, const CubatureOptions& options)
{
    const auto m = boundary_matrices(family, options);
    return {m.G(i, j), m.G_err(i, j)};
}

// --- eigenvalues -----------------------------------------------------------------

LambdaResult lambda_eigs(const Eigen::MatrixXcd& B, const Eigen::MatrixXcd& G, double b_err, double g_err)
{
    const Eigen::Index g = G.rows();
    if (G.cols() != g || B.rows() != g || B.cols() != g) throw InvalidInput("B and G must be square of equal size");
    const double gnorm = G.norm();
    if (!((G - G.adjoint()).norm() <= 1e-10 * gnorm + g_err)) throw SingularGram("G is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double gmin = ev.minCoeff();
    if (!(gmin > 1e-12 * ev.cwiseAbs().maxCoeff()) || !(gmin > g_err))
        throw SingularGram("G is not safely positive definite");

    // C = V diag(sqrt(ev)) V^*; C^-1 the same with 1/sqrt(ev).
    const Eigen::MatrixXcd& V = es.eigenvectors();
    const Eigen::MatrixXcd c_inv = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.adjoint();
    const Eigen::MatrixXcd Bm = c_inv * B * c_inv.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Bm);
    const Eigen::VectorXd s = svd.singularValues();  // descending

    // First-order bound on singular value perturbations through B and C^-1.
    const double ds = (b_err + s(0) * g_err) / gmin;
    LambdaResult out;
    for (Eigen::Index i = 0; i < g; ++i) {
        double lam = s(i) * s(i);
        const double err = 2.0 * s(i) * ds + ds * ds;
        bool clipped = false;
        if (lam > 1.0) {
            const double allowance = 10.0 * std::max(err, 1e-12);
            if (lam > 1.0 + allowance)
                throw LambdaOvershoot("eigenvalue " + std::to_string(i + 1) + " = " + std::to_string(lam) +
                                      " exceeds 1 by more than the error allowance");
            lam = 1.0;
            clipped = true;
        }
        out.values.push_back(lam);
        out.errors.push_back(err);
        out.clipped.push_back(clipped);
    }
    for (double v : out.values) out.product *= v;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        double term = out.errors[i];
        for (std::size_t j = 0; j < out.values.size(); ++j)
            if (j != i) term *= out.values[j] + out.errors[j];
        out.product_error += term;
    }
    return out;
}

std::vector<SweepRow> degeneration_sweep(const PinchingFamily& family, const std::vector<double>& schedule,
                                         const CubatureOptions& options)
{
    if (schedule.empty()) throw InvalidInput("empty t schedule");
    for (std::size_t k = 1; k < schedule.size(); ++k)
        if (!(schedule[k] < schedule[k - 1])) throw InvalidInput("t schedule must be strictly decreasing");
    for (double t : schedule) family.with_t(t).validate();

    std::vector<SweepRow> rows(schedule.size());
    parallel_for(schedule.size(), [&](std::size_t k) {
        const double t = schedule[k];
        SweepRow row;
        row.t = t;
        // The tolerance is on the reported eigenvalues, so the cubature target
        // is tightened until the propagated bounds are small enough.
        CubatureOptions inner = options;
        for (;;) {
            row.matrices = boundary_matrices(family.with_t(t), inner);
            row.lambda = lambda_eigs(row.matrices.B, row.matrices.G, row.matrices.B_err.norm(), row.matrices.G_err.norm());
            double worst = row.lambda.product_error;
            for (double e : row.lambda.errors) worst = std::max(worst, e);
            if (worst <= options.rel_tol || inner.rel_tol < 1e-13) break;
            inner.rel_tol *= 0.1;
        }
        const double L = std::log(t);
        const auto& m = row.matrices;
        for (int i = 0; i < family.genus(); ++i) {
            row.b_ratio.push_back(m.B(i, i).real() / L);
            row.b_ratio_err.push_back(m.B_err(i, i) / std::abs(L));
            row.g_ratio.push_back(m.G(i, i).real() / -L);
            row.g_ratio_err.push_back(m.G_err(i, i) / std::abs(L));
        }
        rows[k] = std::move(row);
    });
    return rows;
}

}  // namespace kz
