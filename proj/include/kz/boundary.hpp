#pragma once

// Differentials on a sphere with g pairs of punctures, the truncated-sphere
// integrals B and G, and the eigenvalues of the Hermitian form built from them.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "kz/errors.hpp"
#include "kz/quadrature.hpp"

namespace kz {

struct PuncturePair {
    Complex p1, p2;
};

struct PinchingFamily {
    std::string name;
    std::vector<PuncturePair> pairs;
    std::vector<double> weights;   ///< r_i, one per pair
    std::vector<double> t;         ///< |t_i| per pair; disks of radius sqrt(t_i) are removed
    std::vector<double> schedule;  ///< decreasing |t| values for sweeps (all pairs at once)
    double box_radius = 4.0;       ///< punctures must lie in the open square |Re|, |Im| < box_radius

    int genus() const { return static_cast<int>(pairs.size()); }

    /// Throws InvalidInput naming the offending puncture or pair.
    void validate() const;

    /// Copy with every t_i set to `t`.
    PinchingFamily with_t(double t) const;

    /// Every puncture in order p1 of pair 1, p2 of pair 1, p1 of pair 2, ...
    std::vector<Complex> punctures() const;
};

PinchingFamily family_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PinchingFamily& f);

/// theta(z) = c / ((z - p1)(z - p2)) dz with c = (p1 - p2) / (2 pi i).
struct ThetaForm {
    Complex p1, p2, c;

    Complex operator()(Complex z) const { return c / ((z - p1) * (z - p2)); }
    Complex residue_p1() const { return c / (p1 - p2); }
    Complex residue_p2() const { return c / (p2 - p1); }
};

std::vector<ThetaForm> theta_basis(const PinchingFamily& family);

/// q0 = phi^2 with phi = i * sum_k r_k theta_k.
struct QuadraticDifferential {
    std::vector<ThetaForm> theta;
    std::vector<double> weights;

    Complex phi(Complex z) const;
    Complex operator()(Complex z) const
    {
        const Complex p = phi(z);
        return p * p;
    }
    /// Coefficients of (z - p)^-2 at the punctures, in PinchingFamily::punctures order.
    std::vector<Complex> residues() const;
    /// q0 = O(z^-k) at infinity; k >= 4 means no pole there.
    int decay_order() const;
};

/// Throws SpuriousZeroAtPuncture when a weight vanishes, since the double pole
/// of that pair is then cancelled.
QuadraticDifferential q0_from_weights(const PinchingFamily& family);

struct Estimate {
    Complex value;
    double error;
};

struct BoundaryMatrices {
    Eigen::MatrixXcd B;  ///< integral of theta_i theta_j conj(phi) / phi over the truncated sphere
    Eigen::MatrixXcd G;  ///< integral of theta_i conj(theta_j)
    Eigen::MatrixXd B_err, G_err;
    std::size_t patches = 0;
    std::size_t evaluations = 0;
};

/// Pieces of the truncated sphere: log-polar octants around each puncture,
/// rectangles in the box, and octants of the outside in the chart w = 1/z.
std::vector<Region> truncated_sphere_regions(const PinchingFamily& family);

BoundaryMatrices boundary_matrices(const PinchingFamily& family, const CubatureOptions& options = {});
Estimate b_integral(const PinchingFamily& family, int i, int j, const CubatureOptions& options = {});
Estimate gram_integral(const PinchingFamily& family, int i, int j, const CubatureOptions& options = {});

struct LambdaResult {
    std::vector<double> values;  ///< descending
    std::vector<double> errors;  ///< bounds propagated from the input errors
    std::vector<bool> clipped;   ///< value was in (1, 1 + 10 * error] and is reported as 1
    double product = 1.0;
    double product_error = 0.0;
};

/// B_m = C^-1 B C^-T with C the Hermitian square root of G; the values are the
/// eigenvalues of conj(B_m) B_m. b_err and g_err are Frobenius-norm bounds on
/// the errors of B and G. Throws SingularGram and LambdaOvershoot.
LambdaResult lambda_eigs(const Eigen::MatrixXcd& B, const Eigen::MatrixXcd& G, double b_err = 0.0,
                         double g_err = 0.0);

struct SweepRow {
    double t;
    std::vector<double> b_ratio;  ///< Re B_ii / log t
    std::vector<double> b_ratio_err;
    std::vector<double> g_ratio;  ///< Re G_ii / (-log t)
    std::vector<double> g_ratio_err;
    LambdaResult lambda;
    BoundaryMatrices matrices;
};

/// One row per entry of `schedule`, which must be strictly decreasing.
/// options.rel_tol bounds the propagated error of every eigenvalue and of their
/// product; the cubature is rerun with a tighter target until that holds.
std::vector<SweepRow> degeneration_sweep(const PinchingFamily& family, const std::vector<double>& schedule,
                                         const CubatureOptions& options = {});

}  // namespace kz
