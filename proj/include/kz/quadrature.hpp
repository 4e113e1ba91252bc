#pragma once

// Adaptive tensor-product Gauss-Legendre cubature over mapped rectangles in
// the complex plane, for vector-valued complex integrands.

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kz/errors.hpp"

namespace kz {

using Complex = std::complex<double>;

struct MappedPoint {
    Complex z;
    double jacobian;  ///< |d(x, y) / d(u, v)|
};

/// A parameter rectangle [u0, u1] x [v0, v1] and its map into the plane.
struct Region {
    std::shared_ptr<const std::function<MappedPoint(double, double)>> map;
    double u0, u1, v0, v1;
};

/// Identity map on an axis-parallel rectangle.
Region cartesian_region(double x0, double x1, double y0, double y1);

/// Writes `components` values of the integrand at z into `out`.
using VectorIntegrand = std::function<void(Complex z, std::span<Complex> out)>;

struct CubatureOptions {
    double rel_tol = 1e-9;        ///< stop when every error <= rel_tol * max |value| ...
    double abs_tol = 0.0;         ///< ... or <= abs_tol
    std::size_t max_patches = 200'000;
};

struct CubatureResult {
    std::vector<Complex> value;
    std::vector<double> error;  ///< |coarse - refined| summed over patches, per component
    std::size_t patches = 0;
    std::size_t evaluations = 0;
};

class QuadratureBudgetExceeded : public NumericalFailure {
public:
    QuadratureBudgetExceeded(const std::string& what, CubatureResult partial)
        : NumericalFailure(what), partial_(std::move(partial)) {}
    const CubatureResult& partial() const noexcept { return partial_; }

private:
    CubatureResult partial_;
};

/// Each patch is integrated with a 7x7 Gauss-Legendre rule and with the same
/// rule on its four quarters; the difference is the patch error. The patch
/// with the largest error is split until the tolerance is met.
CubatureResult integrate(std::span<const Region> regions, std::size_t components, const VectorIntegrand& f,
                         const CubatureOptions& options = {});

}  // namespace kz
