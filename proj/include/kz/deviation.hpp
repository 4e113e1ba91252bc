#pragma once

// Birkhoff sums of step functions along IET orbits, their power-law growth,
// and projections of orbit visit vectors onto an approximate Oseledets flag.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kz/errors.hpp"
#include "kz/iet.hpp"

namespace kz {

/// Piecewise-constant function on [0, 1), right-continuous.
class StepFunction {
public:
    /// `breakpoints` are the interior jumps, strictly increasing in (0, 1);
    /// values.size() == breakpoints.size() + 1.
    static StepFunction make(std::vector<double> breakpoints, std::vector<double> values);
    static StepFunction constant(double c);
    /// Indicator of [a, b) with 0 <= a < b <= 1.
    static StepFunction indicator(double a, double b);

    double operator()(double x) const;
    double mean() const;

    const std::vector<double>& breakpoints() const noexcept { return breaks_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double> widths() const;

private:
    std::vector<double> breaks_;
    std::vector<double> values_;
};

/// f minus its mean. Inputs whose mean is already zero to rounding are returned unchanged.
StepFunction mean_zero(const StepFunction& f);

/// Indicator of the domain interval of `symbol`.
StepFunction interval_indicator(const Iet& iet, int symbol);

/// Roughly `per_decade` geometrically spaced integers from `first` to `last`, both included.
std::vector<std::uint64_t> geometric_schedule(std::uint64_t first, std::uint64_t last, int per_decade = 10);

struct BirkhoffPoint {
    std::uint64_t n;
    double sum;          ///< S_n = f(x0) + ... + f(T^{n-1} x0)
    double running_max;  ///< max_{m <= n} |S_m|
};

/// Requires a mean-zero f. Throws HitDiscontinuity.
std::vector<BirkhoffPoint> birkhoff_series(const Iet& iet, const StepFunction& f, double x0,
                                           std::span<const std::uint64_t> schedule);

struct SlopeFit {
    double slope = 0.0;
    double std_err = 0.0;  ///< from the regression residuals
    double intercept = 0.0;
    std::size_t points = 0;
    std::uint64_t n_lo = 0, n_hi = 0;  ///< range actually used
};

/// Least-squares slope of log y against log n over points with n in [n_lo, n_hi]
/// and y > 0. When discard_transient is set, points below 10 * n.front() are
/// dropped first. Throws WindowTooShort if fewer than 3 decades remain.
SlopeFit loglog_slope(std::span<const std::uint64_t> n, std::span<const double> y, std::uint64_t n_lo,
                      std::uint64_t n_hi, bool discard_transient = true);

/// loglog_slope of the running maximum.
SlopeFit deviation_slope(std::span<const BirkhoffPoint> series, std::uint64_t n_lo, std::uint64_t n_hi,
                         bool discard_transient = true);

struct DeviationOptions {
    std::uint64_t first = 10'000;
    std::uint64_t last = 100'000'000;
    int per_decade = 10;
    std::uint64_t fit_lo = 100'000;
    std::uint64_t fit_hi = 100'000'000;
};

struct DeviationRun {
    std::uint64_t seed = 0;
    double x0 = 0.0;
    int symbol = 0;
    std::vector<double> lengths;
    std::vector<BirkhoffPoint> series;
    SlopeFit fit;
};

/// Each seed draws simplex-uniform lengths and then x0 from the same stream;
/// the observable is the mean-zero indicator of the first interval on top.
DeviationRun deviation_run(const Permutation& perm, std::uint64_t seed, const DeviationOptions& options);

/// Deviation run with fixed lengths and starting point.
DeviationRun deviation_run(const Iet& iet, double x0, const DeviationOptions& options);

struct DeviationEnsemble {
    std::vector<DeviationRun> runs;
    double mean_slope = 0.0;
    double std_err = 0.0;  ///< standard error of the mean over runs
};

/// The slope over three decades fluctuates strongly from one induction path to
/// the next, so the exponent is estimated as the mean over independent IETs.
DeviationEnsemble deviation_ensemble(const Permutation& perm, std::span<const std::uint64_t> seeds,
                                     const DeviationOptions& options);

/// Deviation slopes of the mean-zero indicators of every exchanged interval,
/// from one orbit: S_n = V_n[s] - n * length(s). Indexed by symbol.
std::vector<SlopeFit> indicator_slopes(const Iet& iet, double x0, const DeviationOptions& options);

struct OseledecCluster {
    std::string name;        ///< "top", "expanding_2".."expanding_g", "neutral", "contracting"
    double exponent = 0.0;   ///< normalized exponent of the cluster (mean for the contracting one)
    Eigen::MatrixXd basis;   ///< orthonormal columns
    Eigen::MatrixXd projector;

    int dimension() const { return static_cast<int>(basis.cols()); }
};

/// Orthogonal decomposition of R^d (visit-vector coordinates at the base IET)
/// adapted to the flag of fast directions of the future cocycle product.
struct OseledecFrame {
    std::vector<OseledecCluster> clusters;
    std::uint64_t forward_depth = 0;
    std::uint64_t backward_depth = 0;
    std::vector<double> forward_exponents;   ///< normalized, descending
    std::vector<double> backward_exponents;  ///< same, from the pullback
    double min_flag_sine = 1.0;  ///< smallest angle sine between flag steps at the base
    int genus = 0;
    int sigma = 0;
};

/// forward_depth blocks of a Benettin run give the exponents; backward_depth
/// blocks pulled back to the base give the flag. Throws Tie, InvalidInput
/// (depths below 1000) and IllConditioned.
OseledecFrame oseledec_frame(const Iet& iet, std::uint64_t forward_depth, std::uint64_t backward_depth);

/// Name of the non-top cluster whose growth rate is closest to `slope`; clusters
/// with a non-positive exponent stay bounded and count as rate 0.
std::string nearest_cluster(const OseledecFrame& frame, double slope);

/// Largest principal-angle sine between the column spans of two orthonormal bases.
double subspace_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct ProjectedPoint {
    std::uint64_t n;
    std::vector<double> norm;          ///< |P_i V_n| per cluster
    std::vector<double> running_max;   ///< max over m <= n
    std::vector<double> interval_max;  ///< max over the m since the previous point
};

struct ProjectedGrowth {
    std::vector<std::string> clusters;
    std::vector<ProjectedPoint> points;

    /// Max of cluster i's norm over n in (lo, hi].
    double window_max(std::size_t cluster, std::uint64_t lo, std::uint64_t hi) const;
    /// Slope of the cluster's running max against n.
    SlopeFit slope(std::size_t cluster, std::uint64_t n_lo, std::uint64_t n_hi) const;
};

/// Projections of the visit vector V_n of the orbit of x0 onto each cluster,
/// updated at every iterate and re-derived exactly from V_n every 10^6 steps.
ProjectedGrowth projected_growth(const Iet& iet, const OseledecFrame& frame, double x0,
                                 std::span<const std::uint64_t> schedule);

}  // namespace kz
