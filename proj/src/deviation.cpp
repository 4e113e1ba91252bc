#include "kz/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "kz/parallel.hpp"
#include "kz/rauzy.hpp"
#include "kz/rng.hpp"

namespace kz {

// --- step functions --------------------------------------------------------------

StepFunction StepFunction::make(std::vector<double> breakpoints, std::vector<double> values)
{
    if (values.size() != breakpoints.size() + 1)
        throw InvalidInput("step function needs exactly one more value than breakpoints");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        const double b = breakpoints[i];
        if (!(b > 0.0 && b < 1.0)) throw InvalidInput("step function breakpoints must lie in (0, 1)");
        if (i > 0 && !(b > breakpoints[i - 1])) throw InvalidInput("step function breakpoints must increase");
    }
    for (double v : values)
        if (!std::isfinite(v)) throw InvalidInput("step function values must be finite");
    StepFunction f;
    f.breaks_ = std::move(breakpoints);
    f.values_ = std::move(values);
    return f;
}

StepFunction StepFunction::constant(double c) { return make({}, {c}); }

StepFunction StepFunction::indicator(double a, double b)
{
    if (!(a >= 0.0 && a < b && b <= 1.0)) throw InvalidInput("indicator needs 0 <= a < b <= 1");
    std::vector<double> br, vals;
    if (a > 0.0) {
        br.push_back(a);
        vals.push_back(0.0);
    }
    vals.push_back(1.0);
    if (b < 1.0) {
        br.push_back(b);
        vals.push_back(0.0);
    }
    return make(std::move(br), std::move(vals));
}

double StepFunction::operator()(double x) const
{
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    return values_[static_cast<std::size_t>(it - breaks_.begin())];
}

std::vector<double> StepFunction::widths() const
{
    std::vector<double> w(values_.size());
    double left = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double right = i < breaks_.size() ? breaks_[i] : 1.0;
        w[i] = right - left;
        left = right;
    }
    return w;
}

double StepFunction::mean() const
{
    const auto w = widths();
    double s = 0.0, c = 0.0;  // Neumaier
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double term = values_[i] * w[i];
        const double t = s + term;
        c += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
        s = t;
    }
    return s + c;
}

StepFunction mean_zero(const StepFunction& f)
{
    const double m = f.mean();
    double scale = 0.0;
    const auto w = f.widths();
    for (std::size_t i = 0; i < w.size(); ++i) scale += std::abs(f.values()[i]) * w[i];
    if (std::abs(m) <= 4.0 * std::numeric_limits<double>::epsilon() * scale) return f;
    std::vector<double> v = f.values();
    for (double& x : v) x -= m;
    return StepFunction::make(f.breakpoints(), std::move(v));
}

StepFunction interval_indicator(const Iet& iet, int symbol)
{
    const double a = iet.top_start(symbol);
    const double b = iet.perm().top_last() == symbol ? 1.0 : a + iet.length(symbol);
    return StepFunction::indicator(a, std::min(b, 1.0));
}

std::vector<std::uint64_t> geometric_schedule(std::uint64_t first, std::uint64_t last, int per_decade)
{
    if (first < 1 || last < first || per_decade < 1) throw InvalidInput("invalid geometric schedule");
    std::vector<std::uint64_t> out;
    for (int k = 0;; ++k) {
        const double v = static_cast<double>(first) * std::pow(10.0, static_cast<double>(k) / per_decade);
        const auto n = static_cast<std::uint64_t>(std::llround(v));
        if (n >= last) break;
        if (out.empty() || n > out.back()) out.push_back(n);
    }
    out.push_back(last);
    return out;
}

// --- Birkhoff sums ---------------------------------------------------------------

namespace {

// Values of f per exchanged interval when f is constant on each of them.
std::optional<std::vector<double>> per_symbol_values(const Iet& iet, const StepFunction& f)
{
    const std::size_t d = iet.size();
    std::vector<double> starts;
    for (std::size_t i = 1; i < d; ++i) starts.push_back(iet.top_start(iet.perm().top(i)));
    for (double b : f.breakpoints())
        if (std::find(starts.begin(), starts.end(), b) == starts.end()) return std::nullopt;
    std::vector<double> v(d);
    for (std::size_t s = 0; s < d; ++s) {
        const int sym = static_cast<int>(s);
        v[s] = f(iet.top_start(sym) + 0.5 * iet.length(sym));
    }
    return v;
}

void check_schedule(std::span<const std::uint64_t> schedule)
{
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1]) throw InvalidInput("schedule must be strictly increasing");
}

}  // namespace

std::vector<BirkhoffPoint> birkhoff_series(const Iet& iet, const StepFunction& f, double x0,
                                           std::span<const std::uint64_t> schedule)
{
    check_schedule(schedule);
    double vmax = 0.0;
    for (double v : f.values()) vmax = std::max(vmax, std::abs(v));
    if (std::abs(f.mean()) > 1e-12 * std::max(vmax, 1.0)) throw InvalidInput("observable is not mean-zero");
    if (!(x0 >= 0.0 && x0 < 1.0)) throw InvalidInput("x0 must lie in [0, 1)");

    const auto table = per_symbol_values(iet, f);
    Orbit orbit(iet, x0);
    std::vector<BirkhoffPoint> out;
    out.reserve(schedule.size());
    double sum = 0.0, comp = 0.0, runmax = 0.0;
    std::uint64_t n = 0;
    for (std::uint64_t target : schedule) {
        for (; n < target; ++n) {
            double v;
            if (table) {
                v = (*table)[static_cast<std::size_t>(orbit.step())];
            } else {
                v = f(orbit.position());
                orbit.step();
            }
            const double y = v - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            runmax = std::max(runmax, std::abs(sum));
        }
        out.push_back({target, sum, runmax});
    }
    return out;
}

SlopeFit loglog_slope(std::span<const std::uint64_t> n, std::span<const double> y, std::uint64_t n_lo,
                      std::uint64_t n_hi, bool discard_transient)
{
    if (n.size() != y.size()) throw InvalidInput("loglog_slope: size mismatch");
    if (n.empty()) throw WindowTooShort("empty series");
    const std::uint64_t lo = discard_transient ? std::max(n_lo, 10 * n.front()) : n_lo;
    std::vector<double> xs, ys;
    SlopeFit fit;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < lo || n[i] > n_hi || !(y[i] > 0.0)) continue;
        if (xs.empty()) fit.n_lo = n[i];
        fit.n_hi = n[i];
        xs.push_back(std::log(static_cast<double>(n[i])));
        ys.push_back(std::log(y[i]));
    }
    if (xs.size() < 3 || std::log10(static_cast<double>(fit.n_hi) / static_cast<double>(fit.n_lo)) < 3.0 - 1e-9)
        throw WindowTooShort("fit window spans fewer than 3 decades after the transient");

    const double m = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - fit.intercept - fit.slope * xs[i];
        rss += r * r;
    }
    fit.std_err = std::sqrt(rss / (m - 2.0) / sxx);
    fit.points = xs.size();
    return fit;
}

SlopeFit deviation_slope(std::span<const BirkhoffPoint> series, std::uint64_t n_lo, std::uint64_t n_hi,
                         bool discard_transient)
{
    std::vector<std::uint64_t> n;
    std::vector<double> y;
    for (const auto& p : series) {
        n.push_back(p.n);
        y.push_back(p.running_max);
    }
    return loglog_slope(n, y, n_lo, n_hi, discard_transient);
}

DeviationRun deviation_run(const Iet& iet, double x0, const DeviationOptions& options)
{
    DeviationRun run;
    run.x0 = x0;
    run.symbol = iet.perm().top(0);
    run.lengths.assign(iet.lengths().begin(), iet.lengths().end());
    const StepFunction f = mean_zero(interval_indicator(iet, run.symbol));
    const auto schedule = geometric_schedule(options.first, options.last, options.per_decade);
    run.series = birkhoff_series(iet, f, x0, schedule);
    run.fit = deviation_slope(run.series, options.fit_lo, options.fit_hi);
    return run;
}

DeviationRun deviation_run(const Permutation& perm, std::uint64_t seed, const DeviationOptions& options)
{
    Rng rng(seed);
    auto lengths = rng.simplex(perm.size());
    const double x0 = rng.uniform_open();
    DeviationRun run = deviation_run(Iet::make(perm, std::move(lengths)), x0, options);
    run.seed = seed;
    return run;
}

std::vector<SlopeFit> indicator_slopes(const Iet& iet, double x0, const DeviationOptions& options)
{
    if (!(x0 >= 0.0 && x0 < 1.0)) throw InvalidInput("x0 must lie in [0, 1)");
    const std::size_t d = iet.size();
    const auto schedule = geometric_schedule(options.first, options.last, options.per_decade);
    std::vector<std::vector<double>> runmax(d);
    std::vector<double> current(d, 0.0);
    Orbit orbit(iet, x0);
    std::uint64_t n = 0;
    for (std::uint64_t target : schedule) {
        for (; n < target; ++n) {
            orbit.step();
            const auto v = orbit.visits();
            const double m = static_cast<double>(n + 1);
            for (std::size_t s = 0; s < d; ++s)
                current[s] = std::max(current[s], std::abs(static_cast<double>(v[s]) - m * iet.length(static_cast<int>(s))));
        }
        for (std::size_t s = 0; s < d; ++s) runmax[s].push_back(current[s]);
    }
    std::vector<SlopeFit> out;
    for (std::size_t s = 0; s < d; ++s) out.push_back(loglog_slope(schedule, runmax[s], options.fit_lo, options.fit_hi));
    return out;
}

DeviationEnsemble deviation_ensemble(const Permutation& perm, std::span<const std::uint64_t> seeds,
                                     const DeviationOptions& options)
{
    if (seeds.size() < 2) throw InvalidInput("an ensemble needs at least two seeds");
    DeviationEnsemble e;
    e.runs.resize(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) { e.runs[i] = deviation_run(perm, seeds[i], options); });
    const double m = static_cast<double>(seeds.size());
    for (const auto& r : e.runs) e.mean_slope += r.fit.slope / m;
    double ss = 0.0;
    for (const auto& r : e.runs) ss += (r.fit.slope - e.mean_slope) * (r.fit.slope - e.mean_slope);
    e.std_err = std::sqrt(ss / (m - 1.0) / m);
    return e;
}

// --- Oseledets frame -------------------------------------------------------------

namespace {

struct StoredBlock {
    int winner;
    std::vector<double> counts;
};

std::vector<double> normalized(const std::vector<double>& logs, double steps)
{
    std::vector<double> nu(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) nu[i] = logs[i] / steps;
    std::vector<double> out(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) out[i] = nu[i] / nu[0];
    return out;
}

}  // namespace

OseledecFrame oseledec_frame(const Iet& iet, std::uint64_t forward_depth, std::uint64_t backward_depth)
{
    if (forward_depth < 1000 || backward_depth < 1000) throw InvalidInput("frame depths must be at least 1000 blocks");
    const std::size_t d = iet.size();
    const auto stratum = stratum_of(iet.perm());
    const int g = stratum.genus, sigma = stratum.sigma;
    const auto di = static_cast<Eigen::Index>(d);

    std::vector<StoredBlock> blocks;
    {
        ZorichEngine engine(iet);
        const std::uint64_t depth = std::max(forward_depth, backward_depth);
        blocks.reserve(depth);
        for (std::uint64_t k = 0; k < depth; ++k) {
            const auto& b = engine.advance();
            StoredBlock sb{b.winner, std::vector<double>(d)};
            for (std::size_t s = 0; s < d; ++s) sb.counts[s] = static_cast<double>(b.counts[s]);
            blocks.push_back(std::move(sb));
        }
    }

    Rng rng(0x6f73656c65646563ULL);
    Eigen::MatrixXd start(di, di);
    for (Eigen::Index i = 0; i < di; ++i)
        for (Eigen::Index j = 0; j < di; ++j) start(i, j) = rng.uniform_open() - 0.5;

    auto qr_step = [&](Eigen::MatrixXd& q, std::vector<double>& logs, double* min_sine) {
        const Eigen::VectorXd before = q.colwise().norm();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
        const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        Eigen::MatrixXd qq = qr.householderQ() * Eigen::MatrixXd::Identity(di, di);
        for (Eigen::Index j = 0; j < di; ++j) {
            const double rjj = r(j, j);
            logs[static_cast<std::size_t>(j)] += std::log(std::abs(rjj));
            if (rjj < 0) qq.col(j) = -qq.col(j);
            if (min_sine) *min_sine = std::min(*min_sine, std::abs(rjj) / before(j));
        }
        q = std::move(qq);
    };

    OseledecFrame frame;
    frame.forward_depth = forward_depth;
    frame.backward_depth = backward_depth;
    frame.genus = g;
    frame.sigma = sigma;

    // Forward: heights cocycle v -> Z^T v.
    {
        Eigen::MatrixXd q = start;
        std::vector<double> logs(d, 0.0), sink(d, 0.0);
        qr_step(q, sink, nullptr);
        for (std::uint64_t k = 0; k < forward_depth; ++k) {
            const auto& b = blocks[k];
            for (Eigen::Index j = 0; j < di; ++j) {
                const double vw = q(b.winner, j);
                for (Eigen::Index i = 0; i < di; ++i) q(i, j) += vw * b.counts[static_cast<std::size_t>(i)];
            }
            qr_step(q, logs, nullptr);
        }
        frame.forward_exponents = normalized(logs, static_cast<double>(forward_depth));
    }

    // Backward: Z_1 ... Z_n applied from the deepest block up to the base.
    Eigen::MatrixXd flag = start;
    {
        std::vector<double> logs(d, 0.0), sink(d, 0.0);
        qr_step(flag, sink, nullptr);
        for (std::uint64_t k = backward_depth; k-- > 0;) {
            const auto& b = blocks[k];
            Eigen::RowVectorXd add = Eigen::RowVectorXd::Zero(di);
            for (Eigen::Index i = 0; i < di; ++i) add += b.counts[static_cast<std::size_t>(i)] * flag.row(i);
            flag.row(b.winner) += add;
            qr_step(flag, logs, k == 0 ? &frame.min_flag_sine : nullptr);
        }
        frame.backward_exponents = normalized(logs, static_cast<double>(backward_depth));
    }

    const auto& e = frame.forward_exponents;
    double neutral = 0.0;
    for (int i = g; i < g + sigma - 1; ++i) neutral = std::max(neutral, std::abs(e[static_cast<std::size_t>(i)]));
    const double slowest_expanding = e[static_cast<std::size_t>(g - 1)];
    const double fastest_contracting = e[static_cast<std::size_t>(g + sigma - 1)];
    if (!(slowest_expanding > neutral && fastest_contracting < -neutral))
        throw IllConditioned("exponents do not separate into expanding, neutral and contracting clusters");
    if (frame.min_flag_sine < 1e-6) throw IllConditioned("flag directions at the base are nearly parallel");

    auto add_cluster = [&](std::string name, int first, int count) {
        OseledecCluster c;
        c.name = std::move(name);
        c.basis = flag.middleCols(first, count);
        c.projector = c.basis * c.basis.transpose();
        for (int i = first; i < first + count; ++i) c.exponent += e[static_cast<std::size_t>(i)] / count;
        frame.clusters.push_back(std::move(c));
    };
    add_cluster("top", 0, 1);
    for (int k = 2; k <= g; ++k) add_cluster("expanding_" + std::to_string(k), k - 1, 1);
    if (sigma > 1) add_cluster("neutral", g, sigma - 1);
    add_cluster("contracting", g + sigma - 1, g);
    return frame;
}

std::string nearest_cluster(const OseledecFrame& frame, double slope)
{
    std::string best;
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& c : frame.clusters) {
        if (c.name == "top") continue;
        const double g = std::abs(slope - std::max(c.exponent, 0.0));
        if (g < gap) {
            gap = g;
            best = c.name;
        }
    }
    return best;
}

double subspace_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return 1.0;
    const Eigen::MatrixXd residual = b - a * (a.transpose() * b);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
    return std::min(1.0, svd.singularValues()(0));
}

// --- projected growth ------------------------------------------------------------

double ProjectedGrowth::window_max(std::size_t cluster, std::uint64_t lo, std::uint64_t hi) const
{
    double m = 0.0;
    for (const auto& p : points)
        if (p.n > lo && p.n <= hi) m = std::max(m, p.interval_max[cluster]);
    return m;
}

SlopeFit ProjectedGrowth::slope(std::size_t cluster, std::uint64_t n_lo, std::uint64_t n_hi) const
{
    std::vector<std::uint64_t> n;
    std::vector<double> y;
    for (const auto& p : points) {
        n.push_back(p.n);
        y.push_back(p.running_max[cluster]);
    }
    return loglog_slope(n, y, n_lo, n_hi);
}

ProjectedGrowth projected_growth(const Iet& iet, const OseledecFrame& frame, double x0,
                                 std::span<const std::uint64_t> schedule)
{
    check_schedule(schedule);
    const std::size_t d = iet.size();
    const std::size_t nc = frame.clusters.size();

    // rows[s] = coordinates of e_s in the concatenated cluster bases.
    std::vector<double> rows(d * d);
    std::vector<std::size_t> owner(d);
    ProjectedGrowth out;
    {
        std::size_t col = 0;
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& basis = frame.clusters[c].basis;
            if (static_cast<std::size_t>(basis.rows()) != d) throw InvalidInput("frame does not match the IET");
            for (Eigen::Index j = 0; j < basis.cols(); ++j, ++col) {
                if (col >= d) throw InvalidInput("frame clusters exceed the dimension");
                owner[col] = c;
                for (std::size_t s = 0; s < d; ++s) rows[s * d + col] = basis(static_cast<Eigen::Index>(s), j);
            }
            out.clusters.push_back(frame.clusters[c].name);
        }
        if (col != d) throw InvalidInput("frame clusters do not span the space");
    }

    Orbit orbit(iet, x0);
    std::vector<double> y(d, 0.0), norm2(nc), run(nc, 0.0), interval(nc, 0.0);
    auto norms = [&] {
        std::fill(norm2.begin(), norm2.end(), 0.0);
        for (std::size_t j = 0; j < d; ++j) norm2[owner[j]] += y[j] * y[j];
    };
    std::uint64_t n = 0;
    for (std::uint64_t target : schedule) {
        std::fill(interval.begin(), interval.end(), 0.0);
        for (; n < target; ++n) {
            const auto s = static_cast<std::size_t>(orbit.step());
            const double* r = &rows[s * d];
            if (orbit.iterate() % Orbit::kResyncPeriod == 0) {
                const auto v = orbit.visits();
                for (std::size_t j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < d; ++t) acc += static_cast<double>(v[t]) * rows[t * d + j];
                    y[j] = acc;
                }
            } else {
                for (std::size_t j = 0; j < d; ++j) y[j] += r[j];
            }
            norms();
            for (std::size_t c = 0; c < nc; ++c) interval[c] = std::max(interval[c], norm2[c]);
        }
        ProjectedPoint p{target, {}, {}, {}};
        norms();
        for (std::size_t c = 0; c < nc; ++c) {
            run[c] = std::max(run[c], interval[c]);
            p.norm.push_back(std::sqrt(norm2[c]));
            p.running_max.push_back(std::sqrt(run[c]));
            p.interval_max.push_back(std::sqrt(interval[c]));
        }
        out.points.push_back(std::move(p));
    }
    return out;
}

}  // namespace kz
