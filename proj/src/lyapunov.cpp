#include "kz/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kz/rauzy.hpp"
#include "kz/rng.hpp"
#include "kz/text.hpp"

namespace kz {

SymplecticStructure symplectic_form(const Permutation& perm)
{
    const std::size_t d = perm.size();
    IntMatrix omega(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
            const auto ia = static_cast<int>(a), ib = static_cast<int>(b);
            const bool top_before = perm.top_position(ia) < perm.top_position(ib);
            const bool bottom_before = perm.bottom_position(ia) < perm.bottom_position(ib);
            if (a == b || top_before == bottom_before) continue;
            omega(a, b) = top_before ? 1 : -1;
        }
    }
    const std::size_t r = rank(omega);
    return {std::move(omega), r};
}

namespace {

// Column-major d x d frame with modified Gram-Schmidt re-orthonormalization.
class Frame {
public:
    Frame(std::size_t d, Rng& rng) : d_(d), v_(d * d)
    {
        for (auto& x : v_) x = rng.uniform_open() - 0.5;
        std::vector<double> scratch(d);
        orthonormalize(scratch);
    }

    // v <- Z^T v with Z = I + e_w c^T, i.e. v += v[w] * c, for every column.
    void apply_block(int w, const double* c)
    {
        for (std::size_t j = 0; j < d_; ++j) {
            double* col = &v_[j * d_];
            const double vw = col[w];
            for (std::size_t i = 0; i < d_; ++i) col[i] += vw * c[i];
        }
    }

    // Returns log of each R diagonal entry through `logs`.
    void orthonormalize(std::vector<double>& logs)
    {
        for (std::size_t j = 0; j < d_; ++j) {
            double* vj = &v_[j * d_];
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i < j; ++i) {
                    const double* qi = &v_[i * d_];
                    double r = 0.0;
                    for (std::size_t k = 0; k < d_; ++k) r += qi[k] * vj[k];
                    for (std::size_t k = 0; k < d_; ++k) vj[k] -= r * qi[k];
                }
            }
            double n2 = 0.0;
            for (std::size_t k = 0; k < d_; ++k) n2 += vj[k] * vj[k];
            const double norm = std::sqrt(n2);
            logs[j] = std::log(norm);
            for (std::size_t k = 0; k < d_; ++k) vj[k] /= norm;
        }
    }

private:
    std::size_t d_;
    std::vector<double> v_;
};

double mean(const std::vector<double>& xs)
{
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double standard_error(const std::vector<double>& xs)
{
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

SpectrumEstimate estimate_spectrum(const Permutation& perm, std::uint64_t seed, const SpectrumOptions& options)
{
    if (options.steps < 10'000) throw InvalidInput("estimate_spectrum: at least 1e4 Zorich steps are required");
    if (options.qr_period < 1) throw InvalidInput("estimate_spectrum: qr_period must be >= 1");
    if (options.batches < 2) throw InvalidInput("estimate_spectrum: at least two batches are required");

    const std::size_t d = perm.size();
    const StratumSignature stratum = stratum_of(perm);

    Rng rng(seed);
    const Iet start = Iet::make(perm, rng.simplex(d));
    Frame frame(d, rng);
    ZorichEngine engine(start);

    const std::uint64_t warmup = std::max<std::uint64_t>(options.qr_period, options.steps / 100);
    const std::uint64_t measured = options.steps - warmup;
    const std::size_t batches = options.batches;

    std::vector<std::vector<double>> window_logs(batches, std::vector<double>(d, 0.0));
    std::vector<std::uint64_t> window_blocks(batches, 0);
    std::vector<double> logs(d);
    std::array<double, kMaxSymbols> counts{};

    // The frame is re-orthonormalized every qr_period blocks, at every window
    // boundary, and early once the accumulated norm bound would let rounding
    // swamp the most contracted direction.
    constexpr double kGrowthLimit = 12.0;
    constexpr double kPieceSum = 256.0;
    double growth_bound = 0.0;
    std::uint64_t since_qr = 0;
    std::size_t window = 0;
    bool in_warmup = true;
    auto flush = [&] {
        frame.orthonormalize(logs);
        if (!in_warmup)
            for (std::size_t s = 0; s < d; ++s) window_logs[window][s] += logs[s];
        growth_bound = 0.0;
        since_qr = 0;
    };
    for (std::uint64_t k = 0; k < options.steps; ++k) {
        in_warmup = k < warmup;
        const std::uint64_t m = in_warmup ? 0 : k - warmup;
        window = in_warmup ? 0 : static_cast<std::size_t>(m * batches / measured);

        const auto& blk = engine.advance();
        double csum = 0.0;
        for (std::size_t s = 0; s < d; ++s) {
            counts[s] = static_cast<double>(blk.counts[s]);
            csum += counts[s];
        }
        if (csum > kPieceSum) {
            // I + c e_w^T = (I + (c/p) e_w^T)^p because c_w = 0.
            if (since_qr > 0) flush();
            const double pieces = std::ceil(csum / kPieceSum);
            for (std::size_t s = 0; s < d; ++s) counts[s] /= pieces;
            for (double p = 0; p < pieces; ++p) {
                frame.apply_block(blk.winner, counts.data());
                since_qr = 1;
                flush();
            }
        } else {
            frame.apply_block(blk.winner, counts.data());
            growth_bound += std::log1p(csum);
            ++since_qr;
        }

        const bool window_end =
            k + 1 == warmup || (!in_warmup && static_cast<std::size_t>((m + 1) * batches / measured) != window) ||
            k + 1 == options.steps;
        if (since_qr > 0 && (since_qr >= options.qr_period || window_end || growth_bound > kGrowthLimit)) flush();
        if (!in_warmup) ++window_blocks[window];
    }

    SpectrumEstimate e;
    e.perm_id = perm.id();
    e.seed = seed;
    e.steps = options.steps;
    e.measured_steps = measured;
    e.rauzy_steps = engine.rauzy_steps();
    e.qr_period = options.qr_period;
    e.genus = stratum.genus;
    e.sigma = stratum.sigma;

    std::vector<double> total(d, 0.0);
    for (std::size_t w = 0; w < batches; ++w)
        for (std::size_t s = 0; s < d; ++s) total[s] += window_logs[w][s];
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total[a] > total[b]; });

    for (std::size_t s : order) {
        std::vector<double> per_window(batches), ratio(batches);
        for (std::size_t w = 0; w < batches; ++w) {
            const double blocks = static_cast<double>(window_blocks[w]);
            per_window[w] = window_logs[w][s] / blocks;
            ratio[w] = window_logs[w][s] / window_logs[w][order[0]];
        }
        e.nu.push_back(total[s] / static_cast<double>(measured));
        e.nu_stderr.push_back(standard_error(per_window));
        e.full_stderr.push_back(s == order[0] ? 0.0 : standard_error(ratio));
    }
    for (std::size_t i = 0; i < d; ++i) e.full_lambda.push_back(i == 0 ? 1.0 : e.nu[i] / e.nu[0]);

    for (std::size_t i = 0; i < d; ++i)
        if (std::abs(e.full_lambda[i]) < std::max(options.zero_floor, 3.0 * e.full_stderr[i])) ++e.zero_count;

    // Drop the sigma - 1 exponents closest to zero: they belong to the
    // relative part of cohomology, not to the symplectic part.
    std::vector<std::size_t> by_size(d);
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(e.full_lambda[a]) < std::abs(e.full_lambda[b]); });
    std::vector<bool> drop(d, false);
    for (int k = 0; k + 1 < stratum.sigma; ++k) drop[by_size[k]] = true;
    for (std::size_t i = 0; i < d; ++i) {
        if (drop[i]) continue;
        e.lambda.push_back(e.full_lambda[i]);
        e.lambda_stderr.push_back(e.full_stderr[i]);
    }

    if (options.max_stderr_2 && e.stderr_2() > *options.max_stderr_2)
        throw SpectrumNonConvergence("stderr of lambda_2 (" + fmt_num(e.stderr_2()) + ") exceeds bound " +
                                         fmt_num(*options.max_stderr_2),
                                     e);
    return e;
}

std::vector<double> SpectrumEstimate::symmetry_defects() const
{
    std::vector<double> out;
    const std::size_t n = lambda.size();
    for (std::size_t i = 0; i < n / 2; ++i) out.push_back(lambda[i] + lambda[n - 1 - i]);
    return out;
}

double SpectrumEstimate::sym_defect_max() const
{
    double m = 0.0;
    for (double x : symmetry_defects()) m = std::max(m, std::abs(x));
    return m;
}

double SpectrumEstimate::stderr_2() const { return lambda_stderr.size() > 1 ? lambda_stderr[1] : 0.0; }

SpectrumBatch aggregate(const std::vector<SpectrumEstimate>& runs)
{
    SpectrumBatch b;
    b.runs = runs.size();
    if (runs.empty()) return b;
    const std::size_t n = runs.front().lambda.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> xs;
        for (const auto& r : runs) xs.push_back(r.lambda.at(i));
        const double m = mean(xs);
        const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
        double ss = 0.0;
        for (double x : xs) ss += (x - m) * (x - m);
        b.mean.push_back(m);
        b.spread.push_back(*hi - *lo);
        b.stddev.push_back(xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0);
    }
    return b;
}

nlohmann::json spectrum_json(const SpectrumEstimate& e)
{
    return {{"perm_id", e.perm_id},
            {"seed", e.seed},
            {"steps", e.steps},
            {"measured_steps", e.measured_steps},
            {"rauzy_steps", e.rauzy_steps},
            {"qr_period", e.qr_period},
            {"genus", e.genus},
            {"sigma", e.sigma},
            {"nu", e.nu},
            {"nu_stderr", e.nu_stderr},
            {"full_lambda", e.full_lambda},
            {"full_stderr", e.full_stderr},
            {"lambda", e.lambda},
            {"lambda_stderr", e.lambda_stderr},
            {"symmetry_defects", e.symmetry_defects()},
            {"sym_defect_max", e.sym_defect_max()},
            {"zero_count", e.zero_count},
            {"stderr_2", e.stderr_2()}};
}

std::string spectrum_csv_header(int genus)
{
    std::string h = "perm_id,seed,steps";
    for (int i = 1; i <= 2 * genus; ++i) h += ",lambda_" + std::to_string(i);
    return h + ",sym_defect_max,zero_count,stderr_2,wall_seconds";
}

std::string spectrum_csv_row(const SpectrumEstimate& e, std::optional<double> wall_seconds)
{
    std::ostringstream os;
    os << csv_quote(e.perm_id) << ',' << e.seed << ',' << e.steps;
    for (double l : e.lambda) os << ',' << fmt_num(l);
    os << ',' << fmt_num(e.sym_defect_max()) << ',' << e.zero_count << ',' << fmt_num(e.stderr_2()) << ','
       << (wall_seconds ? fmt_num(*wall_seconds) : std::string("NA"));
    return os.str();
}

std::string spectrum_csv_batch_rows(const std::vector<SpectrumEstimate>& runs)
{
    if (runs.empty()) return {};
    const SpectrumBatch b = aggregate(runs);
    const auto& first = runs.front();
    double defect = 0.0;
    const std::size_t n = b.mean.size();
    for (std::size_t i = 0; i < n / 2; ++i) defect = std::max(defect, std::abs(b.mean[i] + b.mean[n - 1 - i]));
    double max_zero = 0.0;
    for (const auto& r : runs) max_zero = std::max(max_zero, static_cast<double>(r.zero_count));

    std::ostringstream os;
    os << csv_quote(first.perm_id) << ",mean," << first.steps;
    for (double m : b.mean) os << ',' << fmt_num(m);
    os << ',' << fmt_num(defect) << ',' << static_cast<int>(max_zero) << ','
       << fmt_num(n > 1 ? b.stddev[1] / std::sqrt(static_cast<double>(b.runs)) : 0.0) << ",NA\n";
    os << csv_quote(first.perm_id) << ",spread," << first.steps;
    for (double s : b.spread) os << ',' << fmt_num(s);
    os << ",NA,NA," << fmt_num(n > 1 ? b.spread[1] : 0.0) << ",NA\n";
    return os.str();
}

}  // namespace kz
