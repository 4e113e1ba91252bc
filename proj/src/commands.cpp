#include "kz/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kz/boundary.hpp"
#include "kz/deviation.hpp"
#include "kz/errors.hpp"
#include "kz/lyapunov.hpp"
#include "kz/parallel.hpp"
#include "kz/text.hpp"

namespace fs = std::filesystem;

namespace kz {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const nlohmann::json& field(const nlohmann::json& in, const char* name)
{
    if (!in.contains(name)) throw InvalidInput(std::string("inputs.") + name + ": missing");
    return in.at(name);
}

template <class T>
T get(const nlohmann::json& in, const char* name)
{
    try {
        return field(in, name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string("inputs.") + name + ": wrong type (" + field(in, name).dump() + ")");
    }
}

std::uint64_t get_count(const nlohmann::json& in, const char* name)
{
    const auto& v = field(in, name);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw InvalidInput(std::string("inputs.") + name + ": must be non-negative");
        return v.get<std::uint64_t>();
    }
    if (v.is_string()) return parse_count(v.get<std::string>(), std::string("inputs.") + name);
    if (v.is_number_float()) return parse_count(fmt_num(v.get<double>()), std::string("inputs.") + name);
    throw InvalidInput(std::string("inputs.") + name + ": expected a count");
}

std::vector<std::uint64_t> get_seeds(const nlohmann::json& in)
{
    const auto& v = field(in, "seeds");
    if (!v.is_array() || v.empty()) throw InvalidInput("inputs.seeds: expected a non-empty list of seeds");
    std::vector<std::uint64_t> out;
    for (const auto& s : v) {
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            throw InvalidInput("inputs.seeds: seeds must be non-negative integers");
        out.push_back(s.get<std::uint64_t>());
    }
    return out;
}

std::ofstream open_output(const fs::path& path, CommandOutput& result)
{
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot write " + path.string());
    result.files.push_back(path);
    return os;
}

void write_json(const fs::path& path, const nlohmann::json& j, CommandOutput& result)
{
    auto os = open_output(path, result);
    os << j.dump(2) << '\n';
}

Permutation permutation_input(const nlohmann::json& in)
{
    return Permutation::parse(get<std::string>(in, "top"), get<std::string>(in, "bottom"));
}

}  // namespace

std::uint64_t parse_count(const std::string& text, const std::string& what)
{
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw InvalidInput(what + ": '" + text + "' is not a number");
    }
    if (pos != text.size()) throw InvalidInput(what + ": '" + text + "' is not a number");
    if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e18)
        throw InvalidInput(what + ": '" + text + "' is not a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

// --- lyap ------------------------------------------------------------------------

nlohmann::json lyap_defaults(nlohmann::json in)
{
    if (!in.contains("qr_period")) in["qr_period"] = 10;
    if (!in.contains("batches")) in["batches"] = 20;
    if (!in.contains("zero_floor")) in["zero_floor"] = 0.02;
    if (!in.contains("max_stderr_2")) in["max_stderr_2"] = nullptr;
    if (!in.contains("timing")) in["timing"] = false;
    return in;
}

CommandOutput run_lyap(const nlohmann::json& raw, const fs::path& out)
{
    const auto t0 = Clock::now();
    const nlohmann::json in = lyap_defaults(raw);
    const Permutation perm = permutation_input(in);
    SpectrumOptions options;
    options.steps = get_count(in, "steps");
    options.qr_period = get_count(in, "qr_period");
    options.batches = get_count(in, "batches");
    options.zero_floor = get<double>(in, "zero_floor");
    if (!in.at("max_stderr_2").is_null()) options.max_stderr_2 = get<double>(in, "max_stderr_2");
    const bool timing = get<bool>(in, "timing");
    const auto seeds = get_seeds(in);
    if (options.steps < 10'000) throw InvalidInput("inputs.steps: must be at least 1e4");
    if (options.qr_period < 1) throw InvalidInput("inputs.qr_period: must be at least 1");

    std::vector<SpectrumEstimate> runs(seeds.size());
    std::vector<double> walls(seeds.size());
    std::vector<char> failed(seeds.size(), 0);
    parallel_for(seeds.size(), [&](std::size_t i) {
        const auto start = Clock::now();
        try {
            runs[i] = estimate_spectrum(perm, seeds[i], options);
        } catch (const SpectrumNonConvergence& e) {
            runs[i] = e.estimate();
            failed[i] = 1;
        }
        walls[i] = seconds_since(start);
    });

    CommandOutput result;
    Manifest manifest = make_manifest("lyap", in);
    {
        auto os = open_output(out / "lyap.csv", result);
        os << manifest.csv_comment() << spectrum_csv_header(runs.front().genus) << '\n';
        for (std::size_t i = 0; i < runs.size(); ++i)
            os << spectrum_csv_row(runs[i], timing ? std::optional<double>(walls[i]) : std::nullopt) << '\n';
        if (runs.size() > 1) os << spectrum_csv_batch_rows(runs);
    }

    nlohmann::json report;
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto j = spectrum_json(runs[i]);
        j["converged"] = !failed[i];
        j["wall_seconds"] = walls[i];
        list.push_back(std::move(j));
    }
    const auto stratum = stratum_of(perm);
    report["stratum"] = {{"genus", stratum.genus},
                         {"sigma", stratum.sigma},
                         {"kappa", stratum.kappa},
                         {"abelian_orders", stratum.abelian_orders},
                         {"label", stratum.label()}};
    report["runs"] = list;
    if (runs.size() > 1) {
        const auto b = aggregate(runs);
        report["aggregate"] = {{"mean", b.mean}, {"spread", b.spread}, {"stddev", b.stddev}, {"runs", b.runs}};
    }
    bool all_converged = true;
    for (char f : failed) all_converged = all_converged && !f;
    report["converged"] = all_converged;
    manifest.wall_seconds = seconds_since(t0);
    report["manifest"] = manifest.to_json();
    write_json(out / "lyap.json", report, result);
    if (!all_converged) {
        result.exit_code = 2;
        result.warnings.push_back("stderr of lambda_2 exceeded max_stderr_2 for at least one seed");
    }
    return result;
}

// --- deviate ---------------------------------------------------------------------

nlohmann::json deviate_defaults(nlohmann::json in)
{
    const DeviationOptions d;
    if (!in.contains("lengths")) in["lengths"] = nullptr;
    if (!in.contains("x0")) in["x0"] = nullptr;
    if (!in.contains("first")) in["first"] = d.first;
    if (!in.contains("last")) in["last"] = d.last;
    if (!in.contains("per_decade")) in["per_decade"] = d.per_decade;
    if (!in.contains("fit_lo")) in["fit_lo"] = d.fit_lo;
    if (!in.contains("fit_hi")) in["fit_hi"] = d.fit_hi;
    if (!in.contains("forward_depth")) in["forward_depth"] = 2000;
    if (!in.contains("backward_depth")) in["backward_depth"] = 2000;
    if (!in.contains("compare")) in["compare"] = nullptr;
    return in;
}

CommandOutput run_deviate(const nlohmann::json& raw, const fs::path& out)
{
    const auto t0 = Clock::now();
    const nlohmann::json in = deviate_defaults(raw);
    const Permutation perm = permutation_input(in);
    DeviationOptions options;
    options.first = get_count(in, "first");
    options.last = get_count(in, "last");
    options.per_decade = static_cast<int>(get_count(in, "per_decade"));
    options.fit_lo = get_count(in, "fit_lo");
    options.fit_hi = get_count(in, "fit_hi");
    const std::uint64_t forward_depth = get_count(in, "forward_depth");
    const std::uint64_t backward_depth = get_count(in, "backward_depth");
    if (options.last < options.first || options.first < 1) throw InvalidInput("inputs.first/last: need 1 <= first <= last");

    CommandOutput result;
    std::vector<DeviationRun> runs;
    double mean_slope = 0.0, slope_err = 0.0;
    Iet frame_iet = Iet::make(perm, std::vector<double>(perm.size(), 1.0));
    double frame_x0 = 0.0;
    if (!in.at("lengths").is_null()) {
        if (in.at("x0").is_null()) throw InvalidInput("inputs.x0: required when lengths are given");
        frame_iet = Iet::make(perm, get<std::vector<double>>(in, "lengths"));
        frame_x0 = get<double>(in, "x0");
        runs.push_back(deviation_run(frame_iet, frame_x0, options));
        mean_slope = runs.front().fit.slope;
        slope_err = runs.front().fit.std_err;
    } else {
        const auto seeds = get_seeds(in);
        if (seeds.size() == 1) {
            runs.push_back(deviation_run(perm, seeds.front(), options));
            mean_slope = runs.front().fit.slope;
            slope_err = runs.front().fit.std_err;
        } else {
            auto ens = deviation_ensemble(perm, seeds, options);
            runs = std::move(ens.runs);
            mean_slope = ens.mean_slope;
            slope_err = ens.std_err;
        }
        frame_iet = Iet::make(perm, runs.front().lengths);
        frame_x0 = runs.front().x0;
    }

    const OseledecFrame frame = oseledec_frame(frame_iet, forward_depth, backward_depth);
    const auto schedule = geometric_schedule(options.first, options.last, options.per_decade);
    const ProjectedGrowth growth = projected_growth(frame_iet, frame, frame_x0, schedule);

    Manifest manifest = make_manifest("deviate", in);
    {
        auto os = open_output(out / "deviate_series.csv", result);
        os << manifest.csv_comment() << "seed,N,S_N,runmax\n";
        for (const auto& r : runs)
            for (const auto& p : r.series)
                os << r.seed << ',' << p.n << ',' << fmt_num(p.sum) << ',' << fmt_num(p.running_max) << '\n';
    }
    {
        auto os = open_output(out / "deviate_slopes.csv", result);
        os << manifest.csv_comment() << "seed,x0,symbol,slope,stderr,points,n_lo,n_hi\n";
        for (const auto& r : runs)
            os << r.seed << ',' << fmt_num(r.x0) << ',' << r.symbol + 1 << ',' << fmt_num(r.fit.slope) << ','
               << fmt_num(r.fit.std_err) << ',' << r.fit.points << ',' << r.fit.n_lo << ',' << r.fit.n_hi << '\n';
    }
    {
        auto os = open_output(out / "deviate_projection.csv", result);
        os << manifest.csv_comment() << "N";
        for (const auto& c : growth.clusters) os << ",log_norm_" << c << ",log_runmax_" << c;
        os << '\n';
        for (const auto& p : growth.points) {
            os << p.n;
            for (std::size_t c = 0; c < growth.clusters.size(); ++c)
                os << ',' << fmt_num(std::log(p.norm[c])) << ',' << fmt_num(std::log(p.running_max[c]));
            os << '\n';
        }
    }

    nlohmann::json report;
    report["birkhoff"] = {{"mean_slope", mean_slope}, {"stderr", slope_err}, {"runs", runs.size()}};
    nlohmann::json clusters = nlohmann::json::array();
    for (std::size_t c = 0; c < growth.clusters.size(); ++c) {
        nlohmann::json cj = {{"name", growth.clusters[c]},
                             {"dimension", frame.clusters[c].dimension()},
                             {"exponent", frame.clusters[c].exponent},
                             {"max_norm", growth.points.back().running_max[c]}};
        try {
            const auto fit = growth.slope(c, options.fit_lo, options.fit_hi);
            cj["slope"] = fit.slope;
            cj["slope_stderr"] = fit.std_err;
        } catch (const WindowTooShort&) {
            cj["slope"] = nullptr;
        }
        // Maxima over the last two full decades of the run.
        const std::uint64_t hi = options.last;
        if (hi >= 100 * options.first) {
            cj["last_decade_max"] = growth.window_max(c, hi / 10, hi);
            cj["previous_decade_max"] = growth.window_max(c, hi / 100, hi / 10);
        }
        clusters.push_back(std::move(cj));
    }
    report["projection"] = {{"clusters", clusters},
                            {"forward_exponents", frame.forward_exponents},
                            {"backward_exponents", frame.backward_exponents},
                            {"min_flag_sine", frame.min_flag_sine},
                            {"iet", to_json(frame_iet)},
                            {"x0", frame_x0}};

    // Every interval indicator along the frame orbit; a slope nearer a lower
    // cluster than the second one is flagged.
    try {
        const auto fits = indicator_slopes(frame_iet, frame_x0, options);
        nlohmann::json indicators = nlohmann::json::array();
        const std::string second = frame.genus >= 2 ? "expanding_2" : "";
        for (std::size_t s = 0; s < fits.size(); ++s) {
            const std::string nearest = nearest_cluster(frame, fits[s].slope);
            const bool lower = !second.empty() && nearest != second;
            indicators.push_back({{"symbol", s + 1},
                                  {"slope", fits[s].slope},
                                  {"stderr", fits[s].std_err},
                                  {"nearest_cluster", nearest},
                                  {"lower_cluster", lower}});
            if (lower)
                result.warnings.push_back("indicator of interval " + std::to_string(s + 1) + " grows at the rate of cluster " +
                                          nearest + ", below the second exponent");
        }
        report["indicators"] = std::move(indicators);
    } catch (const WindowTooShort&) {
        report["indicators"] = nullptr;
    }

    if (!in.at("compare").is_null()) {
        const std::string path = get<std::string>(in, "compare");
        std::ifstream cmp(path);
        if (!cmp) {
            result.warnings.push_back("comparison file " + path + " not found; skipping the comparison");
        } else {
            try {
                const auto lj = nlohmann::json::parse(cmp);
                const double l2 = lj.contains("aggregate") ? lj.at("aggregate").at("mean").at(1).get<double>()
                                                           : lj.at("runs").at(0).at("lambda").at(1).get<double>();
                report["comparison"] = {{"lambda_2", l2}, {"slope", mean_slope}, {"abs_difference", std::abs(mean_slope - l2)}};
            } catch (const nlohmann::json::exception& e) {
                result.warnings.push_back("comparison file " + path + " is not a lyap report: " + e.what());
            }
        }
    }
    manifest.wall_seconds = seconds_since(t0);
    report["manifest"] = manifest.to_json();
    write_json(out / "deviate.json", report, result);
    return result;
}

// --- boundary --------------------------------------------------------------------

nlohmann::json boundary_defaults(nlohmann::json in)
{
    if (!in.contains("tolerance")) in["tolerance"] = 1e-9;
    if (!in.contains("max_patches")) in["max_patches"] = CubatureOptions{}.max_patches;
    if (!in.contains("schedule") && in.contains("family")) in["schedule"] = in["family"].value("schedule", nlohmann::json::array());
    return in;
}

CommandOutput run_boundary(const nlohmann::json& raw, const fs::path& out)
{
    const auto t0 = Clock::now();
    const nlohmann::json in = boundary_defaults(raw);
    const PinchingFamily family = family_from_json(field(in, "family"));
    const auto schedule = get<std::vector<double>>(in, "schedule");
    CubatureOptions options;
    options.rel_tol = get<double>(in, "tolerance");
    options.max_patches = get_count(in, "max_patches");
    if (!(options.rel_tol > 0.0 && options.rel_tol < 1.0)) throw InvalidInput("inputs.tolerance: must lie in (0, 1)");

    const auto rows = degeneration_sweep(family, schedule, options);
    const int g = family.genus();

    CommandOutput result;
    Manifest manifest = make_manifest("boundary", in);
    {
        auto os = open_output(out / "boundary_sweep.csv", result);
        os << manifest.csv_comment() << "t";
        for (int i = 1; i <= g; ++i) {
            const auto s = std::to_string(i);
            os << ",b_ratio_" << s << ",b_ratio_err_" << s << ",g_ratio_" << s << ",g_ratio_err_" << s;
        }
        for (int i = 1; i <= g; ++i) {
            const auto s = std::to_string(i);
            os << ",lambda_" << s << ",lambda_err_" << s << ",lambda_clipped_" << s;
        }
        os << ",lambda_product,lambda_product_err,patches\n";
        for (const auto& r : rows) {
            os << fmt_num(r.t);
            for (int i = 0; i < g; ++i)
                os << ',' << fmt_num(r.b_ratio[i]) << ',' << fmt_num(r.b_ratio_err[i]) << ',' << fmt_num(r.g_ratio[i])
                   << ',' << fmt_num(r.g_ratio_err[i]);
            for (int i = 0; i < g; ++i)
                os << ',' << fmt_num(r.lambda.values[i]) << ',' << fmt_num(r.lambda.errors[i]) << ','
                   << (r.lambda.clipped[i] ? 1 : 0);
            os << ',' << fmt_num(r.lambda.product) << ',' << fmt_num(r.lambda.product_error) << ','
               << r.matrices.patches << '\n';
        }
    }

    nlohmann::json report;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        auto matrix = [](const Eigen::MatrixXcd& m) {
            nlohmann::json a = nlohmann::json::array();
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
                a.push_back(row);
            }
            return a;
        };
        list.push_back({{"t", r.t},
                        {"b_ratio", r.b_ratio},
                        {"b_ratio_err", r.b_ratio_err},
                        {"g_ratio", r.g_ratio},
                        {"g_ratio_err", r.g_ratio_err},
                        {"lambda", r.lambda.values},
                        {"lambda_err", r.lambda.errors},
                        {"lambda_product", r.lambda.product},
                        {"lambda_product_err", r.lambda.product_error},
                        {"B", matrix(r.matrices.B)},
                        {"G", matrix(r.matrices.G)},
                        {"patches", r.matrices.patches},
                        {"evaluations", r.matrices.evaluations}});
    }
    report["rows"] = list;
    manifest.wall_seconds = seconds_since(t0);
    report["manifest"] = manifest.to_json();
    write_json(out / "boundary.json", report, result);
    return result;
}

CommandOutput run_manifest(const Manifest& manifest, const fs::path& out)
{
    if (manifest.command == "lyap") return run_lyap(manifest.inputs, out);
    if (manifest.command == "deviate") return run_deviate(manifest.inputs, out);
    if (manifest.command == "boundary") return run_boundary(manifest.inputs, out);
    throw InvalidInput("manifest names unknown command '" + manifest.command + "'");
}

}  // namespace kz
