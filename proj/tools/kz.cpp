// kz: command-line driver for the spectrum, deviation and boundary experiments.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "kz/commands.hpp"
#include "kz/errors.hpp"
#include "kz/iet.hpp"
#include "kz/rng.hpp"

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw kz::InvalidInput("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json parse_config(const std::string& path, const std::string& text)
{
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw kz::InvalidInput(path + ": " + e.what());
    }
}

// "inputs.steps: ..." -> "run.json:4: inputs.steps: ..." when the key appears in the config.
std::string with_config_line(const std::string& message, const std::string& path, const std::string& text)
{
    const std::string prefix = "inputs.";
    if (message.rfind(prefix, 0) != 0) return message;
    const auto end = message.find_first_of(":/. ", prefix.size());
    const std::string key = message.substr(prefix.size(), end - prefix.size());
    const auto at = text.find('"' + key + '"');
    if (at == std::string::npos) return path + ": " + message;
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n');
    return path + ":" + std::to_string(line) + ": " + message;
}

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw kz::InvalidInput(what + ": '" + item + "' is not a number");
        }
    }
    return out;
}

nlohmann::json seed_list(std::optional<std::uint64_t> seed, const std::string& count)
{
    const std::uint64_t n = kz::parse_count(count, "--seeds");
    if (n < 1) throw kz::InvalidInput("--seeds: at least one seed is required");
    if (!seed) {
        seed = kz::entropy_seed() >> 12;
        std::cerr << "generated seed: " << *seed << '\n';
    }
    nlohmann::json list = nlohmann::json::array();
    for (std::uint64_t i = 0; i < n; ++i) list.push_back(*seed + i);
    return list;
}

int report(const kz::CommandOutput& out)
{
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : out.files) std::cout << f.string() << '\n';
    return out.exit_code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Zorich cocycle spectra, deviation of ergodic averages, and boundary eigenvalues"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    std::string config;
    std::string top, bottom;
    std::optional<std::uint64_t> seed;
    std::string seeds = "1";

    auto* lyap = app.add_subcommand("lyap", "estimate the Lyapunov spectrum over several seeds");
    std::string steps = "1e7", qr_period = "10", batches = "20";
    double zero_floor = 0.02;
    std::optional<double> max_stderr2;
    bool timing = false;
    lyap->add_option("--top", top, "top row, e.g. 1,2,3,4");
    lyap->add_option("--bottom", bottom, "bottom row, e.g. 4,3,2,1");
    lyap->add_option("--steps", steps, "Zorich blocks per seed (1e7 notation accepted)")->capture_default_str();
    lyap->add_option("--seeds", seeds, "number of seeds")->capture_default_str();
    lyap->add_option("--seed", seed, "first seed; generated and printed if omitted");
    lyap->add_option("--qr-period", qr_period, "blocks between re-orthonormalizations")->capture_default_str();
    lyap->add_option("--batches", batches, "windows for the standard errors")->capture_default_str();
    lyap->add_option("--zero-floor", zero_floor, "floor of the zero-exponent threshold")->capture_default_str();
    lyap->add_option("--max-stderr2", max_stderr2, "fail with exit code 2 above this stderr of lambda_2");
    lyap->add_flag("--timing", timing, "fill the wall_seconds column (makes the CSV non-reproducible)");
    lyap->add_option("--config", config, "JSON inputs instead of flags");
    lyap->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* deviate = app.add_subcommand("deviate", "Birkhoff-sum deviation and projected growth");
    std::string lengths, first = "1e4", last = "1e8", per_decade = "10", fit_lo = "1e5", fit_hi = "1e8";
    std::string forward_depth = "2000", backward_depth = "2000", compare;
    std::optional<double> x0;
    deviate->add_option("--top", top, "top row");
    deviate->add_option("--bottom", bottom, "bottom row");
    deviate->add_option("--lengths", lengths, "fixed lengths, comma separated; otherwise drawn per seed");
    deviate->add_option("--x0", x0, "starting point for fixed lengths; drawn from --seed if omitted");
    deviate->add_option("--seeds", seeds, "number of random IETs")->capture_default_str();
    deviate->add_option("--seed", seed, "first seed; generated and printed if omitted");
    deviate->add_option("--first", first, "first schedule point")->capture_default_str();
    deviate->add_option("--last", last, "orbit length")->capture_default_str();
    deviate->add_option("--per-decade", per_decade, "schedule points per decade")->capture_default_str();
    deviate->add_option("--fit-lo", fit_lo, "fit window start")->capture_default_str();
    deviate->add_option("--fit-hi", fit_hi, "fit window end")->capture_default_str();
    deviate->add_option("--forward-depth", forward_depth, "blocks for the frame exponents")->capture_default_str();
    deviate->add_option("--backward-depth", backward_depth, "blocks for the frame flag")->capture_default_str();
    deviate->add_option("--compare", compare, "lyap.json to compare the slope against");
    deviate->add_option("--config", config, "JSON inputs instead of flags");
    deviate->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* boundary = app.add_subcommand("boundary", "degeneration sweep of the boundary eigenvalues");
    std::string family_path, schedule;
    double tolerance = 1e-9;
    std::string max_patches = "200000";
    boundary->add_option("--family", family_path, "family JSON file");
    boundary->add_option("--schedule", schedule, "comma separated decreasing |t| values (default: the family's)");
    boundary->add_option("--tolerance", tolerance, "bound on the error of each Lambda and of their product")->capture_default_str();
    boundary->add_option("--max-patches", max_patches, "cubature patch budget")->capture_default_str();
    boundary->add_option("--config", config, "JSON inputs instead of flags");
    boundary->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
    std::string manifest_path;
    rerun->add_option("--manifest", manifest_path, "CSV or JSON output of an earlier run, or a manifest")->required();
    rerun->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* stratum = app.add_subcommand("stratum", "print the stratum of a permutation");
    stratum->add_option("--top", top, "top row")->required();
    stratum->add_option("--bottom", bottom, "bottom row")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    std::string config_text;
    auto load_config = [&](const std::string& path) {
        const auto text = read_text(path);
        auto j = parse_config(path, text);
        if (path == config) config_text = text;
        return j;
    };

    auto need_perm = [&] {
        if (top.empty() || bottom.empty()) throw kz::InvalidInput("--top and --bottom are required");
    };

    try {
        const std::filesystem::path out(out_dir);
        if (*lyap) {
            nlohmann::json in;
            if (!config.empty()) {
                in = load_config(config);
            } else {
                need_perm();
                in = {{"top", top},
                      {"bottom", bottom},
                      {"steps", kz::parse_count(steps, "--steps")},
                      {"seeds", seed_list(seed, seeds)},
                      {"qr_period", kz::parse_count(qr_period, "--qr-period")},
                      {"batches", kz::parse_count(batches, "--batches")},
                      {"zero_floor", zero_floor},
                      {"max_stderr_2", max_stderr2 ? nlohmann::json(*max_stderr2) : nlohmann::json(nullptr)},
                      {"timing", timing}};
            }
            return report(kz::run_lyap(in, out));
        }
        if (*deviate) {
            nlohmann::json in;
            if (!config.empty()) {
                in = load_config(config);
            } else {
                need_perm();
                in = {{"top", top},
                      {"bottom", bottom},
                      {"first", kz::parse_count(first, "--first")},
                      {"last", kz::parse_count(last, "--last")},
                      {"per_decade", kz::parse_count(per_decade, "--per-decade")},
                      {"fit_lo", kz::parse_count(fit_lo, "--fit-lo")},
                      {"fit_hi", kz::parse_count(fit_hi, "--fit-hi")},
                      {"forward_depth", kz::parse_count(forward_depth, "--forward-depth")},
                      {"backward_depth", kz::parse_count(backward_depth, "--backward-depth")},
                      {"compare", compare.empty() ? nlohmann::json(nullptr) : nlohmann::json(compare)}};
                if (!lengths.empty()) {
                    in["lengths"] = parse_list(lengths, "--lengths");
                    if (!x0) {
                        if (!seed) {
                            seed = kz::entropy_seed() >> 12;
                            std::cerr << "generated seed: " << *seed << '\n';
                        }
                        kz::Rng rng(*seed);
                        x0 = rng.uniform_open();
                    }
                    in["x0"] = *x0;
                    in["seeds"] = nlohmann::json::array({seed.value_or(0)});
                } else {
                    in["seeds"] = seed_list(seed, seeds);
                }
            }
            return report(kz::run_deviate(in, out));
        }
        if (*boundary) {
            nlohmann::json in;
            if (!config.empty()) {
                in = load_config(config);
            } else {
                if (family_path.empty()) throw kz::InvalidInput("--family is required");
                in = {{"family", load_config(family_path)},
                      {"tolerance", tolerance},
                      {"max_patches", kz::parse_count(max_patches, "--max-patches")}};
                if (!schedule.empty()) in["schedule"] = parse_list(schedule, "--schedule");
            }
            return report(kz::run_boundary(in, out));
        }
        if (*rerun) return report(kz::run_manifest(kz::read_manifest(manifest_path), out));
        if (*stratum) {
            const auto perm = kz::Permutation::parse(top, bottom);
            const auto s = kz::stratum_of(perm);
            std::cout << "permutation " << perm.id() << "\nstratum " << s.label() << "\ngenus " << s.genus
                      << "\nsigma " << s.sigma << '\n';
            return 0;
        }
    } catch (const kz::InvalidInput& e) {
        const std::string msg = config_text.empty() ? e.what() : with_config_line(e.what(), config, config_text);
        std::cerr << "error: " << msg << '\n';
        return 1;
    } catch (const kz::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const kz::DynamicsAbort& e) {
        std::cerr << "dynamics abort: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
