#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string err;
};

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("kz_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run kz(const std::string& args, const fs::path& dir)
{
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(KZ_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const std::string kH2 = "--top 1,2,3,4 --bottom 4,3,2,1";

}  // namespace

TEST_CASE("lyap rejects zero steps")
{
    const auto dir = scratch("zero");
    const auto r = kz("lyap " + kH2 + " --steps 0 --seed 1 --out " + dir.string(), dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("steps") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "lyap.csv"));
}

TEST_CASE("lyap output is deterministic and carries its manifest")
{
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::string args = "lyap " + kH2 + " --steps 2e4 --seeds 3 --seed 5 --out ";
    REQUIRE(kz(args + a.string(), a).code == 0);
    REQUIRE(kz(args + b.string(), b).code == 0);
    const auto csv = slurp(a / "lyap.csv");
    CHECK(csv == slurp(b / "lyap.csv"));
    CHECK(csv.rfind("# manifest: {", 0) == 0);
    CHECK(csv.find("\n\"1,2,3,4/4,3,2,1\",7,") != std::string::npos);
    CHECK(csv.find(",mean,") != std::string::npos);
    CHECK(csv.find(",spread,") != std::string::npos);

    const auto j = read_json(a / "lyap.json");
    CHECK(j.at("runs").size() == 3);
    CHECK(j.at("manifest").at("command") == "lyap");
    CHECK(j.at("manifest").contains("wall_seconds"));
    CHECK(j.at("stratum").at("genus") == 2);
}

TEST_CASE("a generated seed is printed")
{
    const auto dir = scratch("gen");
    const auto r = kz("lyap --top 1,2 --bottom 2,1 --steps 1e4 --out " + dir.string(), dir);
    CHECK(r.code == 0);
    CHECK(r.err.find("generated seed: ") != std::string::npos);
}

TEST_CASE("rerun reproduces the CSV bit for bit")
{
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    REQUIRE(kz("lyap " + kH2 + " --steps 2e4 --seeds 2 --seed 11 --out " + a.string(), a).code == 0);
    REQUIRE(kz("rerun --manifest " + (a / "lyap.csv").string() + " --out " + b.string(), b).code == 0);
    CHECK(slurp(a / "lyap.csv") == slurp(b / "lyap.csv"));

    const auto c = scratch("rerun_c");
    REQUIRE(kz("rerun --manifest " + (a / "lyap.json").string() + " --out " + c.string(), c).code == 0);
    CHECK(slurp(a / "lyap.csv") == slurp(c / "lyap.csv"));
}

TEST_CASE("a convergence bound that is not met gives exit code 2 and still writes outputs")
{
    const auto dir = scratch("nonconv");
    const auto r = kz("lyap " + kH2 + " --steps 2e4 --seed 1 --max-stderr2 1e-12 --out " + dir.string(), dir);
    CHECK(r.code == 2);
    CHECK(fs::exists(dir / "lyap.csv"));
    CHECK(read_json(dir / "lyap.json").at("converged") == false);
}

TEST_CASE("config files report the offending line")
{
    const auto dir = scratch("config");
    std::ofstream(dir / "run.json") << "{\n  \"top\": \"1,2,3,4\",\n  \"bottom\": \"4,3,2,1\",\n  \"steps\": 5,\n  \"seeds\": [1]\n}\n";
    const auto r = kz("lyap --config " + (dir / "run.json").string() + " --out " + dir.string(), dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("run.json:4:") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{\n  \"top\": \"1,2\",\n  \"bottom\" \"2,1\"\n}\n";
    const auto p = kz("lyap --config " + (dir / "broken.json").string() + " --out " + dir.string(), dir);
    CHECK(p.code == 1);
    CHECK(p.err.find("line 3") != std::string::npos);
}

TEST_CASE("deviate: torus control, comparison and missing comparison file")
{
    const auto lyap_dir = scratch("dev_lyap");
    REQUIRE(kz("lyap " + kH2 + " --steps 1e5 --seeds 2 --seed 3 --out " + lyap_dir.string(), lyap_dir).code == 0);

    const std::string window = " --first 1000 --last 1e7 --fit-lo 1e4 --fit-hi 1e7";
    const auto torus = scratch("dev_torus");
    REQUIRE(kz("deviate --top 1,2 --bottom 2,1 --lengths 1.6180339887498949,1 --x0 0.1234" + window + " --out " +
                   torus.string(),
               torus)
                .code == 0);
    const auto tj = read_json(torus / "deviate.json");
    CHECK(std::abs(tj.at("birkhoff").at("mean_slope").get<double>()) < 0.05);

    const auto h2 = scratch("dev_h2");
    const auto r = kz("deviate " + kH2 + " --seed 4" + window + " --compare " + (lyap_dir / "lyap.json").string() +
                          " --out " + h2.string(),
                      h2);
    REQUIRE(r.code == 0);
    const auto hj = read_json(h2 / "deviate.json");
    CHECK(hj.at("comparison").contains("abs_difference"));
    CHECK(hj.at("projection").at("clusters").size() == 3);
    CHECK(hj.at("indicators").size() == 4);
    for (const char* f : {"deviate_series.csv", "deviate_slopes.csv", "deviate_projection.csv"})
        CHECK(slurp(h2 / f).rfind("# manifest: {", 0) == 0);

    const auto missing = scratch("dev_missing");
    const auto m = kz("deviate " + kH2 + " --seed 4" + window + " --compare " + (missing / "nope.json").string() +
                          " --out " + missing.string(),
                      missing);
    CHECK(m.code == 0);
    CHECK(m.err.find("warning: comparison file") != std::string::npos);
    CHECK_FALSE(read_json(missing / "deviate.json").contains("comparison"));
}

TEST_CASE("an orbit that hits a breakpoint exits with code 3")
{
    const auto dir = scratch("hit");
    const auto r = kz("deviate --top 1,2 --bottom 2,1 --lengths 0.5,0.5 --x0 0 --first 10 --last 1e4 --fit-lo 10 --fit-hi 1e4 --out " +
                          dir.string(),
                      dir);
    CHECK(r.code == 3);
}

TEST_CASE("boundary: validation and tolerance")
{
    const auto dir = scratch("boundary");
    std::ofstream(dir / "bad.json")
        << R"({"name": "bad", "punctures": [[[-0.5, 0], [0.5, 0]], [[0.55, 0], [0, 1]]], "weights": [1, 1], "schedule": [1e-2]})";
    const auto bad = kz("boundary --family " + (dir / "bad.json").string() + " --out " + dir.string(), dir);
    CHECK(bad.code == 1);
    CHECK(bad.err.find("pair 2") != std::string::npos);

    const std::string family = std::string(KZ_SOURCE_DIR) + "/data/families/g2_demo.json";
    const auto loose = scratch("tol_loose"), tight = scratch("tol_tight");
    REQUIRE(kz("boundary --family " + family + " --schedule 1e-2,1e-4 --tolerance 1e-2 --out " + loose.string(), loose).code == 0);
    REQUIRE(kz("boundary --family " + family + " --schedule 1e-2,1e-4 --tolerance 1e-3 --out " + tight.string(), tight).code == 0);
    const auto lj = read_json(loose / "boundary.json"), tj = read_json(tight / "boundary.json");
    bool shrank = false;
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& lr = lj.at("rows").at(k);
        const auto& tr = tj.at("rows").at(k);
        const double le = lr.at("lambda_product_err").get<double>(), te = tr.at("lambda_product_err").get<double>();
        CHECK(le <= 1e-2);
        CHECK(te <= 1e-3);
        CHECK(te <= le);
        shrank = shrank || te < le;
        CHECK(tr.at("g_ratio_err").at(0).get<double>() <= lr.at("g_ratio_err").at(0).get<double>());
    }
    CHECK(shrank);
    CHECK(slurp(tight / "boundary_sweep.csv").find("lambda_product_err") != std::string::npos);
}

TEST_CASE("stratum subcommand")
{
    const auto dir = scratch("stratum");
    REQUIRE(kz("stratum --top 1,2,3,4,5 --bottom 5,4,3,2,1", dir).code == 0);
    const auto out = slurp(dir / "stdout.txt");
    CHECK(out.find("genus 2") != std::string::npos);
    CHECK(out.find("sigma 2") != std::string::npos);
    CHECK(kz("stratum --top 1,2,3 --bottom 1,3,2", dir).code == 1);
}
