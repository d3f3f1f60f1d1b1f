#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "esd/config.hpp"

namespace fs = std::filesystem;
using namespace esd;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("esd_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ESD_CLI_PATH) + " --quiet " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

fs::path write_config(const fs::path& dir, const RunSpec& s) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << serialize(s);
    return p;
}

}  // namespace

TEST_CASE("cli: identities pass") {
    const fs::path out = scratch("identities");
    CHECK(run_cli("reproduce --target identities --out " + out.string()) == 0);
    CHECK(slurp(out / "identities.csv").rfind("n,D_M,epsilon,T,", 0) == 0);
}

TEST_CASE("cli: zero horizon writes a header-only trajectory") {
    const fs::path out = scratch("zero_horizon");
    RunSpec s = RunSpec::example(Variant::Classical, 5, 2e-4);
    s.horizon = 0;
    const fs::path cfg = write_config(out, s);
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(slurp(out / "trajectory.csv") == "j,theta_hat_1,theta_hat_2,theta_hat_3,theta_1,theta_2,theta_3,y,eta,alpha,err\n");
}

TEST_CASE("cli: simulate is byte-identical across reruns and honours the seed override") {
    const fs::path out = scratch("determinism");
    RunSpec s = RunSpec::example(Variant::Unbiased, 5, 3e-5);
    s.horizon = 20000;
    s.decimation = 10;
    const fs::path cfg = write_config(out, s);
    const fs::path a = out / "a", b = out / "b", c = out / "c";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + b.string()) == 0);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --seed-override 5 --out " + c.string()) == 0);
    const std::string ta = slurp(a / "trajectory.csv");
    CHECK(ta.size() > 1000);
    CHECK(ta == slurp(b / "trajectory.csv"));
    CHECK(ta != slurp(c / "trajectory.csv"));
}

TEST_CASE("cli: bounds and search write their CSVs") {
    const fs::path out = scratch("bounds");
    const fs::path cfg = write_config(out, RunSpec::example(Variant::Classical, 5, 0.66e-10));
    CHECK(run_cli("bounds --sigma 1.6 --config " + cfg.string() + " --out " + out.string()) == 0);
    const std::string b = slurp(out / "bounds.csv");
    CHECK(b.find("delta_g,112.29385726640") != std::string::npos);
    CHECK(run_cli("search --method theorem --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(slurp(out / "search.csv").rfind("variant,D_M,sigma,epsilon_star,decay_rate,method\nclassical,5,", 0) == 0);
}

TEST_CASE("cli: malformed config and bad flags exit 2") {
    const fs::path out = scratch("malformed");
    std::ofstream(out / "bad.json") << "{ \"map\": ";
    CHECK(run_cli("simulate --config " + (out / "bad.json").string() + " --out " + out.string()) == 2);
    CHECK(run_cli("simulate --out " + out.string()) == 2);
    CHECK(run_cli("search --method guess --config " + (out / "bad.json").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("reproduce --target table9 --out " + out.string()) == 2);
}

TEST_CASE("cli: an undefined bound chain exits 4") {
    const fs::path out = scratch("undefined");
    RunSpec s = RunSpec::example(Variant::Unbiased, 5, 1e-6);
    s.params.omega_h = s.params.lambda;  // η filter slower than the gain decay
    const fs::path cfg = write_config(out, s);
    CHECK(run_cli("bounds --config " + cfg.string() + " --out " + out.string()) == 4);
}
