#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "hazesep/config.hpp"
#include "hazesep/urf_io.hpp"

using namespace hazesep;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "hazesep_cli_test";

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    fs::create_directories(kDir);
    const fs::path out = kDir / "stdout.txt";
    const std::string command = std::string(HAZESEP_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(command.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path write_config(const std::string& name, const std::string& body) {
    fs::create_directories(kDir);
    const fs::path p = kDir / name;
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST_CASE("help on every subcommand lists all keys and defaults") {
    for (const char* sub : {"synth", "train", "dehaze", "eval", "bmode"}) {
        const Run r = run(std::string(sub) + " --help");
        CHECK(r.code == 0);
        for (const auto& k : config_keys()) {
            const std::string name = k.section.empty() ? k.key : k.section + "." + k.key;
            CHECK_MESSAGE(r.out.find(name + " = " + k.default_value.dump()) != std::string::npos,
                          sub << ": " << name);
        }
    }
}

TEST_CASE("exit codes") {
    const fs::path small = write_config("small.json", R"({
        "phantom": {"rows": 32, "cols": 32}, "patch": {"rows": 32, "cols": 32},
        "network": {"channels": 2, "layers": 2}, "training": {"epochs": 1},
        "synth": {"n_frames": 1, "levels": [0.3]}, "threads": 1
    })");
    const std::string cfg = " --config " + small.string();

    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("synth --bogus-flag").code == 2);
    CHECK(run("synth --config " + write_config("typo.json", R"({"dehaze": {"lamda": 1}})").string()).code == 2);
    CHECK(run("synth --config " + write_config("broken.json", "{ nope").string()).code == 2);
    CHECK(run("synth --config " + (kDir / "absent.json").string()).code == 3);
    CHECK(run("train --prior bone" + cfg).code == 2);

    const fs::path ds = kDir / "ds";
    fs::remove_all(ds);
    CHECK(run("synth" + cfg + " --out " + ds.string()).code == 0);
    const fs::path ck = kDir / "ck";
    CHECK(run("train --prior tissue" + cfg + " --dataset " + ds.string() + " --out " + (ck / "t.hsnet").string()).code == 0);
    CHECK(run("train --prior haze" + cfg + " --dataset " + ds.string() + " --out " + (ck / "h.hsnet").string()).code == 0);
    CHECK(fs::exists(ck / "t_loss.csv"));

    const std::string nets = " --tissue " + (ck / "t.hsnet").string() + " --haze " + (ck / "h.hsnet").string();
    const fs::path y = ds / "frames/mixed_L0.300_0000.urf";
    CHECK(run("dehaze" + cfg + nets + " --input " + y.string() + " --out " + (kDir / "o1").string() + " --seed 5").code == 0);
    CHECK(run("dehaze" + cfg + nets + " --input " + (kDir / "missing.urf").string()).code == 3);

    // a non-finite sample in a file is an I/O error
    RFGrid bad(32, 32, 0.1);
    bad(3, 4) = std::numeric_limits<double>::quiet_NaN();
    write_urf_file(kDir / "nan.urf", bad);
    CHECK(run("dehaze" + cfg + nets + " --input " + (kDir / "nan.urf").string()).code == 3);

    // data-consistency steps this large with no trust bound overflow the expansion
    const fs::path blow = write_config("blow.json", R"({
        "phantom": {"rows": 32, "cols": 32}, "patch": {"rows": 32, "cols": 32}, "threads": 1,
        "dehaze": {"lambda": 1e6, "kappa": 1e6, "dc_trust": 0}
    })");
    CHECK(run("dehaze --config " + blow.string() + nets + " --input " + y.string() + " --out " +
              (kDir / "o2").string()).code == 4);

    CHECK(run("bmode" + cfg + " --input " + y.string() + " --output " + (kDir / "y.png").string()).code == 0);
    CHECK(fs::exists(kDir / "y.png"));
}
