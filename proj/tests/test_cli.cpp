#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
    const char* env = std::getenv("NGPBO_CLI");
    REQUIRE_MESSAGE(env != nullptr, "NGPBO_CLI must point at the built binary");
    return env;
}

struct Sandbox {
    fs::path dir;
    Sandbox() : dir(fs::temp_directory_path() / "ngpbo_cli_tests") {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json load_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

} // namespace

TEST_CASE("generate: counts, determinism, usage errors") {
    Sandbox sb;
    const std::string out1 = sb / "a.json";
    const std::string out2 = sb / "b.json";
    CHECK(run("generate --tasks 6 --seed 3 --points 25 --out " + out1) == 0);
    CHECK(load_json(out1).at("tasks").size() == 6);

    CHECK(run("generate --tasks 6 --seed 3 --points 25 --out " + out2) == 0);
    CHECK(slurp(out1) == slurp(out2)); // byte-identical

    CHECK(run("generate --tasks 6 --seed 3") == 2);         // missing --out
    CHECK(run("generate --tasks 0 --seed 3 --out " + out1) == 2); // config error
}

TEST_CASE("train: flag-to-variant mapping and history rows") {
    Sandbox sb;
    const std::string data = sb / "ds.json";
    REQUIRE(run("generate --tasks 10 --seed 5 --points 20 --out " + data) == 0);

    const std::string common = " --data " + data + " --source 6 --val 2 --target 2 --split-seed 1" +
                               " --hidden 6 --epochs 4 --patience 4 --seed 2";
    const std::string ck_rmk = sb / "rmk.json";
    const std::string hist = sb / "hist.csv";
    CHECK(run("train" + common + " --use-r --use-m --use-k --out " + ck_rmk + " --history " + hist) == 0);
    CHECK(load_json(ck_rmk).at("training_meta").at("variant") == "NGP-RMK");

    std::ifstream h(hist);
    std::string line;
    int rows = -1; // header
    while (std::getline(h, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4); // one row per epoch run

    const std::string ck_tgp = sb / "tgp.json";
    CHECK(run("train" + common + " --out " + ck_tgp) == 0);
    CHECK(load_json(ck_tgp).at("training_meta").at("variant") == "TGP");
    CHECK(load_json(ck_tgp).at("config").at("use_mean_net") == false);

    // Identical flags twice -> numerically identical checkpoints.
    const std::string ck2 = sb / "rmk2.json";
    CHECK(run("train" + common + " --use-r --use-m --use-k --out " + ck2) == 0);
    CHECK(load_json(ck2).at("mean_params") == load_json(ck_rmk).at("mean_params"));

    CHECK(run("train --data " + data + " --source 6 --val 2 --out x.json") == 2); // missing flags
}

TEST_CASE("benchmark: aggregation shape, determinism, exit codes") {
    Sandbox sb;
    const std::string data = sb / "ds.json";
    REQUIRE(run("generate --tasks 10 --seed 8 --points 20 --out " + data) == 0);
    const std::string ck = sb / "ck.json";
    REQUIRE(run("train --data " + data + " --source 6 --val 2 --target 2 --split-seed 1 --hidden 6" +
                " --epochs 3 --patience 3 --seed 2 --use-r --use-m --use-k --out " + ck) == 0);

    const std::string rep1 = sb / "r1.json";
    const std::string rep2 = sb / "r2.json";
    const std::string args = " --data " + data + " --source 6 --val 2 --target 2 --split-seed 1" +
                             " --strategies ngp=" + ck + ",gp,random --budget 8 --seeds 1,2" +
                             " --table " + (sb / "t.csv") + " --regret " + (sb / "g.csv");
    CHECK(run("benchmark" + args + " --out " + rep1) == 0);
    const auto rep = load_json(rep1);
    CHECK(rep.at("summary").size() == 3);                  // one row per strategy
    CHECK(rep.at("runs").size() == 3 * 2 * 2);             // strategies x tasks x seeds
    CHECK(rep.at("meta").at("strategies").at(0).at("checkpoint_digest") != "");

    std::ifstream t(sb / "t.csv");
    std::string header;
    std::getline(t, header);
    CHECK(header == "strategy,mean_evals_to_max,stderr,runs");

    CHECK(run("benchmark" + args + " --out " + rep2) == 0);
    CHECK(load_json(rep1) == load_json(rep2)); // rerun is numerically identical

    // Missing checkpoint for a model strategy is a usage error.
    CHECK(run("benchmark --data " + data + " --source 6 --val 2 --target 2 --split-seed 1" +
              " --strategies ngp --budget 8 --out " + (sb / "x.json")) == 2);
    CHECK(run("benchmark --data " + data + " --source 6 --val 2 --target 2 --split-seed 1" +
              " --strategies ngp=" + (sb / "nope.json") + " --budget 8 --out " + (sb / "x.json")) == 2);
}

TEST_CASE("report: merging and digest mismatch") {
    Sandbox sb;
    const std::string data = sb / "ds.json";
    REQUIRE(run("generate --tasks 10 --seed 9 --points 20 --out " + data) == 0);
    const std::string base = " --data " + data + " --source 6 --val 2 --target 2 --split-seed 1" +
                             " --strategies random --budget 8 --out ";
    const std::string rep1 = sb / "r1.json";
    const std::string rep2 = sb / "r2.json";
    REQUIRE(run("benchmark" + base + rep1 + " --seeds 1") == 0);
    REQUIRE(run("benchmark" + base + rep2 + " --seeds 2") == 0);

    const std::string table = sb / "merged.csv";
    CHECK(run("report --in " + rep1 + "," + rep2 + " --table " + table) == 0);
    std::ifstream t(table);
    std::string header, row;
    std::getline(t, header);
    std::getline(t, row);
    CHECK(row.find("Random") == 0);
    CHECK(row.back() == '4'); // pooled runs: 2 tasks x 2 reports

    // A report over a different dataset cannot be merged.
    const std::string data2 = sb / "ds2.json";
    REQUIRE(run("generate --tasks 10 --seed 10 --points 20 --out " + data2) == 0);
    const std::string rep3 = sb / "r3.json";
    REQUIRE(run("benchmark --data " + data2 + " --source 6 --val 2 --target 2 --split-seed 1" +
                " --strategies random --budget 8 --out " + rep3 + " --seeds 1") == 0);
    CHECK(run("report --in " + rep1 + "," + rep3) == 2);
}
