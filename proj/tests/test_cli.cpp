#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "cdfsl_cli_test";

int run(const std::string& args) {
    std::string cmd = std::string(CDFSL_CLI_PATH) + " " + args + " > " + (kWork / "stdout.txt").string() +
                      " 2> " + (kWork / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// tiny benchmark so the full command chain stays fast
void write_small_config(const fs::path& path) {
    std::ofstream f(path);
    f << R"({
  "model": {"in_dim": 6, "encoder_hidden": [16, 16], "feat_dim": 8,
            "mapper_hidden": 8, "domain_hidden": 8},
  "data": {"source_classes": 8, "heldout_classes": 4, "target_classes": 6,
           "per_class": 8, "per_class_eval": 7,
           "targets": [{"name": "t45", "rotation_deg": 45.0}]},
  "pretrain": {"epochs": 2, "batch_size": 8},
  "meta": {"episodes": 3, "way": 3, "shot": 2, "query": 4},
  "eval": {"tasks": 4, "way": 3, "shot": 2, "query": 4, "emd_cap": 16},
  "sweep": {"kappa_max": 0.4, "kappa_step": 0.2}
})";
}

struct Setup {
    Setup() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        write_small_config(kWork / "small.json");
    }
};
Setup setup_once;

}  // namespace

TEST_CASE("selftest exits zero and prints only passes") {
    CHECK(run("selftest") == 0);
    std::string out = slurp(kWork / "stdout.txt");
    CHECK(out.find("PASS") != std::string::npos);
    CHECK(out.find("FAIL") == std::string::npos);
}

TEST_CASE("missing out directory is a config error") {
    CHECK(run("pretrain --config " + (kWork / "small.json").string()) == 2);
}

TEST_CASE("bad config paths and parse errors exit with code 2") {
    CHECK(run("pretrain --config /nonexistent.json --out " + (kWork / "r0").string()) == 2);
    std::ofstream(kWork / "bad.json") << "{broken";
    CHECK(run("pretrain --config " + (kWork / "bad.json").string() + " --out " +
              (kWork / "r0").string()) == 2);
    std::ofstream(kWork / "unknown.json") << R"({"nope": 1})";
    CHECK(run("pretrain --config " + (kWork / "unknown.json").string() + " --out " +
              (kWork / "r0").string()) == 2);
}

TEST_CASE("metatrain without a checkpoint is a config error") {
    CHECK(run("metatrain --config " + (kWork / "small.json").string() + " --out " +
              (kWork / "r0").string()) == 2);
}

TEST_CASE("full chain writes run artifacts and respects --force") {
    std::string cfg = " --config " + (kWork / "small.json").string();
    fs::path pre = kWork / "run_pre";
    fs::path meta = kWork / "run_meta";
    fs::path ev = kWork / "run_eval";

    REQUIRE(run("pretrain" + cfg + " --out " + pre.string() + " --seed 5") == 0);
    CHECK(fs::exists(pre / "resolved_config.json"));
    CHECK(fs::exists(pre / "inputs_hash.txt"));
    CHECK(fs::exists(pre / "pretrain_trace.csv"));
    CHECK(fs::exists(pre / "pretrain_checkpoint.json"));
    CHECK(fs::exists(pre / "pretrain_checkpoint.bin"));

    // refusing to clobber an existing run without --force
    CHECK(run("pretrain" + cfg + " --out " + pre.string() + " --seed 5") == 2);
    CHECK(run("pretrain" + cfg + " --out " + pre.string() + " --seed 5 --force") == 0);

    REQUIRE(run("metatrain" + cfg + " --out " + meta.string() + " --seed 5 --checkpoint " +
                (pre / "pretrain_checkpoint").string()) == 0);
    CHECK(fs::exists(meta / "metatrain_trace.csv"));
    CHECK(fs::exists(meta / "metatrain_checkpoint.json"));

    REQUIRE(run("evaluate" + cfg + " --out " + ev.string() + " --seed 5 --checkpoint " +
                (meta / "metatrain_checkpoint").string()) == 0);
    CHECK(fs::exists(ev / "eval_t45.csv"));
    CHECK(fs::exists(ev / "eval_t45.json"));
    std::string csv = slurp(ev / "eval_t45.csv");
    CHECK(csv.rfind("task_id,seed,accuracy,mean_rho,mean_rho_fused,emd", 0) == 0);

    // reruns of evaluation are byte-identical
    fs::path ev2 = kWork / "run_eval2";
    REQUIRE(run("evaluate" + cfg + " --out " + ev2.string() + " --seed 5 --checkpoint " +
                (meta / "metatrain_checkpoint").string()) == 0);
    CHECK(slurp(ev2 / "eval_t45.csv") == csv);
    CHECK(slurp(ev2 / "eval_t45.json") == slurp(ev / "eval_t45.json"));
}

TEST_CASE("rho-off evaluation runs and can differ from the default") {
    std::string cfg = " --config " + (kWork / "small.json").string();
    fs::path meta = kWork / "run_meta";
    REQUIRE(fs::exists(meta / "metatrain_checkpoint.json"));  // produced by the chain test
    fs::path off = kWork / "run_eval_off";
    CHECK(run("evaluate" + cfg + " --out " + off.string() + " --seed 5 --rho-off --checkpoint " +
              (meta / "metatrain_checkpoint").string()) == 0);
    CHECK(fs::exists(off / "eval_t45.csv"));
}

TEST_CASE("ablate and sweep write their summary tables") {
    std::string cfg = " --config " + (kWork / "small.json").string();
    fs::path ab = kWork / "run_ablate";
    REQUIRE(run("ablate" + cfg + " --out " + ab.string() + " --seed 5") == 0);
    std::string table = slurp(ab / "ablation.csv");
    CHECK(table.rfind("regime,target,mean_accuracy,ci95_halfwidth", 0) == 0);
    CHECK(table.find("supervised,") != std::string::npos);
    CHECK(table.find("ssl,") != std::string::npos);
    CHECK(table.find("mixed,") != std::string::npos);

    fs::path sw = kWork / "run_sweep";
    REQUIRE(run("sweep" + cfg + " --out " + sw.string() + " --seed 5") == 0);
    std::string sweep = slurp(sw / "sweep.csv");
    CHECK(sweep.rfind("kappa,mean_accuracy", 0) == 0);
    CHECK(sweep.find("\n0,") != std::string::npos);
    CHECK(sweep.find("0.4") != std::string::npos);
}
