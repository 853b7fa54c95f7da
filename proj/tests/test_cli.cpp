#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "cocoon/cli.hpp"
#include "cocoon/config.hpp"
#include "cocoon/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cocoon;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

const char* kSmallConfig = R"({
  "seed": 3,
  "corpus": {"source": "synthetic", "users": 30, "news": 90, "categories": 3, "subcategories": 2, "history_len": 4},
  "model": {"kind": "mf", "dim": 6},
  "train": {"epochs": 2, "learning_rate": 0.05},
  "simulation": {"rounds": 2, "k": 5, "report_ks": [5, 10], "level": "both"}
})";

fs::path small_config(const std::string& name) {
    const fs::path dir = testing::temp_dir(name);
    spit(dir / "config.json", kSmallConfig);
    return dir / "config.json";
}

}  // namespace

TEST_CASE("ingest prints the corpus summary") {
    const fs::path dir = testing::temp_dir("cli_ingest");
    spit(dir / "news.tsv",
         "N1\tsports\tsoccer\tGoal!\tA late goal.\thttp://x\t[]\t[]\n"
         "N2\tnews\tpolitics\tVote\t\thttp://y\t[]\t[]\n"
         "N3\tsports\ttennis\tAce\tServe.\thttp://z\t[]\t[]\n");
    spit(dir / "behaviors.tsv",
         "1\tU1\t11/11/2019 9:05:58 AM\tN1 N2\tN3-1 N2-0\n"
         "2\tU2\t11/12/2019 9:05:58 AM\tN3\tN1-0\n");
    const auto r = cli({"--out", (dir / "out").string(), "ingest", "--news", (dir / "news.tsv").string(), "--behaviors",
                        (dir / "behaviors.tsv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out == "News\tUsers\tCategory\tSubcategory\tImpression\n3\t2\t2\t3\t2\n");
    CHECK(fs::exists(dir / "out" / "news.tsv"));
    CHECK(fs::exists(dir / "out" / "behaviors.tsv"));

    const auto again = cli({"--out", (dir / "out2").string(), "ingest", "--news", (dir / "out" / "news.tsv").string(),
                            "--behaviors", (dir / "out" / "behaviors.tsv").string()});
    CHECK(again.out == r.out);
}

TEST_CASE("missing input file fails with a message") {
    const fs::path dir = testing::temp_dir("cli_missing");
    const auto r = cli({"--out", dir.string(), "ingest", "--news", (dir / "nope.tsv").string(), "--behaviors",
                        (dir / "nope2.tsv").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("nope.tsv") != std::string::npos);
}

TEST_CASE("malformed input reports file and line") {
    const fs::path dir = testing::temp_dir("cli_malformed");
    spit(dir / "news.tsv", "N1\tsports\tsoccer\tGoal\t\thttp://x\t[]\t[]\nN2\tbroken\n");
    spit(dir / "behaviors.tsv", "");
    const auto r = cli({"--out", (dir / "o").string(), "ingest", "--news", (dir / "news.tsv").string(), "--behaviors",
                        (dir / "behaviors.tsv").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("news.tsv:2") != std::string::npos);
}

TEST_CASE("unknown subcommand and bad flags exit nonzero") {
    CHECK(cli({"frobnicate"}).code != 0);
    CHECK(cli({}).code != 0);
    CHECK(cli({"simulate", "--rounds", "many"}).code != 0);
    CHECK(cli({"simulate"}).code != 0);  // no output directory
}

TEST_CASE("simulate writes one row per level and depth") {
    const auto cfg = small_config("cli_sim_cfg");
    const fs::path out = testing::temp_dir("cli_sim");
    const auto r = cli({"--config", cfg.string(), "--out", out.string(), "simulate", "--rounds", "1"});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(out / "series.csv");
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "round,level,K,N,H,R,D,O,C");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4);
    for (const char* f : {"config.json", "trends.json", "rounds/000.json", "graph/000.edges", "graph/000.parts"})
        CHECK(fs::exists(out / f));

    const fs::path rerun = testing::temp_dir("cli_sim_rerun");
    REQUIRE(cli({"--config", cfg.string(), "--out", rerun.string(), "simulate", "--rounds", "1"}).code == 0);
    CHECK(slurp(rerun / "series.csv") == csv);
    CHECK(slurp(rerun / "rounds/000.json") == slurp(out / "rounds/000.json"));
    CHECK(slurp(rerun / "graph/000.parts") == slurp(out / "graph/000.parts"));

    // The written config reproduces the run on its own.
    const fs::path replay = testing::temp_dir("cli_sim_replay");
    REQUIRE(cli({"--config", (out / "config.json").string(), "--out", replay.string(), "simulate"}).code == 0);
    CHECK(slurp(replay / "series.csv") == csv);
}

TEST_CASE("ccr with gamma 0 matches the baseline run") {
    const auto cfg = small_config("cli_identity_cfg");
    const fs::path a = testing::temp_dir("cli_identity_none");
    const fs::path b = testing::temp_dir("cli_identity_ccr");
    REQUIRE(cli({"--config", cfg.string(), "--out", a.string(), "simulate", "--strategy", "none"}).code == 0);
    REQUIRE(cli({"--config", cfg.string(), "--out", b.string(), "simulate", "--strategy", "ccr", "--gamma", "0"}).code == 0);
    CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
}

TEST_CASE("compare and report") {
    const auto cfg = small_config("cli_compare_cfg");
    const fs::path base = testing::temp_dir("cli_cmp") + "/base";
    const fs::path egs = fs::path(testing::temp_dir("cli_cmp_egs")) / "egs";
    REQUIRE(cli({"--config", cfg.string(), "--out", base.string(), "simulate"}).code == 0);
    REQUIRE(cli({"--config", cfg.string(), "--out", egs.string(), "simulate", "--strategy", "egs", "--epsilon", "0.5"}).code == 0);

    const fs::path copy = fs::path(testing::temp_dir("cli_cmp_copy")) / "copy";
    fs::create_directories(copy);
    fs::copy(base / "series.csv", copy / "series.csv");
    fs::copy(base / "config.json", copy / "config.json");
    const auto self = cli({"compare", base.string(), copy.string()});
    REQUIRE(self.code == 0);
    std::istringstream lines(self.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line.rfind("run,level,K,N,H,R,D,O,N_improv_pct", 0) == 0);
    int copy_rows = 0;
    while (std::getline(lines, line))
        if (line.rfind("copy,", 0) == 0) {
            ++copy_rows;
            CHECK(line.find("0.00,0.00,") != std::string::npos);
            CHECK(line.find("-") == std::string::npos);
        }
    CHECK(copy_rows == 4);

    const fs::path charts = testing::temp_dir("cli_cmp_out");
    const auto r = cli({"--out", charts.string(), "compare", base.string(), egs.string(), "--svg"});
    REQUIRE(r.code == 0);
    CHECK(slurp(charts / "comparison.csv") == r.out);
    const std::string svg = slurp(charts / "O_category_K5.svg");
    REQUIRE(!svg.empty());
    const std::regex polyline("<polyline[^>]*/?>");
    CHECK(std::distance(std::sregex_iterator(svg.begin(), svg.end(), polyline), std::sregex_iterator()) == 2);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    for (const char* format : {"table", "csv", "json"}) {
        const auto rep = cli({"report", base.string(), "--format", format});
        CHECK(rep.code == 0);
        CHECK(!rep.out.empty());
    }

    // A run with a different corpus is not comparable.
    const fs::path other = fs::path(testing::temp_dir("cli_cmp_other")) / "other";
    REQUIRE(cli({"--config", cfg.string(), "--seed", "99", "--out", other.string(), "simulate"}).code == 0);
    const auto bad = cli({"compare", base.string(), other.string()});
    CHECK(bad.code != 0);
    CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("train writes a checkpoint that simulate can load") {
    const auto cfg = small_config("cli_train_cfg");
    const fs::path dir = testing::temp_dir("cli_train");
    const auto t = cli({"--config", cfg.string(), "--out", dir.string(), "train", "--epochs", "3"});
    REQUIRE(t.code == 0);
    CHECK(t.out.rfind("epoch,bpr,l2,cdr,ltao,total\n", 0) == 0);
    CHECK(std::count(t.out.begin(), t.out.end(), '\n') == 4);
    CHECK(fs::exists(dir / "model.json"));

    const fs::path a = testing::temp_dir("cli_ckpt_a");
    const fs::path b = testing::temp_dir("cli_ckpt_b");
    REQUIRE(cli({"--config", cfg.string(), "--out", a.string(), "simulate", "--checkpoint", (dir / "model.json").string()}).code == 0);
    REQUIRE(cli({"--config", cfg.string(), "--out", b.string(), "simulate", "--epochs", "3"}).code == 0);
    CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
}

TEST_CASE("config parsing") {
    const RunConfig parsed = parse_run_config(kSmallConfig);
    CHECK(parsed.seed == 3);
    CHECK(parsed.sim.rounds == 2);
    CHECK(parsed.corpus.synth.n_users == 30);
    const RunConfig again = parse_run_config(run_config_json(parsed));
    CHECK(run_config_json(again) == run_config_json(parsed));

    CHECK_THROWS_AS(parse_run_config(R"({"simulation": {"roundz": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"simulation": {"rounds": "three"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"seed": 1,)"), ConfigError);
    try {
        parse_run_config(R"({"train": {"epoch": 3}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
    }
}

TEST_CASE("thread cap from the environment") {
    ::setenv("COCOONBENCH_THREADS", "1", 1);
    CHECK(worker_threads() == 1);
    ::setenv("COCOONBENCH_THREADS", "zero", 1);
    CHECK_THROWS_AS(worker_threads(), ConfigError);
    ::unsetenv("COCOONBENCH_THREADS");
    CHECK(worker_threads() >= 1);
}

TEST_CASE("binary output is independent of the thread count") {
    const char* bin = std::getenv("COCOONBENCH_BIN");
    if (!bin) return;
    const auto cfg = small_config("cli_bin_cfg");
    const fs::path one = testing::temp_dir("cli_bin_1");
    const fs::path eight = testing::temp_dir("cli_bin_8");
    const std::string base = std::string(bin) + " --config " + cfg.string() + " --out ";
    REQUIRE(std::system(("COCOONBENCH_THREADS=1 " + base + one.string() + " simulate").c_str()) == 0);
    REQUIRE(std::system(("COCOONBENCH_THREADS=8 " + base + eight.string() + " simulate").c_str()) == 0);
    for (const char* f : {"series.csv", "trends.json", "rounds/001.json", "graph/001.parts"})
        CHECK(slurp(one / f) == slurp(eight / f));
    CHECK(std::system((std::string(bin) + " bogus 2>/dev/null").c_str()) != 0);
}
