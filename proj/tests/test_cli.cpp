#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "shm/cli.hpp"
#include "shm/persist.hpp"

namespace fs = std::filesystem;
using fixtures::tmp_path;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = shm::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const std::string& name, const std::string& text) {
  const auto p = tmp_path(name);
  shm::io::write_file(p, text);
  return p;
}

const std::string kPluck =
    R"({"master_seed": 7, "excitation": {"kind": "pluck"}, "beam": {"damping_ratio": 0}, "sampling": {"duration_s": 2}})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("modes prints the calibrated frequencies") {
    const auto c = write_config("cli_modes.json", "{}");
    const auto r = run({"modes", "--config", c, "--case", "0"});
    REQUIRE(r.code == 0);
    for (const char* f : {"1.591547", "9.974059", "27.927691", "54.727372", "9.999987", "343.862217"})
      CHECK(r.out.find(f) != std::string::npos);
  }

  TEST_CASE("usage errors exit 1") {
    auto r = run({"frobnicate"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    CHECK(run({}).code == 1);
    CHECK(run({"modes", "--no-such-flag"}).code == 1);
    CHECK(run({"modes", "--case", "x"}).code == 1);
    r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("online-demo") != std::string::npos);
  }

  TEST_CASE("invalid input exits 2 and leaves no output") {
    const auto out = tmp_path("cli_never.csv");
    fs::remove(out);
    auto r = run({"simulate", "--config", tmp_path("no-such-config.json"), "--case", "0", "--out", out});
    CHECK(r.code == 2);
    CHECK(r.out.empty());
    CHECK_FALSE(fs::exists(out));

    const auto c = write_config("cli_bad.json", kPluck);
    CHECK(run({"modes", "--config", c, "--case", "61"}).code == 2);
    CHECK(run({"simulate", "--config", c, "--case", "0", "--out", tmp_path("missing/dir/ts.csv")}).code == 2);
    CHECK(run({"identify", "--config", c, "--method", "svm", "--case", "0"}).code == 2);

    // No seed anywhere: stochastic commands refuse.
    const auto noseed = write_config("cli_noseed.json", "{}");
    r = run({"simulate", "--config", noseed, "--case", "0", "--out", out});
    CHECK(r.code == 2);
    CHECK(r.err.find("seed") != std::string::npos);
    CHECK_FALSE(fs::exists(out));
  }

  TEST_CASE("simulate is byte-deterministic; --seed overrides the config") {
    const auto c = write_config("cli_sim.json", kPluck);
    const auto a = tmp_path("cli_a.csv"), b = tmp_path("cli_b.csv"), d = tmp_path("cli_d.csv");
    REQUIRE(run({"simulate", "--config", c, "--case", "12", "--out", a}).code == 0);
    REQUIRE(run({"simulate", "--config", c, "--case", "12", "--out", b}).code == 0);
    CHECK(shm::io::read_file(a) == shm::io::read_file(b));
    REQUIRE(run({"simulate", "--config", c, "--case", "12", "--seed", "8", "--out", d}).code == 0);
    CHECK(shm::io::read_file(d).find("# seed=8") != std::string::npos);
  }

  TEST_CASE("identify, extract-modes and a saved model") {
    const auto c = write_config("cli_id.json", kPluck);
    const auto ts = tmp_path("cli_id.csv"), model = tmp_path("cli_ar.json");
    REQUIRE(run({"simulate", "--config", c, "--case", "0", "--out", ts}).code == 0);
    const auto r = run({"identify", "--config", c, "--in", ts, "--out", model});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("54.") != std::string::npos);
    const auto e = run({"extract-modes", "--model", model});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("1.59") != std::string::npos);
    CHECK(run({"classify", "--model", model, "--features", "0,0,0,0"}).code == 2);
  }

  TEST_CASE("study, train-classifier and classify") {
    const auto c = write_config("cli_study.json", R"({"master_seed": 3, "classifier": {"noise_rel": 0}})");
    const auto csv = tmp_path("cli_study.csv"), csv2 = tmp_path("cli_study2.csv"), model = tmp_path("cli_cls.json");
    auto r = run({"study", "--config", c, "--pathway", "oracle", "--out", csv});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("severity") != std::string::npos);
    REQUIRE(run({"study", "--config", c, "--pathway", "oracle", "--workers", "3", "--out", csv2}).code == 0);
    CHECK(shm::io::read_file(csv) == shm::io::read_file(csv2));

    r = run({"train-classifier", "--config", c, "--data", csv, "--out", model});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("accuracy") != std::string::npos);

    r = run({"classify", "--model", model, "--features", "0,0,0,0"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("severity none") != std::string::npos);
    r = run({"classify", "--config", c, "--model", model, "--case", "41"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("severity 3") != std::string::npos);
    CHECK(r.out.find("start element 3") != std::string::npos);
    CHECK(run({"classify", "--model", model, "--features", "0,0,0"}).code == 2);
    CHECK(run({"classify", "--model", model}).code == 2);
  }
}
