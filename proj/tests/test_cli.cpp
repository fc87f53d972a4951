#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dada/datagen.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(DADA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& name)
      : path(fs::path("/tmp") / ("dada_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const {
    return (path / sub).string();
  }
};

}  // namespace

TEST_CASE("gen is deterministic and writes both csv files") {
  TmpDir dir("gen");
  CHECK(run("gen two-moons --n 80 --rot 30 --seed 1 -o " + (dir / "a")) == 0);
  CHECK(run("gen two-moons --n 80 --rot 30 --seed 1 -o " + (dir / "b")) == 0);
  CHECK(slurp(dir.path / "a" / "source.csv") ==
        slurp(dir.path / "b" / "source.csv"));
  CHECK(slurp(dir.path / "a" / "target.csv") ==
        slurp(dir.path / "b" / "target.csv"));
  CHECK(fs::exists(dir.path / "a" / "params.json"));
}

TEST_CASE("gen grid with a target restriction emits partial-scenario files") {
  TmpDir dir("partial");
  CHECK(run("gen grid --k 4 --n 20 --restrict-target 1,2 --seed 2 -o " +
            (dir / "d")) == 0);
  dada::DatasetPair t = dada::load_csv(dir / "d/target.csv");
  std::set<int> labels;
  for (const auto& inst : t.target) labels.insert(*inst.y);
  CHECK(labels == std::set<int>{1, 2});
}

TEST_CASE("gen without required flags is a usage error") {
  TmpDir dir("usage");
  CHECK(run("gen two-moons --rot 30 -o " + (dir / "d")) == 1);
  CHECK(run("gen grid --n 20 -o " + (dir / "d")) == 1);
}

TEST_CASE("train writes a replayable manifest") {
  TmpDir dir("train");
  REQUIRE(run("gen two-moons --n 60 --rot 30 --seed 3 -o " + (dir / "d")) ==
          0);
  {
    std::ofstream f(dir.path / "cfg.txt");
    f << "objective=dada\neta0=0.05\npretrain_epochs=3\nT_adv=2\n"
         "N_alter=2\nseed=5\n";
  }
  CHECK(run("train --config " + (dir / "cfg.txt") + " --data " + (dir / "d") +
            " -o " + (dir / "run1")) == 0);
  CHECK(fs::exists(dir.path / "run1" / "checkpoint.txt"));
  CHECK(fs::exists(dir.path / "run1" / "metrics.csv"));
  CHECK(run("train --manifest " + (dir / "run1/manifest.json") + " -o " +
            (dir / "run2")) == 0);
  CHECK(slurp(dir.path / "run1" / "metrics.csv") ==
        slurp(dir.path / "run2" / "metrics.csv"));
}

TEST_CASE("scenario-objective mismatch fails with a data error") {
  TmpDir dir("mismatch");
  REQUIRE(run("gen two-moons --n 40 --rot 30 --seed 1 -o " + (dir / "d")) ==
          0);
  {
    std::ofstream f(dir.path / "cfg.txt");
    f << "objective=dada_p\neta0=0.05\n";
  }
  CHECK(run("train --config " + (dir / "cfg.txt") + " --data " + (dir / "d") +
            " -o " + (dir / "run")) == 2);
}

TEST_CASE("eval on open-set data reports open-set metrics") {
  TmpDir dir("eval");
  REQUIRE(run("gen grid --k 4 --n 20 --restrict-source 1,2,3 --seed 4 -o " +
              (dir / "d")) == 0);
  {
    std::ofstream f(dir.path / "cfg.txt");
    f << "objective=dada_o\neta0=0.05\npretrain_epochs=2\nseed=6\n";
  }
  REQUIRE(run("train --config " + (dir / "cfg.txt") + " --data " +
              (dir / "d") + " -o " + (dir / "run")) == 0);
  CHECK(run("eval --checkpoint " + (dir / "run/checkpoint.txt") + " --data " +
            (dir / "d") + " -o " + (dir / "rep")) == 0);
  std::string report = slurp(dir.path / "rep" / "report.txt");
  CHECK(report.find("OS*") != std::string::npos);
  CHECK(report.find("unk_recall") != std::string::npos);
  CHECK(run("eval --checkpoint " + (dir / "missing.txt") + " --data " +
            (dir / "d") + " -o " + (dir / "rep2")) == 2);
}

TEST_CASE("sweep rejects an empty seed list") {
  TmpDir dir("sweep");
  {
    std::ofstream f(dir.path / "spec.json");
    f << R"({"data":{"kind":"two-moons","n":40,"rot":30},"seeds":[],)"
      << R"("metrics":["acc_target"],)"
      << R"("configs":[{"name":"a","overrides":{}}]})";
  }
  CHECK(run("sweep --spec " + (dir / "spec.json") + " -o " + (dir / "out")) ==
        1);
}

TEST_CASE("sweep runs configs over shared seeds") {
  TmpDir dir("sweep2");
  {
    std::ofstream f(dir.path / "spec.json");
    f << R"({"data":{"kind":"two-moons","n":40,"rot":30},"seeds":[1,2],)"
      << R"("metrics":["acc_target"],"configs":[{"name":"src_only",)"
      << R"("overrides":{"objective":"source_only","eta0":0.05,)"
      << R"("pretrain_epochs":3}}]})";
  }
  CHECK(run("sweep --spec " + (dir / "spec.json") + " -o " + (dir / "out")) ==
        0);
  std::string table = slurp(dir.path / "out" / "sweep.txt");
  CHECK(table.find("src_only") != std::string::npos);
  CHECK(table.find("acc_target") != std::string::npos);
}

TEST_CASE("diagnose passes on a fresh build") {
  CHECK(run("diagnose --points 500 --trials 5") == 0);
}
