#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "dada/datagen.hpp"

using namespace dada;

namespace {

Eigen::Vector2d class_mean(const std::vector<LabeledInstance>& v, int label) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  int n = 0;
  for (const auto& inst : v) {
    if (inst.y && *inst.y == label) {
      m += inst.x;
      ++n;
    }
  }
  return m / n;
}

std::string tmp_path(const std::string& name) {
  return std::string("/tmp/dada_test_") + name;
}

}  // namespace

TEST_CASE("two-moons with zero rotation keeps class means aligned") {
  DatasetPair pair = make_two_moons(2000, 0.0, 0.05, 42);
  for (int label : {1, 2}) {
    Eigen::Vector2d ds =
        class_mean(pair.source, label) - class_mean(pair.target, label);
    CHECK(ds.norm() < 3.0 * 0.05 + 0.1);
  }
  CHECK(pair.scenario == Scenario::closed);
  CHECK(pair.K_source == 2);
}

TEST_CASE("two-moons 180-degree rotation reflects class means") {
  DatasetPair pair = make_two_moons(2000, 180.0, 0.05, 42);
  const Eigen::Vector2d centroid(0.5, 0.25);
  for (int label : {1, 2}) {
    Eigen::Vector2d reflected =
        2.0 * centroid - class_mean(pair.source, label);
    CHECK((reflected - class_mean(pair.target, label)).norm() < 0.15);
  }
}

TEST_CASE("two-moons is deterministic per seed") {
  DatasetPair a = make_two_moons(50, 30.0, 0.1, 9);
  DatasetPair b = make_two_moons(50, 30.0, 0.1, 9);
  REQUIRE(a.source.size() == b.source.size());
  for (std::size_t i = 0; i < a.source.size(); ++i) {
    CHECK(a.source[i].x == b.source[i].x);
    CHECK(a.target[i].x == b.target[i].x);
  }
}

TEST_CASE("two-moons rejects bad arguments") {
  CHECK_THROWS_AS(make_two_moons(1, 30.0, 0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_two_moons(10, 400.0, 0.1, 0), std::invalid_argument);
}

TEST_CASE("gaussian grid counts instances exactly") {
  DatasetPair pair = make_gaussian_grid(4, 100, {1.0, 0.5}, 0.3, 5);
  CHECK(pair.source.size() == 400);
  CHECK(pair.target.size() == 400);
  for (int k = 1; k <= 4; ++k) {
    int n = 0;
    for (const auto& inst : pair.source) {
      if (*inst.y == k) ++n;
    }
    CHECK(n == 100);
  }
}

TEST_CASE("gaussian grid is deterministic per seed and validates K") {
  DatasetPair a = make_gaussian_grid(3, 10, {0.0, 0.0}, 0.3, 77);
  DatasetPair b = make_gaussian_grid(3, 10, {0.0, 0.0}, 0.3, 77);
  for (std::size_t i = 0; i < a.source.size(); ++i) {
    CHECK(a.source[i].x == b.source[i].x);
  }
  CHECK_THROWS_AS(make_gaussian_grid(1, 10, {0.0, 0.0}, 0.3, 0),
                  std::invalid_argument);
}

TEST_CASE("target restriction produces a partial pair") {
  DatasetPair pair = make_gaussian_grid(4, 50, {1.0, 0.5}, 0.3, 5);
  DatasetPair partial = restrict_target_labels(pair, {1, 2});
  CHECK(partial.scenario == Scenario::partial);
  CHECK(partial.K_source == 4);
  CHECK(partial.K_target == 2);
  std::set<int> seen;
  for (const auto& inst : partial.target) seen.insert(*inst.y);
  CHECK(seen == std::set<int>{1, 2});
  CHECK(partial.source.size() == pair.source.size());
}

TEST_CASE("source restriction produces an open pair with unknown labels") {
  DatasetPair pair = make_gaussian_grid(4, 50, {1.0, 0.5}, 0.3, 5);
  DatasetPair open = restrict_source_labels(pair, {1, 2});
  CHECK(open.scenario == Scenario::open);
  CHECK(open.K_source == 2);
  CHECK(open.K_target == 3);
  int unknown = 0;
  for (const auto& inst : open.target) {
    CHECK(*inst.y >= 1);
    CHECK(*inst.y <= 3);
    if (*inst.y == 3) ++unknown;
  }
  CHECK(unknown == 100);  // previous classes 3 and 4
  for (const auto& inst : open.source) CHECK(*inst.y <= 2);
}

TEST_CASE("restricting with the full label set is an identity") {
  DatasetPair pair = make_gaussian_grid(3, 20, {1.0, 0.5}, 0.3, 5);
  DatasetPair same_t = restrict_target_labels(pair, {1, 2, 3});
  DatasetPair same_s = restrict_source_labels(pair, {1, 2, 3});
  CHECK(same_t.scenario == Scenario::closed);
  CHECK(same_s.scenario == Scenario::closed);
  CHECK(same_t.target.size() == pair.target.size());
  CHECK(same_s.source.size() == pair.source.size());
  for (std::size_t i = 0; i < pair.source.size(); ++i) {
    CHECK(same_s.source[i].x == pair.source[i].x);
  }
}

TEST_CASE("restriction rejects empty or foreign selections") {
  DatasetPair pair = make_gaussian_grid(3, 20, {1.0, 0.5}, 0.3, 5);
  CHECK_THROWS_AS(restrict_target_labels(pair, {}), std::invalid_argument);
  CHECK_THROWS_AS(restrict_target_labels(pair, {9}), std::invalid_argument);
  CHECK_THROWS_AS(restrict_source_labels(pair, {0, 1}),
                  std::invalid_argument);
}

TEST_CASE("known-to-unknown ratio subsamples the known target side") {
  DatasetPair pair = make_gaussian_grid(4, 100, {1.0, 0.5}, 0.3, 5);
  DatasetPair open = restrict_source_labels(pair, {1, 2, 3}, 1.0);
  long known = 0, unknown = 0;
  for (const auto& inst : open.target) {
    (*inst.y == 4 ? unknown : known)++;
  }
  CHECK(unknown == 100);
  CHECK(known == 100);
}

TEST_CASE("csv round trip is lossless") {
  DatasetPair pair = make_two_moons(40, 30.0, 0.1, 3);
  std::string path = tmp_path("roundtrip.csv");
  save_csv(pair, path);
  DatasetPair back = load_csv(path);
  REQUIRE(back.source.size() == pair.source.size());
  REQUIRE(back.target.size() == pair.target.size());
  for (std::size_t i = 0; i < pair.source.size(); ++i) {
    CHECK(back.source[i].x == pair.source[i].x);
    CHECK(back.source[i].y == pair.source[i].y);
  }
  CHECK(back.scenario == Scenario::closed);
  CHECK(back.K_source == 2);
  std::remove(path.c_str());
}

TEST_CASE("csv round trip preserves partial and open bookkeeping") {
  DatasetPair grid = make_gaussian_grid(4, 20, {1.0, 0.5}, 0.3, 5);
  std::string path = tmp_path("scenario.csv");

  save_csv(restrict_target_labels(grid, {1, 2}), path);
  DatasetPair partial = load_csv(path);
  CHECK(partial.scenario == Scenario::partial);
  CHECK(partial.K_target == 2);

  save_csv(restrict_source_labels(grid, {1, 2}), path);
  DatasetPair open = load_csv(path);
  CHECK(open.scenario == Scenario::open);
  CHECK(open.K_source == 2);
  CHECK(open.K_target == 3);
  std::remove(path.c_str());
}

TEST_CASE("csv parse errors carry line numbers") {
  std::string path = tmp_path("bad.csv");
  {
    std::ofstream f(path);
    f << "x1,x2,label,domain\n";
    f << "0.1,0.2,1,s\n";
    f << "0.1,oops,1,s\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 3"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("empty csv reports no instances") {
  std::string path = tmp_path("empty.csv");
  {
    std::ofstream f(path);
  }
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("no instances"),
                       std::runtime_error);
  {
    std::ofstream f(path);
    f << "x1,x2,label,domain\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("no instances"),
                       std::runtime_error);
  std::remove(path.c_str());
}
