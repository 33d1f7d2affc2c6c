#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dsense/data.hpp"
#include "helpers.hpp"

using namespace dsense;
using dsense::testing::toy_table;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& content) {
    static std::atomic<int> counter{0};
    path = (std::filesystem::temp_directory_path() /
            ("dsense_data_" + std::to_string(counter.fetch_add(1)) + ".csv"))
               .string();
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv parses a small file") {
  TempCsv file("y,z,x1\n1.5,1,0.1\n2.5,1,0.2\n0.5,0,0.3\n1.0,0,0.4\n");
  const ObservationTable t = load_csv(file.path, {"y", "z", {"x1"}, std::nullopt});
  CHECK(t.n() == 4);
  CHECK(t.n_treated() == 2);
  CHECK(t.outcome[0] == doctest::Approx(1.5));
  CHECK(t.covariates(3, 0) == doctest::Approx(0.4));
}

TEST_CASE("load_csv rejects single-arm data") {
  TempCsv file("y,z,x1\n1,1,0.1\n2,1,0.2\n3,1,0.3\n4,1,0.4\n");
  CHECK_THROWS_WITH_AS(load_csv(file.path, {"y", "z", {"x1"}, std::nullopt}),
                       doctest::Contains("no control"), Error);
}

TEST_CASE("load_csv rejects non-binary treatment naming the row") {
  TempCsv file("y,z,x1\n1,1,0.1\n2,2,0.2\n3,0,0.3\n");
  CHECK_THROWS_WITH_AS(load_csv(file.path, {"y", "z", {"x1"}, std::nullopt}),
                       doctest::Contains("row 2"), Error);
}

TEST_CASE("load_csv reports missing columns as schema errors") {
  TempCsv file("y,z,x1\n1,1,0.1\n2,0,0.2\n");
  CHECK_THROWS_WITH_AS(load_csv(file.path, {"y", "z", {"x9"}, std::nullopt}),
                       doctest::Contains("x9"), Error);
}

TEST_CASE("csv round-trip preserves values") {
  std::vector<double> y;
  std::vector<int> z;
  std::vector<double> x;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 57; ++i) {
    y.push_back(normal(rng) * 3.7);
    z.push_back(i % 3 == 0 ? 1 : 0);
    x.push_back(normal(rng));
  }
  const ObservationTable t = toy_table(y, z, x);
  TempCsv file("");
  write_csv(t, file.path);
  const ObservationTable back =
      load_csv(file.path, {t.outcome_name, t.treatment_name, t.covariate_names, std::nullopt});
  REQUIRE(back.n() == t.n());
  for (int i = 0; i < t.n(); ++i) {
    CHECK(back.outcome[i] == doctest::Approx(t.outcome[i]).epsilon(1e-12));
    CHECK(back.treatment[i] == t.treatment[i]);
    CHECK(back.covariates(i, 0) == doctest::Approx(t.covariates(i, 0)).epsilon(1e-12));
  }
}

namespace {

ObservationTable hundred_controls() {
  std::vector<double> y;
  std::vector<int> z;
  std::vector<double> x;
  for (int i = 0; i < 120; ++i) {
    y.push_back(static_cast<double>(i));
    z.push_back(i < 20 ? 1 : 0);  // 20 treated, 100 controls
    x.push_back(static_cast<double>(i % 7));
  }
  return toy_table(y, z, x);
}

}  // namespace

TEST_CASE("split_planning controls_only sizes and disjointness") {
  const ObservationTable t = hundred_controls();
  const SplitResult s = split_planning(t, 0.10, SplitMode::controls_only, 99);
  CHECK(s.planning.n() == 10);
  CHECK(s.planning.n_treated() == 0);
  CHECK(s.analysis.n_treated() == 20);
  CHECK(s.analysis.n() == 110);

  std::set<int> planning_ids(s.planning.unit_ids.begin(), s.planning.unit_ids.end());
  std::set<int> analysis_ids(s.analysis.unit_ids.begin(), s.analysis.unit_ids.end());
  CHECK(planning_ids.size() + analysis_ids.size() == 120);
  for (int id : planning_ids) CHECK(analysis_ids.count(id) == 0);
}

TEST_CASE("split_planning full_split stratifies by arm") {
  const ObservationTable t = hundred_controls();
  const SplitResult s = split_planning(t, 0.10, SplitMode::full_split, 7);
  CHECK(s.planning.n_treated() == 2);
  CHECK(s.planning.n_controls() == 10);
  CHECK(s.analysis.n_treated() == 18);
  CHECK(s.analysis.n_controls() == 90);
}

TEST_CASE("split_planning is deterministic given the seed") {
  const ObservationTable t = hundred_controls();
  const SplitResult a = split_planning(t, 0.25, SplitMode::full_split, 1234);
  const SplitResult b = split_planning(t, 0.25, SplitMode::full_split, 1234);
  CHECK(a.planning.unit_ids == b.planning.unit_ids);
  CHECK(a.analysis.unit_ids == b.analysis.unit_ids);
}

TEST_CASE("different seeds give different splits almost surely") {
  const ObservationTable t = hundred_controls();
  int differ = 0;
  for (int pair = 0; pair < 100; ++pair) {
    const SplitResult a =
        split_planning(t, 0.3, SplitMode::controls_only, static_cast<std::uint64_t>(2 * pair));
    const SplitResult b =
        split_planning(t, 0.3, SplitMode::controls_only, static_cast<std::uint64_t>(2 * pair + 1));
    if (a.planning.unit_ids != b.planning.unit_ids) ++differ;
  }
  CHECK(differ >= 99);
}

TEST_CASE("split_planning rejects bad fractions") {
  const ObservationTable t = hundred_controls();
  CHECK_THROWS_AS(split_planning(t, 0.0, SplitMode::controls_only, 1), Error);
  CHECK_THROWS_AS(split_planning(t, 1.0, SplitMode::controls_only, 1), Error);
  CHECK_THROWS_AS(split_planning(t, 0.005, SplitMode::controls_only, 1), Error);
}
