#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "qsm/csv.hpp"
#include "qsm/sampler.hpp"

using namespace qsm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qsm_sampler_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SamplerConfig small_config(std::size_t n, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.n_samples = n;
  cfg.seed = seed;
  cfg.grid = PoseGrid{24, 24, {}};
  cfg.raster = RasterOptions{96};
  return cfg;
}

const TaskRegion kTask{{-0.8, 0.2}, 0.3};

}  // namespace

TEST_CASE("latin hypercube fills every stratum once") {
  const auto cfg = small_config(257, 9);
  const auto designs = lhs_sample(cfg);
  REQUIRE(designs.size() == 257);
  const auto& b = cfg.bounds;
  for (int k = 0; k < 6; ++k) {
    std::set<long> strata;
    for (const auto& d : designs) {
      const double v = d.vector()(k);
      CHECK(v >= b.lower(k));
      CHECK(v <= b.upper(k));
      if (k > 0) strata.insert(long(std::floor((v - b.lower(k)) / (b.upper(k) - b.lower(k)) * 257)));
    }
    if (k == 0)
      for (const auto& d : designs) CHECK(d.l1 == 1.0);
    else
      CHECK(strata.size() == 257);
  }
}

TEST_CASE("sampling is seeded") {
  const auto a = lhs_sample(small_config(50, 4));
  const auto b = lhs_sample(small_config(50, 4));
  const auto c = lhs_sample(small_config(50, 5));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("bounds are validated") {
  auto cfg = small_config(10, 1);
  cfg.bounds.lower(0) = 0.9;
  CHECK_THROWS_AS(lhs_sample(cfg), InvalidBounds);
  cfg = small_config(10, 1);
  cfg.bounds.lower(3) = cfg.bounds.upper(3);
  CHECK_THROWS_AS(lhs_sample(cfg), InvalidBounds);
  cfg = small_config(0, 1);
  CHECK_THROWS_AS(lhs_sample(cfg), InvalidBounds);
}

TEST_CASE("filter keeps closed crank-rockers in order") {
  const auto cfg = small_config(300, 2);
  const auto designs = lhs_sample(cfg);
  const auto kept = filter_feasible(designs, cfg.grid, 4);
  CHECK(!kept.empty());
  CHECK(kept.size() < designs.size());
  CHECK(kept == filter_feasible(designs, cfg.grid, 1));
  auto it = designs.begin();
  for (const auto& d : kept) {
    CHECK(is_crank_rocker(d));
    CHECK(is_feasible_over_range(d, cfg.grid));
    it = std::find(it, designs.end(), d);
    CHECK(it != designs.end());
  }
}

TEST_CASE("kinematic and torque labels") {
  auto cfg = small_config(400, 3);
  const auto feasible = filter_feasible(lhs_sample(cfg), cfg.grid);
  const auto ds = build_dataset(feasible, kTask, MassModel{}, cfg);
  REQUIRE(!ds.rows.empty());
  CHECK(ds.provenance.n_input == feasible.size());
  CHECK(ds.rows.size() + ds.provenance.dropped_uncoverable + ds.provenance.dropped_torque == feasible.size());
  for (const auto& r : ds.rows) {
    CHECK(r.unit == feasible[r.idx]);
    CHECK(r.scale > 0.0);
    CHECK(r.eta > 0.0);
    CHECK(r.eta <= 1.0);
    CHECK(r.eta == doctest::Approx(kTask.area() / r.ws_area_m2));
    CHECK(r.has_torques());
  }

  SUBCASE("parallel labels match serial") {
    cfg.threads = 1;
    const auto serial = build_dataset(feasible, kTask, MassModel{}, cfg);
    CHECK(serial.rows == ds.rows);
  }

  SUBCASE("csv round trip") {
    const auto dir = scratch("roundtrip");
    write_dataset_csv(dir / "d.csv", ds.rows);
    CHECK(read_dataset_csv(dir / "d.csv") == ds.rows);

    write_dataset_csv(dir / "k.csv", ds.rows, false);
    const auto back = read_dataset_csv(dir / "k.csv");
    REQUIRE(back.size() == ds.rows.size());
    CHECK_FALSE(back.front().has_torques());
    CHECK(back.front().unit == ds.rows.front().unit);
  }
}

TEST_CASE("malformed csv is a data error") {
  const auto dir = scratch("bad");
  {
    std::ofstream(dir / "missing.csv") << "idx,l1\n0,1\n";
  }
  CHECK_THROWS_AS(read_dataset_csv(dir / "missing.csv"), DataError);
  CHECK_THROWS_AS(read_dataset_csv(dir / "absent.csv"), DataError);
  CHECK_THROWS_AS(parse_double("1.5x"), DataError);
  CHECK_THROWS_AS(parse_double(""), DataError);
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(parse_double(format_double(v)) == v);
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
}
