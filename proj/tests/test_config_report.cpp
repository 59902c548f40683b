#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "lso/config.hpp"
#include "lso/errors.hpp"
#include "lso/looper.hpp"
#include "lso/report.hpp"

using namespace lso;
namespace fs = std::filesystem;

TEST_CASE("every key has a documented default and round-trips through the snapshot") {
  const auto ref = config_reference();
  std::set<std::string> keys;
  for (const auto& k : ref) {
    CHECK_FALSE(k.default_value.empty());
    CHECK_FALSE(k.description.empty());
    keys.insert(k.key);
  }
  CHECK(keys.size() == ref.size());
  for (const char* k : {"seed", "k", "variant", "pathway.k_activate", "train.beta", "bo.pool_size"}) {
    CHECK(keys.count(k) == 1);
  }

  ExperimentConfig c;
  c.seed = 123;
  c.k = 4.5;
  c.variant = "impractical";
  c.pathway.k_repair = 0.07;
  c.train.learning_rate = 3e-4;
  c.weight_initial = false;
  const std::string snap = config_snapshot(c);
  ExperimentConfig back;
  apply_config_text(back, snap, "snapshot");
  CHECK(config_snapshot(back) == snap);
  CHECK(back.seed == 123);
  CHECK(back.pathway.k_repair == 0.07);
  CHECK_FALSE(back.weight_initial);
}

TEST_CASE("config parsing errors name the key or line") {
  ExperimentConfig c;
  try {
    apply_setting(c, "no_such_key", "1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("no_such_key") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_setting(c, "k", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "iterations", "-1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "variant", "bogus"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "weight_initial", "maybe"), ConfigError);
  try {
    apply_config_text(c, "# comment\n\nk = 5\nbad line\n", "x.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:4") != std::string::npos);
  }
  CHECK(c.k == 5.0);

  ExperimentConfig v;
  v.n_top = 4000;
  v.n_random = 2000;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  ExperimentConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("variant doses come from the config") {
  ExperimentConfig c;
  c.variant = "modified";
  c.dose_modified = 3e-5;
  CHECK(c.pathway_variant().dose == 3e-5);
  CHECK(c.pathway_variant().name() == "modified");
}

TEST_CASE("report aggregates runs per variant, k and iteration") {
  const auto root = fs::temp_directory_path() / "lso_test_report";
  fs::remove_all(root);
  const std::string header = std::string(kIterationsHeader) + "\n";
  auto put = [&](const std::string& sub, const std::string& body) {
    fs::create_directories(root / sub);
    std::ofstream(root / sub / "iterations.csv") << header << body;
  };
  put("k4_s1", "0,4,viable,1,10,10,20,30,100,5000\n1,4,viable,1,12,11,21,31,90,500\n");
  put("k4_s2", "0,4,viable,1,20,12,22,32,200,5000\n1,4,viable,1,14,13,23,33,70,500\n");
  put("k6_s1", "0,6,viable,1,30,14,24,34,50,5000\n");

  const auto rows = collect_iteration_rows(root);
  CHECK(rows.size() == 5);
  const std::string table = comparison_table(rows);
  CHECK(table ==
        "variant,k,iter,runs,median,mean,p90,max,unique_count\n"
        "viable,4,0,2,15,11,21,31,150\n"
        "viable,4,1,2,13,12,22,32,80\n"
        "viable,6,0,1,30,14,24,34,50\n");
  CHECK(comparison_table(collect_iteration_rows(root)) == table);

  CHECK_THROWS(parse_iterations_csv("wrong header\n", "x"));
  CHECK_THROWS(parse_iterations_csv(header + "0,4,viable,1,2\n", "x"));
  CHECK_THROWS(collect_iteration_rows(root / "k4_s1" / "missing"));
  fs::remove_all(root);
}
