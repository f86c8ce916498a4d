#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "maips/config.hpp"
#include "maips/csv.hpp"
#include "maips/errors.hpp"
#include "maips/format.hpp"

using namespace maips;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "maips_unit";
  fs::create_directories(dir);
  return dir / name;
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("csv quoting") {
  CHECK(csv_quote("plain") == "plain");
  CHECK(csv_quote("a,b") == "\"a,b\"");
  CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_quote("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("doubles round trip through 17 digits") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv writer emits header and CRLF rows") {
  const fs::path p = scratch("rows.csv");
  {
    CsvWriter w(p, {"name", "value", "count"});
    w << "x,y" << 0.25 << 3;
    w.end_row();
    w << "z";
    CHECK_THROWS_AS(w.end_row(), Error);
  }
  CHECK(slurp(p).rfind("name,value,count\r\n\"x,y\",0.25,3\r\n", 0) == 0);
}

TEST_CASE("config defaults and typed access") {
  const Config c = default_config();
  CHECK(c.get_string("run.experiment") == "exp1");
  CHECK(c.get_int("exp2.particles") == 100);
  CHECK(c.get_doubles("exp2.block_sizes") == std::vector<double>{50, 25});
  CHECK(c.get_strings("exp2.extra_gammas").empty());
  CHECK_THROWS_AS(c.get_string("exp2.nope"), ConfigError);
}

TEST_CASE("overrides must name existing keys") {
  Config c = default_config();
  c.apply_override("exp1.particles=20");
  CHECK(c.get_int("exp1.particles") == 20);
  CHECK_THROWS_AS(c.apply_override("exp1.typo=3"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("particles=3"), ConfigError);
  c.set("exp1.particles", "ten");
  CHECK_THROWS_AS(c.get_int("exp1.particles"), ConfigError);
  c.set("exp1.particles", "10x");
  CHECK_THROWS_AS(c.get_int("exp1.particles"), ConfigError);
}

TEST_CASE("strict merge rejects unknown keys") {
  Config c = default_config();
  c.merge(Config::from_string("[exp1]\nsigma = 0.2\n"), true);
  CHECK(c.get_double("exp1.sigma") == 0.2);
  CHECK_THROWS_AS(c.merge(Config::from_string("[exp1]\nsigmaa = 0.2\n"), true), ConfigError);
  CHECK_THROWS_AS(Config::from_string("loose = 1\n"), ConfigError);
}

TEST_CASE("config survives a write and read") {
  Config c = default_config();
  c.set("exp3.problem_file", "some dir/problem.txt");
  std::ostringstream out;
  c.write(out);
  const Config back = Config::from_string(out.str());
  for (const auto &k : c.keys()) CHECK(back.get_string(k) == c.get_string(k));
  CHECK(back.keys() == c.keys());
}

} // TEST_SUITE
