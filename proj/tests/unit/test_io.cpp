#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "fluidnet/error.hpp"
#include "fluidnet/path_field.hpp"

using namespace fluidnet;

namespace {

PathField random_field(std::size_t cells, TimeGrid g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1e3);
  PathField f(cells, g);
  for (double& v : f.data()) v = d(rng);
  return f;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("CSV round trip is exact") {
    auto f = random_field(5, TimeGrid{7, 0.1}, 1);
    std::stringstream ss;
    write_csv(ss, f);
    CHECK(read_csv(ss) == f);
  }

  TEST_CASE("CSV without the header line") {
    std::stringstream ss("cell_index,t,value\n1,0,3\n1,0.5,4\n0,0.5,2\n0,0,1\n");
    auto f = read_csv(ss);
    CHECK(f.cells() == 2);
    CHECK(f.grid() == TimeGrid{1, 0.5});
    CHECK(f(0, 0) == 1.0);
    CHECK(f(0, 1) == 2.0);
    CHECK(f(1, 1) == 4.0);
  }

  TEST_CASE("CSV errors") {
    std::stringstream empty("cell_index,t,value\n");
    CHECK_THROWS_AS(read_csv(empty), DomainError);
    std::stringstream ragged("0,0,1\n0,1,2\n1,0,3\n");
    CHECK_THROWS_AS(read_csv(ragged), DomainError);
    std::stringstream malformed("0,0\n");
    CHECK_THROWS_AS(read_csv(malformed), DomainError);
  }

  TEST_CASE("binary round trip and corruption") {
    auto f = random_field(3, TimeGrid{9, 0.25}, 2);
    std::stringstream ss;
    write_binary(ss, f);
    const std::string bytes = ss.str();
    CHECK(bytes.size() == 4 + 4 + 8 + 8 + 8 + 3 * 10 * 8);
    std::stringstream in(bytes);
    CHECK(read_binary(in) == f);
    std::stringstream bad("XXXX" + bytes.substr(4));
    CHECK_THROWS_AS(read_binary(bad), DomainError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_binary(cut), DomainError);
  }

  TEST_CASE("save and load pick the format by extension") {
    const auto dir = std::filesystem::temp_directory_path() / "fluidnet_io_test";
    std::filesystem::create_directories(dir);
    auto f = random_field(4, TimeGrid{6, 0.5}, 3);
    for (const char* name : {"f.csv", "f.bin"}) {
      const auto p = (dir / name).string();
      save(p, f);
      CHECK(load(p) == f);
    }
    CHECK_THROWS_AS(load((dir / "missing.csv").string()), DomainError);
    std::filesystem::remove_all(dir);
  }
}
