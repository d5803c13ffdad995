#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "sami/io.hpp"

using namespace sami;

TEST_CASE("csv fields quote only when needed") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("with,comma") == "\"with,comma\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("line\nbreak") == "\"line\nbreak\"");
  CHECK(csv_line({"a", "b,c", "d"}) == "a,\"b,c\",d");
  CHECK(csv_line({}) == "");
}

TEST_CASE("doubles format to shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-7) == "-2.5e-07");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_double(third)) == third);
}

TEST_CASE("atomic writes land complete and reads round trip") {
  const std::string path = "io-test-atomic.txt";
  atomic_write_file(path, "alpha\nbeta");
  CHECK(read_file(path) == "alpha\nbeta");
  atomic_write_file(path, "gamma");
  CHECK(read_file(path) == "gamma");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_file(path), std::runtime_error);
}

TEST_CASE("ensure_dir creates nested directories") {
  ensure_dir("io-test-dir/nested");
  atomic_write_file("io-test-dir/nested/x.txt", "1");
  CHECK(read_file("io-test-dir/nested/x.txt") == "1");
  std::remove("io-test-dir/nested/x.txt");
  std::remove("io-test-dir/nested");
  std::remove("io-test-dir");
}
