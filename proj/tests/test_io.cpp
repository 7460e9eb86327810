#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

using namespace sewerml;

TEST_CASE("csv reader handles quotes, blank lines and line numbers") {
  std::istringstream in("a,b\n\n1,\"x,\"\"y\"\"\"\n2,z\n");
  const auto t = io::read_csv(in, "mem");
  REQUIRE(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,\"y\"");
  CHECK(t.line_numbers[0] == 3);
  CHECK(t.column("b") == 1u);
  CHECK_FALSE(t.column("c").has_value());
}

TEST_CASE("csv line escaping round-trips") {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\""};
  std::istringstream in("h1,h2,h3\n" + io::csv_line(fields));
  const auto t = io::read_csv(in, "mem");
  CHECK(t.rows.at(0) == fields);
}

TEST_CASE("format_number is the shortest round-trip form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5, 0.0}) {
    const std::string s = io::format_number(v);
    CHECK(io::parse_number(s, "t") == v);
  }
  CHECK(io::format_number(0.5) == "0.5");
  CHECK(io::format_number(100.0) == "100");
}

TEST_CASE("parse_number rejects junk with a parse error") {
  CHECK_THROWS_AS(io::parse_number("1.2.3", "ctx"), Error);
  try {
    io::parse_number("abc", "cell x");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("cell x") != std::string::npos);
  }
  CHECK(std::isnan(io::parse_number("nan", "t")));
}

TEST_CASE("sha256 of known vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("exit status mapping") {
  CHECK(exit_status(ErrorCode::kConfig) == 2);
  CHECK(exit_status(ErrorCode::kIo) == 2);
  CHECK(exit_status(ErrorCode::kParse) == 2);
  CHECK(exit_status(ErrorCode::kDependency) == 2);
  CHECK(exit_status(ErrorCode::kDegenerate) == 1);
  CHECK(exit_status(ErrorCode::kValidation) == 1);
  CHECK(exit_status(ErrorCode::kInvalidArgument) == 1);
}
