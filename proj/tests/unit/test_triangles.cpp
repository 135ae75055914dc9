#include "test_support.h"
#include "trisk/error.h"
#include "trisk/triangles.h"

#include <doctest.h>

#include <sstream>

using namespace trisk;

namespace {

ErrorCode code_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_csv(in);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

std::string message_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_csv(in);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kHeader = "line_id,region,coverage,accident_semester,development_lag,premium,incremental_claim\n";

std::string two_by_two() {
  std::string s = kHeader;
  s += "A,ON,PA,2003-1,1,100,25\n";
  s += "A,ON,PA,2003-1,2,100,5\n";
  s += "A,ON,PA,2003-2,1,200,40\n";
  return s;
}

}  // namespace

TEST_CASE("index partition") {
  const TriangleIndex ix(30);
  CHECK(ix.upper_count() == 465);
  CHECK(ix.lower_count() == 435);
  CHECK(ix.upper_cells().size() == 465);
  CHECK(ix.lower_cells().size() == 435);
  CHECK(ix.observed(1, 30));
  CHECK_FALSE(ix.observed(2, 30));
  CHECK(ix.period(2, 30) == 1);
  CHECK(ix.period(30, 30) == 29);
  for (const Cell& c : ix.upper_cells()) CHECK(ix.upper_cells()[ix.upper_position(c.i, c.j)].i == c.i);
  const auto low = ix.lower_cells();
  CHECK(low.front().i == 2);
  CHECK(low.front().j == 30);
  CHECK(low[1].i == 3);
  CHECK(low[1].j == 29);
}

TEST_CASE("ratios from incremental claims") {
  const TriangleIndex ix(2);
  std::map<std::pair<int, int>, double> claims = {{{1, 1}, 25.0}, {{1, 2}, 0.0}, {{2, 1}, -5.0}};
  std::size_t clamped = 0;
  const auto t = LossTriangle::from_incremental_claims("A", ix, {100.0, 100.0}, claims, &clamped);
  CHECK(t.ratio(1, 1) == doctest::Approx(0.25));
  CHECK(t.ratio(1, 2) == 0.0);
  CHECK(t.ratio(2, 1) == 0.0);
  CHECK(clamped == 1);

  claims.erase({1, 2});
  CHECK_THROWS_WITH_AS(LossTriangle::from_incremental_claims("A", ix, {100.0, 100.0}, claims),
                       doctest::Contains("(1,2)"), Error);
  claims[{1, 2}] = 1.0;
  CHECK_THROWS_AS(LossTriangle::from_incremental_claims("A", ix, {100.0, 0.0}, claims), Error);
  claims[{2, 2}] = 1.0;
  CHECK_THROWS_WITH_AS(LossTriangle::from_incremental_claims("A", ix, {100.0, 100.0}, claims),
                       doctest::Contains("lower-triangle cell in input"), Error);
}

TEST_CASE("csv parsing") {
  std::istringstream in(two_by_two());
  const Portfolio pf = read_csv(in);
  CHECK(pf.index.I() == 2);
  REQUIRE(pf.lines.size() == 1);
  CHECK(pf.lines[0].ratio(2, 1) == doctest::Approx(0.2));
  CHECK(pf.lines[0].region() == "ON");
  CHECK(pf.semester_label(2) == "2003-2");
}

TEST_CASE("csv errors") {
  CHECK(code_of("") == ErrorCode::ingestion);
  CHECK(message_of("") == "no rows");
  CHECK(code_of(kHeader) == ErrorCode::ingestion);
  CHECK(code_of("line_id,region\nA,ON\n") == ErrorCode::schema);
  std::string lower = two_by_two() + "A,ON,PA,2003-2,2,200,1\n";
  CHECK(message_of(lower).find("lower-triangle cell in input") != std::string::npos);
  std::string bad = std::string(kHeader) + "A,ON,PA,2003-1,1,100,abc\n";
  CHECK(code_of(bad) == ErrorCode::ingestion);
  CHECK(message_of(bad).find("row 2") != std::string::npos);
  std::string missing = std::string(kHeader) + "A,ON,PA,2003-1,1,100,25\nA,ON,PA,2003-1,3,100,1\n"
                        "A,ON,PA,2003-2,1,100,5\nA,ON,PA,2003-2,2,100,2\nA,ON,PA,2004-1,1,100,7\n";
  CHECK(code_of(missing) == ErrorCode::ingestion);
  CHECK(message_of(missing).find("(1,2)") != std::string::npos);
}

TEST_CASE("csv round trip") {
  Engine rng(5);
  Portfolio pf;
  pf.index = TriangleIndex(6);
  pf.first_year = 2010;
  pf.first_half = 2;
  for (int k = 0; k < 3; ++k) {
    MarginalModel m = testing::reference_model(6, 0.5, 1.5);
    m.line_id = "L" + std::to_string(k);
    LossTriangle t = synthesize_line(m, testing::flat_premiums(6, 100.0 + k), rng);
    t.set_labels("R" + std::to_string(k / 2), k % 2 ? "CA" : "PA");
    pf.lines.push_back(t);
  }
  std::stringstream buf;
  write_csv(pf, buf);
  const Portfolio back = read_csv(buf);
  REQUIRE(back.lines.size() == 3);
  CHECK(back.first_year == 2010);
  CHECK(back.first_half == 2);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.lines[k].line_id() == pf.lines[k].line_id());
    CHECK(back.lines[k].region() == pf.lines[k].region());
    CHECK(back.lines[k].premiums() == pf.lines[k].premiums());
    for (std::size_t c = 0; c < pf.index.upper_count(); ++c) {
      CHECK(back.lines[k].ratios()[c] == doctest::Approx(pf.lines[k].ratios()[c]).epsilon(1e-14));
    }
  }
}
