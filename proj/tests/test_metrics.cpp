#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "svt/error.hpp"
#include "svt/metrics.hpp"

using namespace svt;

namespace {
RunResult run_of(std::vector<double> accs) {
  RunResult r;
  for (std::size_t i = 0; i < accs.size(); ++i)
    r.per_session.push_back(
        {static_cast<int>(i), accs[i], 100, static_cast<int>(10 + i)});
  r.avg = average_accuracy(accs);
  return r;
}
}  // namespace

TEST_CASE("top1_accuracy fixtures") {
  CHECK(top1_accuracy({1, 2, 3}, {1, 2, 3}) == 100.0);
  CHECK(top1_accuracy({1, 2, 3}, {1, 0, 3}) == doctest::Approx(66.6666666667));
  CHECK(top1_accuracy({1, 2}, {3, 4}) == 0.0);
  CHECK_THROWS_AS(top1_accuracy({}, {}), Error);
  CHECK_THROWS_AS(top1_accuracy({1}, {1, 2}), Error);
}

TEST_CASE("average_accuracy reproduces published per-session rows") {
  // 11-session row
  const std::vector<double> cub_cec{75.85, 71.94, 68.50, 63.50, 62.43, 58.27,
                                    57.73, 55.81, 54.83, 53.52, 52.28};
  CHECK(std::abs(average_accuracy(cub_cec) - 61.33) <= 0.005);
  // 9-session row
  const std::vector<double> mini_limit{72.32, 68.47, 64.30, 60.78, 57.95,
                                       55.07, 52.70, 50.72, 49.19};
  CHECK(std::abs(average_accuracy(mini_limit) - 59.06) <= 0.005);
  CHECK(average_accuracy({84.19}) == 84.19);
  CHECK_THROWS_AS(average_accuracy({}), Error);
}

TEST_CASE("relative_improvement is a percentage-point difference") {
  CHECK(relative_improvement(78.65, 61.33) == doctest::Approx(17.32));
  CHECK(relative_improvement(85.07, 59.06) == doctest::Approx(26.01));
  CHECK(relative_improvement(50.0, 50.0) == 0.0);
  CHECK(relative_improvement(40.0, 50.0) == doctest::Approx(-10.0));
}

TEST_CASE("round_half_away rounds away from zero") {
  CHECK(round_half_away(62.455, 2) == doctest::Approx(62.46));
  CHECK(round_half_away(-62.455, 2) == doctest::Approx(-62.46));
  // 0.125 is exact in binary; half-away gives .13 where ties-to-even gives .12
  CHECK(round_half_away(0.125, 2) == doctest::Approx(0.13));
  CHECK(round_half_away(-0.125, 2) == doctest::Approx(-0.13));
  CHECK(round_half_away(2.0, 2) == 2.0);
}

TEST_CASE("emit_results_table: structure, baseline, csv round trip") {
  const RunResult a = run_of({80.0, 70.0, 60.0});
  const RunResult b = run_of({90.123, 85.678, 80.555});
  const std::string md =
      emit_results_table({a, b}, {"V-X", "SV-X"}, TableFormat::Markdown, 0);
  CHECK(md.find("| V-X |") != std::string::npos);
  CHECK(md.find("| SV-X |") != std::string::npos);
  // baseline improvement against itself is 0.00
  CHECK(md.find("| 70.00 | 0.00 |") != std::string::npos);

  const std::string csv =
      emit_results_table({a, b}, {"V-X", "SV-X"}, TableFormat::Csv, 0);
  std::istringstream in(csv);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "method,s0,s1,s2,avg,improvement");
  CHECK(row1 == "V-X,80.00,70.00,60.00,70.00,0.00");
  // avg from unrounded values: (90.123+85.678+80.555)/3 = 85.452
  CHECK(row2 == "SV-X,90.12,85.68,80.56,85.45,15.45");
}

TEST_CASE("emit_results_table rejects mismatched session counts") {
  const RunResult a = run_of({80.0, 70.0});
  const RunResult b = run_of({90.0});
  try {
    emit_results_table({a, b}, {"a", "b"}, TableFormat::Csv, 0);
    FAIL("expected layout error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Layout);
  }
  CHECK_THROWS_AS(emit_results_table({a}, {"a", "b"}, TableFormat::Csv, 0),
                  Error);
  CHECK_THROWS_AS(emit_results_table({a}, {"a"}, TableFormat::Csv, 5), Error);
}

TEST_CASE("run result json round trip") {
  RunResult r = run_of({75.5, 66.25});
  r.config_hash = "abc123";
  r.seed = 99;
  const std::string json = run_result_to_json(r);
  const RunResult back = run_result_from_json(json);
  CHECK(back.config_hash == "abc123");
  CHECK(back.seed == 99);
  REQUIRE(back.per_session.size() == 2);
  CHECK(back.per_session[1].top1 == 66.25);
  CHECK(back.per_session[1].n_test == 100);
  CHECK(back.avg == r.avg);
}
