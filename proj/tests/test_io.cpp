#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fcs/io.hpp"

using namespace fcs;

namespace {

io::CsvTable parse(const std::string& text, const std::string& path = "mem.csv") {
  std::istringstream in(text);
  return io::parse_csv(in, path);
}

std::string error_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
}

TEST(Csv, QuotesBlankLinesAndTrim) {
  const io::CsvTable t = parse("id, x ,y\n\n\"a,1\",1, 2\n b ,3,4\n");
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[1], "x");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a,1");
  EXPECT_EQ(t.rows[1][0], "b");
  EXPECT_EQ(t.lines[0], 3);
  EXPECT_EQ(t.where(1, 2), "mem.csv:4:3");
}

TEST(Csv, FieldCountMismatchNamesLine) {
  const std::string msg = error_of([] { parse("a,b\n1,2\n3\n"); });
  EXPECT_NE(msg.find("mem.csv:3"), std::string::npos) << msg;
}

TEST(Csv, MissingFile) {
  EXPECT_THROW(io::read_csv("/nonexistent/dir/file.csv"), DataError);
}

TEST(Survival, ZeroTimeRejectedWithPosition) {
  const std::string msg = error_of(
      [] { io::survival_from_table(parse("id,time,status\n1,2.0,1\n2,0,1\n", "s.csv")); });
  EXPECT_NE(msg.find("obs_time must be positive"), std::string::npos) << msg;
  EXPECT_NE(msg.find("s.csv:3:2"), std::string::npos) << msg;
}

TEST(Survival, MissingStatusColumnNamed) {
  const std::string msg =
      error_of([] { io::survival_from_table(parse("id,time\n1,2.0\n", "s.csv")); });
  EXPECT_NE(msg.find("missing required column 'status'"), std::string::npos) << msg;
}

TEST(Survival, BadStatusAndNumber) {
  EXPECT_NE(error_of([] { io::survival_from_table(parse("id,time,status\n1,2.0,2\n")); })
                .find("status must be 0 or 1"),
            std::string::npos);
  EXPECT_NE(error_of([] { io::survival_from_table(parse("id,time,status\n1,abc,1\n")); })
                .find("mem.csv:2:2"),
            std::string::npos);
}

TEST(Survival, LogTimeColumn) {
  const auto st = io::survival_from_table(parse("id,log_time,status\n1,900,1\n2,-1,0\n"));
  EXPECT_EQ(st.sample.log_time()(0), 900.0);
  EXPECT_EQ(st.sample.delta()(1), 0);
  // exp(900) overflows, so the writer falls back to log times.
  EXPECT_EQ(io::survival_csv(st.sample).rfind("id,log_time,status\n", 0), 0u);
}

TEST(RoundTrip, FunctionalCovariateSurvival) {
  ScenarioConfig cfg;
  cfg.n = 60;
  cfg.grid_size = 21;
  cfg.censor_target = 0.3;
  cfg.seed = 4;
  const SimulatedDataset d = generate_scenario(cfg);

  const auto ft = io::functional_from_table(parse(io::functional_csv(d.treatment)));
  EXPECT_EQ(ft.sample.grid(), d.treatment.grid());
  EXPECT_EQ(ft.sample.values(), d.treatment.values());
  EXPECT_EQ(ft.ids.front(), "1");

  const auto ct = io::covariates_from_table(parse(io::covariate_csv(d.covariates, {"z1", "z2", "z3"})));
  EXPECT_EQ(ct.values, d.covariates);
  EXPECT_EQ(ct.names[2], "z3");

  const auto st = io::survival_from_table(parse(io::survival_csv(d.survival)));
  EXPECT_EQ(st.sample.delta(), d.survival.delta());
  EXPECT_LT((st.sample.log_time() - d.survival.log_time()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Functional, GridMustIncrease) {
  const std::string msg = error_of([] { io::functional_from_table(parse("id,0,0.5,0.4\na,1,2,3\n")); });
  EXPECT_NE(msg.find("strictly increasing"), std::string::npos) << msg;
}

TEST(Align, PermutationAndErrors) {
  const std::vector<std::string> ref{"a", "b", "c"};
  const auto order = io::align_ids(ref, {"c", "a", "b"}, "x.csv");
  EXPECT_EQ(order, (std::vector<Index>{1, 2, 0}));
  EXPECT_NE(error_of([&] { io::align_ids(ref, {"a", "a", "b"}, "x.csv"); }).find("duplicate id"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::align_ids(ref, {"a", "b", "d"}, "x.csv"); }).find("'c' not found"),
            std::string::npos);
  EXPECT_THROW(io::align_ids(ref, {"a"}, "x.csv"), DataError);
}

TEST(Writers, CurveAndStudyHeaders) {
  const Vector grid = uniform_grid(3);
  EXPECT_EQ(io::curve_csv(grid, Vector::Zero(3)), "s,beta\n0,0\n0.5,0\n1,0\n");
  std::vector<ScenarioConfig> settings(1);
  settings[0].n = 60;
  settings[0].grid_size = 11;
  StudyOptions opt;
  opt.reps = 2;
  opt.methods = {EstimatorId::kNaive};
  const std::string csv = io::study_csv(run_study(settings, opt));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), io::kStudyCsvHeader);
  EXPECT_NE(csv.find("\n1,60,0.2,Naive,"), std::string::npos) << csv;
}

TEST(Writers, BalanceMarksDegenerate) {
  Matrix a(4, 1), z(4, 2);
  a << 1, -1, 2, -2;
  z << 1, 5, 2, 5, 3, 5, 4, 5;
  const BalanceReport r = balance_diagnostics(Vector::Ones(4), a, z);
  const std::string csv = io::balance_csv(r, {"x", "flat"});
  EXPECT_NE(csv.find("degenerate"), std::string::npos) << csv;
  EXPECT_EQ(csv.substr(0, csv.find('\n')).find("flat") != std::string::npos, true);
}
