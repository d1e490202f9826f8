#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fcs/io.hpp"

namespace fs = std::filesystem;
using namespace fcs;

namespace {

const std::string kCli = FCS_CLI_PATH;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fcs_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli + " " + args + " >" + (log / "stdout.txt").string() + " 2>" +
                          (log / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// Column `col` of the summary row labelled `label`.
double summary_value(const std::string& csv, const std::string& label, int col) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(label + ",", 0) != 0) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i <= col; ++i) std::getline(ss, cell, ',');
    return std::stod(cell);
  }
  return -1.0;
}

}  // namespace

TEST(Cli, SimulateWritesStudyAndIsReproducible) {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const std::string args = "simulate --scenario 1,2 --censoring 0.2 --n 60 --reps 2 --grid-size 21 "
                           "--curves --out ";
  ASSERT_EQ(run(args + a.string() + " --threads 2", a), 0) << slurp(a / "stderr.txt");
  ASSERT_EQ(run(args + b.string() + " --threads 1", b), 0);
  const std::string csv = slurp(a / "study.csv");
  EXPECT_EQ(first_line(csv), io::kStudyCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  EXPECT_EQ(csv, slurp(b / "study.csv"));
  EXPECT_EQ(slurp(a / "study.json"), slurp(b / "study.json"));
  EXPECT_TRUE(fs::exists(a / "curves" / "s2_c20_DR.np.csv"));
}

TEST(Cli, ConfigFileAndFlagOverride) {
  const fs::path d = scratch("config");
  std::ofstream(d / "cfg.json") << R"({"scenario": [1], "censoring": [0.4], "n": 60, "reps": 2,
    "grid_size": 11, "method": ["Naive"], "prediction": false})";
  ASSERT_EQ(run("simulate --config " + (d / "cfg.json").string() + " --censoring 0.2 --out " +
                    d.string(),
                d),
            0)
      << slurp(d / "stderr.txt");
  const std::string csv = slurp(d / "study.csv");
  EXPECT_NE(csv.find("\n1,60,0.2,Naive,2,"), std::string::npos) << csv;
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
  const fs::path d = scratch("badkey");
  std::ofstream(d / "cfg.json") << R"({"n": 60, "replications": 3})";
  EXPECT_EQ(run("simulate --config " + (d / "cfg.json").string() + " --out " + d.string(), d), 2);
  EXPECT_NE(slurp(d / "stderr.txt").find("replications"), std::string::npos);
  EXPECT_EQ(run("simulate --n 10 --out " + d.string(), d), 2);
  EXPECT_EQ(run("simulate --bogus", d), 2);
}

TEST(Cli, DataErrorsExitThree) {
  const fs::path d = scratch("baddata");
  std::ofstream(d / "x.csv") << "id,0,0.5,1\n1,0,1,0\n2,1,0,1\n3,0.5,0.2,0.1\n";
  std::ofstream(d / "z.csv") << "id,z1\n1,0.1\n2,0.3\n3,-0.4\n";
  std::ofstream(d / "s.csv") << "id,time,status\n1,1.0,1\n2,0,1\n3,2.0,0\n";
  EXPECT_EQ(run("fit --method naive --treatment " + (d / "x.csv").string() + " --covariates " +
                    (d / "z.csv").string() + " --survival " + (d / "s.csv").string() +
                    " --out " + d.string(),
                d),
            3);
  const std::string err = slurp(d / "stderr.txt");
  EXPECT_NE(err.find("obs_time must be positive"), std::string::npos) << err;
  EXPECT_NE(err.find("s.csv:3:2"), std::string::npos) << err;
  EXPECT_EQ(run("fit --treatment " + (d / "missing.csv").string() + " --covariates " +
                    (d / "z.csv").string() + " --survival " + (d / "s.csv").string() +
                    " --out " + d.string(),
                d),
            3);
}

TEST(Cli, ExportThenFitMatchesInProcess) {
  const fs::path d = scratch("export");
  ASSERT_EQ(run("simulate --scenario 2 --censoring 0.2 --n 200 --reps 2 --method Naive "
                "--no-prediction --export-data --seed 31 --out " + d.string(),
                d),
            0)
      << slurp(d / "stderr.txt");
  const fs::path data = d / "data";
  const std::string files = " --treatment " + (data / "treatment.csv").string() +
                            " --covariates " + (data / "covariates.csv").string() +
                            " --survival " + (data / "survival.csv").string();

  // The exported dataset is the scenario generator's output at the master seed.
  ScenarioConfig sc;
  sc.scenario = 2;
  sc.n = 200;
  sc.seed = 31;
  const SimulatedDataset sim = generate_scenario(sc);
  const io::LoadedData loaded = io::load_data((data / "treatment.csv").string(),
                                              (data / "covariates.csv").string(),
                                              (data / "survival.csv").string());
  EXPECT_EQ(loaded.treatment.values(), sim.treatment.values());
  EXPECT_EQ(loaded.covariates, sim.covariates);
  EXPECT_LT((loaded.survival->log_time() - sim.survival.log_time()).cwiseAbs().maxCoeff(), 1e-12);

  const CausalDataset ds(loaded.treatment, loaded.covariates, *loaded.survival);
  for (const std::string method : {"naive", "double_robust"}) {
    const fs::path out = d / method;
    ASSERT_EQ(run("fit --method " + method + " --weights np" + files + " --out " + out.string(), d), 0)
        << slurp(d / "stderr.txt");
    const CausalEstimate est = method == "naive"
                                   ? estimate_naive(ds)
                                   : estimate_double_robust(ds, WeightSpec::make_nonparametric());
    const io::CsvTable beta = io::read_csv((out / "beta.csv").string());
    ASSERT_EQ(Index(beta.rows.size()), est.beta_curve.size());
    for (std::size_t m = 0; m < beta.rows.size(); ++m) {
      EXPECT_NEAR(std::stod(beta.rows[m][1]), est.beta_curve(Index(m)), 1e-10) << method << m;
    }
    const auto j = io::json::parse(slurp(out / "estimate.json"));
    EXPECT_EQ(j["n"].get<int>(), 200);
  }
}

TEST(Cli, BootstrapStandardErrors) {
  const fs::path d = scratch("boot");
  ASSERT_EQ(run("simulate --scenario 1 --n 100 --reps 2 --method Naive --no-prediction "
                "--export-data --out " + d.string(),
                d),
            0);
  const fs::path data = d / "data";
  ASSERT_EQ(run("fit --method naive --bootstrap 50 --threads 2 --treatment " +
                    (data / "treatment.csv").string() + " --covariates " +
                    (data / "covariates.csv").string() + " --survival " +
                    (data / "survival.csv").string() + " --out " + d.string(),
                d),
            0)
      << slurp(d / "stderr.txt");
  const auto j = io::json::parse(slurp(d / "estimate.json"));
  EXPECT_TRUE(j["fit"].contains("se")) << j.dump();
}

TEST(Cli, BalanceFlagsDegenerateAndImproves) {
  const fs::path d = scratch("balance");
  ASSERT_EQ(run("simulate --scenario 2 --n 400 --reps 2 --method Naive --no-prediction "
                "--export-data --out " + d.string(),
                d),
            0);
  const fs::path data = d / "data";
  // Append an all-ones column to the exported covariates.
  const io::CsvTable z = io::read_csv((data / "covariates.csv").string());
  std::ostringstream os;
  os << "id,z1,z2,z3,ones\n";
  for (const auto& row : z.rows) os << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3] << ",1\n";
  std::ofstream(d / "z_ones.csv") << os.str();

  ASSERT_EQ(run("balance --treatment " + (data / "treatment.csv").string() + " --covariates " +
                    (d / "z_ones.csv").string() + " --out " + d.string(),
                d),
            0)
      << slurp(d / "stderr.txt");
  const std::string unit = slurp(d / "balance_unit.csv");
  EXPECT_EQ(first_line(unit), "fpc,z1,z2,z3,ones");
  EXPECT_NE(unit.find("degenerate"), std::string::npos);
  const std::string summary = slurp(d / "balance_summary.csv");
  const double unit_max = summary_value(summary, "unit", 3);
  const double np_max = summary_value(summary, "np", 3);
  EXPECT_GT(unit_max, 0.0);
  EXPECT_LT(np_max, unit_max) << summary;
}

TEST(Cli, BalanceNullCovariatesSmall) {
  const fs::path d = scratch("balance_null");
  ASSERT_EQ(run("simulate --scenario 1 --n 400 --reps 2 --method Naive --no-prediction "
                "--export-data --out " + d.string(),
                d),
            0);
  const fs::path data = d / "data";
  Rng rng(5);
  std::normal_distribution<double> norm;
  std::ostringstream os;
  os << "id,u1,u2\n";
  for (int i = 1; i <= 400; ++i) os << i << ',' << norm(rng) << ',' << norm(rng) << '\n';
  std::ofstream(d / "u.csv") << os.str();
  ASSERT_EQ(run("balance --weights np --treatment " + (data / "treatment.csv").string() +
                    " --covariates " + (d / "u.csv").string() + " --out " + d.string(),
                d),
            0);
  EXPECT_LE(summary_value(slurp(d / "balance_summary.csv"), "unit", 3), 0.1);
}
