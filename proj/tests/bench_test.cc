#include "rcme/bench.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "rcme/correspondence_io.h"
#include "test_util.h"

namespace rcme {
namespace {

namespace fs = std::filesystem;

constexpr char kSmallSuite[] = R"({
  "master_seed": 11,
  "engine": {"max_iters": 40},
  "families": [
    {"name": "uniform", "trials": 3, "n_points": 80, "outlier_ratio": 0.2},
    {"name": "clustered", "trials": 2, "n_points": 80, "outlier_ratio": 0.3,
     "distribution": "clustered"}
  ]
})";

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("rcme_test_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int RunCli(const std::string& args) {
  const std::string command = std::string(RCME_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CorrespondenceIo, RoundTripIsExact) {
  const Scene scene = test::MakeScene(1, 0.5, 0.2, 30);
  std::stringstream stream;
  WriteCorrespondences(stream, scene.correspondences, scene.K, scene.noise);
  const CorrespondenceFile file = ParseCorrespondences(stream);
  ASSERT_EQ(file.correspondences.size(), scene.correspondences.size());
  for (size_t i = 0; i < file.correspondences.size(); ++i) {
    EXPECT_EQ(file.correspondences[i].Stacked(), scene.correspondences[i].Stacked());
  }
  EXPECT_EQ(file.K.K(), scene.K.K());
  EXPECT_EQ(file.noise.sigma, 0.5);
  EXPECT_FALSE(file.sigma_defaulted);
}

TEST(CorrespondenceIo, ReportsLineNumbers) {
  std::stringstream stream("K 500 500 320 240 0\n# comment\n1 2 3\n");
  try {
    ParseCorrespondences(stream, "pairs.txt");
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("pairs.txt:3"), std::string::npos) << e.what();
  }
}

TEST(CorrespondenceIo, TooFewPairsAndDefaultSigma) {
  std::stringstream few("K 500 500 320 240 0\n1 2 3 4\n5 6 7 8\n");
  try {
    ParseCorrespondences(few);
    FAIL() << "expected too-few error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewCorrespondences);
  }
  std::stringstream enough;
  enough << "K 500 500 320 240 0\n";
  for (int i = 0; i < 8; ++i) enough << i << " " << 2 * i << " " << i + 1 << " " << i << "\n";
  const CorrespondenceFile file = ParseCorrespondences(enough);
  EXPECT_TRUE(file.sigma_defaulted);
  EXPECT_EQ(file.noise.sigma, 0.5);
}

TEST(SuiteConfig, ParsesAndRejectsUnknownKeys) {
  const SuiteConfig suite = ParseSuiteConfig(kSmallSuite);
  EXPECT_EQ(suite.master_seed, 11u);
  EXPECT_EQ(suite.engine.max_iters, 40);
  ASSERT_EQ(suite.families.size(), 2u);
  EXPECT_EQ(suite.families[1].scene.distribution, PointDistribution::kClustered);
  EXPECT_EQ(suite.variants.size(), 3u);
  try {
    ParseSuiteConfig(R"({"families": [{"name": "x", "outlier_rate": 0.2}]})");
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("outlier_rate"), std::string::npos);
  }
  EXPECT_THROW(ParseSuiteConfig("{"), Error);
}

TEST(Seeds, DependOnlyOnMasterFamilyAndTrial) {
  EXPECT_EQ(TrialSceneSeed(3, 1, 4), TrialSceneSeed(3, 1, 4));
  EXPECT_NE(TrialSceneSeed(3, 1, 4), TrialSceneSeed(3, 1, 5));
  EXPECT_NE(TrialSceneSeed(3, 1, 4), TrialEngineSeed(3, 1, 4));
  EXPECT_NE(TrialSceneSeed(3, 1, 4), TrialSceneSeed(4, 1, 4));
}

TEST(RunBenchmark, VariantsSharePairedScenes) {
  const SuiteConfig suite = ParseSuiteConfig(kSmallSuite);
  const BenchmarkReport report = RunBenchmark(suite);
  ASSERT_EQ(report.trials.size(), 5u * 3u);
  for (size_t i = 0; i + 2 < report.trials.size(); i += 3) {
    EXPECT_EQ(report.trials[i].scene_seed, report.trials[i + 1].scene_seed);
    EXPECT_EQ(report.trials[i].engine_seed, report.trials[i + 2].engine_seed);
    EXPECT_EQ(report.trials[i].variant, Variant::kStandard);
    EXPECT_FALSE(report.trials[i].detect_fail);
  }
  ASSERT_EQ(report.table.size(), 2u);
  EXPECT_EQ(report.table[0].variants[0].trials, 3);
}

TEST(RunBenchmark, ThreadCountDoesNotChangeTheReport) {
  SuiteConfig suite = ParseSuiteConfig(kSmallSuite);
  const std::string serial = ReportToJson(RunBenchmark(suite), suite);
  suite.threads = 4;
  EXPECT_EQ(ReportToJson(RunBenchmark(suite), suite), serial);
}

TEST(RunBenchmark, CsvHeader) {
  const SuiteConfig suite = ParseSuiteConfig(kSmallSuite);
  std::stringstream csv;
  WriteTableCsv(csv, RunBenchmark(suite));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header,
            "dataset,Standard_detect_fail_pct,pRCME_detect_fail_pct,RCME_detect_fail_pct,"
            "Standard_failure_pct,pRCME_failure_pct,RCME_failure_pct");
}

TEST(Cli, EstimateOnSynthesizedScene) {
  TempDir dir;
  WriteText(dir / "scene.json", R"({"name": "s", "n_points": 120, "outlier_ratio": 0.1})");
  ASSERT_EQ(RunCli("synth " + (dir / "scene.json").string() + " --seed 5 --out " +
                   (dir / "pairs.txt").string()),
            0);
  ASSERT_EQ(RunCli("estimate " + (dir / "pairs.txt").string() +
                   " --variant pRCME --seed 2 --out " + (dir / "result.json").string()),
            0);
  const std::string result = ReadText(dir / "result.json");
  EXPECT_NE(result.find("\"outcome\": \"Success\""), std::string::npos) << result;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(RunCli("estimate " + (dir / "missing.txt").string()), 2);
  WriteText(dir / "bad.txt", "1 2 x 4\n");
  EXPECT_EQ(RunCli("estimate " + (dir / "bad.txt").string()), 2);
  EXPECT_EQ(RunCli("estimate"), 2);
  EXPECT_EQ(RunCli("frobnicate"), 2);

  WriteText(dir / "outliers.json",
            R"({"name": "o", "n_points": 120, "outlier_ratio": 1.0})");
  ASSERT_EQ(RunCli("synth " + (dir / "outliers.json").string() + " --out " +
                   (dir / "outliers.txt").string()),
            0);
  EXPECT_EQ(RunCli("estimate " + (dir / "outliers.txt").string() + " --variant RCME"), 1);
}

TEST(Cli, BenchIsByteIdentical) {
  TempDir dir;
  WriteText(dir / "suite.json", kSmallSuite);
  const std::string suite = (dir / "suite.json").string();
  ASSERT_EQ(RunCli("bench " + suite + " --out " + (dir / "a.json").string() + " --csv " +
                   (dir / "a.csv").string()),
            0);
  ASSERT_EQ(RunCli("bench " + suite + " --threads 3 --out " + (dir / "b.json").string() +
                   " --csv " + (dir / "b.csv").string()),
            0);
  EXPECT_EQ(ReadText(dir / "a.json"), ReadText(dir / "b.json"));
  EXPECT_EQ(ReadText(dir / "a.csv"), ReadText(dir / "b.csv"));
  EXPECT_FALSE(ReadText(dir / "a.json").empty());
}

}  // namespace
}  // namespace rcme
