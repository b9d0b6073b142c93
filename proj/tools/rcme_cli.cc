#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcme/bench.h"
#include "rcme/correspondence_io.h"
#include "rcme/engine.h"
#include "rcme/refine.h"
#include "rcme/synth.h"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitDetectFail = 1;
constexpr int kExitInputError = 2;

using nlohmann::json;

struct EngineFlags {
  std::optional<std::string> variant;
  std::optional<uint64_t> seed;
  std::optional<int> iters;
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<double> lambda;
  std::optional<double> sigma;
  std::optional<double> early_term;
  std::string out;

  void Register(CLI::App* app) {
    app->add_option("--variant", variant, "Standard, pRCME or RCME");
    app->add_option("--seed", seed, "RNG seed (master seed for bench)");
    app->add_option("--iters", iters, "RANSAC iterations N");
    app->add_option("--alpha", alpha, "Significance level");
    app->add_option("--mu", mu, "Entropy threshold in nats");
    app->add_option("--lambda", lambda, "Inlier-size coefficient in [0.5, 1]");
    app->add_option("--sigma", sigma, "Pixel noise, overrides the input");
    app->add_option("--early-term", early_term,
                    "Stop once a candidate's mean entropy falls below this value");
    app->add_option("--out", out, "Output path (stdout when omitted)");
  }

  void Apply(rcme::EngineConfig* config) const {
    if (variant) config->variant = rcme::ParseVariant(*variant);
    if (seed) config->rng_seed = *seed;
    if (iters) config->max_iters = *iters;
    if (alpha) config->alpha = *alpha;
    if (mu) config->mu = *mu;
    if (lambda) config->lambda = *lambda;
    if (early_term) config->early_term_entropy = *early_term;
    config->Validate();
  }
};

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcme::Error(rcme::ErrorCode::kIo, path + ": cannot open for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void Emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rcme::Error(rcme::ErrorCode::kIo, path + ": cannot open for writing");
  out << text;
  if (!out) throw rcme::Error(rcme::ErrorCode::kIo, path + ": write failed");
}

json MotionToJson(const rcme::CameraMotion& motion) {
  json out;
  out["q"] = {motion.q(0), motion.q(1), motion.q(2), motion.q(3)};
  out["t"] = {motion.t(0), motion.t(1), motion.t(2)};
  return out;
}

int RunEstimate(const std::string& input, const EngineFlags& flags) {
  rcme::CorrespondenceFile file = rcme::LoadCorrespondences(input);
  if (flags.sigma) {
    file.noise = rcme::NoiseModel(*flags.sigma);
  } else if (file.sigma_defaulted) {
    std::cerr << "note: " << input << " has no sigma header, using 0.5\n";
  }
  rcme::EngineConfig config;
  flags.Apply(&config);

  const rcme::EngineResult result =
      rcme::RunEngine(file.correspondences, file.K, file.noise, config);
  json out;
  out["variant"] = rcme::VariantName(config.variant);
  out["n_correspondences"] = file.correspondences.size();
  int status = kExitSuccess;
  if (const auto* success = std::get_if<rcme::EstimationSuccess>(&result.outcome)) {
    const rcme::RefinedSolution refined = rcme::RefineAndAssess(
        success->motion, file.correspondences, success->inlier_indices, file.K,
        file.noise, config.alpha);
    out["outcome"] = "Success";
    out["motion"] = MotionToJson(success->motion);
    out["refined_motion"] = MotionToJson(refined.motion);
    out["inliers"] = success->inlier_indices;
    out["candidate_count"] = success->candidate_count;
    out["n_before"] = refined.n_before;
    out["n_after"] = refined.n_after;
    out["failed"] = refined.failed;
  } else {
    const auto& fail = std::get<rcme::DetectFail>(result.outcome);
    out["outcome"] = "DetectFail";
    out["reason"] = rcme::DetectFailReasonName(fail.reason);
    status = kExitDetectFail;
  }
  Emit(flags.out, out.dump(2) + "\n");
  return status;
}

int RunBench(const std::string& suite_path, const EngineFlags& flags,
             const std::string& csv_path, std::optional<int> threads) {
  rcme::SuiteConfig suite = rcme::LoadSuiteConfig(suite_path);
  if (flags.seed) suite.master_seed = *flags.seed;
  if (flags.variant) suite.variants = {rcme::ParseVariant(*flags.variant)};
  EngineFlags engine_flags = flags;
  engine_flags.variant.reset();
  engine_flags.seed.reset();
  engine_flags.Apply(&suite.engine);
  if (flags.sigma) {
    for (rcme::SceneFamily& family : suite.families) family.scene.sigma = *flags.sigma;
  }
  if (threads) suite.threads = *threads;

  const rcme::BenchmarkReport report = rcme::RunBenchmark(suite);
  std::ostringstream table;
  rcme::WriteTableCsv(table, report);
  if (!csv_path.empty()) {
    Emit(csv_path, table.str());
  } else {
    std::cerr << table.str();
  }
  Emit(flags.out, rcme::ReportToJson(report, suite));
  return kExitSuccess;
}

int RunSynth(const std::string& scene_path, const EngineFlags& flags) {
  rcme::SceneFamily family = rcme::ParseSceneFamily(ReadFile(scene_path));
  if (flags.sigma) family.scene.sigma = *flags.sigma;
  const rcme::Scene scene = rcme::TrialScene(family, flags.seed.value_or(0));

  std::ostringstream text;
  text << std::setprecision(std::numeric_limits<double>::max_digits10);
  text << "# synthetic scene '" << family.name << "', seed " << flags.seed.value_or(0)
       << "\n# truth q " << scene.motion_truth.q.transpose() << "\n# truth t "
       << scene.motion_truth.t.transpose() << "\n# outliers " << scene.OutlierCount()
       << " of " << scene.correspondences.size() << "\n# labels ";
  for (const bool inlier : scene.inlier_labels) text << (inlier ? '1' : '0');
  text << '\n';
  rcme::WriteCorrespondences(text, scene.correspondences, scene.K, scene.noise);
  Emit(flags.out, text.str());
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-quality-aware RANSAC for two-view camera motion"};
  app.require_subcommand(1);

  EngineFlags estimate_flags;
  std::string estimate_input;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate motion from a file");
  estimate->add_option("input", estimate_input, "Correspondence file")->required();
  estimate_flags.Register(estimate);

  EngineFlags bench_flags;
  std::string suite_path;
  std::string csv_path;
  std::optional<int> threads;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("suite", suite_path, "Suite configuration (JSON)")->required();
  bench->add_option("--csv", csv_path, "Table output path (stderr when omitted)");
  bench->add_option("--threads", threads, "Worker threads");
  bench_flags.Register(bench);

  EngineFlags synth_flags;
  std::string scene_path;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic correspondence file");
  synth->add_option("scene", scene_path, "Scene configuration (JSON)")->required();
  synth_flags.Register(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitInputError;
  }

  try {
    if (estimate->parsed()) return RunEstimate(estimate_input, estimate_flags);
    if (bench->parsed()) return RunBench(suite_path, bench_flags, csv_path, threads);
    if (synth->parsed()) return RunSynth(scene_path, synth_flags);
  } catch (const rcme::Error& e) {
    std::cerr << "error (" << rcme::ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
