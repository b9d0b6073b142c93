#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rcme/engine.h"
#include "rcme/synth.h"

namespace rcme {

// One row of the benchmark table: a family of random scenes.
struct SceneFamily {
  std::string name = "scene";
  SceneConfig scene;
  // Each trial draws its own motion with RandomMotion(..., max_rotation_rad).
  double max_rotation_rad = 0.35;
  int trials = 100;
};

struct SuiteConfig {
  uint64_t master_seed = 0;
  std::vector<Variant> variants = {Variant::kStandard, Variant::kPRcme,
                                   Variant::kRcme};
  // Variant and rng_seed are overwritten per trial.
  EngineConfig engine;
  std::vector<SceneFamily> families;
  double kappa = 0.5;
  int threads = 1;
  // Wall-clock fields make reports non-reproducible; off by default.
  bool record_timing = false;

  // Throws kInvalidArgument.
  void Validate() const;
};

// Throws kParse with the offending key for malformed JSON.
SuiteConfig ParseSuiteConfig(const std::string& json_text);
SuiteConfig LoadSuiteConfig(const std::string& path);

// A single family object, as found in the "families" array of a suite.
SceneFamily ParseSceneFamily(const std::string& json_text);

struct TrialReport {
  int family = 0;
  int trial = 0;
  Variant variant = Variant::kRcme;
  uint64_t scene_seed = 0;
  uint64_t engine_seed = 0;
  bool detect_fail = false;
  // Set only when the engine returned a model.
  bool failure = false;
  int n_before = 0;
  int n_after = 0;
  int n_inliers = 0;
  int candidate_count = 0;
  double rotation_error_rad = 0.0;
  double translation_error_rad = 0.0;
  double wall_ms = 0.0;
};

struct VariantSummary {
  Variant variant = Variant::kRcme;
  int trials = 0;
  int detect_fail = 0;
  int failure = 0;

  double DetectFailPercent() const;
  double FailurePercent() const;
};

struct FamilySummary {
  std::string name;
  std::vector<VariantSummary> variants;
};

struct BenchmarkReport {
  std::vector<TrialReport> trials;
  std::vector<FamilySummary> table;
};

// Seeds of trial k of family c, derived from the master seed only.
uint64_t TrialSceneSeed(uint64_t master_seed, int family, int trial);
uint64_t TrialEngineSeed(uint64_t master_seed, int family, int trial);

// Scene of one trial (motion drawn from the trial seed).
Scene TrialScene(const SceneFamily& family, uint64_t scene_seed);

// Runs a variant on a scene, then refinement and the failure metric.
TrialReport RunTrial(const Scene& scene, Variant variant,
                     const EngineConfig& engine, uint64_t engine_seed,
                     double kappa, bool record_timing);

BenchmarkReport RunBenchmark(const SuiteConfig& suite);

// Table rows "dataset,<variant>_detect_fail_pct,...,<variant>_failure_pct,...".
void WriteTableCsv(std::ostream& out, const BenchmarkReport& report);
std::string ReportToJson(const BenchmarkReport& report, const SuiteConfig& suite);

}  // namespace rcme
