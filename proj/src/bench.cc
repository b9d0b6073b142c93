#include "rcme/bench.h"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rcme/refine.h"

namespace rcme {

namespace {

using nlohmann::json;

uint64_t DeriveSeed(uint64_t master_seed, int family, int trial, uint32_t tag) {
  std::seed_seq seq{static_cast<uint32_t>(master_seed),
                    static_cast<uint32_t>(master_seed >> 32),
                    static_cast<uint32_t>(family), static_cast<uint32_t>(trial), tag};
  std::mt19937_64 rng(seq);
  return rng();
}

void CheckKeys(const json& object, std::initializer_list<const char*> allowed,
               const std::string& where) {
  if (!object.is_object()) {
    throw Error(ErrorCode::kParse, where + ": expected an object");
  }
  for (const auto& item : object.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) {
      throw Error(ErrorCode::kParse, where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
void Read(const json& object, const char* key, const std::string& where, T* value) {
  if (!object.contains(key)) return;
  try {
    *value = object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, where + "." + key + ": " + e.what());
  }
}

EngineConfig ParseEngine(const json& object) {
  const std::string where = "engine";
  CheckKeys(object,
            {"max_iters", "alpha", "mu", "lambda", "omega_prior", "early_term_entropy",
             "z_form"},
            where);
  EngineConfig engine;
  Read(object, "max_iters", where, &engine.max_iters);
  Read(object, "alpha", where, &engine.alpha);
  Read(object, "mu", where, &engine.mu);
  Read(object, "lambda", where, &engine.lambda);
  Read(object, "omega_prior", where, &engine.omega_prior);
  if (object.contains("early_term_entropy") && !object["early_term_entropy"].is_null()) {
    double value = 0.0;
    Read(object, "early_term_entropy", where, &value);
    engine.early_term_entropy = value;
  }
  std::string z_form = "as_published";
  Read(object, "z_form", where, &z_form);
  if (z_form == "as_published") {
    engine.z_form = ZTestForm::kAsPublished;
  } else if (z_form == "one_sided_lower") {
    engine.z_form = ZTestForm::kOneSidedLower;
  } else {
    throw Error(ErrorCode::kParse, where + ".z_form: unknown value '" + z_form + "'");
  }
  return engine;
}

SceneFamily ParseFamily(const json& object, int index) {
  const std::string where = "families[" + std::to_string(index) + "]";
  CheckKeys(object,
            {"name", "trials", "max_rotation_deg", "n_points", "outlier_ratio", "sigma",
             "distribution", "n_clusters", "cluster_sigma_px", "depth_near",
             "depth_far", "image_width", "image_height", "K"},
            where);
  SceneFamily family;
  SceneConfig& scene = family.scene;
  Read(object, "name", where, &family.name);
  Read(object, "trials", where, &family.trials);
  double max_rotation_deg = family.max_rotation_rad * 180.0 / std::numbers::pi;
  Read(object, "max_rotation_deg", where, &max_rotation_deg);
  family.max_rotation_rad = max_rotation_deg * std::numbers::pi / 180.0;
  Read(object, "n_points", where, &scene.n_points);
  Read(object, "outlier_ratio", where, &scene.outlier_ratio);
  Read(object, "sigma", where, &scene.sigma);
  std::string distribution = "uniform";
  Read(object, "distribution", where, &distribution);
  if (distribution == "uniform") {
    scene.distribution = PointDistribution::kUniform;
  } else if (distribution == "clustered") {
    scene.distribution = PointDistribution::kClustered;
  } else {
    throw Error(ErrorCode::kParse,
                where + ".distribution: unknown value '" + distribution + "'");
  }
  Read(object, "n_clusters", where, &scene.n_clusters);
  Read(object, "cluster_sigma_px", where, &scene.cluster_sigma_px);
  Read(object, "depth_near", where, &scene.depth_near);
  Read(object, "depth_far", where, &scene.depth_far);
  Read(object, "image_width", where, &scene.image_width);
  Read(object, "image_height", where, &scene.image_height);
  if (object.contains("K")) {
    std::vector<double> k;
    Read(object, "K", where, &k);
    if (k.size() != 5) {
      throw Error(ErrorCode::kParse, where + ".K: expected [fx, fy, cx, cy, skew]");
    }
    scene.K = Intrinsics(k[0], k[1], k[2], k[3], k[4]);
  }
  return family;
}

json EngineToJson(const EngineConfig& engine) {
  json out;
  out["max_iters"] = engine.max_iters;
  out["alpha"] = engine.alpha;
  out["mu"] = engine.mu;
  out["lambda"] = engine.lambda;
  out["omega_prior"] = engine.omega_prior;
  out["early_term_entropy"] =
      engine.early_term_entropy ? json(*engine.early_term_entropy) : json(nullptr);
  out["z_form"] =
      engine.z_form == ZTestForm::kAsPublished ? "as_published" : "one_sided_lower";
  return out;
}

json FamilyToJson(const SceneFamily& family) {
  const SceneConfig& s = family.scene;
  json out;
  out["name"] = family.name;
  out["trials"] = family.trials;
  out["max_rotation_deg"] = family.max_rotation_rad * 180.0 / std::numbers::pi;
  out["n_points"] = s.n_points;
  out["outlier_ratio"] = s.outlier_ratio;
  out["sigma"] = s.sigma;
  out["distribution"] =
      s.distribution == PointDistribution::kUniform ? "uniform" : "clustered";
  out["n_clusters"] = s.n_clusters;
  out["cluster_sigma_px"] = s.cluster_sigma_px;
  out["depth_near"] = s.depth_near;
  out["depth_far"] = s.depth_far;
  out["image_width"] = s.image_width;
  out["image_height"] = s.image_height;
  out["K"] = {s.K.fx, s.K.fy, s.K.cx, s.K.cy, s.K.skew};
  return out;
}

}  // namespace

void SuiteConfig::Validate() const {
  engine.Validate();
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kappa must lie in [0, 1]");
  }
  if (threads < 1) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 1");
  for (const SceneFamily& family : families) {
    if (family.trials < 0) {
      throw Error(ErrorCode::kInvalidArgument, family.name + ": trials must be >= 0");
    }
    if (!(family.max_rotation_rad >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  family.name + ": max rotation must be non-negative");
    }
    family.scene.Validate();
  }
}

SuiteConfig ParseSuiteConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("suite: ") + e.what());
  }
  CheckKeys(root,
            {"master_seed", "variants", "engine", "families", "kappa", "threads",
             "record_timing"},
            "suite");
  SuiteConfig suite;
  Read(root, "master_seed", "suite", &suite.master_seed);
  if (root.contains("variants")) {
    std::vector<std::string> names;
    Read(root, "variants", "suite", &names);
    suite.variants.clear();
    try {
      for (const std::string& name : names) suite.variants.push_back(ParseVariant(name));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, std::string("suite.variants: ") + e.what());
    }
  }
  if (root.contains("engine")) suite.engine = ParseEngine(root["engine"]);
  Read(root, "kappa", "suite", &suite.kappa);
  Read(root, "threads", "suite", &suite.threads);
  Read(root, "record_timing", "suite", &suite.record_timing);
  if (root.contains("families")) {
    if (!root["families"].is_array()) {
      throw Error(ErrorCode::kParse, "suite.families: expected an array");
    }
    int index = 0;
    for (const json& family : root["families"]) {
      suite.families.push_back(ParseFamily(family, index++));
    }
  }
  try {
    suite.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, std::string("suite: ") + e.what());
  }
  return suite;
}

SceneFamily ParseSceneFamily(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("scene: ") + e.what());
  }
  SceneFamily family = ParseFamily(root, 0);
  try {
    family.scene.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, std::string("scene: ") + e.what());
  }
  return family;
}

SuiteConfig LoadSuiteConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, path + ": cannot open for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return ParseSuiteConfig(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

double VariantSummary::DetectFailPercent() const {
  return trials == 0 ? 0.0 : 100.0 * detect_fail / trials;
}

double VariantSummary::FailurePercent() const {
  return trials == 0 ? 0.0 : 100.0 * failure / trials;
}

uint64_t TrialSceneSeed(uint64_t master_seed, int family, int trial) {
  return DeriveSeed(master_seed, family, trial, 1);
}

uint64_t TrialEngineSeed(uint64_t master_seed, int family, int trial) {
  return DeriveSeed(master_seed, family, trial, 2);
}

Scene TrialScene(const SceneFamily& family, uint64_t scene_seed) {
  SceneConfig config = family.scene;
  config.rng_seed = scene_seed;
  config.motion_truth = RandomMotion(scene_seed ^ 0x9e3779b97f4a7c15ULL,
                                     family.max_rotation_rad);
  return GenerateScene(config);
}

TrialReport RunTrial(const Scene& scene, Variant variant, const EngineConfig& engine,
                     uint64_t engine_seed, double kappa, bool record_timing) {
  const auto start = std::chrono::steady_clock::now();
  EngineConfig config = engine;
  config.variant = variant;
  config.rng_seed = engine_seed;

  TrialReport report;
  report.variant = variant;
  report.engine_seed = engine_seed;
  const EngineResult result = RunEngine(scene.correspondences, scene.K, scene.noise, config);
  if (const auto* success = std::get_if<EstimationSuccess>(&result.outcome)) {
    const RefinedSolution solution =
        RefineAndAssess(success->motion, scene.correspondences, success->inlier_indices,
                        scene.K, scene.noise, config.alpha, kappa);
    report.failure = solution.failed;
    report.n_before = solution.n_before;
    report.n_after = solution.n_after;
    report.n_inliers = static_cast<int>(success->inlier_indices.size());
    report.candidate_count = success->candidate_count;
    report.rotation_error_rad =
        RotationAngleBetween(solution.motion.R(), scene.motion_truth.R());
    report.translation_error_rad =
        DirectionAngleBetween(solution.motion.t, scene.motion_truth.t);
  } else {
    report.detect_fail = true;
  }
  if (record_timing) {
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  }
  return report;
}

BenchmarkReport RunBenchmark(const SuiteConfig& suite) {
  suite.Validate();
  struct Job {
    int family;
    int trial;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < static_cast<int>(suite.families.size()); ++c) {
    for (int k = 0; k < suite.families[c].trials; ++k) jobs.push_back({c, k});
  }
  const size_t n_variants = suite.variants.size();
  BenchmarkReport report;
  report.trials.resize(jobs.size() * n_variants);

  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        const uint64_t scene_seed = TrialSceneSeed(suite.master_seed, job.family, job.trial);
        const uint64_t engine_seed =
            TrialEngineSeed(suite.master_seed, job.family, job.trial);
        const Scene scene = TrialScene(suite.families[job.family], scene_seed);
        for (size_t v = 0; v < n_variants; ++v) {
          TrialReport trial = RunTrial(scene, suite.variants[v], suite.engine,
                                       engine_seed, suite.kappa, suite.record_timing);
          trial.family = job.family;
          trial.trial = job.trial;
          trial.scene_seed = scene_seed;
          report.trials[j * n_variants + v] = trial;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(suite.threads, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& thread : pool) thread.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (int c = 0; c < static_cast<int>(suite.families.size()); ++c) {
    FamilySummary row;
    row.name = suite.families[c].name;
    for (const Variant variant : suite.variants) {
      VariantSummary summary;
      summary.variant = variant;
      for (const TrialReport& trial : report.trials) {
        if (trial.family != c || trial.variant != variant) continue;
        ++summary.trials;
        summary.detect_fail += trial.detect_fail ? 1 : 0;
        summary.failure += trial.failure ? 1 : 0;
      }
      row.variants.push_back(summary);
    }
    report.table.push_back(std::move(row));
  }
  return report;
}

void WriteTableCsv(std::ostream& out, const BenchmarkReport& report) {
  out << "dataset";
  if (!report.table.empty()) {
    for (const VariantSummary& v : report.table.front().variants) {
      out << ',' << VariantName(v.variant) << "_detect_fail_pct";
    }
    for (const VariantSummary& v : report.table.front().variants) {
      out << ',' << VariantName(v.variant) << "_failure_pct";
    }
  }
  out << '\n';
  char buffer[32];
  for (const FamilySummary& row : report.table) {
    out << row.name;
    for (const VariantSummary& v : row.variants) {
      std::snprintf(buffer, sizeof(buffer), ",%.2f", v.DetectFailPercent());
      out << buffer;
    }
    for (const VariantSummary& v : row.variants) {
      std::snprintf(buffer, sizeof(buffer), ",%.2f", v.FailurePercent());
      out << buffer;
    }
    out << '\n';
  }
}

std::string ReportToJson(const BenchmarkReport& report, const SuiteConfig& suite) {
  json root;
  root["master_seed"] = suite.master_seed;
  root["kappa"] = suite.kappa;
  root["engine"] = EngineToJson(suite.engine);
  root["families"] = json::array();
  for (const SceneFamily& family : suite.families) {
    root["families"].push_back(FamilyToJson(family));
  }
  root["table"] = json::array();
  for (const FamilySummary& row : report.table) {
    json entry;
    entry["dataset"] = row.name;
    for (const VariantSummary& v : row.variants) {
      json cell;
      cell["trials"] = v.trials;
      cell["detect_fail"] = v.detect_fail;
      cell["failure"] = v.failure;
      cell["detect_fail_pct"] = v.DetectFailPercent();
      cell["failure_pct"] = v.FailurePercent();
      entry["variants"][VariantName(v.variant)] = cell;
    }
    root["table"].push_back(entry);
  }
  root["trials"] = json::array();
  for (const TrialReport& t : report.trials) {
    json entry;
    entry["family"] = t.family;
    entry["trial"] = t.trial;
    entry["variant"] = VariantName(t.variant);
    entry["scene_seed"] = t.scene_seed;
    entry["engine_seed"] = t.engine_seed;
    entry["outcome"] = t.detect_fail ? "DetectFail" : "Success";
    entry["detect_fail"] = t.detect_fail;
    entry["failure"] = t.failure;
    entry["n_before"] = t.n_before;
    entry["n_after"] = t.n_after;
    entry["n_inliers"] = t.n_inliers;
    entry["candidate_count"] = t.candidate_count;
    if (!t.detect_fail) {
      entry["rotation_error_rad"] = t.rotation_error_rad;
      entry["translation_error_rad"] = t.translation_error_rad;
    }
    if (suite.record_timing) entry["wall_ms"] = t.wall_ms;
    root["trials"].push_back(entry);
  }
  return root.dump(2) + "\n";
}

}  // namespace rcme
