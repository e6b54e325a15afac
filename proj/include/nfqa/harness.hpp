#pragma once
// Experiment orchestration: a single config describes dataset, regime,
// methods, backends, and seeds; the runner builds references, scores every
// candidate with every method, computes per-question agreement against the
// human grades, aggregates across seeds, and emits deterministic report
// files plus a run manifest.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfqa/agreement.hpp"
#include "nfqa/corpus.hpp"
#include "nfqa/judge.hpp"
#include "nfqa/reference_builder.hpp"
#include "nfqa/scoring.hpp"

namespace nfqa {

// Where reference quality information comes from: a fully graded pool, a
// single known-good answer per question, or nothing but the question.
enum class Regime { multi_grade, single_gt, zero_gt };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

// One method to run: the strategy plus, for judge-based methods, the
// backend that answers its prompts. Labels key report rows, so two entries
// with the same method (say, different shot counts) need distinct labels;
// an empty label defaults to the method name.
struct MethodSpec {
  StrategyConfig strategy;
  std::string backend_id;
  std::string label;
};

struct DatasetSpec {
  std::string path;       // canonical dataset file; empty when synthetic
  bool synthetic = false;
  SyntheticSpec synthetic_spec;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  Regime regime = Regime::multi_grade;
  // Digit string or preset name; the target for sampling, informational for
  // generation regimes (whose shape follows the generation plan).
  std::string composition = "3210";
  bool allow_shortfall = false;
  std::vector<MethodSpec> methods;
  // Backend construction configs, handed to make_backend.
  std::vector<nlohmann::json> backends;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int default_shots = 0;
  double temperature = 0.8;
  int parallelism = 1;
  std::string output_dir = "out";
  std::string cache_path;      // empty disables the completion cache
  std::string templates_dir;   // empty uses the built-in templates
  std::string exemplars_path;  // empty uses the built-in exemplars
  bool reask_invalid_rank = false;
  // Also correlate over all (score, label) pairs pooled across questions,
  // next to the per-question-then-mean default.
  bool pooled_correlation = false;
  GenerationPlan generation;  // used by single_gt / zero_gt

  void validate() const;  // ConfigError before any backend work
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

// Stable hex digest of the canonical config serialization.
std::string config_hash(const ExperimentConfig& config);

// Agreement of one method on one seed: means over usable questions.
struct SeedMethodResult {
  std::uint64_t seed = 0;
  std::string label;
  Method method = Method::listwise;
  std::string aggregation = "per_question";  // or "pooled"
  std::optional<double> kendall;
  std::optional<double> spearman;
  std::optional<double> pearson;
  std::size_t used_questions = 0;
  std::size_t skipped_questions = 0;
  std::optional<double> acc_best;
  std::optional<double> acc_best_worst;
  std::size_t comparison_errors = 0;
};

// Cross-seed aggregation for one method: mean of per-seed means and the
// sample standard deviation across seeds.
struct MethodSummary {
  std::string label;
  Method method = Method::listwise;
  std::string aggregation = "per_question";
  std::optional<double> kendall_mean, kendall_std;
  std::optional<double> spearman_mean, spearman_std;
  std::optional<double> pearson_mean, pearson_std;
  std::optional<double> acc_best_mean, acc_best_std;
  std::optional<double> acc_best_worst_mean, acc_best_worst_std;
  std::size_t seeds_used = 0;
  std::size_t skipped_questions = 0;
  std::size_t comparison_errors = 0;
};

struct RunArtifact {
  ExperimentConfig config;
  std::string hash;
  Dataset dataset;
  std::vector<ReferenceSet> reference_sets;  // one per seed
  std::vector<EvaluationRecord> records;
  std::vector<SeedMethodResult> per_seed;
  std::vector<MethodSummary> summary;
  bool partial = false;
  std::vector<std::string> warnings;
  // Process-local statistics; never written into report files so reruns
  // stay byte-identical.
  double wall_seconds = 0.0;
  std::size_t backend_calls = 0;
};

// Picks one answer uniformly from the question's best populated grade and
// returns it with the pool that remains (the candidate side). Empty pool is
// a ConfigError. Deterministic per seed.
std::pair<GradedAnswer, GradedPool> simulate_single_gt(const GradedPool& pool,
                                                       std::uint64_t seed);

// One seed's reference lists under the config's regime: sampled from the
// graded pools for multi_grade, golden + descending generation otherwise.
// Questions whose generation fails are left without a list (warned, and
// *generation_failed set); the runner and the build-refs subcommand share
// this.
ReferenceSet build_references(const ExperimentConfig& config,
                              const Dataset& dataset,
                              BackendRegistry& registry,
                              const TemplateSet& templates,
                              const ExemplarSet& exemplars,
                              CompletionCache* cache, std::uint64_t seed,
                              std::vector<std::string>* warnings = nullptr,
                              bool* generation_failed = nullptr);

// The full pipeline. When `registry` is given its backends are used as-is
// (the config's backend list is ignored); otherwise backends are built from
// the config. Oracle backends are taught the grade of every answer the run
// can show them before any judging starts.
RunArtifact run_experiment(const ExperimentConfig& config,
                           BackendRegistry* registry = nullptr);

// Writes records.jsonl, references_seed<k>.jsonl, per_seed.csv,
// agreement.csv, accuracy.csv, and manifest.json under
// config.output_dir. File contents are pure functions of the artifact.
void emit_report(const RunArtifact& artifact);

// Convenience: the report table paths for an output directory.
std::vector<std::string> report_files(const std::string& output_dir,
                                      const std::vector<std::uint64_t>& seeds);

}  // namespace nfqa
