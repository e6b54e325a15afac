// Command-line entry point: dataset ingestion, reference-list construction,
// experiment execution, report emission, and the offline acceptance suite.
// A run is described by one JSON config file; individual flags override
// single keys so a saved config stays the reproducible record.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfqa/corpus.hpp"
#include "nfqa/harness.hpp"
#include "nfqa/selftest.hpp"
#include "nfqa/util.hpp"

namespace {

using namespace nfqa;

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    try {
      seeds.push_back(std::stoull(t));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + t + "' in --seeds");
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds needs at least one value");
  return seeds;
}

// Flags shared by build-refs / evaluate / report: each overrides one config
// key when present.
struct RunFlags {
  std::string config_path;
  std::string output_dir;
  std::string cache_path;
  std::string dataset_path;
  std::string composition;
  std::string regime;
  std::string seeds_csv;
  int parallelism = 0;
  double temperature = 0.0;
  int shots = -1;

  CLI::App* attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", output_dir, "Override the output directory");
    cmd->add_option("--cache", cache_path, "Override the completion cache path");
    cmd->add_option("--dataset", dataset_path, "Override the dataset file");
    cmd->add_option("--composition", composition,
                    "Override the reference composition (digits or preset)");
    cmd->add_option("--regime", regime,
                    "Override the regime (multi_grade, single_gt, zero_gt)");
    cmd->add_option("--seeds", seeds_csv, "Override the seed list, e.g. 1,2,3");
    cmd->add_option("--parallelism", parallelism, "Override worker count");
    cmd->add_option("--temperature", temperature, "Override judge temperature");
    cmd->add_option("--shots", shots, "Override shot count for every method");
    return cmd;
  }

  ExperimentConfig load(const CLI::App* cmd) const {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (cmd->count("--output-dir")) cfg.output_dir = output_dir;
    if (cmd->count("--cache")) cfg.cache_path = cache_path;
    if (cmd->count("--dataset")) {
      cfg.dataset.path = dataset_path;
      cfg.dataset.synthetic = false;
    }
    if (cmd->count("--composition")) cfg.composition = composition;
    if (cmd->count("--regime")) cfg.regime = regime_from_string(regime);
    if (cmd->count("--seeds")) cfg.seeds = parse_seed_list(seeds_csv);
    if (cmd->count("--parallelism")) cfg.parallelism = parallelism;
    if (cmd->count("--temperature")) cfg.temperature = temperature;
    if (cmd->count("--shots")) {
      cfg.default_shots = shots;
      for (MethodSpec& m : cfg.methods) m.strategy.shots = shots;
    }
    return cfg;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
}

std::string cell(const std::optional<double>& mean_v,
                 const std::optional<double>& std_v) {
  if (!mean_v) return "-";
  std::string s = format_fixed(*mean_v, 4);
  if (std_v) s += "+-" + format_fixed(*std_v, 4);
  return s;
}

void print_summary_tables(const RunArtifact& art) {
  std::printf("%-18s %-20s %-12s %-16s %-16s %-16s %-9s %-9s\n", "label",
              "method", "aggregation", "kendall", "spearman", "pearson",
              "acc(b)", "acc(b+w)");
  for (const MethodSummary& m : art.summary) {
    std::printf("%-18s %-20s %-12s %-16s %-16s %-16s %-9s %-9s\n",
                m.label.c_str(), std::string(to_string(m.method)).c_str(),
                m.aggregation.c_str(),
                cell(m.kendall_mean, m.kendall_std).c_str(),
                cell(m.spearman_mean, m.spearman_std).c_str(),
                cell(m.pearson_mean, m.pearson_std).c_str(),
                (m.acc_best_mean ? format_fixed(*m.acc_best_mean, 3) : "-")
                    .c_str(),
                (m.acc_best_worst_mean
                     ? format_fixed(*m.acc_best_worst_mean, 3)
                     : "-")
                    .c_str());
  }
  if (art.partial) {
    std::printf("NOTE: run incomplete, %zu warnings; tables carry an "
                "INCOMPLETE_RUN banner row\n",
                art.warnings.size());
  }
}

int run_ingest(const std::string& qrels_path, const std::string& answers_path,
               const std::string& questions_path,
               const std::string& candidates_path, bool synthetic,
               std::uint64_t synthetic_seed, int synthetic_questions,
               const std::string& scale_csv, const std::string& name,
               const std::string& out_path) {
  const GradeScale scale = GradeScale::parse(scale_csv);
  Dataset ds;
  if (synthetic) {
    SyntheticSpec spec;
    spec.scale = scale;
    spec.seed = synthetic_seed;
    spec.questions = synthetic_questions;
    ds = synthesize_dataset(spec);
    ds.name = name;
  } else if (!candidates_path.empty()) {
    ds.name = name;
    ds.scale = scale;
    for (GradedCandidateSet& set :
         load_graded_candidates(candidates_path, scale)) {
      ds.questions.push_back(std::move(set.question));
      for (GradedAnswer& a : set.candidates) {
        ds.answers.push_back(std::move(a));
      }
    }
  } else if (!qrels_path.empty() && !answers_path.empty()) {
    std::size_t duplicates = 0, dropped = 0;
    const QrelsMap qrels = load_qrels(qrels_path, &duplicates);
    const auto answer_texts = load_answer_texts(answers_path);
    const auto question_texts = questions_path.empty()
                                    ? std::unordered_map<std::string,
                                                         std::string>{}
                                    : load_question_texts(questions_path);
    ds = build_dataset(qrels, scale, name, answer_texts, question_texts,
                       &dropped);
    if (duplicates > 0) {
      std::fprintf(stderr, "warning: %zu duplicate judgments, last kept\n",
                   duplicates);
    }
    if (dropped > 0) {
      std::fprintf(stderr, "warning: %zu judged answers had no text, dropped\n",
                   dropped);
    }
  } else {
    throw ConfigError(
        "ingest needs --qrels with --answers, or --candidates, or "
        "--synthetic");
  }

  const std::vector<Violation> violations =
      validate_dataset(ds.questions, ds.answers, ds.scale);
  for (const Violation& v : violations) {
    std::fprintf(stderr, "invalid: %s %s (%s)\n", to_string(v.kind),
                 v.subject_id.c_str(), v.detail.c_str());
  }
  if (!violations.empty()) {
    std::fprintf(stderr, "%zu violations; nothing written\n",
                 violations.size());
    return 1;
  }
  save_dataset(ds, out_path);
  std::printf("wrote %zu questions, %zu answers to %s\n", ds.questions.size(),
              ds.answers.size(), out_path.c_str());
  return 0;
}

int run_build_refs(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Dataset ds = cfg.dataset.synthetic
                         ? synthesize_dataset(cfg.dataset.synthetic_spec)
                         : load_dataset(cfg.dataset.path);
  BackendRegistry registry;
  for (const nlohmann::json& b : cfg.backends) registry.add(make_backend(b));
  const TemplateSet templates = cfg.templates_dir.empty()
                                    ? TemplateSet::builtin()
                                    : TemplateSet::load_dir(cfg.templates_dir);
  const ExemplarSet exemplars = cfg.exemplars_path.empty()
                                    ? ExemplarSet::builtin()
                                    : ExemplarSet::load(cfg.exemplars_path);
  std::optional<CompletionCache> cache_storage;
  CompletionCache* cache = nullptr;
  if (!cfg.cache_path.empty()) {
    cache_storage.emplace(cfg.cache_path);
    cache = &*cache_storage;
  }

  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);

  bool any_failed = false;
  for (const std::uint64_t seed : cfg.seeds) {
    std::vector<std::string> warnings;
    bool generation_failed = false;
    const ReferenceSet refs =
        build_references(cfg, ds, registry, templates, exemplars, cache, seed,
                         &warnings, &generation_failed);
    const std::string path =
        dir + "/references_seed" + std::to_string(seed) + ".jsonl";
    save_reference_set(refs, path);
    print_warnings(warnings);
    any_failed = any_failed || generation_failed;
    std::printf("seed %llu: %zu reference lists -> %s\n",
                static_cast<unsigned long long>(seed), refs.lists.size(),
                path.c_str());
  }
  return any_failed ? 3 : 0;
}

int run_evaluate(const ExperimentConfig& cfg, bool print_tables) {
  const RunArtifact art = run_experiment(cfg);
  emit_report(art);
  print_warnings(art.warnings);
  std::printf("dataset: %s (%zu questions, %zu answers)\n", art.dataset.name.c_str(),
              art.dataset.questions.size(), art.dataset.answers.size());
  std::printf("regime: %s  seeds: %zu  methods: %zu\n",
              to_string(cfg.regime).c_str(), cfg.seeds.size(),
              cfg.methods.size());
  std::printf("records: %zu  backend calls: %zu  wall: %ss\n",
              art.records.size(), art.backend_calls,
              format_fixed(art.wall_seconds, 2).c_str());
  if (print_tables) {
    print_summary_tables(art);
  }
  std::printf("report written to %s (config %s)\n", cfg.output_dir.c_str(),
              art.hash.c_str());
  return art.partial ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Batch evaluation harness for open-ended question answering: "
      "judge-based and lexical scoring of candidate answers against "
      "reference lists, with agreement statistics over human grades"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "Build a canonical dataset file from raw inputs");
  std::string qrels_path, answers_path, questions_path, candidates_path;
  std::string ingest_out = "dataset.jsonl";
  std::string scale_csv = "3,2,1,0";
  std::string dataset_name = "dataset";
  bool synthetic = false;
  std::uint64_t synthetic_seed = 1;
  int synthetic_questions = 20;
  ingest->add_option("--qrels", qrels_path,
                     "Relevance judgments: qid tag docid grade per line");
  ingest->add_option("--answers", answers_path,
                     "Answer texts JSONL {answer_id, text}");
  ingest->add_option("--questions", questions_path,
                     "Question texts JSONL {question_id, text}");
  ingest->add_option("--candidates", candidates_path,
                     "Graded candidate sets JSONL");
  ingest->add_flag("--synthetic", synthetic,
                   "Generate the built-in synthetic dataset");
  ingest->add_option("--synthetic-seed", synthetic_seed,
                     "Seed for --synthetic");
  ingest->add_option("--synthetic-questions", synthetic_questions,
                     "Question count for --synthetic");
  ingest->add_option("--scale", scale_csv, "Grade levels, best first");
  ingest->add_option("--name", dataset_name, "Dataset name");
  ingest->add_option("--out", ingest_out, "Output dataset path");

  // build-refs
  auto* build_refs =
      app.add_subcommand("build-refs", "Construct and persist reference lists");
  RunFlags build_flags;
  build_flags.attach(build_refs);
  std::string refs_out_dir;
  build_refs->add_option("--out-dir", refs_out_dir,
                         "Directory for reference files (default: the "
                         "config's output dir)");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score every method over every seed and write the report");
  RunFlags eval_flags;
  eval_flags.attach(evaluate);

  // report
  auto* report = app.add_subcommand(
      "report",
      "Re-derive results through the completion cache and print the "
      "aggregate tables");
  RunFlags report_flags;
  report_flags.attach(report);

  // selftest
  auto* selftest = app.add_subcommand(
      "selftest", "Run the offline acceptance suite with mock judges");
  std::string scratch =
      (std::filesystem::temp_directory_path() / "nfqa-selftest").string();
  std::string filter;
  selftest->add_option("--scratch", scratch, "Scratch directory");
  selftest->add_option("--filter", filter,
                       "Only run checks whose name contains this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      return run_ingest(qrels_path, answers_path, questions_path,
                        candidates_path, synthetic, synthetic_seed,
                        synthetic_questions, scale_csv, dataset_name,
                        ingest_out);
    }
    if (build_refs->parsed()) {
      return run_build_refs(build_flags.load(build_refs), refs_out_dir);
    }
    if (evaluate->parsed()) {
      return run_evaluate(eval_flags.load(evaluate), false);
    }
    if (report->parsed()) {
      return run_evaluate(report_flags.load(report), true);
    }
    if (selftest->parsed()) {
      const std::vector<CheckResult> results =
          run_acceptance_checks(std::cout, scratch, filter);
      return all_passed(results) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
