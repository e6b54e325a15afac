#include "nfqa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <sstream>

#include "nfqa/util.hpp"

namespace nfqa {

using nlohmann::json;

namespace {

std::string normalization_to_string(Normalization n) {
  switch (n) {
    case Normalization::linear_rank: return "linear_rank";
    case Normalization::identity: return "identity";
    case Normalization::minmax: return "minmax";
  }
  return "linear_rank";
}

Normalization normalization_from_string(const std::string& name) {
  if (name == "linear_rank") return Normalization::linear_rank;
  if (name == "identity") return Normalization::identity;
  if (name == "minmax") return Normalization::minmax;
  throw ConfigError("unknown normalization '" + name + "'");
}

json weights_to_json(const PairwiseWeights& weights) {
  json j = json::object();
  for (const auto& [grade, w] : weights.weight_by_grade) {
    j[std::to_string(grade)] = w;
  }
  return j;
}

PairwiseWeights weights_from_json(const json& j) {
  PairwiseWeights w;
  for (const auto& [key, value] : j.items()) {
    try {
      w.weight_by_grade[std::stoi(key)] = value.get<double>();
    } catch (const std::exception&) {
      throw ConfigError("bad pairwise weight entry '" + key + "'");
    }
  }
  w.validate();
  return w;
}

std::string default_label(const MethodSpec& spec) {
  return spec.label.empty() ? std::string(to_string(spec.strategy.method))
                            : spec.label;
}

// Candidate answers of one question for one seed: every graded answer that
// did not become a reference.
struct QuestionTask {
  const Question* question = nullptr;
  const ReferenceList* references = nullptr;  // may be null / empty
  std::vector<GradedAnswer> candidates;
};

struct MethodSeedOutcome {
  std::vector<EvaluationRecord> records;
  SeedMethodResult per_question;
  std::optional<SeedMethodResult> pooled;
  std::vector<std::string> warnings;
};

std::string csv_cell(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : std::string{};
}

void write_text(const std::string& path, const std::string& content) {
  write_file(path, content);
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::multi_grade: return "multi_grade";
    case Regime::single_gt: return "single_gt";
    case Regime::zero_gt: return "zero_gt";
  }
  return "multi_grade";
}

Regime regime_from_string(const std::string& name) {
  if (name == "multi_grade") return Regime::multi_grade;
  if (name == "single_gt") return Regime::single_gt;
  if (name == "zero_gt") return Regime::zero_gt;
  throw ConfigError("unknown regime '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config needs at least one seed");
  if (methods.empty()) throw ConfigError("config needs at least one method");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (default_shots < 0) throw ConfigError("shots must be >= 0");
  if (!dataset.synthetic && dataset.path.empty()) {
    throw ConfigError("config needs a dataset path or the synthetic flag");
  }
  std::vector<std::string> labels;
  for (const MethodSpec& spec : methods) {
    if (is_llm_method(spec.strategy.method) && spec.backend_id.empty()) {
      throw ConfigError("method " +
                        std::string(to_string(spec.strategy.method)) +
                        " needs a backend id");
    }
    if (spec.strategy.shots < 0) {
      throw ConfigError("method " + default_label(spec) +
                        ": shots must be >= 0");
    }
    labels.push_back(default_label(spec));
  }
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw ConfigError(
        "method labels must be unique; give duplicate methods explicit "
        "labels");
  }
  if (regime != Regime::multi_grade) {
    generation.validate();
  }
  if (regime == Regime::multi_grade && composition.empty()) {
    throw ConfigError("config needs a composition");
  }
}

json ExperimentConfig::to_json() const {
  json methods_j = json::array();
  for (const MethodSpec& spec : methods) {
    json m{{"label", default_label(spec)},
           {"method", to_string(spec.strategy.method)},
           {"shots", spec.strategy.shots},
           {"permute_positions", spec.strategy.permute_positions},
           {"normalization",
            normalization_to_string(spec.strategy.normalization)}};
    if (!spec.backend_id.empty()) m["backend"] = spec.backend_id;
    if (spec.strategy.weights) {
      m["weights"] = weights_to_json(*spec.strategy.weights);
    }
    methods_j.push_back(std::move(m));
  }
  json per_grade = json::object();
  for (const auto& [grade, count] : dataset.synthetic_spec.per_grade) {
    per_grade[std::to_string(grade)] = count;
  }
  json generation_j{{"golden_backend", generation.golden_backend},
                    {"generator_backends", generation.generator_backends},
                    {"shots", generation.shots},
                    {"target_grades", generation.target_grades},
                    {"seed", generation.seed}};
  return json{
      {"dataset",
       {{"path", dataset.path},
        {"synthetic", dataset.synthetic},
        {"synthetic_spec",
         {{"questions", dataset.synthetic_spec.questions},
          {"per_grade", per_grade},
          {"scale", dataset.synthetic_spec.scale.str()},
          {"seed", dataset.synthetic_spec.seed},
          {"grade_markers", dataset.synthetic_spec.grade_markers}}}}},
      {"regime", to_string(regime)},
      {"composition", composition},
      {"allow_shortfall", allow_shortfall},
      {"methods", methods_j},
      {"backends", backends},
      {"seeds", seeds},
      {"default_shots", default_shots},
      {"temperature", temperature},
      {"parallelism", parallelism},
      {"output_dir", output_dir},
      {"cache_path", cache_path},
      {"templates_dir", templates_dir},
      {"exemplars_path", exemplars_path},
      {"reask_invalid_rank", reask_invalid_rank},
      {"pooled_correlation", pooled_correlation},
      {"generation", generation_j}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    c.dataset.path = d.value("path", std::string{});
    c.dataset.synthetic = d.value("synthetic", false);
    if (d.contains("synthetic_spec")) {
      const json& s = d.at("synthetic_spec");
      c.dataset.synthetic_spec.questions =
          s.value("questions", c.dataset.synthetic_spec.questions);
      if (s.contains("per_grade")) {
        c.dataset.synthetic_spec.per_grade.clear();
        for (const auto& [key, value] : s.at("per_grade").items()) {
          try {
            c.dataset.synthetic_spec.per_grade[std::stoi(key)] =
                value.get<int>();
          } catch (const std::exception&) {
            throw ConfigError("bad per_grade entry '" + key + "'");
          }
        }
      }
      if (s.contains("scale")) {
        c.dataset.synthetic_spec.scale =
            GradeScale::parse(s.at("scale").get<std::string>());
      }
      c.dataset.synthetic_spec.seed =
          s.value("seed", c.dataset.synthetic_spec.seed);
      c.dataset.synthetic_spec.grade_markers =
          s.value("grade_markers", c.dataset.synthetic_spec.grade_markers);
    }
  }
  if (j.contains("regime")) {
    c.regime = regime_from_string(j.at("regime").get<std::string>());
  }
  c.composition = j.value("composition", c.composition);
  c.allow_shortfall = j.value("allow_shortfall", c.allow_shortfall);
  c.default_shots = j.value("default_shots", c.default_shots);
  if (j.contains("methods")) {
    for (const json& m : j.at("methods")) {
      MethodSpec spec;
      spec.strategy.method =
          method_from_string(m.at("method").get<std::string>());
      spec.strategy.shots = m.value("shots", c.default_shots);
      spec.strategy.permute_positions = m.value("permute_positions", true);
      if (m.contains("normalization")) {
        spec.strategy.normalization =
            normalization_from_string(m.at("normalization").get<std::string>());
      } else if (spec.strategy.method == Method::pairwise_candidates) {
        spec.strategy.normalization = Normalization::minmax;
      }
      if (m.contains("weights")) {
        spec.strategy.weights = weights_from_json(m.at("weights"));
      }
      spec.backend_id = m.value("backend", std::string{});
      spec.label = m.value("label", std::string{});
      c.methods.push_back(std::move(spec));
    }
  }
  if (j.contains("backends")) {
    for (const json& b : j.at("backends")) c.backends.push_back(b);
  }
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  c.temperature = j.value("temperature", c.temperature);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.cache_path = j.value("cache_path", c.cache_path);
  c.templates_dir = j.value("templates_dir", c.templates_dir);
  c.exemplars_path = j.value("exemplars_path", c.exemplars_path);
  c.reask_invalid_rank = j.value("reask_invalid_rank", c.reask_invalid_rank);
  c.pooled_correlation = j.value("pooled_correlation", c.pooled_correlation);
  if (j.contains("generation")) {
    const json& g = j.at("generation");
    c.generation.golden_backend = g.value("golden_backend", std::string{});
    c.generation.generator_backends =
        g.value("generator_backends", std::vector<std::string>{});
    c.generation.shots = g.value("shots", c.generation.shots);
    c.generation.target_grades =
        g.value("target_grades", std::vector<int>{});
    c.generation.seed = g.value("seed", std::uint64_t{0});
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) {
    throw ParseError(path + ": not valid JSON");
  }
  return from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  return to_hex(fnv1a64(config.to_json().dump()));
}

std::pair<GradedAnswer, GradedPool> simulate_single_gt(const GradedPool& pool,
                                                       std::uint64_t seed) {
  auto it = pool.answers_by_grade.begin();
  while (it != pool.answers_by_grade.end() && it->second.empty()) ++it;
  if (it == pool.answers_by_grade.end()) {
    throw ConfigError("question " + pool.question.question_id +
                      " has no graded answer to serve as ground truth");
  }
  Rng rng(derive_seed(seed, "golden-pick|" + pool.question.question_id));
  const std::size_t pick = rng.uniform(it->second.size());
  GradedAnswer chosen = it->second[pick];
  GradedPool rest = pool;
  auto& bucket = rest.answers_by_grade.at(it->first);
  bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(pick));
  if (bucket.empty()) rest.answers_by_grade.erase(it->first);
  return {std::move(chosen), std::move(rest)};
}

ReferenceSet build_references(const ExperimentConfig& config,
                              const Dataset& dataset,
                              BackendRegistry& registry,
                              const TemplateSet& templates,
                              const ExemplarSet& exemplars,
                              CompletionCache* cache, std::uint64_t seed,
                              std::vector<std::string>* warnings,
                              bool* generation_failed) {
  if (config.regime == Regime::multi_grade) {
    return build_sampled_reference_set(
        dataset, resolve_composition(config.composition, dataset.scale), seed,
        config.allow_shortfall, warnings);
  }
  GenerationPlan plan = config.generation;
  plan.seed = derive_seed(seed, "generation");
  plan.validate();
  ReferenceSet refs;
  refs.regime = to_string(config.regime);
  refs.seed = seed;
  std::string comp_digits = std::to_string(dataset.scale.max_level());
  for (int g : plan.target_grades) comp_digits += std::to_string(g);
  refs.composition = comp_digits;
  refs.backend_ids.push_back(plan.golden_backend);
  for (const std::string& id : plan.generator_backends) {
    if (std::find(refs.backend_ids.begin(), refs.backend_ids.end(), id) ==
        refs.backend_ids.end()) {
      refs.backend_ids.push_back(id);
    }
  }
  GenerationContext ctx;
  ctx.templates = templates;
  ctx.exemplars = exemplars;
  ctx.cache = cache;
  ctx.temperature = config.temperature;
  for (const Question& q : dataset.questions) {
    const GradedPool pool = pool_for(dataset, q.question_id);
    if (pool.total() == 0) {
      if (warnings) {
        warnings->push_back("question " + q.question_id +
                            ": no graded answers, skipped");
      }
      continue;
    }
    std::optional<GradedAnswer> golden_source;
    if (config.regime == Regime::single_gt) {
      golden_source = simulate_single_gt(pool, seed).first;
    }
    try {
      refs.lists.push_back(build_generated_reference_list(
          q, golden_source, plan, registry, ctx, dataset.scale, warnings));
    } catch (const GenerationError& e) {
      if (generation_failed) *generation_failed = true;
      if (warnings) {
        warnings->push_back(std::string("generation failed: ") + e.what());
      }
    }
  }
  return refs;
}

namespace {

// Scores one method over all prepared questions for one seed, then
// aggregates per-question agreement.
MethodSeedOutcome run_method_for_seed(
    const ExperimentConfig& config, const MethodSpec& spec,
    const std::vector<QuestionTask>& tasks, BackendRegistry& registry,
    const TemplateSet& templates, const ExemplarSet& exemplars,
    CompletionCache* cache, std::uint64_t seed) {
  const Method method = spec.strategy.method;
  const std::string label = default_label(spec);
  MethodSeedOutcome out;
  out.per_question.seed = seed;
  out.per_question.label = label;
  out.per_question.method = method;

  // Questions this method can score at all.
  std::vector<const QuestionTask*> usable;
  for (const QuestionTask& t : tasks) {
    if (t.candidates.empty()) continue;
    const bool has_refs = t.references && !t.references->empty();
    if (needs_references(method) && !has_refs) {
      out.warnings.push_back("question " + t.question->question_id + ": no references, method " + label + " skipped");
      continue;
    }
    if (method == Method::pairwise_candidates && t.candidates.size() < 2) {
      out.warnings.push_back("question " + t.question->question_id +
                             ": fewer than 2 candidates, method " + label +
                             " skipped");
      continue;
    }
    usable.push_back(&t);
  }

  std::optional<JudgeClient> judge;
  if (is_llm_method(method)) {
    JudgeOptions options;
    options.temperature = config.temperature;
    options.seed = derive_seed(
        seed, "judge|" + std::string(to_string(method)) + "|" + label);
    options.shots = spec.strategy.shots;
    options.permute_positions = spec.strategy.permute_positions;
    options.reask_invalid_rank = config.reask_invalid_rank;
    judge.emplace(registry.get(spec.backend_id), templates, cache, options,
                  exemplars);
  }

  struct TaskResult {
    std::vector<EvaluationRecord> records;
    std::vector<double> scores;
    std::vector<double> labels;
    std::optional<double> tau, rho, r;
    std::optional<bool> best, best_worst;
    std::size_t comparison_errors = 0;
    std::vector<std::string> warnings;
  };
  std::vector<TaskResult> results(usable.size());

  parallel_for(usable.size(), config.parallelism, [&](std::size_t ti) {
    const QuestionTask& t = *usable[ti];
    TaskResult& res = results[ti];
    auto push = [&](const GradedAnswer& cand, const Score& s,
                    std::uint64_t digest) {
      EvaluationRecord rec;
      rec.question_id = s.question_id;
      rec.answer_id = s.answer_id;
      rec.method = method;
      rec.seed = seed;
      rec.shots = spec.strategy.shots;
      rec.backend_id = is_llm_method(method) ? spec.backend_id : "";
      rec.prompt_digest = digest ? to_hex(digest) : "";
      rec.raw = s.raw;
      rec.normalized = s.normalized;
      res.records.push_back(std::move(rec));
      res.scores.push_back(s.normalized);
      res.labels.push_back(static_cast<double>(*cand.grade));
    };
    switch (method) {
      case Method::pointwise_noref:
      case Method::pointwise_ref: {
        const ReferenceList* refs =
            method == Method::pointwise_ref ? t.references : nullptr;
        for (const GradedAnswer& cand : t.candidates) {
          std::uint64_t digest = 0;
          const Score s = score_pointwise(*t.question, cand, refs,
                                          spec.strategy, *judge, &digest);
          push(cand, s, digest);
        }
        break;
      }
      case Method::pairwise_candidates: {
        std::map<std::string, std::uint64_t> digests;
        const auto scores = score_pairwise_candidates(
            *t.question, t.candidates, spec.strategy, *judge,
            &res.comparison_errors, &digests);
        for (const GradedAnswer& cand : t.candidates) {
          push(cand, scores.at(cand.answer_id), digests.at(cand.answer_id));
        }
        break;
      }
      case Method::pairwise_refs: {
        for (const GradedAnswer& cand : t.candidates) {
          std::uint64_t digest = 0;
          const Score s = score_pairwise_references(
              *t.question, cand, *t.references, spec.strategy, *judge,
              &res.comparison_errors, &digest);
          push(cand, s, digest);
        }
        break;
      }
      case Method::listwise: {
        for (const GradedAnswer& cand : t.candidates) {
          std::uint64_t digest = 0;
          const Score s = score_listwise(*t.question, cand, *t.references,
                                         spec.strategy, *judge, &digest);
          push(cand, s, digest);
        }
        break;
      }
      default: {
        const GradedPool ref_pool =
            pool_from_references(*t.question, *t.references);
        for (const GradedAnswer& cand : t.candidates) {
          const Score s = score_against_pool(cand, ref_pool, method, nullptr,
                                             false, &res.warnings);
          push(cand, s, 0);
        }
        break;
      }
    }
    res.tau = kendall_tau_b(res.scores, res.labels);
    res.rho = spearman_rho(res.scores, res.labels);
    res.r = pearson_r(res.scores, res.labels);
    res.best = best_hit(res.scores, res.labels);
    res.best_worst = best_worst_hit(res.scores, res.labels);
  });

  std::vector<std::optional<double>> taus, rhos, rs;
  std::vector<std::optional<bool>> bests, best_worsts;
  std::vector<double> pooled_scores, pooled_labels;
  for (TaskResult& res : results) {
    for (EvaluationRecord& rec : res.records) {
      out.records.push_back(std::move(rec));
    }
    for (const std::string& w : res.warnings) out.warnings.push_back(w);
    taus.push_back(res.tau);
    rhos.push_back(res.rho);
    rs.push_back(res.r);
    bests.push_back(res.best);
    best_worsts.push_back(res.best_worst);
    out.per_question.comparison_errors += res.comparison_errors;
    pooled_scores.insert(pooled_scores.end(), res.scores.begin(),
                         res.scores.end());
    pooled_labels.insert(pooled_labels.end(), res.labels.begin(),
                         res.labels.end());
  }

  const CorrelationSummary tau_sum = summarize_correlations(taus);
  out.per_question.kendall = tau_sum.mean;
  out.per_question.used_questions = tau_sum.used;
  out.per_question.skipped_questions = tau_sum.skipped;
  out.per_question.spearman = summarize_correlations(rhos).mean;
  out.per_question.pearson = summarize_correlations(rs).mean;
  std::size_t used = 0;
  const double acc_b = hit_rate(bests, &used);
  if (used > 0) out.per_question.acc_best = acc_b;
  const double acc_bw = hit_rate(best_worsts, &used);
  if (used > 0) out.per_question.acc_best_worst = acc_bw;

  if (config.pooled_correlation) {
    SeedMethodResult pooled;
    pooled.seed = seed;
    pooled.label = label;
    pooled.method = method;
    pooled.aggregation = "pooled";
    pooled.kendall = kendall_tau_b(pooled_scores, pooled_labels);
    pooled.spearman = spearman_rho(pooled_scores, pooled_labels);
    pooled.pearson = pearson_r(pooled_scores, pooled_labels);
    pooled.used_questions = tau_sum.used;
    pooled.skipped_questions = tau_sum.skipped;
    pooled.comparison_errors = out.per_question.comparison_errors;
    out.pooled = std::move(pooled);
  }
  return out;
}

struct MeanStd {
  std::optional<double> mean_v;
  std::optional<double> std_v;
};

MeanStd aggregate(const std::vector<std::optional<double>>& values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  MeanStd out;
  if (!present.empty()) {
    out.mean_v = mean(present);
    out.std_v = sample_std(present);
  }
  return out;
}

}  // namespace

RunArtifact run_experiment(const ExperimentConfig& config,
                           BackendRegistry* external_registry) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  RunArtifact art;
  art.config = config;
  art.hash = config_hash(config);
  art.dataset = config.dataset.synthetic
                    ? synthesize_dataset(config.dataset.synthetic_spec)
                    : load_dataset(config.dataset.path);
  const GradeScale& scale = art.dataset.scale;

  BackendRegistry local_registry;
  if (!external_registry) {
    for (const json& b : config.backends) local_registry.add(make_backend(b));
  }
  BackendRegistry& registry =
      external_registry ? *external_registry : local_registry;

  const TemplateSet templates = config.templates_dir.empty()
                                    ? TemplateSet::builtin()
                                    : TemplateSet::load_dir(config.templates_dir);
  const ExemplarSet exemplars = config.exemplars_path.empty()
                                    ? ExemplarSet::builtin()
                                    : ExemplarSet::load(config.exemplars_path);
  std::optional<CompletionCache> cache_storage;
  CompletionCache* cache = nullptr;
  if (!config.cache_path.empty()) {
    cache_storage.emplace(config.cache_path);
    cache = &*cache_storage;
  }

  std::vector<std::shared_ptr<OracleBackend>> oracles;
  for (const std::string& id : registry.ids()) {
    if (auto oracle =
            std::dynamic_pointer_cast<OracleBackend>(registry.get(id))) {
      oracles.push_back(std::move(oracle));
    }
  }
  auto teach_oracles = [&](const GradedAnswer& a) {
    if (!a.grade) return;
    for (const auto& oracle : oracles) oracle->learn(a.text, *a.grade);
  };
  for (const GradedAnswer& a : art.dataset.answers) teach_oracles(a);

  std::size_t calls_before = 0;
  for (const std::string& id : registry.ids()) {
    calls_before += registry.get(id)->calls();
  }

  if (config.regime == Regime::multi_grade) {
    resolve_composition(config.composition, scale);  // fail before any call
  }

  // Tasks bind pointers into reference_sets; reserve so push_back never
  // relocates a list mid-run.
  art.reference_sets.reserve(config.seeds.size());
  for (const std::uint64_t seed : config.seeds) {
    bool generation_failed = false;
    art.reference_sets.push_back(
        build_references(config, art.dataset, registry, templates, exemplars,
                         cache, seed, &art.warnings, &generation_failed));
    if (generation_failed) art.partial = true;
    const ReferenceSet& refs = art.reference_sets.back();
    for (const ReferenceList& list : refs.lists) {
      for (const GradedAnswer& a : list.answers()) teach_oracles(a);
    }

    std::vector<QuestionTask> tasks;
    for (const Question& q : art.dataset.questions) {
      QuestionTask t;
      t.question = &q;
      t.references = refs.find(q.question_id);
      if (config.regime == Regime::multi_grade) {
        for (const GradedAnswer* a : art.dataset.answers_for(q.question_id)) {
          if (!a->grade) continue;
          if (t.references && t.references->contains_answer(a->answer_id)) {
            continue;
          }
          t.candidates.push_back(*a);
        }
      } else {
        // No list means the question had no pool or its generation failed;
        // skip it entirely so every method sees the same question set.
        if (!t.references) continue;
        GradedPool pool = pool_for(art.dataset, q.question_id);
        if (config.regime == Regime::single_gt) {
          pool = simulate_single_gt(pool, seed).second;
        }
        for (const auto& [grade, bucket] : pool.answers_by_grade) {
          for (const GradedAnswer& a : bucket) t.candidates.push_back(a);
        }
      }
      tasks.push_back(std::move(t));
    }

    for (const MethodSpec& spec : config.methods) {
      try {
        MethodSeedOutcome outcome =
            run_method_for_seed(config, spec, tasks, registry, templates,
                                exemplars, cache, seed);
        for (EvaluationRecord& rec : outcome.records) {
          art.records.push_back(std::move(rec));
        }
        for (const std::string& w : outcome.warnings) {
          art.warnings.push_back(w);
        }
        art.per_seed.push_back(outcome.per_question);
        if (outcome.pooled) art.per_seed.push_back(*outcome.pooled);
      } catch (const BackendError& e) {
        art.partial = true;
        art.warnings.push_back("method " + default_label(spec) + " seed " +
                               std::to_string(seed) + " failed: " + e.what());
      } catch (const ParseError& e) {
        art.partial = true;
        art.warnings.push_back("method " + default_label(spec) + " seed " +
                               std::to_string(seed) + " failed: " + e.what());
      } catch (const GenerationError& e) {
        art.partial = true;
        art.warnings.push_back("method " + default_label(spec) + " seed " +
                               std::to_string(seed) + " failed: " + e.what());
      }
    }
  }

  for (const MethodSpec& spec : config.methods) {
    const std::string label = default_label(spec);
    for (const std::string& aggregation :
         config.pooled_correlation
             ? std::vector<std::string>{"per_question", "pooled"}
             : std::vector<std::string>{"per_question"}) {
      MethodSummary summary;
      summary.label = label;
      summary.method = spec.strategy.method;
      summary.aggregation = aggregation;
      std::vector<std::optional<double>> ks, ss, ps, ab, abw;
      for (const SeedMethodResult& r : art.per_seed) {
        if (r.label != label || r.aggregation != aggregation) continue;
        ++summary.seeds_used;
        ks.push_back(r.kendall);
        ss.push_back(r.spearman);
        ps.push_back(r.pearson);
        ab.push_back(r.acc_best);
        abw.push_back(r.acc_best_worst);
        summary.skipped_questions += r.skipped_questions;
        summary.comparison_errors += r.comparison_errors;
      }
      const MeanStd k = aggregate(ks), s = aggregate(ss), p = aggregate(ps),
                    b = aggregate(ab), bw = aggregate(abw);
      summary.kendall_mean = k.mean_v;
      summary.kendall_std = k.std_v;
      summary.spearman_mean = s.mean_v;
      summary.spearman_std = s.std_v;
      summary.pearson_mean = p.mean_v;
      summary.pearson_std = p.std_v;
      summary.acc_best_mean = b.mean_v;
      summary.acc_best_std = b.std_v;
      summary.acc_best_worst_mean = bw.mean_v;
      summary.acc_best_worst_std = bw.std_v;
      art.summary.push_back(std::move(summary));
    }
  }

  std::size_t calls_after = 0;
  for (const std::string& id : registry.ids()) {
    calls_after += registry.get(id)->calls();
  }
  art.backend_calls = calls_after - calls_before;
  art.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return art;
}

void emit_report(const RunArtifact& artifact) {
  namespace fs = std::filesystem;
  const std::string& dir = artifact.config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
  const std::string regime = to_string(artifact.config.regime);

  {
    std::ostringstream out;
    for (const EvaluationRecord& r : artifact.records) {
      out << record_to_json(r).dump() << "\n";
    }
    write_text(dir + "/records.jsonl", out.str());
  }

  for (const ReferenceSet& refs : artifact.reference_sets) {
    save_reference_set(refs, dir + "/references_seed" +
                                 std::to_string(refs.seed) + ".jsonl");
  }

  {
    std::ostringstream out;
    out << "label,method,aggregation,regime,seed,kendall,spearman,pearson,"
           "acc_best,acc_best_worst,used_questions,skipped_questions,"
           "comparison_errors\n";
    if (artifact.partial) {
      out << "INCOMPLETE_RUN," << artifact.warnings.size()
          << " warnings,,,,,,,,,,,\n";
    }
    for (const SeedMethodResult& r : artifact.per_seed) {
      out << r.label << ',' << to_string(r.method) << ',' << r.aggregation
          << ',' << regime << ',' << r.seed << ',' << csv_cell(r.kendall, 6)
          << ',' << csv_cell(r.spearman, 6) << ',' << csv_cell(r.pearson, 6)
          << ',' << csv_cell(r.acc_best, 6) << ','
          << csv_cell(r.acc_best_worst, 6) << ',' << r.used_questions << ','
          << r.skipped_questions << ',' << r.comparison_errors << "\n";
    }
    write_text(dir + "/per_seed.csv", out.str());
  }

  {
    std::ostringstream out;
    out << "label,method,aggregation,regime,seeds,kendall_mean,kendall_std,"
           "spearman_mean,spearman_std,pearson_mean,pearson_std,"
           "skipped_questions,comparison_errors\n";
    if (artifact.partial) {
      out << "INCOMPLETE_RUN," << artifact.warnings.size()
          << " warnings,,,,,,,,,,\n";
    }
    for (const MethodSummary& m : artifact.summary) {
      out << m.label << ',' << to_string(m.method) << ',' << m.aggregation
          << ',' << regime << ',' << m.seeds_used << ','
          << csv_cell(m.kendall_mean, 6) << ',' << csv_cell(m.kendall_std, 6)
          << ',' << csv_cell(m.spearman_mean, 6) << ','
          << csv_cell(m.spearman_std, 6) << ',' << csv_cell(m.pearson_mean, 6)
          << ',' << csv_cell(m.pearson_std, 6) << ',' << m.skipped_questions
          << ',' << m.comparison_errors << "\n";
    }
    write_text(dir + "/agreement.csv", out.str());
  }

  {
    std::ostringstream out;
    out << "label,method,regime,seeds,acc_best_mean,acc_best_std,"
           "acc_best_worst_mean,acc_best_worst_std\n";
    if (artifact.partial) {
      out << "INCOMPLETE_RUN," << artifact.warnings.size()
          << " warnings,,,,,,\n";
    }
    for (const MethodSummary& m : artifact.summary) {
      if (m.aggregation != "per_question") continue;
      out << m.label << ',' << to_string(m.method) << ',' << regime << ','
          << m.seeds_used << ',' << csv_cell(m.acc_best_mean, 6) << ','
          << csv_cell(m.acc_best_std, 6) << ','
          << csv_cell(m.acc_best_worst_mean, 6) << ','
          << csv_cell(m.acc_best_worst_std, 6) << "\n";
    }
    write_text(dir + "/accuracy.csv", out.str());
  }

  {
    std::vector<std::string> method_labels;
    for (const MethodSpec& spec : artifact.config.methods) {
      method_labels.push_back(default_label(spec));
    }
    const DatasetManifest dm = manifest(artifact.dataset);
    json m{{"config", artifact.config.to_json()},
           {"config_hash", artifact.hash},
           {"regime", regime},
           {"dataset",
            {{"name", dm.name},
             {"scale", dm.scale},
             {"questions", dm.question_count},
             {"answers", artifact.dataset.answers.size()}}},
           {"candidate_policy",
            "every graded answer outside the question's reference list is a "
            "candidate"},
           {"seeds", artifact.config.seeds},
           {"methods", method_labels},
           {"records", artifact.records.size()},
           {"reference_sets", artifact.reference_sets.size()},
           {"partial", artifact.partial},
           {"warnings", artifact.warnings}};
    write_text(dir + "/manifest.json", m.dump(2) + "\n");
  }
}

std::vector<std::string> report_files(const std::string& output_dir,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> files{
      output_dir + "/records.jsonl", output_dir + "/per_seed.csv",
      output_dir + "/agreement.csv", output_dir + "/accuracy.csv",
      output_dir + "/manifest.json"};
  for (std::uint64_t seed : seeds) {
    files.push_back(output_dir + "/references_seed" + std::to_string(seed) +
                    ".jsonl");
  }
  return files;
}

}  // namespace nfqa
