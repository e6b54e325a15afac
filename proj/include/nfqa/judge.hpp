#pragma once
// Judge gateway: prompt templates and rendering, verdict parsers, completion
// backends (HTTP adapter plus deterministic offline mocks), bounded retry,
// and an append-only completion cache. Everything a scoring protocol needs
// to ask "how good is this answer" without knowing who is answering.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nfqa/core.hpp"

namespace nfqa {

// ---------------------------------------------------------------------------
// Prompt templates

// Text with {slot} markers. Recognized slots: {question}, {candidate},
// {references}, {shots}, {pair_a}, {pair_b}.
struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::vector<std::string> required_slots;
};

// Replaces every recognized slot: provided slots get their value, absent
// optional slots become empty. A required slot with no value raises
// ConfigError naming the slot. The result never contains a recognized
// residual marker.
std::string render_prompt(const PromptTemplate& tpl,
                          const std::map<std::string, std::string>& slots);

// Stable content digest of (template_id, rendered text), hex. Cache entries
// keyed by it survive template file renames.
std::string prompt_digest(const PromptTemplate& tpl,
                          const std::string& rendered);

// The six shipped templates. load_dir reads <dir>/<template_id>.txt and
// falls back to the built-in copy for any missing file.
struct TemplateSet {
  PromptTemplate pointwise_noref;
  PromptTemplate pointwise_ref;
  PromptTemplate pairwise;
  PromptTemplate listwise;
  PromptTemplate golden_generation;
  PromptTemplate descending_generation;

  static TemplateSet builtin();
  static TemplateSet load_dir(const std::string& dir);
};

// "1. <text>\n2. <text>..." in list order (best first): the canonical
// rendering of a reference list inside prompts. Reference texts are used
// verbatim, so multi-line texts should be avoided in reference pools.
std::string render_reference_block(const ReferenceList& references);

// ---------------------------------------------------------------------------
// Few-shot exemplars

// One worked example: a question with one answer text per grade. Stored as
// line-delimited {"question", "answers_by_grade"} records.
struct Exemplar {
  Question question;
  std::map<int, std::string, std::greater<int>> answers_by_grade;
};

struct ExemplarSet {
  std::vector<Exemplar> items;

  static ExemplarSet builtin();
  static ExemplarSet load(const std::string& path);
};

// Worked examples for the generation templates: each exemplar rendered as an
// "Example question" plus its per-grade answers. Fills the {shots} slot of
// the generation prompts; empty when shots <= 0.
std::string generation_shot_block(const ExemplarSet& exemplars, int shots);

// ---------------------------------------------------------------------------
// Verdict parsing

enum class PreferenceVerdict { first_better, second_better, tie };

// First standalone integer in 1..10 after a "Score:" marker, with a
// whole-text fallback scan when the marker is absent.
std::optional<int> try_parse_point_score(std::string_view text);
int parse_point_score(std::string_view text);  // ParseError carries the text

// First token that is exactly "A" or "B" (upper case) or "TIE" (any case).
std::optional<PreferenceVerdict> try_parse_preference(std::string_view text);
PreferenceVerdict parse_preference(std::string_view text);

struct RankParse {
  int rank = 1;
  bool clamped = false;
};

// First integer in the text, clamped into [1, m+1] with the clamp flagged.
std::optional<RankParse> try_parse_rank(std::string_view text, int m);
RankParse parse_rank(std::string_view text, int m);

// ---------------------------------------------------------------------------
// Backends

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.8;
  std::uint64_t seed = 0;
  int max_output_tokens = 256;
};

// A completion source. complete() is safe for concurrent calls and counts
// every invocation (the cache test relies on the counter).
class Backend {
 public:
  virtual ~Backend() = default;
  const std::string& id() const { return id_; }
  std::string complete(const CompletionRequest& request) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return complete_impl(request);
  }
  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  explicit Backend(std::string id) : id_(std::move(id)) {}
  virtual std::string complete_impl(const CompletionRequest& request) = 0;

 private:
  std::string id_;
  std::atomic<std::size_t> calls_{0};
};

class BackendRegistry {
 public:
  void add(std::shared_ptr<Backend> backend);
  bool has(const std::string& id) const;
  // ConfigError for an unregistered id.
  std::shared_ptr<Backend> get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<Backend>> backends_;
};

// Replays canned completions: exact prompt-substring rules first, then a
// FIFO queue, then the default. Test double.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::string id = "scripted");
  void map_substring(std::string needle, std::string completion);
  void push(std::string completion);
  void set_default(std::string completion);

 protected:
  std::string complete_impl(const CompletionRequest& request) override;

 private:
  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, std::string>> rules_;
  std::vector<std::string> queue_;
  std::optional<std::string> default_;
};

// Fails with a transient backend error for the first `failures` calls, then
// delegates to the wrapped backend. Exercises the retry policy.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(std::shared_ptr<Backend> inner, int failures,
               std::string id = "flaky");

 protected:
  std::string complete_impl(const CompletionRequest& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<int> remaining_failures_;
};

// Always prefers the first-presented answer. Exists to demonstrate that
// position permutation cancels pure position bias.
class BiasedBackend : public Backend {
 public:
  explicit BiasedBackend(std::string id = "biased");

 protected:
  std::string complete_impl(const CompletionRequest& request) override;
};

// Ideal (optionally noisy) judge that answers from hidden true grades. It
// recovers grades from the rendered prompt: answer texts are looked up in a
// learned text->grade table, with an embedded "<grade:N>" text marker as
// fallback. With noise 0 every verdict is the exact grade-order verdict:
//   rank   = 1 + |{j : l_j >= g}|   (candidate placed after equal grades)
//   score  = round(1 + 9 (g - min) / (max - min))  mapped onto 1..10
//   prefer = strictly greater grade wins; equal grades favor the
//            second-presented answer, consistent with the rank tie rule
// With noise e > 0, each read of the *candidate* grade independently
// misreads with probability e (rank verdicts re-read it once per reference
// comparison), as a pure function of (prompt, read index, seed) so cached
// replays stay coherent.
class OracleBackend : public Backend {
 public:
  struct Options {
    GradeScale scale{std::vector<int>{3, 2, 1, 0}};
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
  };

  explicit OracleBackend(Options options, std::string id = "oracle");

  void learn(const std::string& answer_text, int grade);
  static int ideal_point_score(const GradeScale& scale, int grade);

 protected:
  std::string complete_impl(const CompletionRequest& request) override;

 private:
  int grade_of(const std::string& answer_text) const;
  int read_candidate_grade(int true_grade, const CompletionRequest& request,
                           std::uint64_t read_index) const;

  Options options_;
  std::unordered_map<std::uint64_t, int> grade_table_;
  mutable std::mutex mutex_;
};

// Offline stand-in for a generation model: answers golden-generation
// prompts with a strong answer derived from the question words, and
// descending-generation prompts with one "Grade <tier>: <text>" line per
// requested tier, coverage shrinking with the tier. Deterministic per
// (backend id, question, seed).
class SyntheticGeneratorBackend : public Backend {
 public:
  explicit SyntheticGeneratorBackend(std::string id, std::uint64_t seed = 0);

 protected:
  std::string complete_impl(const CompletionRequest& request) override;

 private:
  std::uint64_t seed_;
};

// Chat-completions HTTP adapter. The request/response body shapes are this
// adapter's concern; callers only see complete(). The credential is read
// from the environment variable named in the config, never from files.
struct HttpBackendConfig {
  std::string id = "http";
  std::string url;  // e.g. "http://host:1234/v1/chat/completions"
  std::string model;
  std::string auth_env;  // name of the env var holding the key; "" = none
  int timeout_ms = 30000;
};

class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

 protected:
  std::string complete_impl(const CompletionRequest& request) override;

 private:
  HttpBackendConfig config_;
  std::string host_;  // scheme://host:port
  std::string path_;
};

// Builds a backend from {"kind": ..., "id": ..., ...}. Kinds: "oracle",
// "scripted", "biased", "generator", "http". Unknown kind or malformed
// config raises ConfigError.
std::shared_ptr<Backend> make_backend(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// Retry and cache

struct RetryPolicy {
  int attempts = 3;
  int base_delay_ms = 200;
  double multiplier = 2.0;
};

// Runs the backend call up to policy.attempts times, backing off between
// attempts. Only transient backend errors are retried; config errors and
// non-transient failures surface immediately.
std::string complete_with_retry(Backend& backend,
                                const CompletionRequest& request,
                                const RetryPolicy& policy,
                                int* attempts_used = nullptr);

// Append-only JSONL completion cache. Corrupt lines are skipped on load (a
// partial final line from a killed run must not poison the file). Write
// failures degrade the cache to memory-only with a one-time warning; reads
// allow concurrency, writes are serialized.
class CompletionCache {
 public:
  CompletionCache() = default;  // disabled
  explicit CompletionCache(std::string path);

  bool enabled() const { return !path_.empty(); }
  static std::string make_key(const std::string& backend_id,
                              const std::string& prompt_digest,
                              double temperature, std::uint64_t seed);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& backend_id,
             const std::string& prompt_digest, double temperature,
             std::uint64_t seed, const std::string& text);

  std::size_t size() const;
  std::size_t corrupt_lines_skipped() const { return corrupt_; }

 private:
  std::string path_;
  std::size_t corrupt_ = 0;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  bool write_degraded_ = false;
};

struct JudgeCallLog {
  std::string digest;
  int attempts = 0;
  double latency_ms = 0.0;
  bool cache_hit = false;
};

// Cache-through completion: hit returns the stored text with no backend
// call; miss calls with retry, stores, returns. `digest` must be the
// prompt_digest of the request's prompt.
std::string cached_complete(Backend& backend, const CompletionRequest& request,
                            const std::string& digest, CompletionCache* cache,
                            const RetryPolicy& policy,
                            JudgeCallLog* log = nullptr);

// ---------------------------------------------------------------------------
// Judge client

struct JudgeOptions {
  double temperature = 0.8;
  std::uint64_t seed = 0;
  int shots = 0;
  int max_output_tokens = 256;
  // Evaluate each pair in both position orders and average, cancelling
  // position bias.
  bool permute_positions = true;
  // Re-ask once on an out-of-range rank instead of silently clamping.
  bool reask_invalid_rank = false;
  RetryPolicy retry;
};

// Renders, completes (through the cache), parses, and re-prompts once with a
// stricter instruction on a parse failure. One client per backend; safe for
// concurrent use. Each judging call derives its request seed from
// (options.seed, question_id) so per-question randomness is stable under
// any scheduling.
class JudgeClient {
 public:
  JudgeClient(std::shared_ptr<Backend> backend, TemplateSet templates,
              CompletionCache* cache, JudgeOptions options,
              ExemplarSet exemplars = ExemplarSet::builtin());

  // Raw 1..10 point score; references selects the reference-based template.
  int point_score(const Question& question, const GradedAnswer& candidate,
                  const ReferenceList* references,
                  std::uint64_t* digest_acc = nullptr);

  // +1 first better, -1 second better, 0 tie; halves possible when
  // permute_positions averages the two orders.
  double preference(const Question& question, const GradedAnswer& first,
                    const GradedAnswer& second,
                    std::uint64_t* digest_acc = nullptr);

  // Rank within [1, m+1] against the reference list.
  RankParse rank(const Question& question, const GradedAnswer& candidate,
                 const ReferenceList& references,
                 std::uint64_t* digest_acc = nullptr);

  const std::string& backend_id() const { return backend_->id(); }
  std::size_t backend_calls() const { return backend_->calls(); }
  std::size_t clamped_ranks() const { return clamped_ranks_.load(); }
  std::size_t parse_retries() const { return parse_retries_.load(); }
  std::vector<JudgeCallLog> call_log() const;
  const JudgeOptions& options() const { return options_; }

 private:
  std::string complete_prompt(const PromptTemplate& tpl,
                              const std::string& prompt,
                              std::uint64_t request_seed,
                              std::uint64_t* digest_acc);
  double one_order(const Question& question, const GradedAnswer& a,
                   const GradedAnswer& b, std::uint64_t* digest_acc);
  std::string shot_block(Method kind) const;

  std::shared_ptr<Backend> backend_;
  TemplateSet templates_;
  CompletionCache* cache_;
  JudgeOptions options_;
  ExemplarSet exemplars_;
  std::atomic<std::size_t> clamped_ranks_{0};
  std::atomic<std::size_t> parse_retries_{0};
  mutable std::mutex log_mutex_;
  std::vector<JudgeCallLog> log_;
};

}  // namespace nfqa
