#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "slick/errors.hpp"

namespace slick {

// One inference endpoint. The auth token is referenced by env var NAME only;
// the value is read at request time and never serialized.
struct EndpointProfile {
  std::string name = "default";
  std::string base_url;      // e.g. "http://localhost:8000/v1"
  std::string model_id;
  std::string auth_token_ref;  // env var name; empty = no auth header
  double request_timeout_s = 30.0;
  int max_parallel = 4;
  int max_retries = 3;
  double backoff_base_s = 0.5;

  void validate() const;
  std::string fingerprint_material() const;  // token-free, for policy fingerprints
};

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  std::optional<int> top_k;  // nullopt = unbounded
  int n_samples = 1;
  int max_tokens = 32;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

struct CompletionResult {
  std::vector<std::string> texts;  // raw output, truncated at first newline
  int attempts_used = 1;
  bool from_cache = false;
  std::string backend_id;
};

// A backend produces texts for one request. Implementations must be safe to
// call from multiple threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> generate(const CompletionRequest& request) = 0;
};

// Deterministic backend driven by a question -> answer-distribution table.
// Greedy (T=0) returns the mode (lexicographic tie-break); T>0 draws i.i.d.
// samples from the distribution. All randomness derives from (seed, request),
// so results are reproducible regardless of call order or thread interleaving.
class MockBackend : public Backend {
 public:
  using Distribution = std::map<std::string, double>;

  MockBackend(std::map<std::string, Distribution> knowledge_table, std::uint64_t seed);

  // Answer distribution used for questions absent from the table.
  void set_default_distribution(Distribution d);

  std::string id() const override { return "mock"; }
  std::vector<std::string> generate(const CompletionRequest& request) override;

  // Pulls the question a prompt is asking about: the last "Q: ...\nA:" block
  // of a few-shot prompt, else a "Question: ..." line, else the whole prompt.
  static std::string extract_question(const std::string& prompt);

  std::uint64_t total_requests() const { return requests_.load(); }
  std::uint64_t total_generations() const { return generations_.load(); }

  static std::shared_ptr<MockBackend> from_json_file(const std::filesystem::path& path,
                                                     std::uint64_t seed);

 private:
  struct CompiledDistribution {
    std::vector<std::pair<std::string, double>> entries;  // sorted by answer
    std::string mode;
  };
  static CompiledDistribution compile(const std::string& key, const Distribution& d);
  const CompiledDistribution* find(const std::string& question) const;

  std::map<std::string, CompiledDistribution> table_;
  std::optional<CompiledDistribution> default_dist_;
  std::uint64_t seed_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> generations_{0};
};

// HTTP backend speaking a completions-style protocol:
// POST {base_url}/completions with {model, prompt, temperature, top_k, n,
// max_tokens, seed?}, bearer-token auth, expecting {choices:[{text},...]}.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(EndpointProfile profile);
  std::string id() const override;
  std::vector<std::string> generate(const CompletionRequest& request) override;

 private:
  EndpointProfile profile_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

// One file per entry under a content-addressed layout; writes go through a
// temp file + rename so concurrent writers are safe (entries for the same
// key are identical by construction).
class CacheStore {
 public:
  explicit CacheStore(std::filesystem::path root);

  static std::string make_key(const EndpointProfile& profile, const CompletionRequest& request,
                              const std::string& backend_id);

  // Returns texts on a valid hit. Entries failing shape or digest validation
  // are discarded (counted in corruption_events) and treated as a miss.
  std::optional<std::vector<std::string>> lookup(const std::string& key);

  void store(const std::string& key, const EndpointProfile& profile,
             const CompletionRequest& request, const std::string& backend_id,
             const std::vector<std::string>& texts);

  // Rebuilds the key index by directory scan.
  std::vector<std::string> scan_keys() const;

  const std::filesystem::path& root() const { return root_; }
  std::uint64_t corruption_events() const { return corruption_events_.load(); }

 private:
  std::filesystem::path entry_path(const std::string& key) const;
  std::filesystem::path root_;
  std::atomic<std::uint64_t> corruption_events_{0};
};

struct BatchFailure {
  std::size_t position = 0;
  std::string kind;
  std::string message;
};

struct BatchReport {
  std::vector<std::optional<CompletionResult>> results;  // positionally aligned
  std::vector<BatchFailure> failures;
  bool all_ok() const { return failures.empty(); }
};

struct GatewayStats {
  std::uint64_t backend_requests = 0;
  std::uint64_t backend_generations = 0;
  std::uint64_t cache_hits = 0;
};

// Retrying, concurrency-bounded front end over a backend. Retries apply only
// to transport-class failures (timeout / 5xx / 429), with exponential backoff
// plus jitter. Error messages identify requests by cache key, not prompt.
class Gateway {
 public:
  Gateway(EndpointProfile profile, std::shared_ptr<Backend> backend);

  CompletionResult complete(const CompletionRequest& request) const;

  // Positionally aligned results; per-position failures do not abort the
  // batch. In-flight count never exceeds profile.max_parallel.
  BatchReport complete_batch(const std::vector<CompletionRequest>& requests) const;

  CompletionResult cached_complete(CacheStore& cache, const CompletionRequest& request) const;

  // Batch with cache consultation; hits cost zero backend calls.
  BatchReport cached_complete_batch(CacheStore* cache,
                                    const std::vector<CompletionRequest>& requests) const;

  const EndpointProfile& profile() const { return profile_; }
  GatewayStats stats() const;

 private:
  CompletionResult complete_uncached(const CompletionRequest& request) const;

  EndpointProfile profile_;
  std::shared_ptr<Backend> backend_;
  mutable std::atomic<std::uint64_t> backend_requests_{0};
  mutable std::atomic<std::uint64_t> backend_generations_{0};
  mutable std::atomic<std::uint64_t> cache_hits_{0};
};

nlohmann::json to_json(const EndpointProfile& profile);  // contains auth_token_ref name only
EndpointProfile endpoint_profile_from_json(const nlohmann::json& j);

}  // namespace slick
