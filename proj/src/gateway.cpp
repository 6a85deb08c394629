#include "slick/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "slick/digest.hpp"
#include "slick/rng.hpp"

namespace slick {

using nlohmann::json;

// ---------------------------------------------------------------------------
// profile / request validation

void EndpointProfile::validate() const {
  if (max_parallel < 1) throw Error(errkind::InvalidRequest, "max_parallel must be >= 1");
  if (request_timeout_s <= 0) throw Error(errkind::InvalidRequest, "request_timeout must be > 0");
  if (max_retries < 0) throw Error(errkind::InvalidRequest, "max_retries must be >= 0");
}

std::string EndpointProfile::fingerprint_material() const {
  std::string buf;
  digest_field(buf, "name", name);
  digest_field(buf, "base_url", base_url);
  digest_field(buf, "model_id", model_id);
  digest_field(buf, "auth_token_ref", auth_token_ref);
  return buf;
}

void CompletionRequest::validate() const {
  if (n_samples < 1) throw Error(errkind::InvalidRequest, "n_samples must be >= 1");
  if (max_tokens < 1) throw Error(errkind::InvalidRequest, "max_tokens must be >= 1");
  if (temperature < 0) throw Error(errkind::InvalidRequest, "temperature must be >= 0");
  if (temperature == 0.0 && n_samples != 1)
    throw Error(errkind::InvalidRequest, "greedy decoding (T=0) is single-valued; n_samples must be 1");
  if (top_k && *top_k < 1) throw Error(errkind::InvalidRequest, "top_k must be >= 1 or unbounded");
}

json to_json(const EndpointProfile& p) {
  return json{{"name", p.name},
              {"base_url", p.base_url},
              {"model_id", p.model_id},
              {"auth_token_ref", p.auth_token_ref},
              {"request_timeout_s", p.request_timeout_s},
              {"max_parallel", p.max_parallel},
              {"max_retries", p.max_retries},
              {"backoff_base_s", p.backoff_base_s}};
}

EndpointProfile endpoint_profile_from_json(const json& j) {
  EndpointProfile p;
  p.name = j.value("name", p.name);
  p.base_url = j.value("base_url", p.base_url);
  p.model_id = j.value("model_id", p.model_id);
  p.auth_token_ref = j.value("auth_token_ref", p.auth_token_ref);
  p.request_timeout_s = j.value("request_timeout_s", p.request_timeout_s);
  p.max_parallel = j.value("max_parallel", p.max_parallel);
  p.max_retries = j.value("max_retries", p.max_retries);
  p.backoff_base_s = j.value("backoff_base_s", p.backoff_base_s);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// mock backend

MockBackend::MockBackend(std::map<std::string, Distribution> knowledge_table, std::uint64_t seed)
    : seed_(seed) {
  for (const auto& [question, dist] : knowledge_table)
    table_.emplace(question, compile(question, dist));
}

void MockBackend::set_default_distribution(Distribution d) {
  default_dist_ = compile("<default>", d);
}

MockBackend::CompiledDistribution MockBackend::compile(const std::string& key,
                                                       const Distribution& d) {
  if (d.empty())
    throw Error(errkind::InvalidDistribution, "empty answer distribution for \"" + key + "\"");
  double sum = 0.0;
  for (const auto& [answer, p] : d) {
    if (p < 0)
      throw Error(errkind::InvalidDistribution, "negative probability for \"" + key + "\"");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(errkind::InvalidDistribution,
                "probabilities for \"" + key + "\" sum to " + canonical_double(sum));
  CompiledDistribution out;
  out.entries.assign(d.begin(), d.end());  // std::map iterates in lexicographic order
  double best = -1.0;
  for (const auto& [answer, p] : out.entries) {
    if (p > best) {  // strict: first (lexicographically smallest) max wins ties
      best = p;
      out.mode = answer;
    }
  }
  return out;
}

std::string MockBackend::extract_question(const std::string& prompt) {
  // few-shot shape: last "Q: {question}\nA:" block
  std::size_t pos = prompt.rfind("Q: ");
  if (pos != std::string::npos && (pos == 0 || prompt[pos - 1] == '\n')) {
    std::size_t start = pos + 3;
    std::size_t end = prompt.find('\n', start);
    if (end != std::string::npos) return prompt.substr(start, end - start);
  }
  // true/false probe shape: leading "Question: {question}" line
  if (prompt.rfind("Question: ", 0) == 0) {
    std::size_t end = prompt.find('\n');
    std::size_t start = 10;
    return prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
  }
  return prompt;
}

const MockBackend::CompiledDistribution* MockBackend::find(const std::string& question) const {
  auto it = table_.find(question);
  if (it != table_.end()) return &it->second;
  if (default_dist_) return &*default_dist_;
  return nullptr;
}

std::vector<std::string> MockBackend::generate(const CompletionRequest& request) {
  requests_.fetch_add(1);
  generations_.fetch_add(static_cast<std::uint64_t>(request.n_samples));

  const std::string question = extract_question(request.prompt);
  const CompiledDistribution* dist = find(question);
  if (dist == nullptr)
    return std::vector<std::string>(static_cast<std::size_t>(request.n_samples), "unknown");

  if (request.temperature == 0.0)
    return std::vector<std::string>(static_cast<std::size_t>(request.n_samples), dist->mode);

  // Randomness is a pure function of (backend seed, request), independent of
  // call order, so concurrent sweeps stay reproducible.
  std::uint64_t s = seed_;
  s = Rng::mix(s, Rng::hash_str(request.prompt));
  s = Rng::mix(s, Rng::hash_str(canonical_double(request.temperature)));
  s = Rng::mix(s, static_cast<std::uint64_t>(request.n_samples));
  s = Rng::mix(s, request.top_k ? static_cast<std::uint64_t>(*request.top_k) : 0xffffffffULL);
  s = Rng::mix(s, static_cast<std::uint64_t>(request.max_tokens));
  s = Rng::mix(s, request.seed ? *request.seed + 1 : 0);
  Rng rng(s);

  std::vector<std::string> texts;
  texts.reserve(static_cast<std::size_t>(request.n_samples));
  for (int i = 0; i < request.n_samples; ++i) {
    const double r = rng.next_double();
    double cum = 0.0;
    const std::string* chosen = &dist->entries.back().first;
    for (const auto& [answer, p] : dist->entries) {
      cum += p;
      if (r < cum) {
        chosen = &answer;
        break;
      }
    }
    texts.push_back(*chosen);
  }
  return texts;
}

std::shared_ptr<MockBackend> MockBackend::from_json_file(const std::filesystem::path& path,
                                                         std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(errkind::IoError, "cannot open mock knowledge table: " + path.string());
  json j = json::parse(in);
  std::map<std::string, Distribution> table;
  std::optional<Distribution> default_dist;
  for (const auto& [question, dist_json] : j.items()) {
    Distribution d;
    for (const auto& [answer, p] : dist_json.items()) d[answer] = p.get<double>();
    if (question == "__default__")
      default_dist = std::move(d);
    else
      table[question] = std::move(d);
  }
  auto backend = std::make_shared<MockBackend>(std::move(table), seed);
  if (default_dist) backend->set_default_distribution(std::move(*default_dist));
  return backend;
}

// ---------------------------------------------------------------------------
// cache store

std::string CacheStore::make_key(const EndpointProfile& profile, const CompletionRequest& request,
                                 const std::string& backend_id) {
  std::string buf;
  digest_field(buf, "backend_id", backend_id);
  digest_field(buf, "model_id", profile.model_id);
  digest_field(buf, "prompt", request.prompt);
  digest_field(buf, "temperature", canonical_double(request.temperature));
  digest_field(buf, "top_k", request.top_k ? std::to_string(*request.top_k) : "unbounded");
  digest_field(buf, "n_samples", std::to_string(request.n_samples));
  digest_field(buf, "max_tokens", std::to_string(request.max_tokens));
  digest_field(buf, "seed", request.seed ? std::to_string(*request.seed) : "none");
  return sha256_hex(buf);
}

CacheStore::CacheStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path CacheStore::entry_path(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".json");
}

namespace {

std::string re_derive_key(const json& key_fields) {
  std::string buf;
  digest_field(buf, "backend_id", key_fields.at("backend_id").get<std::string>());
  digest_field(buf, "model_id", key_fields.at("model_id").get<std::string>());
  digest_field(buf, "prompt", key_fields.at("prompt").get<std::string>());
  digest_field(buf, "temperature", key_fields.at("temperature").get<std::string>());
  digest_field(buf, "top_k", key_fields.at("top_k").get<std::string>());
  digest_field(buf, "n_samples", key_fields.at("n_samples").get<std::string>());
  digest_field(buf, "max_tokens", key_fields.at("max_tokens").get<std::string>());
  digest_field(buf, "seed", key_fields.at("seed").get<std::string>());
  return sha256_hex(buf);
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::optional<std::vector<std::string>> CacheStore::lookup(const std::string& key) {
  const auto path = entry_path(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    json entry = json::parse(in);
    const json& fields = entry.at("key_fields");
    if (re_derive_key(fields) != key) throw Error(errkind::CacheCorruption, "key mismatch");
    std::vector<std::string> texts;
    for (const auto& t : entry.at("texts")) texts.push_back(t.get<std::string>());
    const int n = std::stoi(fields.at("n_samples").get<std::string>());
    if (static_cast<int>(texts.size()) != n)
      throw Error(errkind::CacheCorruption, "texts length mismatch");
    return texts;
  } catch (const std::exception& e) {
    // Corrupt entry: discard, log, fall through to a backend re-query.
    corruption_events_.fetch_add(1);
    std::fprintf(stderr, "cache: discarding corrupt entry %s (%s)\n", key.c_str(), e.what());
    in.close();
    std::error_code ec;
    std::filesystem::remove(path, ec);
    return std::nullopt;
  }
}

void CacheStore::store(const std::string& key, const EndpointProfile& profile,
                       const CompletionRequest& request, const std::string& backend_id,
                       const std::vector<std::string>& texts) {
  json key_fields{{"backend_id", backend_id},
                  {"model_id", profile.model_id},
                  {"prompt", request.prompt},
                  {"temperature", canonical_double(request.temperature)},
                  {"top_k", request.top_k ? std::to_string(*request.top_k) : "unbounded"},
                  {"n_samples", std::to_string(request.n_samples)},
                  {"max_tokens", std::to_string(request.max_tokens)},
                  {"seed", request.seed ? std::to_string(*request.seed) : "none"}};
  json entry{{"key_fields", std::move(key_fields)}, {"texts", texts}, {"created_at", iso8601_now()}};

  const auto path = entry_path(key);
  std::filesystem::create_directories(path.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = path.parent_path() /
                   (key + ".tmp." + std::to_string(::getpid()) + "." +
                    std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp);
    if (!out) throw Error(errkind::IoError, "cannot write cache entry " + tmp.string());
    out << entry.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);  // atomic: last writer wins
}

std::vector<std::string> CacheStore::scan_keys() const {
  std::vector<std::string> keys;
  if (!std::filesystem::exists(root_)) return keys;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root_)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    keys.push_back(e.path().stem().string());
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

// ---------------------------------------------------------------------------
// gateway

Gateway::Gateway(EndpointProfile profile, std::shared_ptr<Backend> backend)
    : profile_(std::move(profile)), backend_(std::move(backend)) {
  profile_.validate();
}

GatewayStats Gateway::stats() const {
  return {backend_requests_.load(), backend_generations_.load(), cache_hits_.load()};
}

namespace {

bool is_retryable(const Error& e) { return std::string(e.kind()) == errkind::TransportError; }

void truncate_at_newline(std::vector<std::string>& texts) {
  for (auto& t : texts) {
    const auto pos = t.find('\n');
    if (pos != std::string::npos) t.resize(pos);
  }
}

}  // namespace

CompletionResult Gateway::complete_uncached(const CompletionRequest& request) const {
  request.validate();
  const std::string key = CacheStore::make_key(profile_, request, backend_->id());

  int attempts = 0;
  for (;;) {
    ++attempts;
    backend_requests_.fetch_add(1);
    try {
      auto texts = backend_->generate(request);
      backend_generations_.fetch_add(static_cast<std::uint64_t>(request.n_samples));
      if (static_cast<int>(texts.size()) != request.n_samples)
        throw Error(errkind::MalformedResponse,
                    "backend returned " + std::to_string(texts.size()) + " texts for request " + key);
      truncate_at_newline(texts);
      CompletionResult result;
      result.texts = std::move(texts);
      result.attempts_used = attempts;
      result.from_cache = false;
      result.backend_id = backend_->id();
      return result;
    } catch (const Error& e) {
      if (!is_retryable(e) || attempts > profile_.max_retries)
        throw Error(e.kind(), std::string(e.what()) + " [request " + key + "]");
      const double jitter =
          0.5 + 0.5 * static_cast<double>(Rng(Rng::mix(Rng::hash_str(key), attempts)).next_double());
      const double sleep_s = profile_.backoff_base_s * std::pow(2.0, attempts - 1) * jitter;
      std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
    }
  }
}

CompletionResult Gateway::complete(const CompletionRequest& request) const {
  return complete_uncached(request);
}

CompletionResult Gateway::cached_complete(CacheStore& cache, const CompletionRequest& request) const {
  request.validate();
  const std::string key = CacheStore::make_key(profile_, request, backend_->id());
  if (auto texts = cache.lookup(key)) {
    cache_hits_.fetch_add(1);
    CompletionResult result;
    result.texts = std::move(*texts);
    result.attempts_used = 0;
    result.from_cache = true;
    result.backend_id = backend_->id();
    return result;
  }
  CompletionResult result = complete_uncached(request);
  cache.store(key, profile_, request, backend_->id(), result.texts);
  return result;
}

BatchReport Gateway::cached_complete_batch(CacheStore* cache,
                                           const std::vector<CompletionRequest>& requests) const {
  if (requests.empty()) throw Error(errkind::InvalidRequest, "empty request batch");

  BatchReport report;
  report.results.resize(requests.size());
  std::vector<std::optional<BatchFailure>> failures(requests.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        report.results[i] =
            cache ? cached_complete(*cache, requests[i]) : complete_uncached(requests[i]);
      } catch (const Error& e) {
        failures[i] = BatchFailure{i, e.kind(), e.what()};
      } catch (const std::exception& e) {
        failures[i] = BatchFailure{i, errkind::TransportError, e.what()};
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(profile_.max_parallel), requests.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (auto& f : failures)
    if (f) report.failures.push_back(std::move(*f));
  return report;
}

BatchReport Gateway::complete_batch(const std::vector<CompletionRequest>& requests) const {
  return cached_complete_batch(nullptr, requests);
}

}  // namespace slick
