#pragma once

// Shared helpers for the unit and acceptance suites: instrumented backends,
// fixture builders, and the independent oracles the implementation is checked
// against. Oracle code here must not call the implementation path it verifies.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "slick/annotator.hpp"
#include "slick/corpus.hpp"
#include "slick/gateway.hpp"
#include "slick/rng.hpp"
#include "slick/types.hpp"

namespace slick::testing {

// Tracks concurrent occupancy of generate() calls.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner, double hold_seconds = 0.0)
      : inner_(std::move(inner)), hold_seconds_(hold_seconds) {}

  std::string id() const override { return inner_->id(); }

  std::vector<std::string> generate(const CompletionRequest& request) override {
    const int now = in_flight_.fetch_add(1) + 1;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    if (hold_seconds_ > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(hold_seconds_));
    auto out = inner_->generate(request);
    in_flight_.fetch_sub(1);
    calls_.fetch_add(1);
    return out;
  }

  int peak() const { return peak_.load(); }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  double hold_seconds_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::atomic<std::uint64_t> calls_{0};
};

// Returns canned texts per prompt; unknown prompts raise.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::vector<std::string>> by_prompt)
      : by_prompt_(std::move(by_prompt)) {}

  std::string id() const override { return "scripted"; }

  std::vector<std::string> generate(const CompletionRequest& request) override {
    auto it = by_prompt_.find(request.prompt + "|T=" + (request.temperature == 0.0 ? "0" : ">0"));
    if (it == by_prompt_.end())
      throw Error(errkind::MalformedResponse, "scripted backend has no entry for prompt");
    return it->second;
  }

  static std::string key(const std::string& prompt, bool sampled) {
    return prompt + "|T=" + (sampled ? ">0" : "0");
  }

 private:
  std::map<std::string, std::vector<std::string>> by_prompt_;
};

// Fails the first `n_failures` generate() calls for each distinct request key
// with a retryable transport error, then delegates.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(std::shared_ptr<Backend> inner, int n_failures)
      : inner_(std::move(inner)), n_failures_(n_failures) {}

  std::string id() const override { return inner_->id(); }

  std::vector<std::string> generate(const CompletionRequest& request) override {
    std::string key = request.prompt + "#" + std::to_string(request.n_samples);
    {
      std::lock_guard<std::mutex> lock(mu_);
      int& seen = attempts_[key];
      ++seen;
      if (seen <= n_failures_) throw Error(errkind::TransportError, "injected timeout");
    }
    return inner_->generate(request);
  }

 private:
  std::shared_ptr<Backend> inner_;
  int n_failures_;
  std::mutex mu_;
  std::map<std::string, int> attempts_;
};

// Delegates until `budget` generations have been produced, then raises on
// every further call. Simulates a sweep interrupted mid-run.
class FailAfterBackend : public Backend {
 public:
  FailAfterBackend(std::shared_ptr<Backend> inner, std::uint64_t budget)
      : inner_(std::move(inner)), budget_(budget) {}

  std::string id() const override { return inner_->id(); }

  std::vector<std::string> generate(const CompletionRequest& request) override {
    const std::uint64_t used =
        used_.fetch_add(static_cast<std::uint64_t>(request.n_samples)) + request.n_samples;
    if (used > budget_) throw Error(errkind::TransportError, "injected interruption");
    return inner_->generate(request);
  }

 private:
  std::shared_ptr<Backend> inner_;
  std::uint64_t budget_;
  std::atomic<std::uint64_t> used_{0};
};

// ---------------------------------------------------------------------------
// fixture builders

inline QAPair make_pair(const std::string& id, const std::string& relation,
                        const std::string& question, const std::string& answer,
                        Split split = Split::train, const std::string& subject = "") {
  QAPair p;
  p.id = id;
  p.relation_id = relation;
  p.subject = subject;
  p.question = question;
  p.gold_answers = {answer};
  p.split = split;
  return p;
}

inline AnnotatedExample make_annotated(const QAPair& pair, KnowledgeCategory category) {
  AnnotatedExample ex;
  ex.pair = pair;
  ex.category = category;
  switch (category) {
    case KnowledgeCategory::HighlyKnown:
      ex.estimate = {10, 10, 160, 160};
      break;
    case KnowledgeCategory::MaybeKnown:
      ex.estimate = {5, 10, 80, 160};
      break;
    case KnowledgeCategory::WeaklyKnown:
      ex.estimate = {0, 10, 40, 160};
      break;
    case KnowledgeCategory::Unknown:
      ex.estimate = {0, 10, 0, 160};
      break;
  }
  return ex;
}

// Synthetic annotated train corpus: per relation, `per_category` examples of
// each of the four categories.
inline std::vector<AnnotatedExample> synthetic_annotated(const std::vector<std::string>& relations,
                                                         int per_category) {
  std::vector<AnnotatedExample> out;
  for (const auto& rel : relations) {
    int n = 0;
    for (auto cat : kAllCategories) {
      for (int i = 0; i < per_category; ++i, ++n) {
        char id[64];
        std::snprintf(id, sizeof(id), "%s-train-%05d", rel.c_str(), n);
        out.push_back(make_annotated(
            make_pair(id, rel, "What is fact " + std::to_string(n) + " of " + rel + "?",
                      "answer-" + rel + "-" + std::to_string(n)),
            cat));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// independent oracles

// Brute-force knowledge categorization: replays the sampling schedule against
// the backend directly, with its own prompt construction and counting, and
// applies the category boundaries stated in the contract.
struct OracleResult {
  int greedy_correct = 0;
  int sampled_correct = 0;
  KnowledgeCategory category = KnowledgeCategory::Unknown;
};

inline OracleResult oracle_categorize(const QAPair& pair, const std::vector<ExemplarSet>& sets,
                                      const SamplingPolicy& policy, Backend& backend,
                                      const Matcher& matcher) {
  OracleResult result;
  for (const auto& set : sets) {
    std::string prompt;
    for (const auto& e : set.exemplars)
      prompt += "Q: " + e.question + "\nA: " + e.gold_answers.front() + "\n";
    prompt += "Q: " + pair.question + "\nA:";

    CompletionRequest greedy;
    greedy.prompt = prompt;
    greedy.temperature = 0.0;
    greedy.n_samples = 1;
    greedy.max_tokens = policy.max_tokens;
    if (matcher(backend.generate(greedy).front(), pair.gold_answers)) ++result.greedy_correct;

    CompletionRequest sampled;
    sampled.prompt = prompt;
    sampled.temperature = policy.sample_temperature;
    sampled.top_k = policy.top_k;
    sampled.n_samples = policy.n_samples;
    sampled.max_tokens = policy.max_tokens;
    for (const auto& text : backend.generate(sampled))
      if (matcher(text, pair.gold_answers)) ++result.sampled_correct;
  }
  if (result.greedy_correct == policy.n_exemplar_sets)
    result.category = KnowledgeCategory::HighlyKnown;
  else if (result.greedy_correct > 0)
    result.category = KnowledgeCategory::MaybeKnown;
  else if (result.sampled_correct > 0)
    result.category = KnowledgeCategory::WeaklyKnown;
  else
    result.category = KnowledgeCategory::Unknown;
  return result;
}

// Closed-form OLS for exactly three coefficients via Cramer's rule on the
// normal equations.
struct Ols3Oracle {
  double beta0 = 0.0, beta1 = 0.0, beta2 = 0.0;
};

inline Ols3Oracle ols3_oracle(const std::vector<std::array<double, 3>>& x,
                              const std::vector<double>& y) {
  double a[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double b[3] = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int r = 0; r < 3; ++r) {
      b[r] += x[i][static_cast<std::size_t>(r)] * y[i];
      for (int c = 0; c < 3; ++c)
        a[r][c] += x[i][static_cast<std::size_t>(r)] * x[i][static_cast<std::size_t>(c)];
    }
  }
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double d = det3(a);
  Ols3Oracle out;
  double m[3][3];
  for (int col = 0; col < 3; ++col) {
    std::copy(&a[0][0], &a[0][0] + 9, &m[0][0]);
    for (int r = 0; r < 3; ++r) m[r][col] = b[r];
    const double v = det3(m) / d;
    if (col == 0) out.beta0 = v;
    if (col == 1) out.beta1 = v;
    if (col == 2) out.beta2 = v;
  }
  return out;
}

// Student-t CDF by quadrature / closed form, independent of the incomplete
// beta route. df=1,2 use analytic forms; larger df use Simpson integration.
inline double t_cdf_oracle(double t, int df) {
  if (df == 1) return 0.5 + std::atan(t) / 3.14159265358979323846;
  if (df == 2) return 0.5 + t / (2.0 * std::sqrt(2.0 + t * t));
  const double v = df;
  const double log_c = std::lgamma((v + 1) / 2) - std::lgamma(v / 2) -
                       0.5 * std::log(v * 3.14159265358979323846);
  auto density = [&](double u) {
    return std::exp(log_c - (v + 1) / 2 * std::log1p(u * u / v));
  };
  // CDF(t) = 0.5 + integral from 0 to |t| (signed)
  const double upper = std::abs(t);
  const int n = 200000;  // Simpson needs even n
  const double h = upper / n;
  double sum = density(0.0) + density(upper);
  for (int i = 1; i < n; ++i) sum += density(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double integral = sum * h / 3.0;
  return t >= 0 ? 0.5 + integral : 0.5 - integral;
}

inline double t_two_sided_p_oracle(double t, int df) {
  return 2.0 * (1.0 - t_cdf_oracle(std::abs(t), df));
}

// ---------------------------------------------------------------------------
// misc helpers

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("slick_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace slick::testing
