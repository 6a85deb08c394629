#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slick/gateway.hpp"
#include "slick/types.hpp"

namespace slick {

// Sampling schedule for knowledge categorization. Defaults: 10 exemplar sets
// of 4 shots each, 1 greedy plus 16 sampled generations per set at T=0.5 from
// top 40: 170 generations per pair.
struct SamplingPolicy {
  int n_exemplar_sets = 10;
  int k_shot = 4;
  int n_samples = 16;
  double sample_temperature = 0.5;
  int top_k = 40;
  int max_tokens = 32;
  std::uint64_t rng_seed = 0;

  void validate() const;
  std::string fingerprint(const EndpointProfile& profile) const;
};

// One k-shot exemplar draw for a relation, with reserve examples used when a
// target question collides with an exemplar.
struct ExemplarSet {
  std::string relation_id;
  int set_index = 0;
  std::vector<QAPair> exemplars;
  std::vector<QAPair> reserves;  // remaining dev pool, in draw order

  // Exemplars with any colliding with `target_id` swapped for the next
  // reserve that is neither the target nor already in the set.
  std::vector<QAPair> resolve_for_target(const std::string& target_id) const;
};

struct PCorrectEstimate {
  int greedy_correct = 0;
  int greedy_total = 0;
  int sampled_correct = 0;
  int sampled_total = 0;

  double greedy_fraction() const {
    return greedy_total == 0 ? 0.0 : static_cast<double>(greedy_correct) / greedy_total;
  }
  double sampled_fraction() const {
    return sampled_total == 0 ? 0.0 : static_cast<double>(sampled_correct) / sampled_total;
  }
};

struct AnnotatedExample {
  QAPair pair;
  PCorrectEstimate estimate;
  KnowledgeCategory category = KnowledgeCategory::Unknown;
  std::string policy_fingerprint;
};

struct CategoryStats {
  std::map<std::string, std::array<int, 4>> per_relation;  // counts indexed by category
  std::array<int, 4> overall{};
  int total = 0;

  // Percentage rounded to one decimal place.
  double percent(KnowledgeCategory c) const {
    if (total == 0) return 0.0;
    return std::round(1000.0 * overall[category_index(c)] / total) / 10.0;
  }
};

struct AnnotationFailure {
  std::string pair_id;
  std::string kind;
  std::string message;
};

struct AnnotationRun {
  std::vector<AnnotatedExample> examples;
  CategoryStats stats;
  std::vector<AnnotationFailure> failures;
  std::string policy_fingerprint;
};

using Matcher = std::function<bool(const std::string& predicted,
                                   const std::vector<std::string>& gold_answers)>;

// Default correctness judge: exact match after normalization.
Matcher em_matcher();

// Draws n_exemplar_sets distinct k-shot sets from the relation's dev pool,
// deterministic under policy.rng_seed. Distinctness is on the unordered id
// combination; fails when the pool has fewer than k examples or fewer
// distinct combinations than sets requested.
std::vector<ExemplarSet> sample_exemplar_sets(const std::vector<QAPair>& dev_pool,
                                              const std::string& relation_id,
                                              const SamplingPolicy& policy);

// "Q: {q}\nA: {a}\n" per exemplar, then "Q: {target}\nA:", byte-exact.
std::string build_fewshot_prompt(const std::vector<QAPair>& exemplars,
                                 const std::string& target_question);

// 1 greedy + n_samples sampled generations per exemplar set; counts judged by
// the matcher against the pair's gold answers. Progress is cache-resident
// when a cache store is supplied.
PCorrectEstimate estimate_p_correct(const QAPair& pair, const std::vector<ExemplarSet>& sets,
                                    const SamplingPolicy& policy, const Gateway& gateway,
                                    CacheStore* cache, const Matcher& matcher);

// Category boundaries are evaluated on exact integer counts:
//   HighlyKnown  greedy == total
//   MaybeKnown   0 < greedy < total
//   WeaklyKnown  greedy == 0, sampled > 0
//   Unknown      greedy == 0, sampled == 0
KnowledgeCategory assign_category(const PCorrectEstimate& estimate);

// Annotates every pair, sampling exemplar sets once per relation from the dev
// pool. Per-pair failures are collected rather than aborting the sweep.
AnnotationRun annotate_dataset(const std::vector<QAPair>& pairs,
                               const std::vector<QAPair>& dev_pool, const SamplingPolicy& policy,
                               const Gateway& gateway, CacheStore* cache);

// Manifest I/O: JSONL, one example per line with the estimate counts.
void write_annotation_manifest(const std::filesystem::path& path,
                               const std::vector<AnnotatedExample>& examples);
std::vector<AnnotatedExample> read_annotation_manifest(const std::filesystem::path& path);

std::string render_category_stats(const CategoryStats& stats);

}  // namespace slick
