#include "slick/annotator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slick/digest.hpp"
#include "slick/eval.hpp"
#include "slick/rng.hpp"

namespace slick {

using nlohmann::json;

void SamplingPolicy::validate() const {
  if (n_exemplar_sets < 1 || k_shot < 1 || n_samples < 1 || top_k < 1 || max_tokens < 1)
    throw Error(errkind::InvalidRequest, "sampling policy fields must be positive");
  if (sample_temperature <= 0)
    throw Error(errkind::InvalidRequest, "sample_temperature must be > 0");
}

std::string SamplingPolicy::fingerprint(const EndpointProfile& profile) const {
  std::string buf = profile.fingerprint_material();
  digest_field(buf, "n_exemplar_sets", std::to_string(n_exemplar_sets));
  digest_field(buf, "k_shot", std::to_string(k_shot));
  digest_field(buf, "n_samples", std::to_string(n_samples));
  digest_field(buf, "sample_temperature", canonical_double(sample_temperature));
  digest_field(buf, "top_k", std::to_string(top_k));
  digest_field(buf, "max_tokens", std::to_string(max_tokens));
  digest_field(buf, "rng_seed", std::to_string(rng_seed));
  return sha256_hex(buf).substr(0, 16);
}

Matcher em_matcher() {
  return [](const std::string& predicted, const std::vector<std::string>& gold) {
    return exact_match(predicted, gold);
  };
}

std::vector<QAPair> ExemplarSet::resolve_for_target(const std::string& target_id) const {
  std::vector<QAPair> resolved = exemplars;
  std::set<std::string> used;
  for (const auto& e : resolved) used.insert(e.id);
  std::size_t reserve_cursor = 0;
  for (auto& e : resolved) {
    if (e.id != target_id) continue;
    while (reserve_cursor < reserves.size() &&
           (reserves[reserve_cursor].id == target_id || used.count(reserves[reserve_cursor].id)))
      ++reserve_cursor;
    if (reserve_cursor >= reserves.size())
      throw Error(errkind::InsufficientDevPool,
                  "no reserve exemplar available for relation " + relation_id + " target " + target_id);
    e = reserves[reserve_cursor];
    used.insert(e.id);
    ++reserve_cursor;
  }
  return resolved;
}

namespace {

// C(n, k) capped to avoid overflow; anything above the cap is "plenty".
std::uint64_t combinations_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result >= cap) return cap;
  }
  return result;
}

std::string combo_fingerprint(const std::vector<QAPair>& exemplars) {
  std::vector<std::string> ids;
  ids.reserve(exemplars.size());
  for (const auto& e : exemplars) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (const auto& id : ids) {
    out += id;
    out.push_back('\x1f');
  }
  return out;
}

}  // namespace

std::vector<ExemplarSet> sample_exemplar_sets(const std::vector<QAPair>& dev_pool,
                                              const std::string& relation_id,
                                              const SamplingPolicy& policy) {
  policy.validate();
  std::vector<QAPair> pool;
  for (const auto& p : dev_pool)
    if (p.relation_id == relation_id) pool.push_back(p);
  std::sort(pool.begin(), pool.end(), [](const QAPair& a, const QAPair& b) { return a.id < b.id; });

  const auto k = static_cast<std::uint64_t>(policy.k_shot);
  const auto want = static_cast<std::uint64_t>(policy.n_exemplar_sets);
  if (pool.size() < k)
    throw Error(errkind::InsufficientDevPool,
                "relation " + relation_id + " has " + std::to_string(pool.size()) +
                    " dev examples; need at least " + std::to_string(k));
  if (combinations_capped(pool.size(), k, want) < want)
    throw Error(errkind::InsufficientDevPool,
                "relation " + relation_id + " has fewer than " + std::to_string(want) +
                    " distinct " + std::to_string(k) + "-shot combinations");

  Rng rng(Rng::mix(policy.rng_seed, Rng::hash_str(relation_id)));
  std::vector<ExemplarSet> sets;
  std::set<std::string> seen_combos;
  while (sets.size() < want) {
    std::vector<QAPair> shuffled = pool;
    rng.shuffle(shuffled);
    std::vector<QAPair> exemplars(shuffled.begin(), shuffled.begin() + static_cast<long>(k));
    if (!seen_combos.insert(combo_fingerprint(exemplars)).second) continue;
    ExemplarSet set;
    set.relation_id = relation_id;
    set.set_index = static_cast<int>(sets.size());
    set.exemplars = std::move(exemplars);
    set.reserves.assign(shuffled.begin() + static_cast<long>(k), shuffled.end());
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string build_fewshot_prompt(const std::vector<QAPair>& exemplars,
                                 const std::string& target_question) {
  if (target_question.empty())
    throw Error(errkind::InvalidRequest, "target question must be non-empty");
  std::string prompt;
  for (const auto& e : exemplars) {
    prompt += "Q: ";
    prompt += e.question;
    prompt += "\nA: ";
    prompt += e.gold_answers.front();
    prompt += "\n";
  }
  prompt += "Q: ";
  prompt += target_question;
  prompt += "\nA:";
  return prompt;
}

KnowledgeCategory assign_category(const PCorrectEstimate& e) {
  if (e.greedy_correct == e.greedy_total && e.greedy_total > 0)
    return KnowledgeCategory::HighlyKnown;
  if (e.greedy_correct > 0) return KnowledgeCategory::MaybeKnown;
  if (e.sampled_correct > 0) return KnowledgeCategory::WeaklyKnown;
  return KnowledgeCategory::Unknown;
}

PCorrectEstimate estimate_p_correct(const QAPair& pair, const std::vector<ExemplarSet>& sets,
                                    const SamplingPolicy& policy, const Gateway& gateway,
                                    CacheStore* cache, const Matcher& matcher) {
  policy.validate();
  if (static_cast<int>(sets.size()) != policy.n_exemplar_sets)
    throw Error(errkind::InvalidRequest,
                "expected " + std::to_string(policy.n_exemplar_sets) + " exemplar sets, got " +
                    std::to_string(sets.size()));

  // Per set: one greedy request and one sampled request.
  std::vector<CompletionRequest> requests;
  requests.reserve(sets.size() * 2);
  for (const auto& set : sets) {
    const auto exemplars = set.resolve_for_target(pair.id);
    const std::string prompt = build_fewshot_prompt(exemplars, pair.question);

    CompletionRequest greedy;
    greedy.prompt = prompt;
    greedy.temperature = 0.0;
    greedy.n_samples = 1;
    greedy.max_tokens = policy.max_tokens;
    requests.push_back(greedy);

    CompletionRequest sampled;
    sampled.prompt = prompt;
    sampled.temperature = policy.sample_temperature;
    sampled.top_k = policy.top_k;
    sampled.n_samples = policy.n_samples;
    sampled.max_tokens = policy.max_tokens;
    requests.push_back(sampled);
  }

  BatchReport report = gateway.cached_complete_batch(cache, requests);
  if (!report.all_ok()) {
    const auto& f = report.failures.front();
    throw Error(f.kind, f.message + " [pair " + pair.id + "]");
  }

  PCorrectEstimate estimate;
  estimate.greedy_total = policy.n_exemplar_sets;
  estimate.sampled_total = policy.n_exemplar_sets * policy.n_samples;
  for (std::size_t i = 0; i < requests.size(); i += 2) {
    const auto& greedy_texts = report.results[i]->texts;
    if (matcher(greedy_texts.front(), pair.gold_answers)) ++estimate.greedy_correct;
    for (const auto& text : report.results[i + 1]->texts)
      if (matcher(text, pair.gold_answers)) ++estimate.sampled_correct;
  }
  return estimate;
}

AnnotationRun annotate_dataset(const std::vector<QAPair>& pairs,
                               const std::vector<QAPair>& dev_pool, const SamplingPolicy& policy,
                               const Gateway& gateway, CacheStore* cache) {
  policy.validate();
  AnnotationRun run;
  run.policy_fingerprint = policy.fingerprint(gateway.profile());
  const Matcher matcher = em_matcher();

  std::set<std::string> relations;
  for (const auto& p : pairs) {
    if (p.gold_answers.size() != 1)
      throw Error(errkind::InvalidRequest,
                  "pair " + p.id + " has " + std::to_string(p.gold_answers.size()) +
                      " gold answers; annotation requires single-answer pairs");
    relations.insert(p.relation_id);
  }

  // Exemplar sets are sampled once per relation and shared by all of its
  // target questions.
  std::map<std::string, std::vector<ExemplarSet>> sets_by_relation;
  for (const auto& rel : relations)
    sets_by_relation[rel] = sample_exemplar_sets(dev_pool, rel, policy);

  for (const auto& pair : pairs) {
    try {
      AnnotatedExample ex;
      ex.pair = pair;
      ex.estimate =
          estimate_p_correct(pair, sets_by_relation.at(pair.relation_id), policy, gateway, cache, matcher);
      ex.category = assign_category(ex.estimate);
      ex.policy_fingerprint = run.policy_fingerprint;

      auto& rel_counts = run.stats.per_relation[pair.relation_id];
      ++rel_counts[category_index(ex.category)];
      ++run.stats.overall[category_index(ex.category)];
      ++run.stats.total;
      run.examples.push_back(std::move(ex));
    } catch (const Error& e) {
      run.failures.push_back({pair.id, e.kind(), e.what()});
    }
  }
  return run;
}

void write_annotation_manifest(const std::filesystem::path& path,
                               const std::vector<AnnotatedExample>& examples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(errkind::IoError, "cannot write " + path.string());
  for (const auto& ex : examples) {
    json line{{"id", ex.pair.id},
              {"relation_id", ex.pair.relation_id},
              {"question", ex.pair.question},
              {"gold_answer", ex.pair.gold_answers.front()},
              {"greedy_correct", ex.estimate.greedy_correct},
              {"greedy_total", ex.estimate.greedy_total},
              {"sampled_correct", ex.estimate.sampled_correct},
              {"sampled_total", ex.estimate.sampled_total},
              {"category", to_string(ex.category)},
              {"policy_fingerprint", ex.policy_fingerprint}};
    out << line.dump() << '\n';
  }
}

std::vector<AnnotatedExample> read_annotation_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errkind::IoError, "cannot open " + path.string());
  std::vector<AnnotatedExample> examples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      AnnotatedExample ex;
      ex.pair.id = j.at("id").get<std::string>();
      ex.pair.relation_id = j.at("relation_id").get<std::string>();
      ex.pair.question = j.at("question").get<std::string>();
      ex.pair.gold_answers = {j.at("gold_answer").get<std::string>()};
      ex.pair.split = Split::train;
      ex.estimate.greedy_correct = j.at("greedy_correct").get<int>();
      ex.estimate.greedy_total = j.at("greedy_total").get<int>();
      ex.estimate.sampled_correct = j.at("sampled_correct").get<int>();
      ex.estimate.sampled_total = j.at("sampled_total").get<int>();
      ex.category = category_from_string(j.at("category").get<std::string>());
      ex.policy_fingerprint = j.value("policy_fingerprint", "");
      examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw Error(errkind::ParseError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return examples;
}

std::string render_category_stats(const CategoryStats& stats) {
  std::ostringstream out;
  auto row = [&](const std::string& label, const std::array<int, 4>& counts) {
    int total = counts[0] + counts[1] + counts[2] + counts[3];
    out << label;
    for (auto cat : kAllCategories) {
      const int c = counts[category_index(cat)];
      const double pct = total == 0 ? 0.0 : std::round(1000.0 * c / total) / 10.0;
      char buf[48];
      std::snprintf(buf, sizeof(buf), "  %s=%d (%.1f%%)", to_string(cat), c, pct);
      out << buf;
    }
    out << '\n';
  };
  for (const auto& [relation, counts] : stats.per_relation) row(relation, counts);
  row("overall", stats.overall);
  return out.str();
}

}  // namespace slick
