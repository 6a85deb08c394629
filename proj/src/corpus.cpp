#include "slick/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "slick/rng.hpp"

namespace slick {

using nlohmann::json;

const char* to_string(RelationRole role) {
  switch (role) {
    case RelationRole::in_distribution: return "in_distribution";
    case RelationRole::out_of_distribution: return "out_of_distribution";
    case RelationRole::excluded: return "excluded";
  }
  return "excluded";
}

RelationRole relation_role_from_string(const std::string& s) {
  if (s == "in_distribution") return RelationRole::in_distribution;
  if (s == "out_of_distribution") return RelationRole::out_of_distribution;
  if (s == "excluded") return RelationRole::excluded;
  throw Error(errkind::ParseError, "unknown relation role: " + s);
}

std::vector<QAPair> CorpusManifest::split_pairs(Split split) const {
  std::vector<QAPair> out;
  for (const auto& p : pairs)
    if (p.split == split) out.push_back(p);
  return out;
}

const QAPair* CorpusManifest::find(const std::string& id) const {
  for (const auto& p : pairs)
    if (p.id == id) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// raw import

std::vector<RelationSpec> load_relation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errkind::IoError, "cannot open relation config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(errkind::ParseError, path.string() + ": " + e.what());
  }
  std::vector<RelationSpec> specs;
  for (const auto& item : j.at("relations")) {
    RelationSpec spec;
    spec.relation_id = item.at("relation_id").get<std::string>();
    spec.question_template = item.at("question_template").get<std::string>();
    spec.role = relation_role_from_string(item.at("role").get<std::string>());
    spec.exclusion_reason = item.value("exclusion_reason", "");
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace {

std::string trim_ws(const std::string& s) {
  std::size_t start = s.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(start, end - start + 1);
}

// Fills the subject from the relation template's "[E]" slot when the record
// carries no explicit subject. Non-matching questions keep an empty subject.
std::string extract_subject(const std::string& question, const std::string& question_template) {
  const auto slot = question_template.find("[E]");
  if (slot == std::string::npos) return "";
  const std::string prefix = question_template.substr(0, slot);
  const std::string suffix = question_template.substr(slot + 3);
  if (question.size() < prefix.size() + suffix.size()) return "";
  if (question.compare(0, prefix.size(), prefix) != 0) return "";
  if (question.compare(question.size() - suffix.size(), suffix.size(), suffix) != 0) return "";
  return question.substr(prefix.size(), question.size() - prefix.size() - suffix.size());
}

void add_filter_count(std::vector<FilterLogEntry>& log, const std::string& rule, std::int64_t n) {
  for (auto& e : log) {
    if (e.rule == rule) {
      e.removed += n;
      return;
    }
  }
  log.push_back({rule, n});
}

}  // namespace

CorpusManifest import_raw(const std::filesystem::path& path,
                          const std::vector<RelationSpec>& relation_config) {
  CorpusManifest manifest;
  manifest.relation_specs = relation_config;
  manifest.source_path = path.string();

  std::map<std::string, const RelationSpec*> by_id;
  for (const auto& spec : relation_config) by_id[spec.relation_id] = &spec;

  std::int64_t excluded_removed = 0;
  std::int64_t ood_train_dev_removed = 0;
  std::int64_t template_mismatch = 0;
  bool any_split_dir = false;

  for (const Split raw_split : {Split::train, Split::dev, Split::test}) {
    const auto split_dir = path / to_string(raw_split);
    if (!std::filesystem::exists(split_dir)) continue;
    any_split_dir = true;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(split_dir))
      if (e.is_regular_file() &&
          (e.path().extension() == ".jsonl" || e.path().extension() == ".json"))
        files.push_back(e.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      const std::string relation_id = file.stem().string();
      auto it = by_id.find(relation_id);
      if (it == by_id.end())
        throw Error(errkind::UnknownRelation,
                    "relation " + relation_id + " (" + file.string() + ") not in relation config");
      const RelationSpec& spec = *it->second;

      std::ifstream in(file);
      if (!in) throw Error(errkind::IoError, "cannot open " + file.string());

      // one record per line (.jsonl), or one JSON array per file (.json);
      // the location string names the line or the record index respectively
      std::vector<std::pair<json, std::string>> records;
      if (file.extension() == ".jsonl") {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          if (trim_ws(line).empty()) continue;
          const std::string where = file.string() + ":" + std::to_string(lineno);
          try {
            records.emplace_back(json::parse(line), where);
          } catch (const json::exception& e) {
            throw Error(errkind::ParseError, where + ": " + e.what());
          }
        }
      } else {
        json parsed;
        try {
          parsed = json::parse(in);
        } catch (const json::exception& e) {
          throw Error(errkind::ParseError, file.string() + ": " + e.what());
        }
        if (!parsed.is_array())
          throw Error(errkind::ParseError, file.string() + ": expected a top-level array");
        int i = 0;
        for (auto& record : parsed)
          records.emplace_back(std::move(record),
                               file.string() + ": record " + std::to_string(i++));
      }

      int index = 0;
      for (auto& [record, where] : records) {
        if (!record.contains("question") || !record["question"].is_string())
          throw Error(errkind::ParseError, where + ": missing question field");
        if (!record.contains("answers") || !record["answers"].is_array() || record["answers"].empty())
          throw Error(errkind::ParseError, where + ": missing or empty answers field");

        const int record_index = index++;
        if (spec.role == RelationRole::excluded) {
          ++excluded_removed;
          continue;
        }
        Split split = raw_split;
        if (spec.role == RelationRole::out_of_distribution) {
          if (raw_split != Split::test) {
            ++ood_train_dev_removed;
            continue;
          }
          split = Split::ood_test;
        }

        QAPair pair;
        pair.relation_id = relation_id;
        pair.split = split;
        pair.question = record["question"].get<std::string>();
        if (pair.question.empty()) throw Error(errkind::ParseError, where + ": empty question");
        for (const auto& a : record["answers"]) pair.gold_answers.push_back(a.get<std::string>());
        if (record.contains("subject") && record["subject"].is_string()) {
          pair.subject = record["subject"].get<std::string>();
        } else {
          pair.subject = extract_subject(pair.question, spec.question_template);
          if (pair.subject.empty()) ++template_mismatch;
        }
        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%s-%05d", relation_id.c_str(),
                      to_string(raw_split), record_index);
        pair.id = idbuf;
        manifest.pairs.push_back(std::move(pair));
      }
    }
  }

  if (excluded_removed > 0)
    add_filter_count(manifest.filter_log, "excluded-relation", excluded_removed);
  if (ood_train_dev_removed > 0)
    add_filter_count(manifest.filter_log, "ood-train-dev-dropped", ood_train_dev_removed);
  if (template_mismatch > 0)
    add_filter_count(manifest.filter_log, "template-mismatch-no-subject", template_mismatch);
  if (!any_split_dir)
    throw Error(errkind::IoError,
                "raw corpus root " + path.string() + " has no train/dev/test subdirectories");
  return manifest;
}

CorpusManifest apply_filters(const CorpusManifest& input) {
  CorpusManifest manifest = input;

  // 1. multi-answer pairs go everywhere
  std::int64_t multi_removed = 0;
  {
    std::vector<QAPair> kept;
    kept.reserve(manifest.pairs.size());
    for (auto& p : manifest.pairs) {
      if (p.gold_answers.size() > 1) {
        ++multi_removed;
        continue;
      }
      kept.push_back(std::move(p));
    }
    manifest.pairs = std::move(kept);
  }
  add_filter_count(manifest.filter_log, "multi-answer", multi_removed);

  // 2. train pairs overlapping test/ood_test on subject or object strings
  std::set<std::string> test_strings;
  for (const auto& p : manifest.pairs) {
    if (p.split != Split::test && p.split != Split::ood_test) continue;
    const std::string subj = trim_ws(p.subject);
    if (!subj.empty()) test_strings.insert(subj);
    for (const auto& a : p.gold_answers) {
      const std::string obj = trim_ws(a);
      if (!obj.empty()) test_strings.insert(obj);
    }
  }
  std::int64_t overlap_removed = 0;
  {
    std::vector<QAPair> kept;
    kept.reserve(manifest.pairs.size());
    for (auto& p : manifest.pairs) {
      if (p.split == Split::train) {
        bool overlap = test_strings.count(trim_ws(p.subject)) > 0;
        for (const auto& a : p.gold_answers)
          overlap = overlap || test_strings.count(trim_ws(a)) > 0;
        if (overlap) {
          ++overlap_removed;
          continue;
        }
      }
      kept.push_back(std::move(p));
    }
    manifest.pairs = std::move(kept);
  }
  add_filter_count(manifest.filter_log, "train-test-overlap", overlap_removed);
  return manifest;
}

// ---------------------------------------------------------------------------
// manifest persistence

namespace {

json pair_to_json(const QAPair& p) {
  return json{{"id", p.id},
              {"relation_id", p.relation_id},
              {"subject", p.subject},
              {"question", p.question},
              {"gold_answers", p.gold_answers},
              {"split", to_string(p.split)}};
}

QAPair pair_from_json(const json& j) {
  QAPair p;
  p.id = j.at("id").get<std::string>();
  p.relation_id = j.at("relation_id").get<std::string>();
  p.subject = j.value("subject", "");
  p.question = j.at("question").get<std::string>();
  p.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
  p.split = split_from_string(j.at("split").get<std::string>());
  return p;
}

}  // namespace

void save_corpus_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
  json specs = json::array();
  for (const auto& s : manifest.relation_specs)
    specs.push_back(json{{"relation_id", s.relation_id},
                         {"question_template", s.question_template},
                         {"role", to_string(s.role)},
                         {"exclusion_reason", s.exclusion_reason}});
  json log = json::array();
  for (const auto& e : manifest.filter_log) log.push_back(json{{"rule", e.rule}, {"removed", e.removed}});
  json pairs = json::array();
  for (const auto& p : manifest.pairs) pairs.push_back(pair_to_json(p));
  json out{{"source_path", manifest.source_path},
           {"relation_specs", std::move(specs)},
           {"filter_log", std::move(log)},
           {"pairs", std::move(pairs)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(errkind::IoError, "cannot write " + path.string());
  f << out.dump(2) << '\n';
}

CorpusManifest load_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(errkind::IoError, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(errkind::ParseError, path.string() + ": " + e.what());
  }
  CorpusManifest manifest;
  manifest.source_path = j.value("source_path", "");
  for (const auto& s : j.at("relation_specs")) {
    RelationSpec spec;
    spec.relation_id = s.at("relation_id").get<std::string>();
    spec.question_template = s.at("question_template").get<std::string>();
    spec.role = relation_role_from_string(s.at("role").get<std::string>());
    spec.exclusion_reason = s.value("exclusion_reason", "");
    manifest.relation_specs.push_back(std::move(spec));
  }
  for (const auto& e : j.at("filter_log"))
    manifest.filter_log.push_back({e.at("rule").get<std::string>(), e.at("removed").get<std::int64_t>()});
  for (const auto& p : j.at("pairs")) manifest.pairs.push_back(pair_from_json(p));
  return manifest;
}

// ---------------------------------------------------------------------------
// fixed |D| and apportionment

FixedSizeReport compute_fixed_size(const std::vector<AnnotatedExample>& annotated_train) {
  std::map<std::string, std::array<int, 4>> counts;
  for (const auto& ex : annotated_train) ++counts[ex.pair.relation_id][category_index(ex.category)];

  FixedSizeReport report;
  for (const auto& [relation, c] : counts) {
    FixedSizeRow row;
    row.relation_id = relation;
    row.category_counts = c;
    row.min_count = *std::min_element(c.begin(), c.end());
    if (row.min_count == 0)
      report.warnings.push_back("relation " + relation + " has an empty category; contributes 0");
    report.d_size += row.min_count;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::map<std::string, int> largest_remainder_apportion(int total,
                                                       const std::map<std::string, double>& weights) {
  double weight_sum = 0.0;
  for (const auto& [key, w] : weights) {
    if (w < 0) throw Error(errkind::InvalidRequest, "negative apportionment weight for " + key);
    weight_sum += w;
  }
  std::map<std::string, int> out;
  if (total == 0 || weights.empty()) {
    for (const auto& [key, w] : weights) out[key] = 0;
    return out;
  }
  if (weight_sum <= 0)
    throw Error(errkind::InvalidRequest, "cannot apportion a positive total over zero weights");

  struct Entry {
    std::string key;
    double remainder;
  };
  std::vector<Entry> remainders;
  int assigned = 0;
  for (const auto& [key, w] : weights) {
    const double quota = total * w / weight_sum;
    const int floor_q = static_cast<int>(quota);
    out[key] = floor_q;
    assigned += floor_q;
    remainders.push_back({key, quota - floor_q});
  }
  std::sort(remainders.begin(), remainders.end(), [](const Entry& a, const Entry& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.key < b.key;
  });
  for (int i = 0; assigned < total; ++i, ++assigned) out[remainders[static_cast<std::size_t>(i)].key] += 1;
  return out;
}

std::map<std::string, int> compute_relation_slots(const std::vector<AnnotatedExample>& annotated_train,
                                                  int target_size, SlotRule rule) {
  const FixedSizeReport fixed = compute_fixed_size(annotated_train);
  std::map<std::string, double> weights;
  int bound = 0;
  for (const auto& row : fixed.rows) {
    int w = row.min_count;
    if (rule == SlotRule::min_known_unknown) {
      const int unknown = row.category_counts[category_index(KnowledgeCategory::Unknown)];
      const int known = static_cast<int>(row.category_counts[0]) + row.category_counts[1] +
                        row.category_counts[2];
      w = std::min(unknown, known);
    }
    weights[row.relation_id] = w;
    bound += w;
  }
  if (target_size > bound)
    throw Error(errkind::InsufficientCategoryPool,
                "target_size " + std::to_string(target_size) + " exceeds the slot-rule bound " +
                    std::to_string(bound));
  return largest_remainder_apportion(target_size, weights);
}

int DatasetVariant::count(KnowledgeCategory c) const {
  int n = 0;
  for (const auto& ex : examples)
    if (ex.category == c) ++n;
  return n;
}

namespace {

using CategoryPools = std::map<std::string, std::array<std::vector<const AnnotatedExample*>, 4>>;

CategoryPools build_pools(const std::vector<AnnotatedExample>& annotated_train) {
  CategoryPools pools;
  for (const auto& ex : annotated_train) {
    if (ex.pair.split != Split::train)
      throw Error(errkind::InvalidRequest,
                  "variant construction draws from the train split only; id " + ex.pair.id +
                      " is tagged " + to_string(ex.pair.split));
    pools[ex.pair.relation_id][category_index(ex.category)].push_back(&ex);
  }
  for (auto& [relation, per_cat] : pools)
    for (auto& pool : per_cat)
      std::sort(pool.begin(), pool.end(),
                [](const AnnotatedExample* a, const AnnotatedExample* b) { return a->pair.id < b->pair.id; });
  return pools;
}

// Deterministic draw of n examples from a sorted pool.
std::vector<const AnnotatedExample*> draw(const std::vector<const AnnotatedExample*>& pool, int n,
                                          std::uint64_t seed, const std::string& relation,
                                          KnowledgeCategory category) {
  if (n > static_cast<int>(pool.size()))
    throw Error(errkind::InsufficientCategoryPool,
                "relation " + relation + " category " + to_string(category) + " has " +
                    std::to_string(pool.size()) + " examples; need " + std::to_string(n));
  std::vector<const AnnotatedExample*> shuffled = pool;
  Rng rng(Rng::mix(Rng::mix(seed, Rng::hash_str(relation)), Rng::hash_str(to_string(category))));
  rng.shuffle(shuffled);
  shuffled.resize(static_cast<std::size_t>(n));
  return shuffled;
}

void append_examples(DatasetVariant& variant, const std::vector<const AnnotatedExample*>& picked) {
  for (const auto* ex : picked) {
    VariantExample ve;
    ve.pair = ex->pair;
    ve.target_answer = ex->pair.gold_answers.front();
    ve.category = ex->category;
    variant.examples.push_back(std::move(ve));
  }
}

void finalize_order(DatasetVariant& variant) {
  // Stable content-independent order: shuffle under the variant seed.
  std::sort(variant.examples.begin(), variant.examples.end(),
            [](const VariantExample& a, const VariantExample& b) { return a.pair.id < b.pair.id; });
  Rng rng(Rng::mix(variant.seed, Rng::hash_str("order")));
  rng.shuffle(variant.examples);
}

std::map<std::string, double> to_weights(const std::map<std::string, int>& counts) {
  std::map<std::string, double> w;
  for (const auto& [k, v] : counts) w[k] = v;
  return w;
}

}  // namespace

DatasetVariant build_mixture(const std::vector<AnnotatedExample>& annotated_train,
                             const MixtureSpec& spec) {
  if (spec.unknown_percent < 0.0 || spec.unknown_percent > 100.0)
    throw Error(errkind::InvalidRequest, "unknown_percent must be in [0, 100]");
  if (spec.target_size <= 0) throw Error(errkind::InvalidRequest, "target_size must be positive");

  CategoryPools pools = build_pools(annotated_train);

  std::map<std::string, std::pair<int, int>> quota = spec.per_relation_quota;
  if (quota.empty()) {
    const auto slots = compute_relation_slots(annotated_train, spec.target_size, spec.slot_rule);
    // Unknown slots: largest-remainder rounding of X% of each relation's share.
    const int unknown_total =
        static_cast<int>(std::llround(spec.unknown_percent * spec.target_size / 100.0));
    const auto unknown_slots = largest_remainder_apportion(unknown_total, to_weights(slots));
    for (const auto& [relation, t] : slots)
      quota[relation] = {unknown_slots.at(relation), t - unknown_slots.at(relation)};
  }
  int quota_total = 0;
  for (const auto& [relation, uk] : quota) quota_total += uk.first + uk.second;
  if (quota_total != spec.target_size)
    throw Error(errkind::InvalidRequest, "per-relation quotas sum to " + std::to_string(quota_total) +
                                             ", expected " + std::to_string(spec.target_size));

  DatasetVariant variant;
  variant.seed = spec.seed;
  variant.name = !spec.name.empty()
                     ? spec.name
                     : "D_" + std::to_string(static_cast<int>(std::llround(spec.unknown_percent))) + "unk";

  json quota_json = json::object();
  for (const auto& [relation, uk] : quota) {
    const auto& per_cat = pools[relation];
    const auto [n_unknown, n_known] = uk;
    quota_json[relation] = json{{"unknown", n_unknown}, {"known", n_known}};

    append_examples(variant, draw(per_cat[category_index(KnowledgeCategory::Unknown)], n_unknown,
                                  spec.seed, relation, KnowledgeCategory::Unknown));

    if (n_known == 0) continue;
    if (spec.known_mix == KnownMix::pooled) {
      std::vector<const AnnotatedExample*> known_pool;
      for (auto cat : {KnowledgeCategory::HighlyKnown, KnowledgeCategory::MaybeKnown,
                       KnowledgeCategory::WeaklyKnown}) {
        const auto& p = per_cat[category_index(cat)];
        known_pool.insert(known_pool.end(), p.begin(), p.end());
      }
      std::sort(known_pool.begin(), known_pool.end(),
                [](const AnnotatedExample* a, const AnnotatedExample* b) { return a->pair.id < b->pair.id; });
      if (n_known > static_cast<int>(known_pool.size()))
        throw Error(errkind::InsufficientCategoryPool,
                    "relation " + relation + " Known pool has " + std::to_string(known_pool.size()) +
                        " examples; need " + std::to_string(n_known));
      Rng rng(Rng::mix(Rng::mix(spec.seed, Rng::hash_str(relation)), Rng::hash_str("Known")));
      rng.shuffle(known_pool);
      known_pool.resize(static_cast<std::size_t>(n_known));
      append_examples(variant, known_pool);
    } else {
      // natural: split the Known slots across the three Known categories in
      // proportion to their frequencies in this relation
      std::map<std::string, double> cat_weights;
      for (auto cat : {KnowledgeCategory::HighlyKnown, KnowledgeCategory::MaybeKnown,
                       KnowledgeCategory::WeaklyKnown})
        cat_weights[to_string(cat)] = per_cat[category_index(cat)].size();
      const auto cat_counts = largest_remainder_apportion(n_known, cat_weights);
      for (auto cat : {KnowledgeCategory::HighlyKnown, KnowledgeCategory::MaybeKnown,
                       KnowledgeCategory::WeaklyKnown})
        append_examples(variant, draw(per_cat[category_index(cat)], cat_counts.at(to_string(cat)),
                                      spec.seed, relation, cat));
    }
  }

  finalize_order(variant);
  variant.spec = json{{"kind", "mixture"},
                      {"unknown_percent", spec.unknown_percent},
                      {"target_size", spec.target_size},
                      {"slot_rule", spec.slot_rule == SlotRule::min_known_unknown ? "min-known-unknown"
                                                                                  : "min-all"},
                      {"known_mix", spec.known_mix == KnownMix::pooled ? "pooled" : "natural"},
                      {"per_relation_quota", std::move(quota_json)},
                      {"seed", spec.seed}};
  return variant;
}

DatasetVariant build_single_category(const std::vector<AnnotatedExample>& annotated_train,
                                     KnowledgeCategory category, int target_size,
                                     std::uint64_t seed) {
  if (target_size <= 0) throw Error(errkind::InvalidRequest, "target_size must be positive");
  CategoryPools pools = build_pools(annotated_train);
  // A relation with no examples of the category cannot be represented at all,
  // which would silently skew the relation marginals; reject it up front.
  for (const auto& [relation, per_cat] : pools)
    if (per_cat[category_index(category)].empty())
      throw Error(errkind::InsufficientCategoryPool,
                  "relation " + relation + " has no " + std::string(to_string(category)) + " examples");
  const auto slots = compute_relation_slots(annotated_train, target_size);

  DatasetVariant variant;
  variant.seed = seed;
  variant.name = std::string("D_") + to_string(category);
  for (const auto& [relation, t] : slots)
    append_examples(variant, draw(pools[relation][category_index(category)], t, seed, relation, category));
  finalize_order(variant);
  variant.spec = json{{"kind", "single_category"},
                      {"category", to_string(category)},
                      {"target_size", target_size},
                      {"seed", seed}};
  return variant;
}

DatasetVariant build_natural(const std::vector<AnnotatedExample>& annotated_train, int target_size,
                             std::uint64_t seed, SlotRule rule) {
  if (target_size <= 0) throw Error(errkind::InvalidRequest, "target_size must be positive");
  CategoryPools pools = build_pools(annotated_train);
  const auto slots = compute_relation_slots(annotated_train, target_size, rule);

  DatasetVariant variant;
  variant.seed = seed;
  variant.name = "D_Natural";
  for (const auto& [relation, t] : slots) {
    const auto& per_cat = pools[relation];
    std::map<std::string, double> cat_weights;
    for (auto cat : kAllCategories) cat_weights[to_string(cat)] = per_cat[category_index(cat)].size();
    const auto cat_counts = largest_remainder_apportion(t, cat_weights);
    for (auto cat : kAllCategories)
      append_examples(variant,
                      draw(per_cat[category_index(cat)], cat_counts.at(to_string(cat)), seed, relation, cat));
  }
  finalize_order(variant);
  variant.spec = json{{"kind", "natural"}, {"target_size", target_size}, {"seed", seed}};
  return variant;
}

namespace {

std::string derived_name(const std::string& base, const std::string& tag) {
  if (base.rfind("D_", 0) == 0) return "D_" + tag + "_of_" + base.substr(2);
  return base + "_" + tag;
}

}  // namespace

DatasetVariant build_known_ablation(const DatasetVariant& input) {
  DatasetVariant variant;
  variant.seed = input.seed;
  variant.name = derived_name(input.name, "Known");
  for (const auto& ex : input.examples)
    if (ex.category != KnowledgeCategory::Unknown) variant.examples.push_back(ex);
  variant.spec = json{{"kind", "known_ablation"}, {"base_variant", input.name}, {"base_spec", input.spec}};
  return variant;
}

DatasetVariant build_idk_variant(const DatasetVariant& input, const std::string& abstain_string) {
  DatasetVariant variant = input;
  variant.name = derived_name(input.name, "IDK");
  int replaced = 0;
  for (auto& ex : variant.examples) {
    if (ex.category == KnowledgeCategory::Unknown) {
      ex.target_answer = abstain_string;
      ++replaced;
    }
  }
  variant.spec = json{{"kind", "idk"},
                      {"base_variant", input.name},
                      {"abstain_string", abstain_string},
                      {"replaced", replaced},
                      {"base_spec", input.spec}};
  return variant;
}

// ---------------------------------------------------------------------------
// trainer export

namespace {

void write_split_file(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw Error(errkind::IoError, "cannot write " + path.string());
  for (const auto& p : pairs) {
    json line{{"id", p.id},
              {"input", kTrainerInputPrefix + p.question},
              {"target", p.gold_answers.front()}};
    out << line.dump() << '\n';
  }
}

}  // namespace

void export_trainer_files(const DatasetVariant& variant, const CorpusManifest& manifest,
                          const std::filesystem::path& out_dir) {
  if (variant.examples.empty())
    throw Error(errkind::EmptyVariant,
                "variant " + variant.name + " is empty; refusing to export an empty trainer file");
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream out(out_dir / "train.jsonl");
    if (!out) throw Error(errkind::IoError, "cannot write train.jsonl under " + out_dir.string());
    for (const auto& ex : variant.examples) {
      json line{{"id", ex.pair.id},
                {"input", kTrainerInputPrefix + ex.pair.question},
                {"target", ex.target_answer}};
      out << line.dump() << '\n';
    }
  }
  for (const Split split : {Split::dev, Split::test, Split::ood_test}) {
    const auto pairs = manifest.split_pairs(split);
    if (pairs.empty()) continue;
    write_split_file(out_dir / (std::string(to_string(split)) + ".jsonl"), pairs);
  }

  json per_example = json::array();
  for (const auto& ex : variant.examples)
    per_example.push_back(json{{"id", ex.pair.id},
                               {"relation_id", ex.pair.relation_id},
                               {"subject", ex.pair.subject},
                               {"question", ex.pair.question},
                               {"gold_answer", ex.pair.gold_answers.front()},
                               {"target", ex.target_answer},
                               {"category", to_string(ex.category)}});
  json meta{{"name", variant.name},
            {"seed", variant.seed},
            {"spec", variant.spec},
            {"size", variant.examples.size()},
            // reference hyperparameters for the external trainer
            {"training_defaults",
             json{{"epochs", 50}, {"learning_rate", 1e-5}, {"batch_size", 128}, {"dropout", 0.05}}},
            {"examples", std::move(per_example)}};
  std::ofstream meta_out(out_dir / "variant_meta.json");
  if (!meta_out) throw Error(errkind::IoError, "cannot write variant_meta.json under " + out_dir.string());
  meta_out << meta.dump(2) << '\n';
}

DatasetVariant load_variant(const std::filesystem::path& dir) {
  return load_variant_file(dir / "variant_meta.json");
}

DatasetVariant load_variant_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errkind::IoError, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(errkind::ParseError, path.string() + ": " + e.what());
  }
  DatasetVariant variant;
  variant.name = j.at("name").get<std::string>();
  variant.seed = j.at("seed").get<std::uint64_t>();
  variant.spec = j.value("spec", json::object());
  for (const auto& e : j.at("examples")) {
    VariantExample ex;
    ex.pair.id = e.at("id").get<std::string>();
    ex.pair.relation_id = e.at("relation_id").get<std::string>();
    ex.pair.subject = e.value("subject", "");
    ex.pair.question = e.at("question").get<std::string>();
    ex.pair.gold_answers = {e.at("gold_answer").get<std::string>()};
    ex.pair.split = Split::train;
    ex.target_answer = e.at("target").get<std::string>();
    ex.category = category_from_string(e.at("category").get<std::string>());
    variant.examples.push_back(std::move(ex));
  }
  return variant;
}

void save_variant(const std::filesystem::path& path, const DatasetVariant& variant) {
  json per_example = json::array();
  for (const auto& ex : variant.examples)
    per_example.push_back(json{{"id", ex.pair.id},
                               {"relation_id", ex.pair.relation_id},
                               {"subject", ex.pair.subject},
                               {"question", ex.pair.question},
                               {"gold_answer", ex.pair.gold_answers.front()},
                               {"target", ex.target_answer},
                               {"category", to_string(ex.category)}});
  json out{{"name", variant.name},
           {"seed", variant.seed},
           {"spec", variant.spec},
           {"size", variant.examples.size()},
           {"examples", std::move(per_example)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(errkind::IoError, "cannot write " + path.string());
  f << out.dump(2) << '\n';
}

}  // namespace slick
