#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slick/annotator.hpp"
#include "slick/types.hpp"

namespace slick {

enum class RelationRole { in_distribution, out_of_distribution, excluded };

const char* to_string(RelationRole role);
RelationRole relation_role_from_string(const std::string& s);

struct RelationSpec {
  std::string relation_id;
  std::string question_template;  // one "[E]" entity slot
  RelationRole role = RelationRole::in_distribution;
  std::string exclusion_reason;
};

struct FilterLogEntry {
  std::string rule;
  std::int64_t removed = 0;
};

struct CorpusManifest {
  std::vector<QAPair> pairs;
  std::vector<RelationSpec> relation_specs;
  std::string source_path;
  std::vector<FilterLogEntry> filter_log;

  std::vector<QAPair> split_pairs(Split split) const;
  const QAPair* find(const std::string& id) const;
};

std::vector<RelationSpec> load_relation_config(const std::filesystem::path& path);

// Reads raw per-relation record files laid out as {path}/{split}/{relation}.jsonl
// (split in {train, dev, test}), one {question, answers, subject?} record per
// line. Excluded relations are dropped; out-of-distribution relations keep
// only their test records, re-tagged as ood_test.
CorpusManifest import_raw(const std::filesystem::path& path,
                          const std::vector<RelationSpec>& relation_config);

// Drops multi-answer pairs everywhere, then train pairs whose subject or
// object string (whitespace-trimmed exact match) collides with any test or
// ood_test pair. Removal counts are appended to the filter log.
CorpusManifest apply_filters(const CorpusManifest& manifest);

void save_corpus_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest load_corpus_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// dataset variants

struct FixedSizeRow {
  std::string relation_id;
  std::array<int, 4> category_counts{};
  int min_count = 0;
};

struct FixedSizeReport {
  int d_size = 0;
  std::vector<FixedSizeRow> rows;
  std::vector<std::string> warnings;  // relations whose smallest category is empty
};

// |D| = sum over relations of the smallest per-category count.
FixedSizeReport compute_fixed_size(const std::vector<AnnotatedExample>& annotated_train);

// Largest-remainder (Hamilton) apportionment of `total` across weights;
// returns integer counts summing exactly to total. Ties on fractional part
// break toward the smaller key.
std::map<std::string, int> largest_remainder_apportion(int total,
                                                       const std::map<std::string, double>& weights);

enum class KnownMix { pooled, natural };

// How target_size is shared out across relations. min_all_categories is the
// fixed-|D| rule (weights = each relation's smallest category count), which
// keeps every single-category variant feasible at the same marginals.
// min_known_unknown weights by min(Unknown, Known) instead, for corpora where
// some category is structurally empty and only mixtures are wanted.
enum class SlotRule { min_all_categories, min_known_unknown };

struct MixtureSpec {
  std::string name;
  double unknown_percent = 0.0;  // X in [0, 100]
  int target_size = 0;
  std::uint64_t seed = 0;
  KnownMix known_mix = KnownMix::natural;
  SlotRule slot_rule = SlotRule::min_all_categories;
  // Optional explicit quotas (relation -> {n_unknown, n_known}); computed from
  // the annotated train split when empty.
  std::map<std::string, std::pair<int, int>> per_relation_quota;
};

struct VariantExample {
  QAPair pair;
  std::string target_answer;
  KnowledgeCategory category = KnowledgeCategory::Unknown;
};

struct DatasetVariant {
  std::string name;
  std::vector<VariantExample> examples;
  nlohmann::json spec;  // construction record
  std::uint64_t seed = 0;

  int count(KnowledgeCategory c) const;
  int known_count() const { return static_cast<int>(examples.size()) - count(KnowledgeCategory::Unknown); }
};

// Per-relation slot totals shared by every variant of a given target size.
std::map<std::string, int> compute_relation_slots(const std::vector<AnnotatedExample>& annotated_train,
                                                  int target_size,
                                                  SlotRule rule = SlotRule::min_all_categories);

// X% Unknown / (100-X)% Known mixture with the relation distribution held
// fixed across X. Deterministic under spec.seed.
DatasetVariant build_mixture(const std::vector<AnnotatedExample>& annotated_train,
                             const MixtureSpec& spec);

// All slots filled from one category (D_HighlyKnown, ..., D_Unknown).
DatasetVariant build_single_category(const std::vector<AnnotatedExample>& annotated_train,
                                     KnowledgeCategory category, int target_size,
                                     std::uint64_t seed);

// Slots filled proportionally to each relation's natural category frequencies.
DatasetVariant build_natural(const std::vector<AnnotatedExample>& annotated_train, int target_size,
                             std::uint64_t seed, SlotRule rule = SlotRule::min_all_categories);

// The variant minus its Unknown examples.
DatasetVariant build_known_ablation(const DatasetVariant& variant);

// Unknown targets replaced by the abstention string; size preserved.
DatasetVariant build_idk_variant(const DatasetVariant& variant,
                                 const std::string& abstain_string = "I don't know");

// Trainer-ready JSONL (input = "Answer the following question.\n{question}")
// for the variant plus the manifest's dev/test/ood_test splits, and a sidecar
// variant_meta.json with the construction record and per-id categories.
// Refuses to export an empty variant.
void export_trainer_files(const DatasetVariant& variant, const CorpusManifest& manifest,
                          const std::filesystem::path& out_dir);

DatasetVariant load_variant(const std::filesystem::path& dir);

void save_variant(const std::filesystem::path& path, const DatasetVariant& variant);
DatasetVariant load_variant_file(const std::filesystem::path& path);

inline constexpr const char* kTrainerInputPrefix = "Answer the following question.\n";
inline constexpr const char* kDefaultAbstainString = "I don't know";

}  // namespace slick
