#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slick/types.hpp"

namespace slick {

struct PredictionRecord {
  std::string example_id;
  std::string predicted;  // raw model output
  Split split = Split::test;
  std::string source_tag;  // e.g. "epoch=7" or "variant=D_MaybeKnown"
};

struct EvalBucket {
  int n = 0;
  int correct = 0;
  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct EvalReport {
  int n_total = 0;
  int n_correct = 0;
  int n_answered = 0;
  int n_correct_answered = 0;
  std::map<KnowledgeCategory, EvalBucket> per_category;
  std::map<std::string, EvalBucket> per_relation;

  double overall_accuracy() const { return n_total == 0 ? 0.0 : static_cast<double>(n_correct) / n_total; }
  double answered_fraction() const { return n_total == 0 ? 1.0 : static_cast<double>(n_answered) / n_total; }
  double accuracy_on_answered() const {
    return n_answered == 0 ? 0.0 : static_cast<double>(n_correct_answered) / n_answered;
  }
};

// Answer normalization: lowercase, strip punctuation, drop the articles
// "a"/"an"/"the" as whole words, collapse whitespace, trim. ASCII punctuation
// plus the common Unicode punctuation blocks; non-ASCII letters pass through
// unchanged.
std::string normalize_answer(const std::string& s);

// Exact match after normalization against any gold answer.
bool exact_match(const std::string& predicted, const std::vector<std::string>& gold_answers);

// Scores predictions against gold answers resolved through `gold_by_id`
// (id -> gold answers) and breaks results down by the supplied category and
// relation maps. Every prediction id must resolve; `expected_ids`, when given,
// must each have exactly one prediction. Predictions normalizing equal to
// `abstain_string` count as unanswered.
struct EvalInputs {
  std::map<std::string, std::vector<std::string>> gold_by_id;
  std::map<std::string, KnowledgeCategory> category_by_id;  // may be empty: no breakdown
  std::map<std::string, std::string> relation_by_id;
  std::vector<std::string> expected_ids;  // may be empty: evaluate whatever is present
  std::optional<std::string> abstain_string;
};

EvalReport evaluate(const std::vector<PredictionRecord>& predictions, const EvalInputs& inputs);

}  // namespace slick
