#pragma once

#include <array>
#include <string>
#include <vector>

#include "slick/errors.hpp"

namespace slick {

enum class Split { train, dev, test, ood_test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    case Split::ood_test: return "ood_test";
  }
  return "train";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  if (s == "ood_test") return Split::ood_test;
  throw Error(errkind::ParseError, "unknown split: " + s);
}

// One (question, gold answer) item; the atom of the pipeline.
struct QAPair {
  std::string id;
  std::string relation_id;
  std::string subject;
  std::string question;
  std::vector<std::string> gold_answers;
  Split split = Split::train;
};

enum class KnowledgeCategory { HighlyKnown, MaybeKnown, WeaklyKnown, Unknown };

inline constexpr std::array<KnowledgeCategory, 4> kAllCategories = {
    KnowledgeCategory::HighlyKnown, KnowledgeCategory::MaybeKnown,
    KnowledgeCategory::WeaklyKnown, KnowledgeCategory::Unknown};

inline const char* to_string(KnowledgeCategory c) {
  switch (c) {
    case KnowledgeCategory::HighlyKnown: return "HighlyKnown";
    case KnowledgeCategory::MaybeKnown: return "MaybeKnown";
    case KnowledgeCategory::WeaklyKnown: return "WeaklyKnown";
    case KnowledgeCategory::Unknown: return "Unknown";
  }
  return "Unknown";
}

inline KnowledgeCategory category_from_string(const std::string& s) {
  if (s == "HighlyKnown") return KnowledgeCategory::HighlyKnown;
  if (s == "MaybeKnown") return KnowledgeCategory::MaybeKnown;
  if (s == "WeaklyKnown") return KnowledgeCategory::WeaklyKnown;
  if (s == "Unknown") return KnowledgeCategory::Unknown;
  throw Error(errkind::ParseError, "unknown knowledge category: " + s);
}

inline bool is_known(KnowledgeCategory c) { return c != KnowledgeCategory::Unknown; }

inline std::size_t category_index(KnowledgeCategory c) { return static_cast<std::size_t>(c); }

}  // namespace slick
