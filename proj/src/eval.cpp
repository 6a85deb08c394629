#include "slick/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <set>
#include <sstream>

#include "slick/errors.hpp"

namespace slick {

namespace {

// Decode one UTF-8 code point starting at i; advances i past it. Malformed
// bytes are passed through as single code points.
std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = s[i];
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = 0;
  std::uint32_t cp = 0;
  if ((c & 0xe0) == 0xc0) {
    cp = c & 0x1f;
    extra = 1;
  } else if ((c & 0xf0) == 0xe0) {
    cp = c & 0x0f;
    extra = 2;
  } else if ((c & 0xf8) == 0xf0) {
    cp = c & 0x07;
    extra = 3;
  } else {
    ++i;
    return c;
  }
  if (i + extra >= s.size()) {
    ++i;
    return c;
  }
  std::size_t j = i + 1;
  for (int k = 0; k < extra; ++k, ++j) {
    if ((static_cast<unsigned char>(s[j]) & 0xc0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (static_cast<unsigned char>(s[j]) & 0x3f);
  }
  i = j;
  return cp;
}

void encode_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

bool is_unicode_punct(std::uint32_t cp) {
  // ASCII punctuation.
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  // Common punctuation blocks outside ASCII.
  if (cp == 0xa1 || cp == 0xa7 || cp == 0xab || cp == 0xb6 || cp == 0xb7 || cp == 0xbb || cp == 0xbf)
    return true;
  if (cp >= 0x2000 && cp <= 0x206f) return true;   // general punctuation (dashes, quotes, ellipsis)
  if (cp >= 0x2e00 && cp <= 0x2e7f) return true;   // supplemental punctuation
  if (cp >= 0x3001 && cp <= 0x3003) return true;   // CJK comma/full stop
  if (cp >= 0xff01 && cp <= 0xff0f) return true;   // fullwidth forms
  if (cp >= 0xff1a && cp <= 0xff20) return true;
  if (cp >= 0xff3b && cp <= 0xff40) return true;
  if (cp >= 0xff5b && cp <= 0xff65) return true;
  return false;
}

}  // namespace

std::string normalize_answer(const std::string& s) {
  // lowercase (ASCII only) + punctuation removal in one pass
  std::string depunct;
  depunct.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::uint32_t cp = decode_utf8(s, i);
    if (is_unicode_punct(cp)) continue;
    if (cp < 0x80) {
      depunct.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
      encode_utf8(depunct, cp);
    }
  }
  // article removal + whitespace collapse
  std::istringstream in(depunct);
  std::string token;
  std::string out;
  while (in >> token) {
    if (token == "a" || token == "an" || token == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

bool exact_match(const std::string& predicted, const std::vector<std::string>& gold_answers) {
  const std::string norm_pred = normalize_answer(predicted);
  return std::any_of(gold_answers.begin(), gold_answers.end(), [&](const std::string& g) {
    return norm_pred == normalize_answer(g);
  });
}

EvalReport evaluate(const std::vector<PredictionRecord>& predictions, const EvalInputs& inputs) {
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p.example_id).second)
      throw Error(errkind::DuplicatePrediction, "duplicate prediction for id " + p.example_id);
    if (inputs.gold_by_id.find(p.example_id) == inputs.gold_by_id.end())
      throw Error(errkind::UnknownExample, "prediction id not in corpus: " + p.example_id);
  }
  if (!inputs.expected_ids.empty()) {
    std::vector<std::string> missing;
    for (const auto& id : inputs.expected_ids)
      if (seen.find(id) == seen.end()) missing.push_back(id);
    if (!missing.empty()) {
      std::string msg = "missing predictions for " + std::to_string(missing.size()) + " ids:";
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
      throw Error(errkind::MissingPrediction, msg);
    }
  }
  const bool breakdown = !inputs.category_by_id.empty();

  EvalReport report;
  const std::string norm_abstain =
      inputs.abstain_string ? normalize_answer(*inputs.abstain_string) : std::string();
  for (const auto& p : predictions) {
    const auto& gold = inputs.gold_by_id.at(p.example_id);
    const bool correct = exact_match(p.predicted, gold);
    const bool abstained = inputs.abstain_string && normalize_answer(p.predicted) == norm_abstain;
    ++report.n_total;
    if (correct) ++report.n_correct;
    if (!abstained) {
      ++report.n_answered;
      if (correct) ++report.n_correct_answered;
    }
    if (breakdown) {
      auto cat_it = inputs.category_by_id.find(p.example_id);
      if (cat_it == inputs.category_by_id.end())
        throw Error(errkind::MissingAnnotation, "no category annotation for id " + p.example_id);
      auto& bucket = report.per_category[cat_it->second];
      ++bucket.n;
      if (correct) ++bucket.correct;
    }
    auto rel_it = inputs.relation_by_id.find(p.example_id);
    if (rel_it != inputs.relation_by_id.end()) {
      auto& bucket = report.per_relation[rel_it->second];
      ++bucket.n;
      if (correct) ++bucket.correct;
    }
  }
  return report;
}

}  // namespace slick
