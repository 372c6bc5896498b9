#pragma once

#include <functional>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gsamn/data.hpp"
#include "gsamn/errors.hpp"
#include "gsamn/rng.hpp"

// Community-QA corpus construction: highly upvoted answers become positives,
// and negatives are sampled from the positive answers of other questions.

namespace gsamn {

struct RawCqaRecord {
  std::string question;
  std::string answer;
  long long upvotes = 0;
  std::string lang;  // optional tag; empty means "not stated"
};

// Default English heuristic: among the characters that carry language
// evidence (ASCII letters and non-ASCII bytes), at least 90% must be ASCII
// letters. Text with no such evidence passes. The threshold is inclusive.
inline bool language_filter(const std::string& text) {
  std::size_t ascii_letters = 0, foreign = 0;
  for (unsigned char ch : text) {
    if ((ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z'))
      ++ascii_letters;
    else if (ch >= 0x80)
      ++foreign;
  }
  const std::size_t evidence = ascii_letters + foreign;
  if (evidence == 0) return true;
  return static_cast<double>(ascii_letters) >= 0.9 * static_cast<double>(evidence);
}

using LanguagePredicate = std::function<bool(const RawCqaRecord&)>;

// Default record-level predicate: trust an explicit language tag when
// present, otherwise apply the text heuristic to both sides.
inline bool record_is_english(const RawCqaRecord& rec) {
  if (!rec.lang.empty()) return rec.lang == "en";
  return language_filter(rec.question) && language_filter(rec.answer);
}

// JSONL with keys question/answer/upvotes and an optional lang tag.
inline std::vector<RawCqaRecord> load_raw_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open raw corpus: " + path);
  std::vector<RawCqaRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = detail::jsonl_where(path, lineno);
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw DataError(where + ": not valid JSON");
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    RawCqaRecord rec;
    rec.question = detail::jsonl_string_field(obj, "question", where);
    rec.answer = detail::jsonl_string_field(obj, "answer", where);
    if (!obj.contains("upvotes")) throw DataError(where + ": missing \"upvotes\"");
    if (!obj.at("upvotes").is_number_integer())
      throw DataError(where + ": \"upvotes\" must be an integer");
    rec.upvotes = obj.at("upvotes").get<long long>();
    if (rec.upvotes < 0) throw DataError(where + ": upvotes must be nonnegative");
    if (obj.contains("lang")) {
      if (!obj.at("lang").is_string()) throw DataError(where + ": \"lang\" must be a string");
      rec.lang = obj.at("lang").get<std::string>();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct CorpusStats {
  std::size_t questions_in = 0;         // distinct questions seen
  std::size_t questions_out = 0;        // questions that produced examples
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t dropped_upvotes = 0;
  std::size_t dropped_language = 0;
  std::size_t shortfall_questions = 0;  // questions that wanted more negatives
};

struct CorpusResult {
  std::vector<QAExample> examples;
  CorpusStats stats;
  std::vector<std::string> warnings;
};

// Builds a labeled dataset from raw records. Per distinct question (in first-
// occurrence order): records with enough upvotes that pass the language
// predicate become positives; negatives_per_positive negatives per positive
// are then sampled, seeded and without replacement, from the distinct
// positive answers of OTHER questions, never string-equal to one of the
// question's own positives. Output is positives then negatives per question.
// The same seed reproduces the file byte for byte; a different seed changes
// only the negatives.
inline CorpusResult build_corpus(const std::vector<RawCqaRecord>& records,
                                 long long min_upvotes = 2,
                                 std::size_t negatives_per_positive = 5,
                                 std::uint64_t seed = 42,
                                 const LanguagePredicate& is_english = record_is_english) {
  if (records.empty()) throw DataError("raw corpus is empty");
  CorpusResult result;

  struct Question {
    std::string text;
    std::vector<std::string> positives;  // file order
  };
  std::vector<Question> questions;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& rec : records) {
    auto it = index.find(rec.question);
    if (it == index.end()) {
      index.emplace(rec.question, questions.size());
      questions.push_back({rec.question, {}});
      it = index.find(rec.question);
    }
    if (rec.upvotes < min_upvotes) {
      ++result.stats.dropped_upvotes;
      continue;
    }
    if (!is_english(rec)) {
      ++result.stats.dropped_language;
      continue;
    }
    questions[it->second].positives.push_back(rec.answer);
  }
  result.stats.questions_in = questions.size();

  // Sampling pool: every distinct positive answer across all questions, in
  // first-emission order. Per question the pool is narrowed to answers of
  // other questions that do not collide with its own positives.
  std::vector<std::string> pool;
  std::set<std::string> pooled;
  for (const auto& q : questions)
    for (const auto& a : q.positives)
      if (pooled.insert(a).second) pool.push_back(a);

  Rng rng(seed);
  std::size_t qnum = 0;
  for (const auto& q : questions) {
    if (q.positives.empty()) continue;
    ++qnum;
    const std::string qid = "q" + std::to_string(qnum);
    ++result.stats.questions_out;

    std::set<std::string> own(q.positives.begin(), q.positives.end());
    for (const auto& a : q.positives) {
      result.examples.push_back({qid, q.text, a, 1});
      ++result.stats.positives;
    }

    std::vector<const std::string*> eligible;
    eligible.reserve(pool.size());
    for (const auto& a : pool)
      if (!own.count(a)) eligible.push_back(&a);

    const std::size_t want = negatives_per_positive * q.positives.size();
    std::vector<const std::string*> picked;
    if (eligible.size() <= want) {
      picked = eligible;  // take everything; no randomness to spend
      if (eligible.size() < want) {
        ++result.stats.shortfall_questions;
        result.warnings.push_back(qid + ": wanted " + std::to_string(want) +
                                  " negatives, only " + std::to_string(eligible.size()) +
                                  " distinct foreign answers available");
      }
    } else {
      for (std::size_t i : rng.sample_without_replacement(eligible.size(), want))
        picked.push_back(eligible[i]);
    }
    for (const std::string* a : picked) {
      result.examples.push_back({qid, q.text, *a, 0});
      ++result.stats.negatives;
    }
  }
  return result;
}

}  // namespace gsamn
