#pragma once

#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gsamn/errors.hpp"

// Labeled question/answer datasets: JSONL loading, grouping by question, and
// the clean-set filter used for ranking evaluation.

namespace gsamn {

struct QAExample {
  std::string question_id;
  std::string question;
  std::string answer;
  int label = 0;  // 0 or 1
};

// All candidates of one question, in file order.
struct QAGroup {
  std::string question_id;
  std::string question;
  std::vector<std::pair<std::string, int>> candidates;  // (answer, label)

  bool has_positive() const {
    for (const auto& [a, l] : candidates)
      if (l == 1) return true;
    return false;
  }
  bool has_negative() const {
    for (const auto& [a, l] : candidates)
      if (l == 0) return true;
    return false;
  }
};

namespace detail {

inline std::string jsonl_where(const std::string& path, std::size_t lineno) {
  return path + " line " + std::to_string(lineno);
}

inline std::string jsonl_string_field(const nlohmann::json& obj, const char* key,
                                      const std::string& where) {
  if (!obj.contains(key))
    throw DataError(where + ": missing \"" + key + "\"");
  if (!obj.at(key).is_string())
    throw DataError(where + ": \"" + key + "\" must be a string");
  return obj.at(key).get<std::string>();
}

}  // namespace detail

// One JSON object per line with keys question_id/question/answer/label.
// Duplicate (question_id, answer) pairs keep the first occurrence and append
// a note to `warnings` when given.
inline std::vector<QAExample> load_jsonl(const std::string& path,
                                         std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::vector<QAExample> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = detail::jsonl_where(path, lineno);
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw DataError(where + ": not valid JSON");
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    QAExample ex;
    ex.question_id = detail::jsonl_string_field(obj, "question_id", where);
    if (ex.question_id.empty()) throw DataError(where + ": question_id is empty");
    ex.question = detail::jsonl_string_field(obj, "question", where);
    ex.answer = detail::jsonl_string_field(obj, "answer", where);
    if (!obj.contains("label")) throw DataError(where + ": missing \"label\"");
    if (!obj.at("label").is_number_integer())
      throw DataError(where + ": \"label\" must be an integer");
    const long long label = obj.at("label").get<long long>();
    if (label != 0 && label != 1) throw DataError(where + ": label must be 0 or 1");
    ex.label = static_cast<int>(label);
    if (!seen.emplace(ex.question_id, ex.answer).second) {
      if (warnings)
        warnings->push_back(where + ": duplicate (question_id, answer), keeping the first");
      continue;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline void save_jsonl(const std::vector<QAExample>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& ex : examples) {
    nlohmann::json obj;
    obj["question_id"] = ex.question_id;
    obj["question"] = ex.question;
    obj["answer"] = ex.answer;
    obj["label"] = ex.label;
    out << obj.dump() << "\n";
  }
  if (!out) throw DataError("short write to " + path);
}

// Stable grouping: groups appear in order of each question_id's first
// occurrence; candidates keep file order.
inline std::vector<QAGroup> group(const std::vector<QAExample>& examples) {
  std::vector<QAGroup> groups;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& ex : examples) {
    auto it = where.find(ex.question_id);
    if (it == where.end()) {
      where.emplace(ex.question_id, groups.size());
      groups.push_back({ex.question_id, ex.question, {}});
      it = where.find(ex.question_id);
    }
    groups[it->second].candidates.emplace_back(ex.answer, ex.label);
  }
  return groups;
}

struct EvalFilterResult {
  std::vector<QAGroup> kept;
  std::size_t dropped_all_positive = 0;
  std::size_t dropped_all_negative = 0;
};

// Ranking evaluation needs at least one positive and one negative candidate
// per question; drop the rest and report how many went.
inline EvalFilterResult filter_eval_groups(std::vector<QAGroup> groups) {
  EvalFilterResult r;
  for (auto& g : groups) {
    const bool pos = g.has_positive(), neg = g.has_negative();
    if (pos && neg)
      r.kept.push_back(std::move(g));
    else if (pos)
      ++r.dropped_all_positive;
    else
      ++r.dropped_all_negative;
  }
  return r;
}

}  // namespace gsamn
