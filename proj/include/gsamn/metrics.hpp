#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "gsamn/data.hpp"
#include "gsamn/errors.hpp"
#include "gsamn/model.hpp"
#include "gsamn/tape.hpp"

// Ranking metrics for answer selection: average precision per question,
// MAP/MRR over a collection, and a model-driven evaluator.

namespace gsamn {

// Candidate labels reordered by descending score. The sort is stable, so
// equal scores keep their original (file) order.
inline std::vector<int> ranked_labels(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ContractError("ranked_labels: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(labels[i]);
  return out;
}

// Mean of precision@r over the ranks r that hold a positive; the mean is over
// all positives in the group.
inline double average_precision(const std::vector<int>& ranked) {
  std::size_t positives = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] != 1) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(i + 1);
  }
  if (positives == 0)
    throw ContractError("average_precision needs at least one positive; run the eval filter");
  return sum / static_cast<double>(positives);
}

inline double reciprocal_rank(const std::vector<int>& ranked) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] == 1) return 1.0 / static_cast<double>(i + 1);
  throw ContractError("reciprocal_rank needs at least one positive; run the eval filter");
}

inline double map_score(const std::vector<std::vector<int>>& ranked_groups) {
  if (ranked_groups.empty()) throw ContractError("MAP over zero questions");
  double sum = 0.0;
  for (const auto& r : ranked_groups) sum += average_precision(r);
  return sum / static_cast<double>(ranked_groups.size());
}

inline double mrr_score(const std::vector<std::vector<int>>& ranked_groups) {
  if (ranked_groups.empty()) throw ContractError("MRR over zero questions");
  double sum = 0.0;
  for (const auto& r : ranked_groups) sum += reciprocal_rank(r);
  return sum / static_cast<double>(ranked_groups.size());
}

struct QuestionResult {
  std::string question_id;
  std::size_t candidates = 0;
  std::size_t positives = 0;
  double ap = 0.0;
  double rr = 0.0;
};

struct RankingResult {
  double map = 0.0;
  double mrr = 0.0;
  std::vector<QuestionResult> per_question;

  std::size_t num_questions() const { return per_question.size(); }
};

// Scorer signature: double(question, answer). Groups must already satisfy the
// eval-filter contract (at least one positive each).
template <typename Scorer>
RankingResult evaluate_with(Scorer&& score, const std::vector<QAGroup>& groups) {
  if (groups.empty()) throw ContractError("evaluation needs at least one question");
  RankingResult result;
  std::vector<std::vector<int>> ranked_groups;
  ranked_groups.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(g.candidates.size());
    for (const auto& [answer, label] : g.candidates) {
      scores.push_back(score(g.question, answer));
      labels.push_back(label);
    }
    std::vector<int> ranked = ranked_labels(scores, labels);
    QuestionResult q;
    q.question_id = g.question_id;
    q.candidates = ranked.size();
    q.positives = static_cast<std::size_t>(std::count(ranked.begin(), ranked.end(), 1));
    q.ap = average_precision(ranked);
    q.rr = reciprocal_rank(ranked);
    result.per_question.push_back(std::move(q));
    ranked_groups.push_back(std::move(ranked));
  }
  result.map = map_score(ranked_groups);
  result.mrr = mrr_score(ranked_groups);
  return result;
}

// Text is tokenized on the fly; every candidate gets its own throwaway tape.
inline RankingResult evaluate(const Model& model, const std::vector<QAGroup>& groups) {
  return evaluate_with(
      [&model](const std::string& question, const std::string& answer) {
        Tape tape;
        return model.score_text(tape, question, answer).value();
      },
      groups);
}

}  // namespace gsamn
