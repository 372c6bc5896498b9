#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gsamn/corpus.hpp"
#include "gsamn/data.hpp"
#include "gsamn/metrics.hpp"
#include "gsamn/model.hpp"
#include "gsamn/optimizer.hpp"
#include "gsamn/tokenizer.hpp"

// Mini-batch training: seeded shuffling, per-example forward passes averaged
// into one batch loss, Adam with the warmup/decay schedule, per-epoch metric
// rows, and a best-dev snapshot.

namespace gsamn {

struct MetricsRow {
  std::size_t epoch = 0;  // 0 is the pre-training measurement
  std::size_t step = 0;   // completed optimizer updates
  double lr = 0.0;        // learning rate of the most recent update
  double train_loss = 0.0;
  double dev_map = 0.0;
  double dev_mrr = 0.0;
};

struct TrainOutcome {
  Model model;          // parameters after the last step
  Model best;           // snapshot with the highest dev MAP
  double best_dev_map = 0.0;
  std::vector<MetricsRow> log;
  std::vector<std::string> warnings;
};

namespace detail {

struct TokenizedExample {
  std::vector<std::string> question;
  std::vector<std::string> answer;
  int label = 0;
};

// Mean BCE over the whole split with parameters held fixed.
inline double full_loss(const Model& model, const std::vector<TokenizedExample>& examples) {
  double sum = 0.0;
  for (const auto& ex : examples) {
    Tape tape;
    Tensor p = model.score_pair(tape, ex.question, ex.answer);
    sum += bce_loss(tape, p, ex.label).value();
  }
  return sum / static_cast<double>(examples.size());
}

}  // namespace detail

// Trains a deep copy of `init` (the input model is never touched) for exactly
// cfg.total_steps updates; update k (0-based) uses lr_at(k), so the schedule's
// terminal zero is never consumed. total_steps = 0 is an explicit no-op whose
// result is float-identical to the input. An empty dev split logs zero
// metrics and makes the final model the best one.
inline TrainOutcome train(const Model& init, const std::vector<QAExample>& train_set,
                          const std::vector<QAGroup>& dev_groups, const TrainConfig& cfg) {
  cfg.check();
  if (train_set.empty()) throw DataError("training split is empty");

  TrainOutcome out;
  out.model = init.clone();

  std::size_t positives = 0;
  for (const auto& ex : train_set) positives += ex.label == 1 ? 1 : 0;
  if (positives == 0)
    out.warnings.push_back("training split has no positive examples; proceeding anyway");

  std::vector<detail::TokenizedExample> examples;
  examples.reserve(train_set.size());
  for (const auto& ex : train_set)
    examples.push_back({tokenize(ex.question), tokenize(ex.answer), ex.label});

  const bool have_dev = !dev_groups.empty();
  auto measure = [&](std::size_t epoch, std::size_t step, double lr) {
    MetricsRow row;
    row.epoch = epoch;
    row.step = step;
    row.lr = lr;
    row.train_loss = detail::full_loss(out.model, examples);
    if (have_dev) {
      RankingResult dev = evaluate(out.model, dev_groups);
      row.dev_map = dev.map;
      row.dev_mrr = dev.mrr;
    }
    out.log.push_back(row);
    return row;
  };

  MetricsRow start = measure(0, 0, 0.0);
  out.best = out.model.clone();
  out.best_dev_map = start.dev_map;

  if (cfg.total_steps == 0) return out;

  Adam opt(cfg);
  auto params = out.model.named_params();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t steps_done = 0;
  std::size_t epoch = 0;
  double last_lr = 0.0;
  while (steps_done < cfg.total_steps) {
    ++epoch;
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size() && steps_done < cfg.total_steps;
         begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      Tape tape;
      Tensor total;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& ex = examples[order[i]];
        Tensor p = out.model.score_pair(tape, ex.question, ex.answer);
        Tensor loss = bce_loss(tape, p, ex.label);
        total = total.defined() ? add(tape, total, loss) : loss;
      }
      Tensor batch_loss = scale(tape, total, 1.0 / static_cast<double>(end - begin));
      if (!std::isfinite(batch_loss.value()))
        throw NumericError("non-finite training loss at step " + std::to_string(steps_done));
      tape.backward(batch_loss);
      last_lr = lr_at(steps_done, cfg);
      opt.step(params, last_lr);
      ++steps_done;
    }
    MetricsRow row = measure(epoch, steps_done, last_lr);
    if (have_dev && row.dev_map > out.best_dev_map) {
      out.best = out.model.clone();
      out.best_dev_map = row.dev_map;
    }
  }
  if (!have_dev) {
    out.best = out.model.clone();
    out.best_dev_map = 0.0;
  }
  return out;
}

}  // namespace gsamn
