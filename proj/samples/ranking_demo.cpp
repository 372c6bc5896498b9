// End-to-end library walk-through: build a tiny in-memory answer-selection
// dataset, train a small model on it, and print the ranking it learned.

#include <cstdio>
#include <string>
#include <vector>

#include "gsamn/data.hpp"
#include "gsamn/metrics.hpp"
#include "gsamn/model.hpp"
#include "gsamn/train.hpp"

using namespace gsamn;

int main() {
  // Eight questions, four candidate answers each, exactly one correct.
  std::vector<QAExample> examples;
  for (int i = 0; i < 8; ++i) {
    const std::string si = std::to_string(i);
    const std::string qid = "q" + si;
    const std::string question = "what shade is thing" + si;
    examples.push_back({qid, question, "thing" + si + " looks shade" + si, 1});
    for (char k : {'a', 'b', 'c'})
      examples.push_back({qid, question, "thing" + si + " looks wrong" + si + k, 0});
  }
  const std::vector<QAGroup> groups = group(examples);

  GsamnConfig config;
  config.hops = 2;
  config.d = 16;
  std::vector<std::string> texts;
  for (const auto& ex : examples) {
    texts.push_back(ex.question);
    texts.push_back(ex.answer);
  }
  Model model = Model::fresh_random(config, 16, Vocab::from_texts(texts), 7);

  TrainConfig cfg;
  cfg.peak_lr = 0.02;
  cfg.total_steps = 120;
  cfg.batch_size = 8;
  cfg.seed = 42;
  TrainOutcome out = train(model, examples, groups, cfg);

  std::printf("%5s %5s %12s %8s %8s\n", "epoch", "step", "train loss", "MAP", "MRR");
  for (const auto& row : out.log)
    std::printf("%5zu %5zu %12.6f %8.4f %8.4f\n", row.epoch, row.step, row.train_loss,
                row.dev_map, row.dev_mrr);

  std::printf("\nlearned ranking for \"%s\":\n", groups[0].question.c_str());
  std::vector<std::pair<double, const std::pair<std::string, int>*>> scored;
  for (const auto& candidate : groups[0].candidates) {
    Tape tape;
    scored.emplace_back(out.model.score_text(tape, groups[0].question, candidate.first).value(),
                        &candidate);
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [score, candidate] : scored)
    std::printf("  %.4f  %s%s\n", score, candidate->first.c_str(),
                candidate->second == 1 ? "   <- labeled correct" : "");
  return 0;
}
