#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsamn/checkpoint.hpp"
#include "gsamn/corpus.hpp"
#include "gsamn/data.hpp"
#include "gsamn/metrics.hpp"
#include "gsamn/model.hpp"
#include "gsamn/selfcheck.hpp"
#include "gsamn/train.hpp"

// Command-line front end: corpus building, (pre)training, evaluation, and the
// built-in verification battery. Exit codes: 0 success, 1 usage or
// configuration problem, 2 data or file problem, 3 numeric failure.

namespace gsamn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Flat, fully defaulted run configuration. Unknown keys are rejected so a
// typo cannot silently fall back to a default.
struct RunConfig {
  GsamnConfig network;  // d, hops, share_params_across_hops, controller_self_score
  TrainConfig trainer;  // peak_lr, betas, decay, warmup, steps, batch, seed
  std::size_t max_seq_len = 64;
  std::string embedding_mode = "random_trainable";
  std::string embedding_file;  // required by the file-backed modes
  std::string train_data;
  std::string dev_data;

  RunConfig() { network.d = 16; }

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["batch_size"] = trainer.batch_size;
    doc["beta1"] = trainer.beta1;
    doc["beta2"] = trainer.beta2;
    doc["controller_self_score"] = network.controller_self_score;
    doc["d"] = network.d;
    doc["dev_data"] = dev_data;
    doc["embedding_file"] = embedding_file;
    doc["embedding_mode"] = embedding_mode;
    doc["hops"] = network.hops;
    doc["max_seq_len"] = max_seq_len;
    doc["peak_lr"] = trainer.peak_lr;
    doc["seed"] = trainer.seed;
    doc["share_params_across_hops"] = network.share_params_across_hops;
    doc["total_steps"] = trainer.total_steps;
    doc["train_data"] = train_data;
    doc["warmup_fraction"] = trainer.warmup_fraction;
    doc["weight_decay"] = trainer.weight_decay;
    return doc;
  }

  static RunConfig from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig cfg;
    const nlohmann::json known = cfg.to_json();
    for (const auto& [key, value] : doc.items()) {
      if (!known.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
    }
    auto number = [&doc](const char* key, double& dst) {
      if (!doc.contains(key)) return;
      if (!doc.at(key).is_number())
        throw ConfigError(std::string("config key \"") + key + "\" must be a number");
      dst = doc.at(key).get<double>();
    };
    auto count = [&doc](const char* key, std::size_t& dst) {
      if (!doc.contains(key)) return;
      const auto& v = doc.at(key);
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(std::string("config key \"") + key +
                          "\" must be a nonnegative integer");
      dst = v.get<std::size_t>();
    };
    auto flag = [&doc](const char* key, bool& dst) {
      if (!doc.contains(key)) return;
      if (!doc.at(key).is_boolean())
        throw ConfigError(std::string("config key \"") + key + "\" must be true or false");
      dst = doc.at(key).get<bool>();
    };
    auto text = [&doc](const char* key, std::string& dst) {
      if (!doc.contains(key)) return;
      if (!doc.at(key).is_string())
        throw ConfigError(std::string("config key \"") + key + "\" must be a string");
      dst = doc.at(key).get<std::string>();
    };

    count("batch_size", cfg.trainer.batch_size);
    number("beta1", cfg.trainer.beta1);
    number("beta2", cfg.trainer.beta2);
    flag("controller_self_score", cfg.network.controller_self_score);
    count("d", cfg.network.d);
    text("dev_data", cfg.dev_data);
    text("embedding_file", cfg.embedding_file);
    text("embedding_mode", cfg.embedding_mode);
    count("hops", cfg.network.hops);
    count("max_seq_len", cfg.max_seq_len);
    number("peak_lr", cfg.trainer.peak_lr);
    if (doc.contains("seed")) {
      const auto& v = doc.at("seed");
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config key \"seed\" must be a nonnegative integer");
      cfg.trainer.seed = v.get<std::uint64_t>();
    }
    flag("share_params_across_hops", cfg.network.share_params_across_hops);
    count("total_steps", cfg.trainer.total_steps);
    text("train_data", cfg.train_data);
    number("warmup_fraction", cfg.trainer.warmup_fraction);
    number("weight_decay", cfg.trainer.weight_decay);
    embedding_mode_from(cfg.embedding_mode);  // validate the name early
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
    return from_json(doc);
  }
};

namespace detail {

// GSAMN_SEED, when set, wins over every other seed source.
inline bool seed_from_env(std::uint64_t& out) {
  const char* raw = std::getenv("GSAMN_SEED");
  if (raw == nullptr || *raw == '\0') return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0')
    throw ConfigError(std::string("GSAMN_SEED must be an unsigned integer, got \"") + raw + "\"");
  out = static_cast<std::uint64_t>(v);
  return true;
}

inline std::size_t parse_neg_ratio(const std::string& text) {
  if (text == "paper") return 16;  // the source corpus' aggregate ratio
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0')
    throw ConfigError("--neg-ratio must be a nonnegative integer or \"paper\", got \"" + text +
                      "\"");
  return static_cast<std::size_t>(v);
}

inline Vocab vocab_from_examples(const std::vector<QAExample>& examples) {
  std::vector<std::string> texts;
  texts.reserve(examples.size() * 2);
  for (const auto& ex : examples) {
    texts.push_back(ex.question);
    texts.push_back(ex.answer);
  }
  return Vocab::from_texts(texts);
}

// Resolve the starting parameters for a training run: a checkpoint to resume
// or transfer from, a word-vector file, or a fresh seeded initialization over
// the training split's vocabulary.
inline Model initial_model(const RunConfig& cfg, const std::vector<QAExample>& train_examples,
                           const std::string& init_checkpoint, bool remap_vocab) {
  const EmbeddingMode mode = embedding_mode_from(cfg.embedding_mode);
  if (mode == EmbeddingMode::random_trainable && !cfg.embedding_file.empty())
    throw ConfigError("embedding_file is set but embedding_mode is random_trainable");
  if (mode != EmbeddingMode::random_trainable && cfg.embedding_file.empty())
    throw ConfigError("embedding_mode " + cfg.embedding_mode + " needs an embedding_file");

  if (!init_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(init_checkpoint);
    check_checkpoint_compatible(ckpt, cfg.network, cfg.max_seq_len);
    if (mode != EmbeddingMode::random_trainable) {
      // The run names its own vocabulary source; it must agree with the
      // checkpoint unless an explicit remap was requested.
      EmbeddingFile file = load_embedding_file(cfg.embedding_file);
      Rng rng(cfg.trainer.seed);
      EmbeddingProvider provider = EmbeddingProvider::from_file(file, mode, rng);
      const std::string file_hash = hash_hex(provider.vocab.hash());
      const std::string ckpt_hash = config_field<std::string>(ckpt.config, "vocab_hash");
      if (file_hash == ckpt_hash) return model_from_checkpoint(ckpt);
      if (!remap_vocab)
        throw CheckpointError(CheckpointError::Kind::vocab_mismatch,
                              "embedding file vocabulary (hash " + file_hash +
                                  ") differs from the checkpoint's (hash " + ckpt_hash +
                                  "); pass --remap-vocab to transfer anyway");
      Model base = Model::fresh(cfg.network, cfg.max_seq_len, std::move(provider), rng);
      return remap_from_checkpoint(base, ckpt);
    }
    return model_from_checkpoint(ckpt);
  }

  if (mode == EmbeddingMode::random_trainable)
    return Model::fresh_random(cfg.network, cfg.max_seq_len, vocab_from_examples(train_examples),
                               cfg.trainer.seed);
  EmbeddingFile file = load_embedding_file(cfg.embedding_file);
  Rng rng(cfg.trainer.seed);
  EmbeddingProvider provider = EmbeddingProvider::from_file(file, mode, rng);
  return Model::fresh(cfg.network, cfg.max_seq_len, std::move(provider), rng);
}

inline nlohmann::json metrics_row_json(const MetricsRow& row) {
  nlohmann::json doc;
  doc["dev_map"] = row.dev_map;
  doc["dev_mrr"] = row.dev_mrr;
  doc["epoch"] = row.epoch;
  doc["lr"] = row.lr;
  doc["step"] = row.step;
  doc["train_loss"] = row.train_loss;
  return doc;
}

}  // namespace detail

inline int cmd_build_corpus(const std::string& input, const std::string& output,
                            long long min_upvotes, const std::string& neg_ratio_text,
                            std::uint64_t seed) {
  const std::size_t ratio = detail::parse_neg_ratio(neg_ratio_text);
  detail::seed_from_env(seed);
  CorpusResult result = build_corpus(load_raw_jsonl(input), min_upvotes, ratio, seed);
  save_jsonl(result.examples, output);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  const CorpusStats& s = result.stats;
  std::cout << "questions: " << s.questions_out << " of " << s.questions_in
            << "  positives: " << s.positives << "  negatives: " << s.negatives
            << "  dropped(upvotes): " << s.dropped_upvotes
            << "  dropped(language): " << s.dropped_language
            << "  shortfall questions: " << s.shortfall_questions << "\n";
  std::cout << "wrote " << result.examples.size() << " examples to " << output << "\n";
  return kExitOk;
}

inline int cmd_train(const std::string& config_path, const std::string& train_path,
                     const std::string& dev_path, const std::string& init_checkpoint,
                     const std::string& run_dir, bool remap_vocab) {
  RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
  if (!train_path.empty()) cfg.train_data = train_path;
  if (!dev_path.empty()) cfg.dev_data = dev_path;
  if (cfg.train_data.empty())
    throw ConfigError("no training data (pass --train or set train_data in the config)");
  std::uint64_t env_seed = 0;
  if (detail::seed_from_env(env_seed)) cfg.trainer.seed = env_seed;
  cfg.network.check();
  cfg.trainer.check();

  std::vector<std::string> warnings;
  const std::vector<QAExample> train_examples = load_jsonl(cfg.train_data, &warnings);
  if (train_examples.empty()) throw DataError("training data is empty: " + cfg.train_data);
  std::vector<QAGroup> dev_groups;
  if (!cfg.dev_data.empty()) {
    EvalFilterResult filtered = filter_eval_groups(group(load_jsonl(cfg.dev_data, &warnings)));
    if (filtered.dropped_all_positive + filtered.dropped_all_negative > 0)
      std::cerr << "dev: dropped " << filtered.dropped_all_positive << " all-positive and "
                << filtered.dropped_all_negative << " all-negative questions\n";
    dev_groups = std::move(filtered.kept);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  Model model = detail::initial_model(cfg, train_examples, init_checkpoint, remap_vocab);
  TrainOutcome out = train(model, train_examples, dev_groups, cfg.trainer);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";

  std::filesystem::create_directories(run_dir);
  const std::filesystem::path dir(run_dir);
  {
    std::ofstream config_echo(dir / "config.json", std::ios::trunc);
    config_echo << cfg.to_json().dump(2) << "\n";
    std::ofstream metrics(dir / "metrics.jsonl", std::ios::trunc);
    for (const auto& row : out.log) metrics << detail::metrics_row_json(row).dump() << "\n";
    if (!config_echo || !metrics) throw DataError("cannot write into run directory " + run_dir);
  }
  save_checkpoint(checkpoint_from_model(out.model), (dir / "checkpoint.bin").string());
  save_checkpoint(checkpoint_from_model(out.best), (dir / "best.bin").string());

  for (const auto& row : out.log) {
    std::printf("epoch %-4zu step %-6zu lr %.3e  train_loss %.6f  dev_map %.4f  dev_mrr %.4f\n",
                row.epoch, row.step, row.lr, row.train_loss, row.dev_map, row.dev_mrr);
  }
  std::printf("best dev MAP %.6f; wrote %s and %s\n", out.best_dev_map,
              (dir / "checkpoint.bin").string().c_str(), (dir / "best.bin").string().c_str());
  return kExitOk;
}

inline int cmd_eval(const std::string& checkpoint_path, const std::string& data_path) {
  Model model = model_from_checkpoint(load_checkpoint(checkpoint_path));
  std::vector<std::string> warnings;
  EvalFilterResult filtered = filter_eval_groups(group(load_jsonl(data_path, &warnings)));
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (filtered.kept.empty())
    throw DataError("no usable evaluation questions in " + data_path +
                    " (need at least one positive and one negative per question)");
  RankingResult result = evaluate(model, filtered.kept);

  nlohmann::json summary;
  summary["map"] = result.map;
  summary["mrr"] = result.mrr;
  summary["num_questions"] = result.num_questions();
  std::cout << summary.dump() << "\n";

  std::printf("%-20s %10s %9s %9s %9s\n", "question", "candidates", "positives", "AP", "RR");
  for (const auto& q : result.per_question)
    std::printf("%-20s %10zu %9zu %9.4f %9.4f\n", q.question_id.c_str(), q.candidates,
                q.positives, q.ap, q.rr);
  std::printf("%-20s %10s %9s %9.4f %9.4f\n", "overall", "", "", result.map, result.mrr);
  return kExitOk;
}

inline int cmd_selfcheck(bool inject_fault) {
  const std::vector<CheckResult> checks = run_selfchecks(inject_fault);
  bool all_pass = true;
  std::printf("%-28s %12s %12s  %s\n", "check", "max error", "threshold", "status");
  for (const auto& c : checks) {
    std::printf("%-28s %12.3e %12.3e  %s\n", c.name.c_str(), c.max_error, c.threshold,
                c.pass ? "PASS" : "FAIL");
    all_pass = all_pass && c.pass;
  }
  if (!all_pass) {
    std::cerr << "selfcheck failed\n";
    return kExitNumeric;
  }
  std::printf("all %zu checks passed\n", checks.size());
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"gated self-attention memory network for answer selection"};
  app.require_subcommand(1);

  std::string corpus_input, corpus_output, neg_ratio = "5";
  long long min_upvotes = 2;
  std::uint64_t corpus_seed = 42;
  CLI::App* build = app.add_subcommand("build-corpus",
                                       "turn raw community QA records into a labeled dataset");
  build->add_option("--input", corpus_input, "raw JSONL (question/answer/upvotes[/lang])")
      ->required();
  build->add_option("--output", corpus_output, "labeled JSONL to write")->required();
  build->add_option("--min-upvotes", min_upvotes, "positives need at least this many upvotes");
  build->add_option("--neg-ratio", neg_ratio, "negatives per positive, or \"paper\" for 16");
  build->add_option("--seed", corpus_seed, "negative-sampling seed (GSAMN_SEED overrides)");

  std::string config_path, train_path, dev_path, init_checkpoint, run_dir;
  bool remap_vocab = false;
  CLI::App* tr = app.add_subcommand("train", "train (or fine-tune) a model");
  tr->add_option("--config", config_path, "run config JSON; defaults apply when omitted");
  tr->add_option("--train", train_path, "training JSONL (overrides config train_data)");
  tr->add_option("--dev", dev_path, "dev JSONL for per-epoch metrics");
  tr->add_option("--init-checkpoint", init_checkpoint, "start from this checkpoint");
  tr->add_option("--run-dir", run_dir, "output directory for config/metrics/checkpoints")
      ->required();
  tr->add_flag("--remap-vocab", remap_vocab,
               "allow transfer onto a different embedding-file vocabulary");

  std::string eval_checkpoint, eval_data;
  CLI::App* ev = app.add_subcommand("eval", "score a dataset with a checkpoint");
  ev->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  ev->add_option("--data", eval_data, "labeled JSONL to evaluate")->required();

  bool inject_fault = false;
  CLI::App* self = app.add_subcommand("selfcheck", "run the built-in verification battery");
  self->add_flag("--inject-fault", inject_fault)->group("");  // hidden negative control

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (build->parsed())
      return cmd_build_corpus(corpus_input, corpus_output, min_upvotes, neg_ratio, corpus_seed);
    if (tr->parsed())
      return cmd_train(config_path, train_path, dev_path, init_checkpoint, run_dir, remap_vocab);
    if (ev->parsed()) return cmd_eval(eval_checkpoint, eval_data);
    if (self->parsed()) return cmd_selfcheck(inject_fault);
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.kind == CheckpointError::Kind::vocab_mismatch ||
            e.kind == CheckpointError::Kind::config_mismatch)
               ? kExitUsage
               : kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {  // contract/dimension/etc.: caller-side misuse
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace gsamn
