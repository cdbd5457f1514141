/*
 * Copyright 2026 The msmatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: synth, train, eval, rank and gradcheck.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "msmatch/adversarial.h"
#include "msmatch/checkpoint.h"
#include "msmatch/corpus.h"
#include "msmatch/embeddings.h"
#include "msmatch/error.h"
#include "msmatch/eval.h"
#include "msmatch/gradcheck_suite.h"
#include "msmatch/semeval.h"
#include "msmatch/synth.h"
#include "msmatch/tensor.h"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

struct Options {
  // synth
  msm::SynthConfig synth;
  // shared
  std::string corpus;
  std::string corpus_format = "jsonl";
  std::string out;
  std::uint64_t seed = 1;
  // train
  std::string embeddings;
  std::string mode = "multi";
  std::string adversarial = "on";
  std::string sampling = "sample";
  msm::ModelConfig model;
  msm::TrainConfig train;
  // eval / rank
  std::string checkpoint;
  std::string split = "test";
  std::string predictions;
  std::string thread;
  // gradcheck
  std::string inject_fault;
};

bool ParseOnOff(const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw msm::ConfigError("expected on or off, got \"" + value + "\"");
}

msm::Corpus LoadCorpus(const Options& o) {
  if (o.corpus_format == "jsonl") return msm::LoadJsonl(o.corpus);
  if (o.corpus_format == "semeval") {
    return msm::ImportSemevalXml(o.corpus, msm::ParseSplit(o.split));
  }
  throw msm::ConfigError("unknown corpus format \"" + o.corpus_format + "\"");
}

int RunSynth(const Options& o) {
  msm::SynthConfig config = o.synth;
  config.seed = o.seed;
  const msm::SynthCorpus synth = msm::SynthGenerate(config);
  msm::SaveJsonl(synth.corpus, o.out);
  std::printf("wrote %zu threads to %s\n", synth.corpus.threads.size(),
              o.out.c_str());
  return kOk;
}

int RunTrain(const Options& o, const std::string& archived_config) {
  msm::ModelConfig model = o.model;
  model.mode = msm::ParseScoreMode(o.mode);
  model.seed = o.seed;
  msm::TrainConfig train = o.train;
  train.adversarial = ParseOnOff(o.adversarial);
  if (o.sampling != "sample" && o.sampling != "topk") {
    throw msm::ConfigError("sampling must be sample or topk");
  }
  train.sampling = o.sampling == "topk" ? msm::SamplingMode::kTopK
                                        : msm::SamplingMode::kStochastic;
  train.seed = o.seed;
  // Validate before any data or model state is touched.
  {
    msm::ModelConfig probe = model;
    probe.vocab_size = 1;
    probe.Validate();
    train.Validate();
  }

  const msm::Corpus corpus = LoadCorpus(o);
  std::optional<msm::nn::Tensor> table;
  if (!o.embeddings.empty()) {
    msm::nn::Rng rng(o.seed);
    msm::EmbeddingLoad load =
        msm::LoadEmbeddings(o.embeddings, corpus.vocab, model.embed_dim, rng);
    std::fprintf(stderr, "embedding coverage %.4f (%zu tokens)\n",
                 load.coverage, load.matched);
    table = std::move(load.table);
  }

  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  {
    std::ofstream config_file(dir / "config.ini", std::ios::binary);
    config_file << archived_config;
    if (!config_file)
      throw msm::FileError("cannot write " + (dir / "config.ini").string());
  }
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  if (!metrics)
    throw msm::FileError("cannot write " + (dir / "metrics.jsonl").string());

  msm::TrainResult result =
      msm::Train(corpus, model, train, table, [&](const msm::EpochLog& log) {
        const std::string line = log.ToJson();
        metrics << line << '\n';
        metrics.flush();
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
      });
  msm::SaveCheckpoint(result.discriminator, corpus.vocab,
                      dir / "discriminator.ckpt");
  msm::SaveCheckpoint(result.generator, corpus.vocab, dir / "generator.ckpt");
  return kOk;
}

// Loads a checkpoint and the corpus re-expressed in its vocabulary.
std::pair<msm::Checkpoint, msm::Corpus> LoadForScoring(const Options& o) {
  msm::Checkpoint ckpt = msm::LoadCheckpoint(o.checkpoint);
  msm::Corpus corpus = msm::RemapToVocabulary(LoadCorpus(o), ckpt.vocab);
  return {std::move(ckpt), std::move(corpus)};
}

int RunEval(const Options& o) {
  const msm::Split split = msm::ParseSplit(o.split);
  auto [ckpt, corpus] = LoadForScoring(o);
  std::vector<msm::RankedList> ranked;
  const msm::Metrics m = msm::EvaluateSplit(corpus, split, ckpt.model, &ranked);
  if (!o.predictions.empty()) msm::WritePredictions(ranked, o.predictions);
  std::printf("split %s threads %zu\n",
              std::string(msm::SplitName(split)).c_str(), m.threads);
  std::printf("MAP@10 %.2f\n", 100.0 * m.map);
  std::printf("MRR@10 %.2f\n", 100.0 * m.mrr);
  return kOk;
}

int RunRank(const Options& o) {
  auto [ckpt, corpus] = LoadForScoring(o);
  const msm::QuestionThread& thread =
      corpus.threads[corpus.FindThread(o.thread)];
  msm::FormatPredictions(msm::Rank(thread, ckpt.model), std::cout);
  return kOk;
}

int RunGradcheck(const Options& o) {
  if (!o.inject_fault.empty()) msm::nn::SetBackwardFault(o.inject_fault);
  const msm::GradCheckReport report = msm::RunGradCheckSuite(o.seed);
  for (const msm::GradCheckEntry& e : report.entries) {
    std::printf("%-32s %.3e %s\n", e.name.c_str(), e.max_error,
                e.passed ? "ok" : "FAIL");
  }
  std::printf("%s (tolerance %.0e)\n", report.passed() ? "PASS" : "FAIL",
              msm::kGradCheckTolerance);
  return report.passed() ? kOk : kDivergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial multi-scale answer selection"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read options from an INI/TOML file (before the subcommand)");
  Options o;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  };
  auto add_corpus = [&](CLI::App* cmd) {
    cmd->add_option("--corpus", o.corpus, "Corpus file")->required();
    cmd->add_option("--corpus-format", o.corpus_format, "jsonl or semeval")
        ->capture_default_str();
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--out", o.out, "Output JSONL path")->required();
  add_seed(synth);
  synth->add_option("--threads", o.synth.num_threads)->capture_default_str();
  synth->add_option("--answers", o.synth.answers_per_thread)
      ->capture_default_str();
  synth->add_option("--topics", o.synth.topics)->capture_default_str();
  synth->add_option("--noise-topics", o.synth.noise_topics)
      ->capture_default_str();
  synth->add_option("--vocab-per-topic", o.synth.vocab_per_topic)
      ->capture_default_str();
  synth->add_option("--dev-threads", o.synth.dev_threads)
      ->capture_default_str();
  synth->add_option("--test-threads", o.synth.test_threads)
      ->capture_default_str();
  synth->add_option("--relevant-fraction", o.synth.relevant_fraction)
      ->capture_default_str();
  synth->add_option("--confusable-fraction", o.synth.confusable_fraction)
      ->capture_default_str();

  CLI::App* train =
      app.add_subcommand("train", "Train discriminator and generator");
  add_corpus(train);
  add_seed(train);
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--embeddings", o.embeddings, "GloVe-style text file");
  train->add_option("--mode", o.mode, "word, multi or full")
      ->check(CLI::IsMember({"word", "multi", "full"}))
      ->capture_default_str();
  train->add_option("--adversarial", o.adversarial, "on or off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train->add_option("--sampling", o.sampling, "sample or topk")
      ->check(CLI::IsMember({"sample", "topk"}))
      ->capture_default_str();
  train->add_option("--epochs", o.train.epochs)->capture_default_str();
  train->add_option("--pool-size", o.train.pool_size)->capture_default_str();
  train->add_option("--neg-samples", o.train.neg_samples)
      ->capture_default_str();
  train->add_option("--batch-size", o.train.batch_size)->capture_default_str();
  train->add_option("--lr", o.train.learning_rate)->capture_default_str();
  train->add_option("--lr-decay", o.train.lr_decay)->capture_default_str();
  train->add_option("--lr-decay-every", o.train.lr_decay_every)
      ->capture_default_str();
  train->add_option("--l2", o.train.l2)->capture_default_str();
  train->add_option("--d-epochs", o.train.discriminator_epochs)
      ->capture_default_str();
  train->add_option("--g-epochs", o.train.generator_epochs)
      ->capture_default_str();
  train->add_flag("--debug-checks", o.train.debug_checks);
  train->add_option("--embed-dim", o.model.embed_dim)->capture_default_str();
  train->add_option("--levels", o.model.levels)->capture_default_str();
  train->add_option("--channels", o.model.channels)->capture_default_str();
  train->add_option("--compare-hidden", o.model.compare_hidden)
      ->capture_default_str();
  train->add_option("--match-dim", o.model.match_dim)->capture_default_str();
  train->add_option("--aggregate-hidden", o.model.aggregate_hidden)
      ->capture_default_str();
  train->add_option("--dropout", o.model.dropout)->capture_default_str();
  train->add_option("--train-embeddings", o.model.train_embeddings)
      ->capture_default_str();
  train->add_option("--split", o.split, "Split read from a SemEval file")
      ->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint)->required();
  add_corpus(eval);
  eval->add_option("--split", o.split, "train, dev or test")
      ->capture_default_str();
  eval->add_option("--predictions", o.predictions, "Prediction file to write");

  CLI::App* rank = app.add_subcommand("rank", "Rank one thread's answers");
  rank->add_option("--checkpoint", o.checkpoint)->required();
  add_corpus(rank);
  rank->add_option("--thread", o.thread)->required();
  rank->add_option("--split", o.split, "Split read from a SemEval file")
      ->capture_default_str();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Verify gradients");
  add_seed(gradcheck);
  gradcheck->add_option("--inject-fault", o.inject_fault,
                        "Corrupt the backward rule of this primitive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return RunSynth(o);
    if (*train) {
      return RunTrain(o, "[train]\n" + train->config_to_str(true, false));
    }
    if (*eval) return RunEval(o);
    if (*rank) return RunRank(o);
    if (*gradcheck) return RunGradcheck(o);
  } catch (const msm::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const msm::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kDivergence;
  } catch (const msm::NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kDivergence;
  } catch (const msm::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "file error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
