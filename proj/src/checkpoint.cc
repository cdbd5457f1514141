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

#include "msmatch/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "msmatch/error.h"

namespace msm {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "MSMATCH-CHECKPOINT 1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

json ConfigToJson(const ModelConfig& c) {
  json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["levels"] = c.levels;
  j["channels"] = c.channels;
  j["compare_hidden"] = c.compare_hidden;
  j["match_dim"] = c.match_dim;
  j["aggregate_hidden"] = c.aggregate_hidden;
  j["mode"] = std::string(ScoreModeName(c.mode));
  j["dropout"] = c.dropout;
  j["train_embeddings"] = c.train_embeddings;
  return j;
}

ModelConfig ConfigFromJson(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.levels = j.at("levels").get<int>();
  c.channels = j.at("channels").get<std::size_t>();
  c.compare_hidden = j.at("compare_hidden").get<std::size_t>();
  c.match_dim = j.at("match_dim").get<std::size_t>();
  c.aggregate_hidden = j.at("aggregate_hidden").get<std::size_t>();
  c.mode = ParseScoreMode(j.at("mode").get<std::string>());
  c.dropout = j.at("dropout").get<double>();
  c.train_embeddings = j.at("train_embeddings").get<bool>();
  return c;
}

}  // namespace

void SaveCheckpoint(const MatchingModel& model, const Vocabulary& vocab,
                    const std::filesystem::path& path) {
  std::vector<NamedTensor> tensors = model.Parameters();
  for (NamedTensor& b : model.Buffers()) tensors.push_back(std::move(b));

  json header;
  header["config"] = ConfigToJson(model.config());
  header["seed"] = model.config().seed;
  header["vocabulary"] = vocab.tokens();
  json table = json::array();
  for (const NamedTensor& t : tensors) {
    json entry;
    entry["name"] = t.name;
    entry["shape"] = t.tensor.shape();
    table.push_back(std::move(entry));
  }
  header["tensors"] = std::move(table);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write checkpoint " + path.string());
  out << kMagic << "\n" << header.dump() << "\n";
  for (const NamedTensor& t : tensors) {
    const auto data = t.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw FileError("write failed for checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kMagic) {
    throw FileError(path.string() + " is not a checkpoint file");
  }
  std::getline(in, header_line);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw FileError("corrupt checkpoint header in " + path.string() + ": " +
                    e.what());
  }
  try {
    ModelConfig config = ConfigFromJson(header.at("config"));
    config.seed = header.at("seed").get<std::uint64_t>();
    Vocabulary vocab;
    const auto tokens = header.at("vocabulary").get<std::vector<std::string>>();
    for (std::size_t i = 1; i < tokens.size(); ++i) vocab.Add(tokens[i]);
    if (vocab.size() != config.vocab_size) {
      throw FileError("checkpoint vocabulary size disagrees with config");
    }
    MatchingModel model(config);
    if (!config.train_embeddings) {
      model.SetEmbeddings(
          nn::Tensor::Zeros({config.vocab_size, config.embed_dim}), false);
    }
    std::vector<double> buffer;
    for (const json& entry : header.at("tensors")) {
      const auto shape = entry.at("shape").get<nn::Shape>();
      buffer.resize(nn::NumElements(shape));
      in.read(reinterpret_cast<char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(double)));
      if (!in) throw FileError("truncated checkpoint " + path.string());
      model.Assign(entry.at("name").get<std::string>(), buffer, shape);
    }
    return Checkpoint{std::move(model), std::move(vocab)};
  } catch (const json::exception& e) {
    throw FileError("malformed checkpoint header in " + path.string() + ": " +
                    e.what());
  }
}

}  // namespace msm
