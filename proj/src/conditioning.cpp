// Copyright 2026 The Prosody Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prosody/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "prosody/encoder.hpp"

namespace prosody {

namespace {

std::vector<float> random_unit_vector(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    const double g = rng.normal();
    x = static_cast<float>(g);
    norm += g * g;
  }
  const double inv = norm > 0.0 ? 1.0 / std::sqrt(norm) : 0.0;
  for (auto& x : v) x = static_cast<float>(x * inv);
  return v;
}

}  // namespace

SpeakerTable SpeakerTable::random(std::span<const std::string> speaker_ids, std::size_t dim,
                                  std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("speaker embedding dim must be positive");
  SpeakerTable table;
  table.dim_ = dim;
  for (const auto& id : speaker_ids) {
    table.table_[id] = random_unit_vector(dim, derive_seed(seed, fnv1a64(id)));
  }
  return table;
}

std::span<const float> SpeakerTable::embedding(const std::string& id) const {
  auto it = table_.find(id);
  if (it == table_.end()) throw std::out_of_range("unknown speaker '" + id + "'");
  return it->second;
}

std::vector<std::string> SpeakerTable::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : table_) out.push_back(id);
  return out;
}

void SpeakerTable::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[32];
  for (const auto& [id, vec] : table_) {
    out << id;
    for (float v : vec) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
      out << buf;
    }
    out << '\n';
  }
}

SpeakerTable SpeakerTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open speaker table " + path.string());
  SpeakerTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, cell;
    std::getline(fields, id, ',');
    std::vector<float> vec;
    double norm = 0.0;
    while (std::getline(fields, cell, ',')) {
      try {
        vec.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
      norm += static_cast<double>(vec.back()) * vec.back();
    }
    if (vec.empty() || (table.dim_ != 0 && vec.size() != table.dim_)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": inconsistent embedding dim");
    }
    if (std::fabs(std::sqrt(norm) - 1.0) > 1e-4) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": embedding is not unit norm");
    }
    table.dim_ = vec.size();
    table.table_[id] = std::move(vec);
  }
  return table;
}

SubTokenizer::SubTokenizer(std::vector<std::string> vocabulary, std::size_t max_piece)
    : vocabulary_(std::move(vocabulary)), max_piece_(max_piece) {
  std::sort(vocabulary_.begin(), vocabulary_.end());
  vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
}

SubTokenizer SubTokenizer::build(std::span<const std::string> words, std::size_t max_piece) {
  std::vector<std::string> vocab;
  for (const auto& w : words) {
    if (!w.empty()) vocab.push_back(w.substr(0, max_piece));
  }
  return SubTokenizer(std::move(vocab), max_piece);
}

std::string SubTokenizer::first_subtoken(std::string_view word) const {
  const auto begin = word.find_first_not_of(" \t\n\r");
  if (begin == std::string_view::npos) return std::string(kUnknown);
  word.remove_prefix(begin);
  word = word.substr(0, word.find_first_of(" \t\n\r"));
  for (std::size_t len = std::min(word.size(), max_piece_); len > 0; --len) {
    const std::string_view piece = word.substr(0, len);
    if (std::binary_search(vocabulary_.begin(), vocabulary_.end(), piece)) return std::string(piece);
  }
  return std::string(kUnknown);
}

std::size_t SubTokenizer::index(std::string_view piece) const {
  auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), piece);
  if (it != vocabulary_.end() && *it == piece) return static_cast<std::size_t>(it - vocabulary_.begin());
  return vocabulary_.size();
}

std::string_view to_string(WordEmbeddingMode mode) {
  return mode == WordEmbeddingMode::frozen_hash ? "frozen_hash" : "trainable_table";
}

WordEmbeddingMode word_embedding_mode_from_string(std::string_view name) {
  if (name == "frozen_hash") return WordEmbeddingMode::frozen_hash;
  if (name == "trainable_table") return WordEmbeddingMode::trainable_table;
  throw std::invalid_argument("unknown word embedding mode '" + std::string(name) + "'");
}

WordEmbeddingProvider::WordEmbeddingProvider(WordEmbeddingMode mode, std::size_t dim,
                                             SubTokenizer tokenizer, std::uint64_t seed)
    : mode_(mode), dim_(dim), tokenizer_(std::move(tokenizer)), seed_(seed) {
  if (dim_ == 0) throw std::invalid_argument("word embedding dim must be positive");
  if (mode_ == WordEmbeddingMode::trainable_table) {
    const std::size_t rows = tokenizer_.size() + 1;
    std::vector<float> data;
    data.reserve(rows * dim_);
    for (const auto& piece : tokenizer_.vocabulary()) {
      const auto v = hashed_embedding(piece);
      data.insert(data.end(), v.begin(), v.end());
    }
    const auto unk = hashed_embedding(SubTokenizer::kUnknown);
    data.insert(data.end(), unk.begin(), unk.end());
    table_ = nn::Tensor::from_data({rows, dim_}, std::move(data), true);
  }
}

std::vector<float> WordEmbeddingProvider::hashed_embedding(std::string_view subtoken) const {
  return random_unit_vector(dim_, derive_seed(seed_, fnv1a64(subtoken)));
}

nn::Tensor WordEmbeddingProvider::embed_words(std::span<const std::string> words) const {
  if (mode_ == WordEmbeddingMode::trainable_table) {
    std::vector<int> rows;
    rows.reserve(words.size());
    for (const auto& w : words) rows.push_back(static_cast<int>(tokenizer_.index(tokenizer_.first_subtoken(w))));
    return nn::gather_rows(table_, rows);
  }
  std::vector<float> data;
  data.reserve(words.size() * dim_);
  for (const auto& w : words) {
    const auto v = hashed_embedding(tokenizer_.first_subtoken(w));
    data.insert(data.end(), v.begin(), v.end());
  }
  return nn::Tensor::from_data({words.size(), dim_}, std::move(data));
}

void WordEmbeddingProvider::collect(const std::string& prefix, nn::ParameterList& out) const {
  if (table_.defined()) out.push_back({prefix + "word_table", table_});
}

std::vector<int> word_index_per_phoneme(std::span<const Word> words,
                                        std::span<const std::string> symbols) {
  std::vector<int> owner(symbols.size(), -1);
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].begin > words[w].end || words[w].end > symbols.size()) {
      throw std::invalid_argument("word " + std::to_string(w) + " span exceeds the phoneme sequence");
    }
    for (std::size_t i = words[w].begin; i < words[w].end; ++i) owner[i] = static_cast<int>(w);
  }
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (is_pause(symbols[i])) {
      owner[i] = -1;
    } else if (owner[i] < 0) {
      throw std::invalid_argument("phoneme " + std::to_string(i) + " (" + symbols[i] +
                                  ") is outside every word span");
    }
  }
  return owner;
}

nn::Tensor align_word_embeddings(std::span<const Word> words, std::span<const std::string> symbols,
                                 const WordEmbeddingProvider& provider) {
  const auto owner = word_index_per_phoneme(words, symbols);
  std::vector<std::string> texts;
  texts.reserve(words.size());
  for (const auto& w : words) texts.push_back(w.text);
  if (texts.empty()) return nn::Tensor::zeros({symbols.size(), provider.dim()});
  return nn::gather_rows(provider.embed_words(texts), owner);
}

ConditioningParams ConditioningParams::init(const ConditioningConfig& config, std::size_t model_dim,
                                            Rng& rng) {
  return {glorot_uniform({config.input_dim(model_dim), model_dim}, rng), zeros_parameter({model_dim})};
}

void ConditioningParams::collect(const std::string& prefix, nn::ParameterList& out) const {
  out.push_back({prefix + "cond.w", weight});
  out.push_back({prefix + "cond.b", bias});
}

nn::Tensor attach_conditioning(const nn::Tensor& phoneme_encodings,
                               std::span<const float> speaker_embedding,
                               const nn::Tensor& word_matrix, const ConditioningConfig& config,
                               const ConditioningParams& params) {
  const std::size_t n = phoneme_encodings.rows();
  std::vector<nn::Tensor> parts{phoneme_encodings};
  if (config.use_speaker) {
    if (speaker_embedding.size() != config.speaker_dim) {
      throw std::invalid_argument("attach_conditioning: speaker embedding of dim " +
                                  std::to_string(config.speaker_dim) + " required, got " +
                                  std::to_string(speaker_embedding.size()));
    }
    std::vector<float> tiled;
    tiled.reserve(n * speaker_embedding.size());
    for (std::size_t r = 0; r < n; ++r) tiled.insert(tiled.end(), speaker_embedding.begin(), speaker_embedding.end());
    parts.push_back(nn::Tensor::from_data({n, config.speaker_dim}, std::move(tiled)));
  }
  if (config.use_word_embeddings) {
    if (!word_matrix.defined() || word_matrix.rank() != 2 || word_matrix.rows() != n ||
        word_matrix.cols() != config.word_dim) {
      throw std::invalid_argument("attach_conditioning: word matrix [" + std::to_string(n) + " x " +
                                  std::to_string(config.word_dim) + "] required");
    }
    parts.push_back(word_matrix);
  }
  const nn::Tensor joined = parts.size() == 1 ? phoneme_encodings : nn::concat_cols(parts);
  return nn::relu(nn::linear(joined, params.weight, params.bias));
}

nn::Tensor length_regulate(const nn::Tensor& encodings, std::span<const int> durations) {
  for (int d : durations) {
    if (d < 0) throw std::invalid_argument("length_regulate: negative duration " + std::to_string(d));
  }
  return nn::repeat_rows(encodings, durations);
}

}  // namespace prosody
