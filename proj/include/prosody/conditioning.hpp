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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosody/corpus.hpp"
#include "prosody/nnet/checkpoint.hpp"
#include "prosody/nnet/ops.hpp"
#include "prosody/random.hpp"

namespace prosody {

// Fixed per-speaker unit vectors standing in for a speaker-verification
// embedding model. Not trained.
class SpeakerTable {
 public:
  SpeakerTable() = default;
  static SpeakerTable random(std::span<const std::string> speaker_ids, std::size_t dim,
                             std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(const std::string& id) const { return table_.count(id) != 0; }
  // Throws std::out_of_range for unknown speakers.
  std::span<const float> embedding(const std::string& id) const;
  std::vector<std::string> ids() const;

  // CSV rows: speaker_id,v0,...,v{dim-1}
  void save_csv(const std::filesystem::path& path) const;
  static SpeakerTable load_csv(const std::filesystem::path& path);

  bool operator==(const SpeakerTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<float>> table_;
};

// Whitespace split followed by greedy longest-prefix matching against a
// fixed vocabulary. Only the first sub-token of a word is ever used.
class SubTokenizer {
 public:
  static constexpr std::string_view kUnknown = "[UNK]";

  SubTokenizer() = default;
  SubTokenizer(std::vector<std::string> vocabulary, std::size_t max_piece);
  // Vocabulary = each word's leading max_piece characters.
  static SubTokenizer build(std::span<const std::string> words, std::size_t max_piece = 6);

  std::string first_subtoken(std::string_view word) const;
  // Row of `piece` in the vocabulary; the unknown token maps to size().
  std::size_t index(std::string_view piece) const;
  std::size_t size() const { return vocabulary_.size(); }
  std::size_t max_piece() const { return max_piece_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  std::vector<std::string> vocabulary_;  // sorted, unique
  std::size_t max_piece_ = 6;
};

enum class WordEmbeddingMode { frozen_hash, trainable_table };

std::string_view to_string(WordEmbeddingMode mode);
WordEmbeddingMode word_embedding_mode_from_string(std::string_view name);

// Stand-in for a contextual language-model embedder. frozen_hash gives every
// first sub-token a seeded unit vector; trainable_table starts from those same
// vectors and lets task gradients update them.
class WordEmbeddingProvider {
 public:
  WordEmbeddingProvider() = default;
  WordEmbeddingProvider(WordEmbeddingMode mode, std::size_t dim, SubTokenizer tokenizer,
                        std::uint64_t seed);

  WordEmbeddingMode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const SubTokenizer& tokenizer() const { return tokenizer_; }

  std::vector<float> hashed_embedding(std::string_view subtoken) const;
  // [words x dim]; rows track gradients into the table in trainable mode.
  nn::Tensor embed_words(std::span<const std::string> words) const;

  const nn::Tensor& table() const { return table_; }
  void collect(const std::string& prefix, nn::ParameterList& out) const;

 private:
  WordEmbeddingMode mode_ = WordEmbeddingMode::frozen_hash;
  std::size_t dim_ = 0;
  SubTokenizer tokenizer_;
  std::uint64_t seed_ = 0;
  nn::Tensor table_;
};

// For each phoneme, the index of the word containing it, or -1 for pauses.
// Throws std::invalid_argument for a non-pause phoneme outside every span.
std::vector<int> word_index_per_phoneme(std::span<const Word> words,
                                        std::span<const std::string> symbols);

// [phonemes x dim]: row i is the embedding of the word containing phoneme i;
// pause rows are zero. Word spans index into `symbols`.
nn::Tensor align_word_embeddings(std::span<const Word> words, std::span<const std::string> symbols,
                                 const WordEmbeddingProvider& provider);

struct ConditioningConfig {
  bool use_speaker = false;
  bool use_word_embeddings = false;
  std::size_t speaker_dim = 256;
  std::size_t word_dim = 768;

  std::size_t input_dim(std::size_t model_dim) const {
    return model_dim + (use_speaker ? speaker_dim : 0) + (use_word_embeddings ? word_dim : 0);
  }
  bool operator==(const ConditioningConfig&) const = default;
};

struct ConditioningParams {
  nn::Tensor weight;  // [input_dim x model_dim]
  nn::Tensor bias;

  static ConditioningParams init(const ConditioningConfig& config, std::size_t model_dim, Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

// ReLU(Linear([phoneme | speaker broadcast | word])) back to model_dim.
// Inputs the config does not ask for are ignored; required ones must be set.
nn::Tensor attach_conditioning(const nn::Tensor& phoneme_encodings,
                               std::span<const float> speaker_embedding,
                               const nn::Tensor& word_matrix, const ConditioningConfig& config,
                               const ConditioningParams& params);

// Phoneme i is repeated durations[i] times. Negative durations throw.
nn::Tensor length_regulate(const nn::Tensor& encodings, std::span<const int> durations);

}  // namespace prosody
