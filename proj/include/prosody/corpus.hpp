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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace prosody {

inline constexpr std::string_view kPauseIntra = "PAU_INTRA";
inline constexpr std::string_view kPauseInter = "PAU_INTER";
inline constexpr std::size_t kMelBands = 80;
inline constexpr double kFrameShiftMs = 12.5;

inline bool is_pause(std::string_view symbol) {
  return symbol == kPauseIntra || symbol == kPauseInter;
}

enum class SentenceKind { declarative, wh_question, yn_question, topic_shift };
inline constexpr std::size_t kSentenceKindCount = 4;

std::string_view to_string(SentenceKind kind);
SentenceKind sentence_kind_from_string(std::string_view name);

struct PhonemeToken {
  std::string symbol;
  int duration_frames = 0;

  bool operator==(const PhonemeToken&) const = default;
};

// Phonemes [begin, end) of the enclosing sentence.
struct Word {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Word&) const = default;
};

struct Sentence {
  std::vector<Word> words;
  std::vector<PhonemeToken> phonemes;
  SentenceKind kind = SentenceKind::declarative;

  int total_frames() const;
  bool operator==(const Sentence&) const = default;
};

// Row-major [frames x 80].
struct MelSpectrogram {
  std::size_t frames = 0;
  std::vector<float> values;

  std::size_t bands() const { return kMelBands; }
  bool operator==(const MelSpectrogram&) const = default;
};

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::vector<Sentence> sentences;
  MelSpectrogram mel;

  int total_frames() const;
  std::size_t phoneme_count() const;
  bool operator==(const Utterance&) const = default;
};

struct Corpus {
  std::vector<Utterance> utterances;

  bool operator==(const Corpus&) const = default;
};

struct CorpusSpec {
  int num_speakers = 3;
  int num_utterances = 120;
  int min_sentences = 2;
  int max_sentences = 5;
  int phoneme_inventory_size = 40;
  std::uint64_t seed = 1;
  double context_coupling = 1.0;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus record; `line` is 1-based.
class CorpusFormatError : public std::runtime_error {
 public:
  CorpusFormatError(std::size_t line, std::string field, const std::string& detail);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// Throws ValidationError when a structural invariant is broken: word spans
// contiguous and disjoint, pauses outside words, one PAU_INTER at most and
// only at sentence end, mel frames == duration sum.
void validate_utterance(const Utterance& utterance);

// Non-pause symbols "p0".."p{size-1}" followed by the two pause symbols.
std::vector<std::string> standard_inventory(int size);

Corpus generate_corpus(const CorpusSpec& spec);

// Writes the JSON Lines index to `path` and one mel binary per utterance
// into "<stem>_mel/" next to it. mel_path in each record is relative to the
// index file's directory.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

// Mel binary: u32 frame count, u32 band count, then little-endian f32
// row-major data.
void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram read_mel(const std::filesystem::path& path);

}  // namespace prosody
