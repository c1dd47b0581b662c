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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prosody/corpus.hpp"

namespace prosody {

struct ChunkPolicy {
  double max_seconds = 24.0;
  double frame_shift_ms = kFrameShiftMs;

  bool operator==(const ChunkPolicy&) const = default;
};

// Sentences [first_sentence, last_sentence] of one source utterance.
struct Chunk {
  std::string source_utterance_id;
  std::size_t utterance_index = 0;
  std::size_t first_sentence = 0;
  std::size_t last_sentence = 0;
  double total_seconds = 0.0;

  std::size_t sentence_count() const { return last_sentence - first_sentence + 1; }
  bool operator==(const Chunk&) const = default;
};

struct ChunkingResult {
  std::vector<Chunk> chunks;
  std::vector<std::string> warnings;
};

// Greedy left-to-right packing of sentence lengths (seconds). Returns the
// [first, last] index pairs. A sentence longer than the budget is emitted on
// its own and reported through `oversized`.
std::vector<std::pair<std::size_t, std::size_t>> pack_sentences(
    std::span<const double> seconds, double max_seconds, std::vector<std::size_t>* oversized = nullptr);

double sentence_seconds(const Sentence& sentence, const ChunkPolicy& policy);

// Chunks never cross utterance boundaries.
ChunkingResult chunk_corpus(const Corpus& corpus, const ChunkPolicy& policy);

// One chunk per sentence: the single-sentence training/synthesis regime.
std::vector<Chunk> sentence_chunks(const Corpus& corpus);

// Concatenates the chunk's sentences into a standalone utterance. Boundary
// pauses inside the chunk are kept. The id is "<source>_s<first>-<last>".
Utterance concatenate_chunk(const Corpus& corpus, const Chunk& chunk);

// utterance_id,first_sentence,last_sentence,seconds
void write_chunk_manifest(std::ostream& out, std::span<const Chunk> chunks);

}  // namespace prosody
