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

#include "prosody/chunker.hpp"

#include <cstdio>
#include <stdexcept>

namespace prosody {

std::vector<std::pair<std::size_t, std::size_t>> pack_sentences(
    std::span<const double> seconds, double max_seconds, std::vector<std::size_t>* oversized) {
  if (!(max_seconds > 0.0)) throw std::invalid_argument("max_seconds must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  double current = 0.0;
  for (std::size_t i = 0; i < seconds.size(); ++i) {
    if (seconds[i] > max_seconds && oversized) oversized->push_back(i);
    if (!groups.empty() && current + seconds[i] <= max_seconds) {
      groups.back().second = i;
      current += seconds[i];
    } else {
      groups.emplace_back(i, i);
      current = seconds[i];
    }
  }
  return groups;
}

double sentence_seconds(const Sentence& sentence, const ChunkPolicy& policy) {
  return sentence.total_frames() * policy.frame_shift_ms / 1000.0;
}

ChunkingResult chunk_corpus(const Corpus& corpus, const ChunkPolicy& policy) {
  ChunkingResult result;
  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const Utterance& utt = corpus.utterances[u];
    std::vector<double> seconds;
    for (const auto& s : utt.sentences) seconds.push_back(sentence_seconds(s, policy));
    std::vector<std::size_t> oversized;
    for (const auto& [first, last] : pack_sentences(seconds, policy.max_seconds, &oversized)) {
      double total = 0.0;
      for (std::size_t i = first; i <= last; ++i) total += seconds[i];
      result.chunks.push_back({utt.id, u, first, last, total});
    }
    for (std::size_t i : oversized) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "utterance %s sentence %zu lasts %.3f s, over the %.3f s budget",
                    utt.id.c_str(), i, seconds[i], policy.max_seconds);
      result.warnings.emplace_back(msg);
    }
  }
  return result;
}

std::vector<Chunk> sentence_chunks(const Corpus& corpus) {
  const ChunkPolicy policy;
  std::vector<Chunk> chunks;
  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const Utterance& utt = corpus.utterances[u];
    for (std::size_t s = 0; s < utt.sentences.size(); ++s) {
      chunks.push_back({utt.id, u, s, s, sentence_seconds(utt.sentences[s], policy)});
    }
  }
  return chunks;
}

Utterance concatenate_chunk(const Corpus& corpus, const Chunk& chunk) {
  if (chunk.utterance_index >= corpus.utterances.size()) {
    throw std::out_of_range("chunk refers to utterance " + std::to_string(chunk.utterance_index) +
                            " of " + std::to_string(corpus.utterances.size()));
  }
  const Utterance& src = corpus.utterances[chunk.utterance_index];
  if (chunk.first_sentence > chunk.last_sentence || chunk.last_sentence >= src.sentences.size()) {
    throw std::out_of_range("chunk sentences [" + std::to_string(chunk.first_sentence) + ", " +
                            std::to_string(chunk.last_sentence) + "] out of range for " + src.id);
  }
  std::size_t frame_offset = 0;
  for (std::size_t s = 0; s < chunk.first_sentence; ++s) {
    frame_offset += static_cast<std::size_t>(src.sentences[s].total_frames());
  }
  Utterance out;
  out.id = src.id + "_s" + std::to_string(chunk.first_sentence) + "-" + std::to_string(chunk.last_sentence);
  out.speaker_id = src.speaker_id;
  std::size_t frames = 0;
  for (std::size_t s = chunk.first_sentence; s <= chunk.last_sentence; ++s) {
    out.sentences.push_back(src.sentences[s]);
    frames += static_cast<std::size_t>(src.sentences[s].total_frames());
  }
  if (!src.mel.values.empty()) {
    const auto begin = src.mel.values.begin() + static_cast<std::ptrdiff_t>(frame_offset * kMelBands);
    out.mel.values.assign(begin, begin + static_cast<std::ptrdiff_t>(frames * kMelBands));
    out.mel.frames = frames;
  }
  return out;
}

void write_chunk_manifest(std::ostream& out, std::span<const Chunk> chunks) {
  out << "utterance_id,first_sentence,last_sentence,seconds\n";
  char seconds[32];
  for (const auto& c : chunks) {
    std::snprintf(seconds, sizeof seconds, "%.4f", c.total_seconds);
    out << c.source_utterance_id << ',' << c.first_sentence << ',' << c.last_sentence << ','
        << seconds << '\n';
  }
}

}  // namespace prosody
