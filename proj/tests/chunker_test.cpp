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

#include <gtest/gtest.h>

#include <sstream>

#include "prosody/chunker.hpp"
#include "support/test_support.hpp"

namespace prosody {
namespace {

using Groups = std::vector<std::pair<std::size_t, std::size_t>>;

TEST(PackSentences, GreedyExamples) {
  const std::vector<double> three_tens{10, 10, 10};
  EXPECT_EQ(pack_sentences(three_tens, 24), (Groups{{0, 1}, {2, 2}}));
  const std::vector<double> fives{5, 5, 5, 5, 5};
  EXPECT_EQ(pack_sentences(fives, 24), (Groups{{0, 3}, {4, 4}}));
  const std::vector<double> exact{12, 12, 1};
  EXPECT_EQ(pack_sentences(exact, 24), (Groups{{0, 1}, {2, 2}}));
  EXPECT_TRUE(pack_sentences({}, 24).empty());
  EXPECT_THROW(pack_sentences(fives, 0.0), std::invalid_argument);
}

TEST(PackSentences, OversizedSentenceStandsAloneWithWarning) {
  const std::vector<double> seconds{30};
  std::vector<std::size_t> oversized;
  EXPECT_EQ(pack_sentences(seconds, 24, &oversized), (Groups{{0, 0}}));
  EXPECT_EQ(oversized, (std::vector<std::size_t>{0}));

  const std::vector<double> mixed{3, 30, 3, 3};
  oversized.clear();
  EXPECT_EQ(pack_sentences(mixed, 24, &oversized), (Groups{{0, 0}, {1, 1}, {2, 3}}));
  EXPECT_EQ(oversized, (std::vector<std::size_t>{1}));
}

// Partition, order, budget and greedy-maximality laws on random inputs.
TEST(PackSentences, LawsHoldOnRandomInputs) {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = rng.uniform_int(0, 12);
    const double budget = rng.uniform(1.0, 30.0);
    std::vector<double> seconds;
    for (int i = 0; i < n; ++i) seconds.push_back(rng.uniform(0.1, 35.0));
    std::vector<std::size_t> oversized;
    const auto groups = pack_sentences(seconds, budget, &oversized);
    std::size_t expected_first = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto [first, last] = groups[g];
      ASSERT_EQ(first, expected_first);
      ASSERT_LE(first, last);
      expected_first = last + 1;
      double total = 0;
      for (std::size_t i = first; i <= last; ++i) total += seconds[i];
      if (last > first) ASSERT_LE(total, budget);
      if (g + 1 < groups.size()) ASSERT_GT(total + seconds[last + 1], budget);
    }
    ASSERT_EQ(expected_first, seconds.size());
    for (std::size_t i : oversized) ASSERT_GT(seconds[i], budget);
  }
}

TEST(ChunkCorpus, PartitionAndBudgetOverRandomCorpora) {
  Rng rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    CorpusSpec spec;
    spec.num_utterances = 1 + rng.uniform_int(0, 2);
    spec.min_sentences = 1;
    spec.max_sentences = 1 + rng.uniform_int(0, 6);
    spec.seed = static_cast<std::uint64_t>(trial);
    const Corpus corpus = generate_corpus(spec);
    const ChunkPolicy policy{rng.uniform(1.0, 30.0), kFrameShiftMs};
    const auto result = chunk_corpus(corpus, policy);
    std::size_t u = 0, next_sentence = 0;
    for (const auto& c : result.chunks) {
      if (c.utterance_index != u) {
        ASSERT_EQ(next_sentence, corpus.utterances[u].sentences.size());
        ASSERT_EQ(c.utterance_index, u + 1);
        u = c.utterance_index;
        next_sentence = 0;
      }
      ASSERT_EQ(c.source_utterance_id, corpus.utterances[u].id);
      ASSERT_EQ(c.first_sentence, next_sentence);
      next_sentence = c.last_sentence + 1;
      if (c.sentence_count() > 1) ASSERT_LE(c.total_seconds, policy.max_seconds);
      const Utterance joined = concatenate_chunk(corpus, c);
      ASSERT_NEAR(joined.total_frames() * kFrameShiftMs / 1000.0, c.total_seconds, 1e-9);
    }
    ASSERT_EQ(u + 1, corpus.utterances.size());
    ASSERT_EQ(next_sentence, corpus.utterances[u].sentences.size());
  }
}

TEST(ChunkCorpus, WarnsForOverlongSentence) {
  CorpusSpec spec;
  spec.num_utterances = 2;
  const Corpus corpus = generate_corpus(spec);
  const auto result = chunk_corpus(corpus, ChunkPolicy{0.5, kFrameShiftMs});
  std::size_t sentences = 0;
  for (const auto& u : corpus.utterances) sentences += u.sentences.size();
  EXPECT_EQ(result.chunks.size(), sentences);
  EXPECT_EQ(result.warnings.size(), sentences);
}

TEST(ConcatenateChunk, SingleSentenceAndFullUtterance) {
  CorpusSpec spec;
  spec.num_utterances = 3;
  const Corpus corpus = generate_corpus(spec);
  const Utterance& src = corpus.utterances[1];

  const Utterance one = concatenate_chunk(corpus, {src.id, 1, 1, 1, 0.0});
  ASSERT_EQ(one.sentences.size(), 1u);
  EXPECT_EQ(one.sentences[0], src.sentences[1]);
  EXPECT_EQ(one.speaker_id, src.speaker_id);
  EXPECT_EQ(one.id, src.id + "_s1-1");
  EXPECT_EQ(one.mel.frames, static_cast<std::size_t>(src.sentences[1].total_frames()));
  const auto offset = static_cast<std::size_t>(src.sentences[0].total_frames()) * kMelBands;
  EXPECT_TRUE(std::equal(one.mel.values.begin(), one.mel.values.end(), src.mel.values.begin() + offset));

  const auto chunks = chunk_corpus(corpus, ChunkPolicy{6.0, kFrameShiftMs}).chunks;
  std::vector<PhonemeToken> rebuilt;
  std::vector<float> mel;
  for (const auto& c : chunks) {
    if (c.utterance_index != 1) continue;
    const Utterance part = concatenate_chunk(corpus, c);
    EXPECT_NO_THROW(validate_utterance(part));
    for (const auto& s : part.sentences) rebuilt.insert(rebuilt.end(), s.phonemes.begin(), s.phonemes.end());
    mel.insert(mel.end(), part.mel.values.begin(), part.mel.values.end());
  }
  std::vector<PhonemeToken> original;
  for (const auto& s : src.sentences) original.insert(original.end(), s.phonemes.begin(), s.phonemes.end());
  EXPECT_EQ(rebuilt, original);
  EXPECT_EQ(mel, src.mel.values);
}

TEST(ConcatenateChunk, OutOfRangeThrows) {
  CorpusSpec spec;
  spec.num_utterances = 1;
  const Corpus corpus = generate_corpus(spec);
  const auto n = corpus.utterances[0].sentences.size();
  EXPECT_THROW(concatenate_chunk(corpus, {"x", 1, 0, 0, 0.0}), std::out_of_range);
  EXPECT_THROW(concatenate_chunk(corpus, {"x", 0, 0, n, 0.0}), std::out_of_range);
  EXPECT_THROW(concatenate_chunk(corpus, {"x", 0, 1, 0, 0.0}), std::out_of_range);
}

TEST(ChunkCorpus, RechunkingChunksGivesSingletons) {
  CorpusSpec spec;
  spec.num_utterances = 20;
  const Corpus corpus = generate_corpus(spec);
  const ChunkPolicy policy;
  Corpus chunked;
  for (const auto& c : chunk_corpus(corpus, policy).chunks) {
    if (c.sentence_count() > 1 || c.total_seconds <= policy.max_seconds) {
      chunked.utterances.push_back(concatenate_chunk(corpus, c));
    }
  }
  const auto again = chunk_corpus(chunked, policy).chunks;
  ASSERT_EQ(again.size(), chunked.utterances.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].first_sentence, 0u);
    EXPECT_EQ(again[i].last_sentence, chunked.utterances[i].sentences.size() - 1);
  }
}

TEST(SentenceChunks, OnePerSentence) {
  CorpusSpec spec;
  spec.num_utterances = 4;
  const Corpus corpus = generate_corpus(spec);
  std::size_t total = 0;
  for (const auto& u : corpus.utterances) total += u.sentences.size();
  const auto chunks = sentence_chunks(corpus);
  ASSERT_EQ(chunks.size(), total);
  for (const auto& c : chunks) EXPECT_EQ(c.sentence_count(), 1u);
}

TEST(ChunkManifest, CsvLayout) {
  std::ostringstream out;
  const std::vector<Chunk> chunks{{"utt1", 0, 0, 2, 12.5}, {"utt1", 0, 3, 3, 30.0125}};
  write_chunk_manifest(out, chunks);
  EXPECT_EQ(out.str(),
            "utterance_id,first_sentence,last_sentence,seconds\n"
            "utt1,0,2,12.5000\n"
            "utt1,3,3,30.0125\n");
}

}  // namespace
}  // namespace prosody
