#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lupiet/corpus/corpus.hpp"

namespace lupiet {

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;

  Vocabulary();

  // Built from the corpus' train split only. Tokens with at least
  // min_frequency occurrences, ordered by descending count then
  // lexicographically. Throws CorpusError when the train split is empty.
  static Vocabulary build(const Corpus& corpus, std::size_t min_frequency,
                          std::size_t embed_dim);

  // Rebuild from a stored token list (index order, specials included).
  static Vocabulary from_tokens(std::vector<std::string> tokens, std::size_t min_frequency,
                                std::size_t embed_dim);

  std::int32_t index(std::string_view token) const;
  const std::string& token(std::int32_t index) const { return tokens_.at(index); }
  bool contains(std::string_view token) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t embed_dim() const noexcept { return embed_dim_; }
  std::size_t min_frequency() const noexcept { return min_frequency_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // FNV-1a over the token list; ties checkpoints to the vocabulary they were trained with.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t min_frequency_ = 1;
  std::size_t embed_dim_ = 0;
};

struct EncodingLimits {
  std::size_t max_documents = 64;            // per window, latest kept
  std::size_t max_tokens_per_document = 256;  // earliest kept
};

// A sample with every document tokenized and mapped to vocabulary indices.
struct EncodedSample {
  std::size_t label = 0;
  Split split = Split::kTrain;
  std::vector<double> times;
  std::vector<std::vector<std::int32_t>> documents;  // never empty per document
};

// The token-index form of a WindowedView after truncation.
struct EncodedView {
  std::span<const std::vector<std::int32_t>> documents;

  bool empty() const noexcept { return documents.empty(); }
  // All documents concatenated in chronological order.
  std::vector<std::int32_t> concatenated() const;
};

class EncodedCorpus {
 public:
  EncodedCorpus(const Corpus& corpus, const Vocabulary& vocab, EncodingLimits limits = {});

  const EncodedSample& sample(std::size_t i) const { return samples_.at(i); }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const EncodingLimits& limits() const noexcept { return limits_; }

  EncodedView view(std::size_t sample, double window) const;

 private:
  std::vector<EncodedSample> samples_;
  std::size_t num_classes_;
  EncodingLimits limits_;
};

}  // namespace lupiet
