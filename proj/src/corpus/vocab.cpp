#include "lupiet/corpus/vocab.hpp"

#include <algorithm>
#include <map>

#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  index_.emplace(tokens_[0], kPad);
  index_.emplace(tokens_[1], kUnknown);
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t min_frequency,
                             std::size_t embed_dim) {
  if (min_frequency < 1) throw ParameterError("min_frequency must be at least 1");
  std::map<std::string, std::size_t> counts;
  std::size_t train = 0;
  for (const TimeSeriesSample& s : corpus.samples) {
    if (s.split != Split::kTrain) continue;
    ++train;
    for (const Document& d : s.documents)
      for (std::string& tok : tokenize(d.text)) ++counts[std::move(tok)];
  }
  if (train == 0) throw CorpusError("cannot build a vocabulary: train split is empty");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_frequency) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.min_frequency_ = min_frequency;
  v.embed_dim_ = embed_dim;
  for (auto& [tok, n] : kept) {
    // Tokenization never yields the special names, but guard anyway.
    if (v.index_.count(tok)) continue;
    v.index_.emplace(tok, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::size_t min_frequency,
                                   std::size_t embed_dim) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw CorpusError("vocabulary token list must start with <pad>, <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw CorpusError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  v.min_frequency_ = min_frequency;
  v.embed_dim_ = embed_dim;
  return v;
}

std::int32_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("");
  for (const std::string& t : tokens_) {
    h = splitmix64(h ^ fnv1a64(t));
  }
  return h;
}

std::vector<std::int32_t> EncodedView::concatenated() const {
  std::vector<std::int32_t> out;
  for (const auto& d : documents) out.insert(out.end(), d.begin(), d.end());
  return out;
}

EncodedCorpus::EncodedCorpus(const Corpus& corpus, const Vocabulary& vocab, EncodingLimits limits)
    : num_classes_(corpus.num_classes), limits_(limits) {
  if (limits.max_documents == 0 || limits.max_tokens_per_document == 0) {
    throw ParameterError("encoding limits must be positive");
  }
  samples_.reserve(corpus.samples.size());
  for (const TimeSeriesSample& s : corpus.samples) {
    EncodedSample e;
    e.label = s.label;
    e.split = s.split;
    for (const Document& d : s.documents) {
      auto toks = tokenize(d.text);
      if (toks.empty()) continue;
      if (toks.size() > limits.max_tokens_per_document) toks.resize(limits.max_tokens_per_document);
      std::vector<std::int32_t> ids;
      ids.reserve(toks.size());
      for (const auto& t : toks) ids.push_back(vocab.index(t));
      e.times.push_back(d.time);
      e.documents.push_back(std::move(ids));
    }
    samples_.push_back(std::move(e));
  }
}

EncodedView EncodedCorpus::view(std::size_t sample, double window) const {
  if (!(window > 0.0)) throw ParameterError("window must be positive");
  const EncodedSample& s = samples_.at(sample);
  const auto end = std::upper_bound(s.times.begin(), s.times.end(), window);
  std::size_t n = static_cast<std::size_t>(end - s.times.begin());
  std::size_t first = n > limits_.max_documents ? n - limits_.max_documents : 0;
  return {std::span<const std::vector<std::int32_t>>(s.documents.data() + first, n - first)};
}

}  // namespace lupiet
