#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lupiet {

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation,
// drop empty tokens. Internal punctuation ("120/80") is kept.
std::vector<std::string> tokenize(std::string_view text);

// Tokens joined by single spaces; the form used for empty/duplicate checks.
std::string normalize_text(std::string_view text);

struct Document {
  double time = 0.0;  // days, or chunk index for chunked corpora
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view s);

struct TimeSeriesSample {
  std::string id;
  std::vector<Document> documents;  // nondecreasing time
  std::size_t label = 0;
  Split split = Split::kTrain;

  friend bool operator==(const TimeSeriesSample&, const TimeSeriesSample&) = default;
};

struct Corpus {
  std::vector<TimeSeriesSample> samples;
  std::size_t num_classes = 2;

  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// X_t: the documents of one sample with time <= t. Borrowed from the sample.
struct WindowedView {
  std::string_view sample_id;
  double window = 0.0;
  std::span<const Document> documents;
};

WindowedView slice_window(const TimeSeriesSample& sample, double t);

// Removes documents whose normalized text is empty and exact duplicates of
// (time, normalized text), keeping the first occurrence. Order is preserved.
void drop_empty_and_duplicate_documents(TimeSeriesSample& sample);

// Checks sample invariants; throws ValidationError naming the sample.
void validate_sample(const TimeSeriesSample& sample, std::size_t num_classes);

// One JSON object per line:
//   {"id": str, "label": int, "split": "train"|"validation"|"test",
//    "documents": [{"time": number, "text": str}, ...]}
// When num_classes is not given it is inferred as max(label) + 1 (at least 2).
Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<std::size_t> num_classes = std::nullopt);
Corpus parse_corpus(std::istream& in, std::optional<std::size_t> num_classes = std::nullopt);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

}  // namespace lupiet
