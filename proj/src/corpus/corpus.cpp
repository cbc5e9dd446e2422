#include "lupiet/corpus/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "lupiet/error.hpp"

namespace lupiet {

using json = nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& tok : tokenize(text)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

std::vector<std::size_t> Corpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) out.push_back(i);
  return out;
}

std::size_t Corpus::count(Split s) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [s](const TimeSeriesSample& x) { return x.split == s; }));
}

WindowedView slice_window(const TimeSeriesSample& sample, double t) {
  if (!(t > 0.0)) throw ParameterError("window must be positive, got " + std::to_string(t));
  const auto& docs = sample.documents;
  const auto end = std::upper_bound(docs.begin(), docs.end(), t,
                                    [](double w, const Document& d) { return w < d.time; });
  return {sample.id, t, std::span<const Document>(docs.data(), static_cast<std::size_t>(end - docs.begin()))};
}

void drop_empty_and_duplicate_documents(TimeSeriesSample& sample) {
  std::set<std::pair<double, std::string>> seen;
  std::vector<Document> kept;
  kept.reserve(sample.documents.size());
  for (Document& d : sample.documents) {
    std::string norm = normalize_text(d.text);
    if (norm.empty()) continue;
    if (!seen.emplace(d.time, std::move(norm)).second) continue;
    kept.push_back(std::move(d));
  }
  sample.documents = std::move(kept);
}

void validate_sample(const TimeSeriesSample& sample, std::size_t num_classes) {
  const std::string who = "sample '" + sample.id + "': ";
  if (sample.id.empty()) throw ValidationError("sample with empty id");
  if (sample.label >= num_classes) {
    throw ValidationError(who + "label " + std::to_string(sample.label) + " >= " +
                          std::to_string(num_classes) + " classes");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < sample.documents.size(); ++i) {
    const Document& d = sample.documents[i];
    if (!(d.time >= 0.0) || !std::isfinite(d.time)) {
      throw ValidationError(who + "document " + std::to_string(i) + " has invalid time");
    }
    if (i > 0 && d.time < prev) {
      throw ValidationError(who + "documents not sorted by time at index " + std::to_string(i));
    }
    prev = d.time;
  }
}

Corpus parse_corpus(std::istream& in, std::optional<std::size_t> num_classes) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_label = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    TimeSeriesSample s;
    try {
      const json j = json::parse(line);
      s.id = j.at("id").get<std::string>();
      const auto label = j.at("label").get<std::int64_t>();
      if (label < 0) throw ParseError(line_no, "negative label");
      s.label = static_cast<std::size_t>(label);
      const auto split = parse_split(j.at("split").get<std::string>());
      if (!split) throw ParseError(line_no, "split must be train, validation or test");
      s.split = *split;
      for (const json& d : j.at("documents")) {
        s.documents.push_back({d.at("time").get<double>(), d.at("text").get<std::string>()});
      }
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!ids.insert(s.id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + s.id + "'");
    }
    max_label = std::max(max_label, s.label);
    // Sortedness is checked on the raw record; cleaning preserves order.
    validate_sample(s, std::numeric_limits<std::size_t>::max());
    drop_empty_and_duplicate_documents(s);
    corpus.samples.push_back(std::move(s));
  }
  if (corpus.samples.empty()) throw CorpusError("corpus contains no samples");
  corpus.num_classes = num_classes.value_or(std::max<std::size_t>(2, max_label + 1));
  for (const auto& s : corpus.samples) validate_sample(s, corpus.num_classes);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  return parse_corpus(in, num_classes);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const TimeSeriesSample& s : corpus.samples) {
    json docs = json::array();
    for (const Document& d : s.documents) docs.push_back({{"time", d.time}, {"text", d.text}});
    json j = {{"id", s.id},
              {"label", s.label},
              {"split", std::string(split_name(s.split))},
              {"documents", std::move(docs)}};
    out << j.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  // Write to a sibling temp file first so a failure never leaves a partial corpus.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write corpus file " + tmp.string());
    write_corpus(corpus, out);
    if (!out) throw CorpusError("failed writing corpus file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lupiet
