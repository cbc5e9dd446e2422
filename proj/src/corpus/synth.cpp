#include "lupiet/corpus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"

namespace lupiet {
namespace {

void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ParameterError(std::string(name) + " must be a probability in [0, 1], got " +
                         std::to_string(v));
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ParameterError(std::string(name) + " must be positive, got " + std::to_string(v));
  }
}

}  // namespace

void validate(const SynthSpec& s) {
  if (s.num_samples == 0) throw ParameterError("num_samples must be positive");
  if (s.num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (!s.class_prior.empty()) {
    if (s.class_prior.size() != s.num_classes) {
      throw ParameterError("class_prior must have num_classes entries");
    }
    double total = 0.0;
    for (double p : s.class_prior) {
      require_probability(p, "class_prior");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParameterError("class_prior must sum to 1");
  }
  if (s.signal_tokens_per_class == 0) throw ParameterError("signal_tokens_per_class must be positive");
  if (s.vocab_size <= s.num_classes * s.signal_tokens_per_class) {
    throw ParameterError("vocab_size must exceed num_classes * signal_tokens_per_class");
  }
  require_positive(s.docs_per_unit, "docs_per_unit");
  require_positive(s.horizon, "horizon");
  require_positive(s.min_length, "min_length");
  require_positive(s.boundary, "boundary");
  if (s.min_length > s.horizon) throw ParameterError("min_length must not exceed horizon");
  require_probability(s.rho_early, "rho_early");
  require_probability(s.rho_late, "rho_late");
  require_probability(s.noise_rate, "noise_rate");
  require_probability(s.label_noise, "label_noise");
  if (s.min_tokens == 0 || s.min_tokens > s.max_tokens) {
    throw ParameterError("need 0 < min_tokens <= max_tokens");
  }
  double total = 0.0;
  for (double r : s.split_ratio) {
    require_probability(r, "split_ratio");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split_ratio must sum to 1");
}

std::string signal_token(std::size_t cls, std::size_t j) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sig%zu_%zu", cls, j);
  return buf;
}

std::string filler_token(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "w%03zu", j);
  return buf;
}

Corpus generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng(derive_seed(spec.seed, streams::kSynthetic));
  const std::size_t k = spec.num_classes;
  const std::size_t fillers = spec.vocab_size - k * spec.signal_tokens_per_class;
  const std::vector<double> prior =
      spec.class_prior.empty() ? std::vector<double>(k, 1.0 / static_cast<double>(k))
                               : spec.class_prior;

  auto emit_token = [&](std::size_t latent, double rho) -> std::string {
    if (rng.bernoulli(rho)) return signal_token(latent, rng.below(spec.signal_tokens_per_class));
    if (rng.bernoulli(spec.noise_rate)) {
      return signal_token(rng.below(k), rng.below(spec.signal_tokens_per_class));
    }
    return filler_token(rng.below(fillers));
  };

  auto to_time = [&](double t) {
    if (spec.time_mode == TimeMode::kDays) return t;
    return std::max(1.0, std::ceil(t));
  };

  Corpus corpus;
  corpus.num_classes = k;
  corpus.samples.reserve(spec.num_samples);
  const int width = static_cast<int>(std::to_string(spec.num_samples).size());
  for (std::size_t n = 0; n < spec.num_samples; ++n) {
    TimeSeriesSample s;
    char id[32];
    std::snprintf(id, sizeof id, "s%0*zu", width, n);
    s.id = id;

    const std::size_t latent = rng.categorical(prior);
    std::size_t label = latent;
    if (rng.bernoulli(spec.label_noise)) {
      label = (latent + 1 + rng.below(k - 1)) % k;
    }
    s.label = label;

    const double length = rng.uniform(spec.min_length, spec.horizon);
    std::vector<double> times;
    // Every sample has at least one document inside the baseline window.
    times.push_back(rng.uniform(0.0, std::min(spec.boundary, length)));
    const int extra = rng.poisson(spec.docs_per_unit * length);
    for (int i = 0; i < extra; ++i) times.push_back(rng.uniform(0.0, length));
    std::sort(times.begin(), times.end());

    for (double raw : times) {
      const double t = to_time(raw);
      const double rho = t <= spec.boundary ? spec.rho_early : spec.rho_late;
      const std::size_t ntok =
          spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
      std::string text;
      for (std::size_t i = 0; i < ntok; ++i) {
        if (i) text += ' ';
        text += emit_token(latent, rho);
      }
      s.documents.push_back({t, std::move(text)});
    }
    drop_empty_and_duplicate_documents(s);
    corpus.samples.push_back(std::move(s));
  }

  std::vector<std::size_t> order(spec.num_samples);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto n_total = static_cast<double>(spec.num_samples);
  const auto n_train = static_cast<std::size_t>(std::llround(n_total * spec.split_ratio[0]));
  const auto n_val = std::min(spec.num_samples - n_train,
                              static_cast<std::size_t>(std::llround(n_total * spec.split_ratio[1])));
  for (std::size_t i = 0; i < order.size(); ++i) {
    Split sp = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kValidation : Split::kTest);
    corpus.samples[order[i]].split = sp;
  }
  return corpus;
}

}  // namespace lupiet
