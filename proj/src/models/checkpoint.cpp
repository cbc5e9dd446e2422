#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lupiet/error.hpp"
#include "lupiet/models/model.hpp"

namespace lupiet {
namespace {

constexpr char kMagic[8] = {'L', 'P', 'T', 'C', 'K', 'P', 'T', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 30)) throw CheckpointError("corrupt checkpoint string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::json j = {
      {"architecture", std::string(architecture_name(c.architecture))},
      {"vocab_size", c.vocab_size},
      {"embed_dim", c.embed_dim},
      {"num_classes", c.num_classes},
      {"filter_widths", c.filter_widths},
      {"filters", c.filters},
      {"encoder_dim", c.encoder_dim},
      {"hidden", c.hidden},
      {"dropout", c.dropout},
  };
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    const auto arch = parse_architecture(j.at("architecture").get<std::string>());
    if (!arch) throw CheckpointError("unknown architecture in checkpoint");
    c.architecture = *arch;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.filter_widths = j.at("filter_widths").get<std::vector<std::size_t>>();
    c.filters = j.at("filters").get<std::size_t>();
    c.encoder_dim = j.at("encoder_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     std::uint64_t vocab_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_string(out, architecture_name(model.config().architecture));
  put_string(out, model_config_to_json(model.config()));
  put<std::uint64_t>(out, vocab_hash);
  put<std::uint64_t>(out, model.params().seed());
  put<std::uint64_t>(out, model.params().size());
  for (const Parameter& p : model.params().entries()) {
    put_string(out, p.name);
    put<std::uint64_t>(out, p.value.rank());
    for (std::size_t dim : p.value.shape()) put<std::uint64_t>(out, dim);
    out.write(reinterpret_cast<const char*>(p.value.data().data()),
              static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint");
  }
  const std::string tag = get_string(in);
  Checkpoint ck;
  ck.config = model_config_from_json(get_string(in));
  if (tag != architecture_name(ck.config.architecture)) {
    throw CheckpointError("architecture tag does not match stored config");
  }
  ck.vocab_hash = get<std::uint64_t>(in);
  const auto seed = get<std::uint64_t>(in);
  ck.params = ModelParams(ck.config.architecture, seed);
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(in);
    const auto rank = get<std::uint64_t>(in);
    if (rank > 8) throw CheckpointError("corrupt tensor rank");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint tensor '" + name + "'");
    ck.params.add(std::move(name), std::move(t));
  }
  if (ck.params.parameter_count() != expected_parameter_count(ck.config)) {
    throw CheckpointError("checkpoint parameters do not match its model config");
  }
  return ck;
}

}  // namespace lupiet
