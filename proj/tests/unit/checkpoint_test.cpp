#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lupiet/error.hpp"
#include "lupiet/models/model.hpp"

namespace lupiet {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

ModelConfig config(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  c.vocab_size = 13;
  c.embed_dim = 5;
  c.num_classes = 3;
  c.filter_widths = {2, 3};
  c.filters = 4;
  c.encoder_dim = 6;
  c.hidden = 3;
  c.dropout = 0.25;
  return c;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  for (Architecture arch : {Architecture::kWord, Architecture::kDoc}) {
    const Model m = Model::init(config(arch), 77);
    const fs::path path = temp_file("lupiet_ckpt_roundtrip.bin");
    save_checkpoint(path, m, 0xABCDEF);
    const Checkpoint ck = load_checkpoint(path);
    EXPECT_EQ(ck.config, m.config());
    EXPECT_EQ(ck.vocab_hash, 0xABCDEFu);
    EXPECT_EQ(ck.params.seed(), 77u);
    EXPECT_EQ(ck.params.architecture(), arch);
    ASSERT_EQ(ck.params.size(), m.params().size());
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
      const auto& a = ck.params.entries()[i].value;
      const auto& b = m.params().entries()[i].value;
      ASSERT_EQ(a.shape(), b.shape());
      EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)), 0);
    }
    // A reloaded model predicts exactly as the original.
    Model back(ck.config, ck.params);
    Model orig = m;
    const std::vector<std::vector<std::int32_t>> docs{{1, 2, 3}, {4}};
    EXPECT_EQ(back.logits(EncodedView{docs}), orig.logits(EncodedView{docs}));
    fs::remove(path);
  }
}

TEST(Checkpoint, BadMagicRejected) {
  const fs::path path = temp_file("lupiet_ckpt_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT and more bytes";
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  fs::remove(path);
}

TEST(Checkpoint, TruncatedFileRejected) {
  const fs::path path = temp_file("lupiet_ckpt_trunc.bin");
  save_checkpoint(path, Model::init(config(Architecture::kWord), 1), 0);
  fs::resize_file(path, fs::file_size(path) - 9);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  fs::remove(path);
}

TEST(Checkpoint, MissingFileRejected) {
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  const ModelConfig c = config(Architecture::kDoc);
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
  EXPECT_THROW(model_config_from_json("{\"architecture\":\"rnn\"}"), CheckpointError);
}

}  // namespace
}  // namespace lupiet
