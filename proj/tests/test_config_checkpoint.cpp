// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "recap/checkpoint.hpp"
#include "recap/config.hpp"

namespace recap {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("recap_cfg_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Config, DefaultsMatchTrainingRecipe) {
  RunConfig c;
  EXPECT_EQ(c.training.batch_size, 512);
  EXPECT_DOUBLE_EQ(c.training.learning_rate, 3e-5);
  EXPECT_EQ(c.training.epochs, 130);
  EXPECT_EQ(c.model.hidden, 256);
  EXPECT_EQ(c.dataset.k, 10);
  EXPECT_EQ(c.eta, 1);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.model.hidden = 64;
  c.training.e_graph = 3;
  c.dataset.k = 7;
  c.delimiter = ",";
  auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.model.k, 7);
  auto dir = scratch("roundtrip");
  save_config(c, dir / "c.json");
  EXPECT_EQ(config_to_json(load_config(dir / "c.json")), config_to_json(c));
}

TEST(Config, UnknownKeyRejected) {
  nlohmann::json j = {{"model.hiden", 3}};
  EXPECT_THROW(config_from_json(j), ConfigError);
  RunConfig c;
  EXPECT_THROW(apply_override(c, "nope=1"), ConfigError);
}

TEST(Config, MistypedValueRejected) {
  EXPECT_THROW(config_from_json({{"model.hidden", "big"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"model.use_graph", 1}}), ConfigError);
  RunConfig c;
  EXPECT_THROW(apply_override(c, "training.epochs=ten"), ConfigError);
  EXPECT_THROW(apply_override(c, "training.epochs"), ConfigError);
}

TEST(Config, OverridesParseByType) {
  RunConfig c;
  apply_override(c, "training.learning_rate=0.002");
  apply_override(c, "model.use_graph=false");
  apply_override(c, "dataset.k=6");
  apply_override(c, "data.delimiter=\\t");
  apply_override(c, "output_dir=runs/x");
  EXPECT_DOUBLE_EQ(c.training.learning_rate, 0.002);
  EXPECT_FALSE(c.model.use_graph);
  EXPECT_EQ(c.dataset.k, 6);
  EXPECT_EQ(c.model.k, 6);
  EXPECT_EQ(c.delimiter, "\t");
  EXPECT_EQ(c.output_dir, "runs/x");
  EXPECT_EQ(c.resolved_store_path(), fs::path("runs/x") / "store.json");
}

TEST(Config, ValidateCatchesBadValues) {
  RunConfig c;
  c.model.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  RunConfig d;
  d.dataset.ratios.train = 0.5;
  EXPECT_THROW(d.validate(), ConfigError);
  RunConfig e;
  e.training.e_corr = 10;
  EXPECT_THROW(e.validate(), ConfigError);
  RunConfig f;
  f.delimiter = "ab";
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Config, FingerprintTracksArchitectureOnly) {
  auto store = testing::small_store();
  RunConfig a;
  RunConfig b = a;
  b.training.epochs = 5;
  b.eta = 0;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_fingerprint(a, store.vocab), config_fingerprint(b, store.vocab));
  RunConfig c = a;
  c.model.hidden = 128;
  EXPECT_NE(config_fingerprint(a, store.vocab), config_fingerprint(c, store.vocab));
  RunConfig d = a;
  d.model.use_graph = false;
  EXPECT_NE(config_fingerprint(a, store.vocab), config_fingerprint(d, store.vocab));
  Vocabulary v = store.vocab;
  v.poi_ids.push_back("extra");
  EXPECT_NE(config_fingerprint(a, store.vocab), config_fingerprint(a, v));
  EXPECT_EQ(config_fingerprint(a, store.vocab).size(), 16u);
}

TEST(Config, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Checkpoint, RoundTrip) {
  auto store = testing::small_store();
  auto t = count_transitions(store.sequences, store.vocab.num_pois());
  RecapModel a(testing::tiny_config(), store.vocab, normalize(t), 1);
  RecapModel b(testing::tiny_config(), store.vocab, normalize(t), 2);
  auto dir = scratch("ckpt");
  save_checkpoint(make_checkpoint(a.parameters(), "0123456789abcdef", {{"best_epoch", 4}}), dir / "m.ckpt");
  EXPECT_FALSE(fs::exists(dir / "m.ckpt.tmp"));
  auto ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.fingerprint, "0123456789abcdef");
  EXPECT_EQ(ck.metadata["best_epoch"], 4);
  restore_parameters(b.parameters(), ck);
  for (std::size_t i = 0; i < a.parameters().all().size(); ++i)
    EXPECT_EQ(a.parameters().all()[i].var.value(), b.parameters().all()[i].var.value());
}

TEST(Checkpoint, ShapeMismatchAndCorruptionRejected) {
  auto store = testing::small_store();
  auto t = count_transitions(store.sequences, store.vocab.num_pois());
  RecapModel a(testing::tiny_config(), store.vocab, normalize(t), 1);
  auto big = testing::tiny_config();
  big.hidden = 32;
  RecapModel b(big, store.vocab, normalize(t), 1);
  auto dir = scratch("ckpt_bad");
  save_checkpoint(make_checkpoint(a.parameters(), "x", {}), dir / "m.ckpt");
  EXPECT_THROW(restore_parameters(b.parameters(), load_checkpoint(dir / "m.ckpt")), CheckpointError);

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);

  // Truncated payload.
  fs::resize_file(dir / "m.ckpt", fs::file_size(dir / "m.ckpt") - 16);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace recap
