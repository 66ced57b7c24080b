#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "stgcn/synth.hpp"
#include "stgcn/train.hpp"
#include "stgcn/transfer.hpp"
#include "test_util.hpp"

using namespace stgcn;

namespace {

ModelConfig bench_config(int classes, int frames = 16) {
  ModelConfig c;
  c.topology = build_topology(TopologyKind::shared20);
  c.num_classes = classes;
  c.frames = frames;
  c.width_ratio = 1.0 / 32.0;
  return c;
}

std::map<std::string, Tensor<float>> snapshot(Model<float>& m) {
  std::map<std::string, Tensor<float>> out;
  m.for_each_param([&out](const std::string& name, Param<float>& p) { out[name] = p.value; });
  return out;
}

std::map<std::string, Tensor<float>> snapshot_buffers(Model<float>& m) {
  std::map<std::string, Tensor<float>> out;
  m.for_each_buffer([&out](const std::string& name, Tensor<float>& t) { out[name] = t; });
  return out;
}

int block_of(const std::string& name) {
  if (name.rfind("block", 0) != 0) return -1;  // head
  return std::stoi(name.substr(5, name.find('.') - 5));
}

// Writes a pretrained checkpoint once per process.
const std::string& pretrained_checkpoint() {
  static const std::string path = [] {
    const std::string p = (std::filesystem::temp_directory_path() / "stgcn_pretrain.ckpt").string();
    GeneratorSpec spec = make_generator_spec(GeneratorFamily::A, 17);
    spec.samples_per_class = 3;
    spec.frames = 16;
    Dataset source = generate(spec);
    Model<float> m = build_model<float>(bench_config(5), 55);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 55;
    fit(m, source, source, tc);
    save_checkpoint(m, p);
    return p;
  }();
  return path;
}

}  // namespace

TEST(LoadPretrained, HeadRebuiltBackboneRestored) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 3;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  EXPECT_EQ(m.config.num_classes, 3);
  EXPECT_EQ(m.head.fcs.back().weight.value.dim(0), 3);
  // backbone tensors equal the checkpoint bytes
  m.for_each_param([&ckpt](const std::string& name, Param<float>& p) {
    if (name.rfind("head.", 0) == 0) return;
    const auto& e = ckpt.tensors.at(name);
    for (std::size_t i = 0; i < p.value.numel(); ++i) EXPECT_EQ(p.value[i], e.data[i]) << name;
  });
}

TEST(LoadPretrained, SameHeadSeedSameModel) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 9;
  Model<float> a = load_pretrained<float>(ckpt, 4, head, 20);
  Model<float> b = load_pretrained<float>(ckpt, 4, head, 20);
  const auto sb = snapshot(b);
  a.for_each_param([&sb](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(bitwise_equal(sb.at(name), p.value)) << name;
  });
}

TEST(LoadPretrained, JointCountMismatchIsError) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  try {
    load_pretrained<float>(ckpt, 3, head, 25);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("remap"), std::string::npos);
  }
}

TEST(ApplyPlan, FrozenTopNPartition) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 5;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  TransferPlan plan;
  plan.mode = TransferMode::frozen_top_n;
  plan.n = 1;
  plan.head = head;
  apply_plan(m, plan);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    const int blk = block_of(name);
    const bool expect_trainable = blk < 0 || blk == 10;  // head or block 10
    EXPECT_EQ(p.trainable, expect_trainable) << name;
    // no reinitialization in this mode
    EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
  });
}

TEST(ApplyPlan, HybridFrozenReinitializesTopAndFreezesBottom) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 6;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  const auto buffers_before = snapshot_buffers(m);
  TransferPlan plan;
  plan.mode = TransferMode::hybrid_frozen;
  plan.n = 3;
  plan.head = head;
  apply_plan(m, plan);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    const int blk = block_of(name);
    if (blk >= 8) {
      EXPECT_TRUE(p.trainable) << name;
      if (name.find("bn") == std::string::npos)  // conv weights redrawn
        EXPECT_FALSE(bitwise_equal(before.at(name), p.value)) << name;
    } else if (blk >= 1) {
      EXPECT_FALSE(p.trainable) << name;
      EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
    } else {
      EXPECT_TRUE(p.trainable) << name;
    }
  });
  // reinitialized blocks reset running statistics; retained blocks keep them
  m.for_each_buffer([&](const std::string& name, Tensor<float>& t) {
    const int blk = block_of(name);
    if (blk >= 8) {
      const bool is_mean = name.find("mean") != std::string::npos;
      for (float v : t.data) EXPECT_EQ(v, is_mean ? 0.0f : 1.0f) << name;
    } else {
      EXPECT_TRUE(bitwise_equal(buffers_before.at(name), t)) << name;
    }
  });
}

TEST(ApplyPlan, HybridFinetunedKeepsBottomTrainable) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 7;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  TransferPlan plan;
  plan.mode = TransferMode::hybrid_finetuned;
  plan.n = 2;
  plan.head = head;
  apply_plan(m, plan);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(p.trainable) << name;
    const int blk = block_of(name);
    if (blk >= 1 && blk <= 8) EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
  });
}

TEST(ApplyPlan, PropagationEverythingTrainableAtPretrainedValues) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 8;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  TransferPlan plan;
  plan.mode = TransferMode::propagation;
  plan.head = head;
  apply_plan(m, plan);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(p.trainable) << name;
    EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
  });
}

TEST(ApplyPlan, IdempotentForNonReinitializingModes) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 9;
  for (auto mode : {TransferMode::frozen_top_n, TransferMode::propagation}) {
    Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
    TransferPlan plan;
    plan.mode = mode;
    plan.n = 2;
    plan.head = head;
    apply_plan(m, plan);
    const auto once = snapshot(m);
    apply_plan(m, plan);
    m.for_each_param([&once](const std::string& name, Param<float>& p) {
      EXPECT_TRUE(bitwise_equal(once.at(name), p.value)) << name;
    });
  }
}

TEST(ApplyPlan, HybridFrozenWithNTenIsFullReinit) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  head.seed = 41;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  TransferPlan plan;
  plan.mode = TransferMode::hybrid_frozen;
  plan.n = 10;
  plan.head = head;
  apply_plan(m, plan);
  // coincides with a fresh standard build from the same seed
  ModelConfig config = m.config;
  Model<float> fresh = build_model<float>(config, head.seed);
  const auto sf = snapshot(fresh);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(p.trainable) << name;
    EXPECT_TRUE(bitwise_equal(sf.at(name), p.value)) << name;
  });
}

TEST(ApplyPlan, InvalidNRejected) {
  TransferPlan plan;
  plan.mode = TransferMode::frozen_top_n;
  plan.n = 10;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan.n = 0;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan.mode = TransferMode::hybrid_frozen;
  plan.n = 11;
  EXPECT_THROW(plan.validate(), ConfigError);
  plan.n = 10;
  plan.validate();  // allowed for hybrid modes
}

TEST(Reinitialize, EmptySetIsNoOp) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  reinitialize_layers(m, {}, 5);
  m.for_each_param([&before](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
  });
}

TEST(Reinitialize, OnlyNamedLayerChanges) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
  const auto before = snapshot(m);
  reinitialize_layers(m, {10}, 5);
  m.for_each_param([&](const std::string& name, Param<float>& p) {
    const int blk = block_of(name);
    if (blk >= 1 && blk <= 9) EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
  });
}

TEST(Reinitialize, SameSeedSameResult) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  HeadSpec head;
  Model<float> a = load_pretrained<float>(ckpt, 3, head, 20);
  Model<float> b = load_pretrained<float>(ckpt, 3, head, 20);
  reinitialize_layers(a, {4, 7}, 123);
  reinitialize_layers(b, {4, 7}, 123);
  const auto sb = snapshot(b);
  a.for_each_param([&sb](const std::string& name, Param<float>& p) {
    EXPECT_TRUE(bitwise_equal(sb.at(name), p.value)) << name;
  });
}

TEST(Fit, FrozenBlocksSurviveTrainingBitwise) {
  const Checkpoint ckpt = load_checkpoint(pretrained_checkpoint());
  GeneratorSpec spec = make_generator_spec(GeneratorFamily::B, 23);
  spec.samples_per_class = 3;
  spec.frames = 16;
  Dataset target = generate(spec);
  for (auto mode : {TransferMode::frozen_top_n, TransferMode::hybrid_frozen}) {
    HeadSpec head;
    head.seed = 91;
    Model<float> m = load_pretrained<float>(ckpt, 3, head, 20);
    TransferPlan plan;
    plan.mode = mode;
    plan.n = 2;
    plan.head = head;
    apply_plan(m, plan);
    const auto before = snapshot(m);
    const auto buffers_before = snapshot_buffers(m);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 91;
    fit(m, target, target, tc);
    m.for_each_param([&](const std::string& name, Param<float>& p) {
      const int blk = block_of(name);
      if (blk >= 1 && blk <= 8) EXPECT_TRUE(bitwise_equal(before.at(name), p.value)) << name;
    });
    // frozen batch-norm statistics also stay fixed
    m.for_each_buffer([&](const std::string& name, Tensor<float>& t) {
      const int blk = block_of(name);
      if (blk >= 1 && blk <= 8)
        EXPECT_TRUE(bitwise_equal(buffers_before.at(name), t)) << name;
    });
  }
}
