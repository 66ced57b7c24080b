#pragma once

#include <set>
#include <string>

#include "stgcn/common.hpp"
#include "stgcn/model.hpp"

namespace stgcn {

// Fine-tuning taxonomy over a pre-trained backbone. "Top" counts from the
// classifier end: block 10 is the top layer.
//
//   frozen_top_n     train the top n blocks (pre-trained values) + head,
//                    freeze the bottom 10-n blocks            (1 <= n < 10)
//   hybrid_frozen    reinitialize the top n blocks, freeze the bottom
//                                                             (1 <= n <= 10)
//   hybrid_finetuned reinitialize the top n blocks, fine-tune the bottom
//                                                             (1 <= n <= 10)
//   propagation      fine-tune everything from pre-trained values
enum class TransferMode { frozen_top_n, hybrid_frozen, hybrid_finetuned, propagation };

inline const char* to_string(TransferMode m) {
  switch (m) {
    case TransferMode::frozen_top_n: return "frozen_top_n";
    case TransferMode::hybrid_frozen: return "hybrid_frozen";
    case TransferMode::hybrid_finetuned: return "hybrid_finetuned";
    case TransferMode::propagation: return "propagation";
  }
  return "?";
}

inline TransferMode transfer_mode_from_string(const std::string& s) {
  if (s == "frozen_top_n") return TransferMode::frozen_top_n;
  if (s == "hybrid_frozen") return TransferMode::hybrid_frozen;
  if (s == "hybrid_finetuned") return TransferMode::hybrid_finetuned;
  if (s == "propagation") return TransferMode::propagation;
  throw ConfigError("unknown transfer mode: " + s);
}

struct TransferPlan {
  TransferMode mode = TransferMode::frozen_top_n;
  int n = 1;
  HeadSpec head;

  void validate(int num_blocks = 10) const {
    head.validate();
    switch (mode) {
      case TransferMode::frozen_top_n:
        if (n < 1 || n >= num_blocks)
          throw ConfigError("frozen_top_n requires 1 <= n < " + std::to_string(num_blocks));
        break;
      case TransferMode::hybrid_frozen:
      case TransferMode::hybrid_finetuned:
        if (n < 1 || n > num_blocks)
          throw ConfigError("hybrid modes require 1 <= n <= " + std::to_string(num_blocks));
        break;
      case TransferMode::propagation:
        break;  // n ignored
    }
  }
};

// Restores the backbone from a checkpoint and rebuilds the classifier head
// for the target class count with a fresh seeded initialization. The graph
// structure must match: cross-topology weight surgery is not supported, so
// data must be remapped to the shared skeleton before pre-training.
template <typename S>
Model<S> load_pretrained(const Checkpoint& ckpt, int target_classes, const HeadSpec& head,
                         int target_num_joints) {
  ModelConfig config = ckpt.config();
  if (config.num_joints() != target_num_joints)
    throw DataError("load_pretrained: checkpoint has " + std::to_string(config.num_joints()) +
                    " joints but the target data has " + std::to_string(target_num_joints) +
                    "; remap both domains to the shared 20-joint skeleton before pre-training");
  config.num_classes = target_classes;
  config.head = head;
  config.head.resolved_sizes(target_classes);  // validates the final width
  Model<S> m = build_model<S>(config, head.seed);
  m.for_each_param([&ckpt](const std::string& name, Param<S>& p) {
    if (name.rfind("head.", 0) == 0) return;  // head stays freshly initialized
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DataError("checkpoint missing tensor: " + name);
    if (it->second.shape != p.value.shape)
      throw DataError("checkpoint shape mismatch for " + name);
    for (std::size_t i = 0; i < p.value.numel(); ++i) p.value[i] = S(it->second.data[i]);
    p.trainable = true;
  });
  m.for_each_buffer([&ckpt](const std::string& name, Tensor<S>& t) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DataError("checkpoint missing tensor: " + name);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = S(it->second.data[i]);
  });
  return m;
}

// Re-draws the named blocks (1-based) from the init distribution, resetting
// their batch-norm statistics. Block k is drawn from the same per-block seed
// derivation build_model uses, so reinitializing every block with seed s
// reproduces build_model(config, s) exactly.
template <typename S>
void reinitialize_layers(Model<S>& model, const std::set<int>& layers, std::uint64_t seed) {
  for (int layer : layers) {
    if (layer < 1 || layer > int(model.blocks.size()))
      throw ConfigError("reinitialize_layers: layer out of range");
    Rng rng(derive_seed(seed, "block", std::uint64_t(layer)));
    model.blocks[layer - 1].reinitialize(rng);
  }
}

// Applies a transfer plan in place: sets which blocks are frozen (including
// their batch-norm statistics) and reinitializes blocks where the plan says
// so. The head is always trainable.
template <typename S>
void apply_plan(Model<S>& model, const TransferPlan& plan) {
  const int num_blocks = int(model.blocks.size());
  plan.validate(num_blocks);
  const int top_start = num_blocks - (plan.mode == TransferMode::propagation ? num_blocks : plan.n);

  if (plan.mode == TransferMode::hybrid_frozen || plan.mode == TransferMode::hybrid_finetuned) {
    std::set<int> top;
    for (int i = top_start + 1; i <= num_blocks; ++i) top.insert(i);
    reinitialize_layers(model, top, plan.head.seed);
  }
  for (int i = 0; i < num_blocks; ++i) {
    const bool frozen = (plan.mode == TransferMode::frozen_top_n ||
                         plan.mode == TransferMode::hybrid_frozen) &&
                        i < top_start;
    model.blocks[i].set_frozen(frozen);
  }
  model.head.visit_params([](const std::string&, Param<S>& p) { p.trainable = true; });
}

}  // namespace stgcn
