#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stgcn/common.hpp"
#include "stgcn/nn.hpp"
#include "stgcn/skeleton.hpp"
#include "stgcn/tensor.hpp"

namespace stgcn {

// Classifier head layout: up to four dense layers (the last width is the
// class count), ReLU plus optional dropout between them. Dropout never
// appears in the backbone.
struct HeadSpec {
  std::vector<int> layer_sizes;  // empty = single dense layer to num_classes
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_sizes.size() > 4)
      throw ConfigError("head: at most 4 dense layers supported");
    for (int s : layer_sizes)
      if (s < 1) throw ConfigError("head: layer sizes must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("head: dropout rate must be in [0, 1)");
  }

  std::vector<int> resolved_sizes(int num_classes) const {
    validate();
    if (layer_sizes.empty()) return {num_classes};
    if (layer_sizes.back() != num_classes)
      throw ConfigError("head: final layer size must equal the class count");
    return layer_sizes;
  }
};

// Architecture description. Channel widths are the base schedule scaled by
// the width ratio R, rounded, with a floor of one channel so inter-layer
// ratios survive as far as rounding allows.
struct ModelConfig {
  double width_ratio = 1.0;
  int num_classes = 0;
  int in_channels = 3;
  SkeletonTopology topology;
  int frames = 300;
  std::vector<int> base_channels = {64, 64, 64, 64, 128, 128, 128, 256, 256, 256};
  std::vector<int> strides = {1, 1, 1, 1, 2, 1, 1, 2, 1, 1};
  int temporal_kernel = 9;
  PartitionStrategy strategy = PartitionStrategy::spatial;
  HeadSpec head;

  int num_joints() const { return topology.num_joints(); }
  int num_blocks() const { return int(base_channels.size()); }

  std::vector<int> channels() const {
    std::vector<int> out(base_channels.size());
    for (std::size_t i = 0; i < base_channels.size(); ++i)
      out[i] = int(std::max(1ll, std::llround(width_ratio * base_channels[i])));
    return out;
  }

  void validate() const {
    if (width_ratio <= 0.0) throw ConfigError("model: width ratio must be positive");
    if (num_classes < 1) throw ConfigError("model: class count must be positive");
    if (in_channels < 1) throw ConfigError("model: input channel count must be positive");
    if (frames < 1) throw ConfigError("model: frame count must be positive");
    if (base_channels.empty() || base_channels.size() != strides.size())
      throw ConfigError("model: base_channels and strides must align");
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
      throw ConfigError("model: temporal kernel must be odd");
    topology.validate();
    head.validate();
  }
};

// Alternate reading of the backbone width: 256 channels in every block.
inline std::vector<int> flat256_channels() { return std::vector<int>(10, 256); }

inline ModelConfig scale_width(const ModelConfig& config, double ratio) {
  if (ratio <= 0.0) throw ConfigError("scale_width: ratio must be positive");
  ModelConfig out = config;
  out.width_ratio = ratio;
  return out;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["width_ratio"] = c.width_ratio;
  j["num_classes"] = c.num_classes;
  j["in_channels"] = c.in_channels;
  j["frames"] = c.frames;
  j["base_channels"] = c.base_channels;
  j["strides"] = c.strides;
  j["temporal_kernel"] = c.temporal_kernel;
  j["strategy"] = to_string(c.strategy);
  j["topology"] = topology_to_json(c.topology);
  j["head"] = {{"layer_sizes", c.head.layer_sizes}, {"dropout_rate", c.head.dropout_rate}};
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.width_ratio = j.at("width_ratio").get<double>();
  c.num_classes = j.at("num_classes").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.frames = j.at("frames").get<int>();
  c.base_channels = j.at("base_channels").get<std::vector<int>>();
  c.strides = j.at("strides").get<std::vector<int>>();
  c.temporal_kernel = j.at("temporal_kernel").get<int>();
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  const auto& tj = j.at("topology");
  c.topology.kind = topology_kind_from_string(tj.at("kind").get<std::string>());
  c.topology.joint_names = tj.at("joint_names").get<std::vector<std::string>>();
  for (const auto& e : tj.at("edges"))
    c.topology.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  c.topology.root_index = tj.at("root_index").get<int>();
  c.topology.spine_base_index = tj.at("spine_base_index").get<int>();
  c.topology.spine_top_index = tj.at("spine_top_index").get<int>();
  c.topology.shoulder_left_index = tj.at("shoulder_left_index").get<int>();
  c.topology.shoulder_right_index = tj.at("shoulder_right_index").get<int>();
  c.head.layer_sizes = j.at("head").at("layer_sizes").get<std::vector<int>>();
  c.head.dropout_rate = j.at("head").at("dropout_rate").get<double>();
  c.validate();
  return c;
}

// Trainable-parameter count as a pure function of the configuration.
inline std::size_t count_parameters(const ModelConfig& config) {
  config.validate();
  const int partitions = config.strategy == PartitionStrategy::spatial ? 3 : 1;
  const auto ch = config.channels();
  std::size_t total = 0;
  int in = config.in_channels;
  for (int i = 0; i < config.num_blocks(); ++i) {
    const int out = ch[i];
    total += std::size_t(partitions) * out * in + out;  // gcn
    total += 2 * std::size_t(out);                      // bn1
    total += std::size_t(out) * out * config.temporal_kernel + out;  // tcn
    total += 2 * std::size_t(out);                      // bn2
    const bool projection = i > 0 && (config.strides[i] != 1 || in != out);
    if (projection) total += std::size_t(out) * in + out + 2 * std::size_t(out);
    in = out;
  }
  int prev = ch.back();
  for (int s : config.head.resolved_sizes(config.num_classes)) {
    total += std::size_t(s) * prev + s;
    prev = s;
  }
  return total;
}

namespace detail {

// One spatial-temporal block:
//   relu( bn2( tconv( relu( bn1( gconv(x) ) ) ) ) + residual(x) )
// The first block has no residual branch; a shape change uses a strided 1x1
// projection with its own batch norm; otherwise the identity is used.
template <typename S>
struct StgcnBlock {
  int index = 0;  // 1-based
  int in_channels = 0, out_channels = 0, stride = 1;
  enum class Residual { none, identity, projection } residual = Residual::identity;
  bool frozen = false;

  nn::GraphConv<S> gcn;
  nn::BatchNorm<S> bn1;
  nn::TemporalConv<S> tcn;
  nn::BatchNorm<S> bn2;
  nn::TemporalConv<S> res_conv;  // kernel 1
  nn::BatchNorm<S> res_bn;

  nn::ReluCache<S> relu1, relu2;
  Tensor<S> res_cached;  // residual branch output (identity path reuses it)

  void build(int block_index, int partitions, int in, int out, int s, int kernel, Rng& rng) {
    index = block_index;
    in_channels = in;
    out_channels = out;
    stride = s;
    if (block_index == 1)
      residual = Residual::none;
    else if (s == 1 && in == out)
      residual = Residual::identity;
    else
      residual = Residual::projection;
    gcn.build(partitions, in, out, rng);
    bn1.build(out);
    tcn.build(out, out, kernel, s, rng);
    bn2.build(out);
    if (residual == Residual::projection) {
      res_conv.build(in, out, 1, s, rng);
      res_bn.build(out);
    }
  }

  void reinitialize(Rng& rng) {
    nn::init_uniform(gcn.weight.value, in_channels, rng);
    nn::init_uniform(gcn.bias.value, in_channels, rng);
    bn1.gamma.value.fill(S(1));
    bn1.beta.value.fill(S(0));
    bn1.reset_running_stats();
    nn::init_uniform(tcn.weight.value, out_channels * tcn.kernel, rng);
    nn::init_uniform(tcn.bias.value, out_channels * tcn.kernel, rng);
    bn2.gamma.value.fill(S(1));
    bn2.beta.value.fill(S(0));
    bn2.reset_running_stats();
    if (residual == Residual::projection) {
      nn::init_uniform(res_conv.weight.value, in_channels, rng);
      nn::init_uniform(res_conv.bias.value, in_channels, rng);
      res_bn.gamma.value.fill(S(1));
      res_bn.beta.value.fill(S(0));
      res_bn.reset_running_stats();
    }
  }

  void set_frozen(bool value) {
    frozen = value;
    bn1.stats_frozen = value;
    bn2.stats_frozen = value;
    res_bn.stats_frozen = value;
    visit_params("", [value](const std::string&, Param<S>& p) { p.trainable = !value; });
  }

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& adj, bool train, bool cache) {
    const bool effective_train = train && !frozen;
    Tensor<S> h = gcn.forward(x, adj, cache);
    h = bn1.forward(h, effective_train, cache);
    h = relu1.forward(h, cache);
    h = tcn.forward(h, cache);
    h = bn2.forward(h, effective_train, cache);
    Tensor<S> res;
    if (residual == Residual::identity) {
      res = x;
    } else if (residual == Residual::projection) {
      res = res_conv.forward(x, cache);
      res = res_bn.forward(res, effective_train, cache);
    }
    if (residual != Residual::none) nn::accumulate(h, res);
    return relu2.forward(h, cache);
  }

  Tensor<S> backward(const Tensor<S>& dy, const Tensor<S>& adj) {
    Tensor<S> d = relu2.backward(dy);
    Tensor<S> dres;
    if (residual == Residual::projection) {
      dres = res_bn.backward(d);
      dres = res_conv.backward(dres);
    }
    Tensor<S> dh = bn2.backward(d);
    dh = tcn.backward(dh);
    dh = relu1.backward(dh);
    dh = bn1.backward(dh);
    Tensor<S> dx = gcn.backward(dh, adj);
    if (residual == Residual::identity)
      nn::accumulate(dx, d);
    else if (residual == Residual::projection)
      nn::accumulate(dx, dres);
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
    fn(prefix + "gcn.weight", gcn.weight);
    fn(prefix + "gcn.bias", gcn.bias);
    fn(prefix + "bn1.gamma", bn1.gamma);
    fn(prefix + "bn1.beta", bn1.beta);
    fn(prefix + "tcn.weight", tcn.weight);
    fn(prefix + "tcn.bias", tcn.bias);
    fn(prefix + "bn2.gamma", bn2.gamma);
    fn(prefix + "bn2.beta", bn2.beta);
    if (residual == Residual::projection) {
      fn(prefix + "res.weight", res_conv.weight);
      fn(prefix + "res.bias", res_conv.bias);
      fn(prefix + "res_bn.gamma", res_bn.gamma);
      fn(prefix + "res_bn.beta", res_bn.beta);
    }
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor<S>& fn) {
    fn(prefix + "bn1.running_mean", bn1.running_mean);
    fn(prefix + "bn1.running_var", bn1.running_var);
    fn(prefix + "bn2.running_mean", bn2.running_mean);
    fn(prefix + "bn2.running_var", bn2.running_var);
    if (residual == Residual::projection) {
      fn(prefix + "res_bn.running_mean", res_bn.running_mean);
      fn(prefix + "res_bn.running_var", res_bn.running_var);
    }
  }
};

template <typename S>
struct ClassifierHead {
  std::vector<nn::Dense<S>> fcs;
  std::vector<nn::ReluCache<S>> relus;
  std::vector<nn::DropoutCache<S>> dropouts;
  double dropout_rate = 0.0;

  void build(int in_features, const std::vector<int>& sizes, double dropout, Rng& rng) {
    dropout_rate = dropout;
    fcs.clear();
    fcs.resize(sizes.size());
    relus.assign(sizes.size() > 0 ? sizes.size() - 1 : 0, {});
    dropouts.assign(relus.size(), {});
    int prev = in_features;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      fcs[i].build(prev, sizes[i], rng);
      prev = sizes[i];
    }
  }

  Tensor<S> forward(const Tensor<S>& x, bool train, bool cache, Rng& dropout_rng) {
    Tensor<S> h = x;
    for (std::size_t i = 0; i < fcs.size(); ++i) {
      h = fcs[i].forward(h, cache);
      if (i + 1 < fcs.size()) {
        h = relus[i].forward(h, cache);
        h = dropouts[i].forward(h, dropout_rate, train, dropout_rng, cache);
      }
    }
    return h;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    Tensor<S> d = dy;
    for (std::size_t i = fcs.size(); i-- > 0;) {
      if (i + 1 < fcs.size()) {
        d = dropouts[i].backward(d);
        d = relus[i].backward(d);
      }
      d = fcs[i].backward(d);
    }
    return d;
  }

  void visit_params(const ParamVisitor<S>& fn) {
    for (std::size_t i = 0; i < fcs.size(); ++i) {
      const std::string prefix = "head.fc" + std::to_string(i) + ".";
      fn(prefix + "weight", fcs[i].weight);
      fn(prefix + "bias", fcs[i].bias);
    }
  }
};

template <typename S>
bool all_finite(const Tensor<S>& t) {
  for (const S& x : t.data)
    if (!std::isfinite(double(x))) return false;
  return true;
}

}  // namespace detail

// The full network: input [N, C, T, V] through the block stack, global
// average pooling over time and joints, then the classifier head.
template <typename S>
class Model {
 public:
  ModelConfig config;
  Tensor<S> adjacency;  // [P, V, V], fixed at build time, never trained
  std::vector<detail::StgcnBlock<S>> blocks;
  detail::ClassifierHead<S> head;
  Rng dropout_rng;

  // GAP cache for backward
  int gap_frames = 0, gap_joints = 0;

  int num_partitions() const { return adjacency.dim(0); }

  void for_each_param(const ParamVisitor<S>& fn) {
    for (auto& b : blocks)
      b.visit_params("block" + std::to_string(b.index) + ".", fn);
    head.visit_params(fn);
  }

  void for_each_buffer(const BufferVisitor<S>& fn) {
    for (auto& b : blocks)
      b.visit_buffers("block" + std::to_string(b.index) + ".", fn);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for_each_param([&n](const std::string&, Param<S>& p) { n += p.value.numel(); });
    return n;
  }

  void zero_grads() {
    for_each_param([](const std::string&, Param<S>& p) { p.zero_grad(); });
  }

  // Frame count after block `layer` (1-based), i.e. after its stride.
  int frames_after(int layer) const {
    int t = config.frames;
    for (int i = 0; i < layer; ++i) {
      const int s = config.strides[i];
      const int pad = (config.temporal_kernel - 1) / 2;
      t = (t + 2 * pad - config.temporal_kernel) / s + 1;
    }
    return t;
  }

  void check_input(const Tensor<S>& batch) const {
    if (batch.shape.size() != 4 || batch.dim(1) != config.in_channels ||
        batch.dim(2) != config.frames || batch.dim(3) != config.num_joints())
      throw ConfigError("forward: batch shape does not match the model configuration");
  }

  // mode: train updates batch-norm running statistics and caches
  // intermediates for backward; eval is a pure function.
  Tensor<S> forward(const Tensor<S>& batch, bool train) {
    check_input(batch);
    Tensor<S> h = batch;
    for (auto& b : blocks) {
      h = b.forward(h, adjacency, train, train);
      if (!detail::all_finite(h))
        throw NumericalError("forward: non-finite values after block " +
                             std::to_string(b.index));
    }
    gap_frames = h.dim(2);
    gap_joints = h.dim(3);
    Tensor<S> feats = global_average_pool(h);
    Tensor<S> logits = head.forward(feats, train, train, dropout_rng);
    if (!detail::all_finite(logits))
      throw NumericalError("forward: non-finite logits in the classifier head");
    return logits;
  }

  // Propagates loss gradients back through the cached train-mode forward.
  void backward(const Tensor<S>& dlogits) {
    Tensor<S> dfeats = head.backward(dlogits);
    const int n = dfeats.dim(0), c = dfeats.dim(1);
    Tensor<S> dh({n, c, gap_frames, gap_joints});
    const S inv = S(1.0 / (double(gap_frames) * gap_joints));
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < c; ++cc) {
        const S g = dfeats.at2(i, cc) * inv;
        S* d = &dh.at4(i, cc, 0, 0);
        for (int k = 0; k < gap_frames * gap_joints; ++k) d[k] = g;
      }
    for (std::size_t i = blocks.size(); i-- > 0;) dh = blocks[i].backward(dh, adjacency);
  }

  // Activations after block `layer` (1..num_blocks), eval mode.
  Tensor<S> feature_map(const Tensor<S>& batch, int layer) {
    if (layer < 1 || layer > int(blocks.size()))
      throw ConfigError("feature_map: layer must be in 1.." + std::to_string(blocks.size()));
    check_input(batch);
    Tensor<S> h = batch;
    for (int i = 0; i < layer; ++i) h = blocks[i].forward(h, adjacency, false, false);
    return h;
  }

  static Tensor<S> global_average_pool(const Tensor<S>& h) {
    const int n = h.dim(0), c = h.dim(1), t = h.dim(2), v = h.dim(3);
    Tensor<S> out({n, c});
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < c; ++cc) {
        double acc = 0.0;
        const S* p = &h.at4(i, cc, 0, 0);
        for (int k = 0; k < t * v; ++k) acc += double(p[k]);
        out.at2(i, cc) = S(acc / (double(t) * v));
      }
    return out;
  }
};

// Deterministic build: every tensor is drawn from a seed derived per
// component, so reinitializing block k from the same seed reproduces the
// fresh-build values of block k exactly.
template <typename S>
Model<S> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model<S> m;
  m.config = config;
  const PartitionedAdjacency adj = build_adjacency(config.topology, config.strategy);
  m.adjacency = Tensor<S>({adj.num_partitions, config.num_joints(), config.num_joints()});
  for (int p = 0; p < adj.num_partitions; ++p)
    for (int j = 0; j < config.num_joints(); ++j)
      for (int i = 0; i < config.num_joints(); ++i)
        m.adjacency.at3(p, j, i) = S(adj.matrices[p].at2(j, i));
  const auto ch = config.channels();
  m.blocks.resize(config.num_blocks());
  int in = config.in_channels;
  for (int i = 0; i < config.num_blocks(); ++i) {
    Rng rng(derive_seed(seed, "block", std::uint64_t(i + 1)));
    m.blocks[i].build(i + 1, adj.num_partitions, in, ch[i], config.strides[i],
                      config.temporal_kernel, rng);
    in = ch[i];
  }
  Rng head_rng(derive_seed(seed, "head"));
  m.head.build(ch.back(), config.head.resolved_sizes(config.num_classes),
               config.head.dropout_rate, head_rng);
  m.dropout_rng = Rng(derive_seed(seed, "dropout"));
  return m;
}

// Standalone spatial graph convolution on a single sample [C, T, V]:
//   out[co, t, j] = sum_p sum_ci sum_i W[p][co, ci] * A_p[j, i] * x[ci, t, i]
template <typename S>
Tensor<S> graph_conv(const Tensor<S>& x, const PartitionedAdjacency& adjacency,
                     const std::vector<Tensor<S>>& weights) {
  if (x.shape.size() != 3) throw ConfigError("graph_conv: input must be [C, T, V]");
  if (int(weights.size()) != adjacency.num_partitions)
    throw ConfigError("graph_conv: one weight matrix per partition required");
  const int ci = x.dim(0), t = x.dim(1), v = x.dim(2);
  if (v != adjacency.num_joints()) throw ConfigError("graph_conv: joint count mismatch");
  const int co = weights[0].dim(0);
  for (const auto& w : weights)
    if (w.dim(0) != co || w.dim(1) != ci)
      throw ConfigError("graph_conv: weight shape mismatch");
  Tensor<S> y({co, t, v});
  for (int p = 0; p < adjacency.num_partitions; ++p) {
    const auto& a = adjacency.matrices[p];
    for (int o = 0; o < co; ++o)
      for (int c = 0; c < ci; ++c) {
        const S w = weights[p].at2(o, c);
        if (w == S(0)) continue;
        for (int tt = 0; tt < t; ++tt)
          for (int j = 0; j < v; ++j) {
            S acc = S(0);
            for (int i = 0; i < v; ++i) acc += S(a.at2(j, i)) * x.at3(c, tt, i);
            y.at3(o, tt, j) += w * acc;
          }
      }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Checkpoint container (.ckpt)
//
// Little-endian binary layout:
//   magic "STGCKPT1", u32 version (1)
//   length-prefixed JSON echo of the model configuration
//   u32 tensor count, then per tensor: name, u8 kind (1 = parameter with
//   trainable flag in the next byte, 2 = running statistic), u32 ndim,
//   u32 dims..., f32 data
// Values are stored as 32-bit floats regardless of the in-memory scalar.

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'G', 'C', 'K', 'P', 'T', '1'};

struct Checkpoint {
  nlohmann::json config_json;
  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
    bool trainable = false;
    bool is_buffer = false;
  };
  std::map<std::string, Entry> tensors;

  ModelConfig config() const { return model_config_from_json(config_json); }
};

template <typename S>
void save_checkpoint(Model<S>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  io::write_bytes(os, kCheckpointMagic, 8);
  io::write_u32(os, 1);
  io::write_string(os, model_config_to_json(model.config).dump());
  std::uint32_t count = 0;
  model.for_each_param([&count](const std::string&, Param<S>&) { ++count; });
  model.for_each_buffer([&count](const std::string&, Tensor<S>&) { ++count; });
  io::write_u32(os, count);
  auto write_tensor = [&os](const std::string& name, const Tensor<S>& t, std::uint8_t kind,
                            std::uint8_t trainable) {
    io::write_string(os, name);
    io::write_u8(os, kind);
    io::write_u8(os, trainable);
    io::write_u32(os, std::uint32_t(t.shape.size()));
    for (int d : t.shape) io::write_u32(os, std::uint32_t(d));
    for (const S& x : t.data) io::write_f32(os, float(x));
  };
  model.for_each_param([&](const std::string& name, Param<S>& p) {
    write_tensor(name, p.value, 1, p.trainable ? 1 : 0);
  });
  model.for_each_buffer([&](const std::string& name, Tensor<S>& t) {
    write_tensor(name, t, 2, 0);
  });
  if (!os) throw DataError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[8];
  io::read_bytes(is, magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("not a checkpoint (bad magic): " + path);
  if (io::read_u32(is) != 1) throw DataError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_json = nlohmann::json::parse(io::read_string(is));
  const std::uint32_t count = io::read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = io::read_string(is);
    Checkpoint::Entry e;
    const std::uint8_t kind = io::read_u8(is);
    const std::uint8_t trainable = io::read_u8(is);
    e.is_buffer = kind == 2;
    e.trainable = trainable != 0;
    const std::uint32_t ndim = io::read_u32(is);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(int(io::read_u32(is)));
      numel *= std::size_t(e.shape.back());
    }
    e.data.resize(numel);
    for (auto& x : e.data) x = io::read_f32(is);
    ckpt.tensors[name] = std::move(e);
  }
  return ckpt;
}

// Rebuilds the model recorded in a checkpoint, restoring every parameter,
// running statistic and trainable flag.
template <typename S>
Model<S> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<S> m = build_model<S>(ckpt.config(), 0);
  auto restore = [&ckpt](const std::string& name, Tensor<S>& t, bool* trainable) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DataError("checkpoint missing tensor: " + name);
    if (it->second.shape != t.shape) throw DataError("checkpoint shape mismatch for " + name);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = S(it->second.data[i]);
    if (trainable) *trainable = it->second.trainable;
  };
  m.for_each_param([&](const std::string& name, Param<S>& p) {
    restore(name, p.value, &p.trainable);
  });
  m.for_each_buffer([&](const std::string& name, Tensor<S>& t) { restore(name, t, nullptr); });
  // restore block frozen flags from the parameter trainability
  for (auto& b : m.blocks) {
    bool any_trainable = false;
    b.visit_params("", [&any_trainable](const std::string&, Param<S>& p) {
      any_trainable = any_trainable || p.trainable;
    });
    b.frozen = !any_trainable;
    b.bn1.stats_frozen = b.frozen;
    b.bn2.stats_frozen = b.frozen;
    b.res_bn.stats_frozen = b.frozen;
  }
  return m;
}

}  // namespace stgcn
