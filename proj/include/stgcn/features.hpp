#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/model.hpp"
#include "stgcn/train.hpp"

namespace stgcn {

enum class PoolingKind { gap, flatten };
enum class ReductionKind { none, pca, truncated_svd };

inline const char* to_string(PoolingKind p) { return p == PoolingKind::gap ? "gap" : "flatten"; }

inline PoolingKind pooling_from_string(const std::string& s) {
  if (s == "gap") return PoolingKind::gap;
  if (s == "flatten") return PoolingKind::flatten;
  throw ConfigError("unknown pooling kind: " + s);
}

struct FeatureProvenance {
  std::vector<int> layers;
  PoolingKind pooling = PoolingKind::gap;
  ReductionKind reduction = ReductionKind::none;
  int reduced_dims = 0;
};

struct FeatureSet {
  Tensor<double> vectors;  // [N, D]
  std::vector<int> labels;
  FeatureProvenance provenance;

  int rows() const { return vectors.shape.empty() ? 0 : vectors.dim(0); }
  int dims() const { return vectors.shape.size() < 2 ? 0 : vectors.dim(1); }
};

// Pools eval-mode activations of one block into one row per sample.
// gap: mean over time and joints, D = C. flatten: row-major (channel, time,
// joint) layout, D = C * T_l * V.
template <typename S>
FeatureSet extract(Model<S>& model, const Dataset& data, int layer, PoolingKind pooling) {
  if (data.samples.empty()) throw DataError("extract: empty dataset");
  FeatureSet out;
  out.provenance.layers = {layer};
  out.provenance.pooling = pooling;
  out.labels.reserve(data.size());
  const int batch = 32;
  std::vector<std::size_t> indices(data.size());
  std::iota(indices.begin(), indices.end(), 0);
  int d = -1;
  std::size_t row = 0;
  for (std::size_t i = 0; i < indices.size(); i += batch) {
    std::vector<std::size_t> chunk(indices.begin() + i,
                                   indices.begin() + std::min(indices.size(), i + batch));
    auto [x, labels] = detail::make_batch<S>(data, chunk);
    Tensor<S> h = model.feature_map(x, layer);
    const int n = h.dim(0), c = h.dim(1), t = h.dim(2), v = h.dim(3);
    if (d < 0) {
      d = pooling == PoolingKind::gap ? c : c * t * v;
      out.vectors = Tensor<double>({int(data.size()), d});
    }
    for (int b = 0; b < n; ++b, ++row) {
      double* dst = &out.vectors.at2(int(row), 0);
      if (pooling == PoolingKind::gap) {
        for (int cc = 0; cc < c; ++cc) {
          double acc = 0.0;
          const S* p = &h.at4(b, cc, 0, 0);
          for (int k = 0; k < t * v; ++k) acc += double(p[k]);
          dst[cc] = acc / (double(t) * v);
        }
      } else {
        const S* p = &h.at4(b, 0, 0, 0);
        for (int k = 0; k < c * t * v; ++k) dst[k] = double(p[k]);
      }
    }
    for (int y : labels) out.labels.push_back(y);
  }
  return out;
}

// Row-wise concatenation of GAP features from consecutive layers (ascending).
inline FeatureSet fuse(const std::vector<FeatureSet>& sets) {
  if (sets.size() < 2 || sets.size() > 3)
    throw ConfigError("fuse: needs 2 or 3 feature sets");
  std::vector<int> layers;
  int total_d = 0;
  for (const auto& s : sets) {
    if (s.provenance.pooling != PoolingKind::gap)
      throw ConfigError("fuse: all sets must be GAP-pooled");
    if (s.provenance.layers.size() != 1)
      throw ConfigError("fuse: inputs must be single-layer feature sets");
    if (s.rows() != sets[0].rows() || s.labels != sets[0].labels)
      throw ConfigError("fuse: sets must cover the same samples");
    layers.push_back(s.provenance.layers[0]);
    total_d += s.dims();
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    if (layers[i + 1] != layers[i] + 1)
      throw ConfigError("fuse: layers must be consecutive and ascending");
  FeatureSet out;
  out.labels = sets[0].labels;
  out.provenance.layers = layers;
  out.provenance.pooling = PoolingKind::gap;
  out.vectors = Tensor<double>({sets[0].rows(), total_d});
  for (int r = 0; r < sets[0].rows(); ++r) {
    int col = 0;
    for (const auto& s : sets)
      for (int c = 0; c < s.dims(); ++c) out.vectors.at2(r, col++) = s.vectors.at2(r, c);
  }
  return out;
}

// PCA projects centered data onto the top principal directions;
// truncated SVD projects the uncentered data onto the top right singular
// vectors. `explained_variance`, when given, receives the per-component
// variances (PCA) or squared singular values / (N-1) (truncated SVD).
inline FeatureSet reduce(const FeatureSet& set, ReductionKind method, int dims,
                         std::vector<double>* explained_variance = nullptr) {
  const int n = set.rows(), d = set.dims();
  if (method == ReductionKind::none) throw ConfigError("reduce: method must be pca or truncated_svd");
  if (dims < 1 || dims > std::min(n, d))
    throw ConfigError("reduce: dims must be in 1..min(N, D)");
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = set.vectors.at2(i, j);
  if (method == ReductionKind::pca) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd proj = x * svd.matrixV().leftCols(dims);
  if (explained_variance) {
    explained_variance->assign(dims, 0.0);
    for (int k = 0; k < dims; ++k) {
      const double s = svd.singularValues()(k);
      (*explained_variance)[k] = s * s / std::max(1, n - 1);
    }
  }
  FeatureSet out;
  out.labels = set.labels;
  out.provenance = set.provenance;
  out.provenance.reduction = method;
  out.provenance.reduced_dims = dims;
  out.vectors = Tensor<double>({n, dims});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dims; ++j) out.vectors.at2(i, j) = proj(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Downstream classifiers

enum class ClassifierKind { svm_linear, logreg_multinomial, ffnn };

inline ClassifierKind classifier_kind_from_string(const std::string& s) {
  if (s == "svm_linear") return ClassifierKind::svm_linear;
  if (s == "logreg_multinomial") return ClassifierKind::logreg_multinomial;
  if (s == "ffnn") return ClassifierKind::ffnn;
  throw ConfigError("unknown classifier kind: " + s);
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logreg_multinomial;
  double reg_constant = 1.0;        // penalty strength C
  std::vector<int> ffnn_layers;     // dense widths; final resolves to K
  std::uint64_t seed = 0;

  void validate() const {
    if (reg_constant <= 0.0) throw ConfigError("classifier: reg constant must be positive");
    if (ffnn_layers.size() > 4) throw ConfigError("classifier: at most 4 dense layers");
  }
};

// Trained classifier. Linear kinds keep an explicit [K, D] weight matrix;
// the FFNN keeps its dense stack. objective_history logs the training
// objective per accepted iteration.
struct Classifier {
  ClassifierKind kind = ClassifierKind::logreg_multinomial;
  int num_classes = 0;
  Eigen::MatrixXd weight;  // [K, D]
  Eigen::VectorXd bias;    // [K]
  std::vector<nn::Dense<double>> fcs;
  std::vector<double> objective_history;

  std::vector<int> predict(const FeatureSet& set) const {
    const int n = set.rows();
    std::vector<int> out(n, 0);
    if (kind == ClassifierKind::ffnn) {
      Tensor<double> h = set.vectors;
      for (std::size_t l = 0; l < fcs.size(); ++l) {
        h = const_cast<nn::Dense<double>&>(fcs[l]).forward(h, false);
        if (l + 1 < fcs.size())
          for (auto& v : h.data) v = std::max(0.0, v);
      }
      return nn::argmax_rows(h);
    }
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x(set.dims());
      for (int j = 0; j < set.dims(); ++j) x(j) = set.vectors.at2(i, j);
      Eigen::VectorXd scores = weight * x + bias;
      int best = 0;
      for (int k = 1; k < num_classes; ++k)
        if (scores(k) > scores(best)) best = k;
      out[i] = best;
    }
    return out;
  }
};

namespace detail {

inline constexpr int kConvexMaxIterations = 5000;
inline constexpr double kConvexTolerance = 1e-6;  // absolute objective change

struct ConvexProblem {
  // objective and gradient at (W, b); gradient written into gw, gb
  virtual double eval(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                      Eigen::MatrixXd* gw, Eigen::VectorXd* gb) const = 0;
  virtual ~ConvexProblem() = default;
};

// One-vs-rest L2-regularized hinge:
//   J = sum_k 0.5 ||w_k||^2 + C * sum_i max(0, 1 - y_ik f_k(x_i))
struct HingeProblem final : ConvexProblem {
  const Eigen::MatrixXd& x;  // [N, D]
  const std::vector<int>& labels;
  int k;
  double c;

  HingeProblem(const Eigen::MatrixXd& x_, const std::vector<int>& labels_, int k_, double c_)
      : x(x_), labels(labels_), k(k_), c(c_) {}

  double eval(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, Eigen::MatrixXd* gw,
              Eigen::VectorXd* gb) const override {
    const int n = int(x.rows());
    double j = 0.5 * w.squaredNorm();
    if (gw) {
      *gw = w;
      gb->setZero(k);
    }
    Eigen::MatrixXd scores = x * w.transpose();  // [N, K]
    scores.rowwise() += b.transpose();
    for (int i = 0; i < n; ++i) {
      for (int cls = 0; cls < k; ++cls) {
        const double y = labels[i] == cls ? 1.0 : -1.0;
        const double margin = 1.0 - y * scores(i, cls);
        if (margin > 0.0) {
          j += c * margin;
          if (gw) {
            gw->row(cls) -= (c * y) * x.row(i);
            (*gb)(cls) -= c * y;
          }
        }
      }
    }
    return j;
  }
};

// Multinomial logistic regression with L2 penalty:
//   J = 0.5 ||W||^2 + C * sum_i -log softmax_{y_i}(W x_i + b)
struct SoftmaxProblem final : ConvexProblem {
  const Eigen::MatrixXd& x;
  const std::vector<int>& labels;
  int k;
  double c;

  SoftmaxProblem(const Eigen::MatrixXd& x_, const std::vector<int>& labels_, int k_, double c_)
      : x(x_), labels(labels_), k(k_), c(c_) {}

  double eval(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, Eigen::MatrixXd* gw,
              Eigen::VectorXd* gb) const override {
    const int n = int(x.rows());
    double j = 0.5 * w.squaredNorm();
    Eigen::MatrixXd scores = x * w.transpose();
    scores.rowwise() += b.transpose();
    Eigen::MatrixXd p(n, k);
    for (int i = 0; i < n; ++i) {
      const double zmax = scores.row(i).maxCoeff();
      double sum = 0.0;
      for (int cls = 0; cls < k; ++cls) sum += std::exp(scores(i, cls) - zmax);
      const double lse = zmax + std::log(sum);
      j += c * (lse - scores(i, labels[i]));
      for (int cls = 0; cls < k; ++cls) p(i, cls) = std::exp(scores(i, cls) - lse);
    }
    if (gw) {
      for (int i = 0; i < n; ++i) p(i, labels[i]) -= 1.0;
      *gw = w + c * (p.transpose() * x);
      *gb = c * p.colwise().sum().transpose();
    }
    return j;
  }
};

// (Sub)gradient descent with backtracking: a step is only accepted when the
// objective does not increase, which makes the logged objective monotone.
inline std::vector<double> minimize_convex(const ConvexProblem& problem, Eigen::MatrixXd& w,
                                           Eigen::VectorXd& b) {
  std::vector<double> history;
  double step = 1e-2;
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  double j = problem.eval(w, b, &gw, &gb);
  history.push_back(j);
  for (int iter = 0; iter < kConvexMaxIterations; ++iter) {
    const double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
    if (gnorm2 < 1e-18) break;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      Eigen::MatrixXd w_new = w - step * gw;
      Eigen::VectorXd b_new = b - step * gb;
      const double j_new = problem.eval(w_new, b_new, nullptr, nullptr);
      if (j_new <= j) {
        const double drop = j - j_new;
        w = std::move(w_new);
        b = std::move(b_new);
        j = problem.eval(w, b, &gw, &gb);
        history.push_back(j);
        step *= 1.3;
        accepted = true;
        if (drop < kConvexTolerance) return history;  // converged
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return history;
}

}  // namespace detail

// Trains one of the three downstream classifiers and evaluates it on the
// validation features. The convex classifiers run in double precision with
// a fixed iteration budget; the FFNN reuses the dense layers and momentum
// SGD of the training engine.
inline std::pair<Classifier, Metrics> train_classifier(const FeatureSet& train,
                                                       const FeatureSet& val,
                                                       const ClassifierSpec& spec) {
  spec.validate();
  if (train.dims() != val.dims())
    throw ConfigError("train_classifier: train/val feature dimensions differ");
  if (train.rows() < 1) throw DataError("train_classifier: empty training set");
  int k = 0;
  for (int y : train.labels) k = std::max(k, y + 1);
  for (int y : val.labels) k = std::max(k, y + 1);
  {
    std::vector<char> present(k, 0);
    for (int y : train.labels) present[y] = 1;
    if (std::accumulate(present.begin(), present.end(), 0) < 2)
      throw DataError("train_classifier: training set must contain at least two classes");
  }

  Classifier clf;
  clf.kind = spec.kind;
  clf.num_classes = k;
  const int n = train.rows(), d = train.dims();

  if (spec.kind == ClassifierKind::ffnn) {
    std::vector<int> sizes = spec.ffnn_layers;
    if (sizes.empty())
      sizes = {k};
    else
      sizes.back() = k;
    Rng rng(derive_seed(spec.seed, "ffnn.init"));
    clf.fcs.resize(sizes.size());
    int prev = d;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      clf.fcs[i].build(prev, sizes[i], rng);
      prev = sizes[i];
    }
    std::vector<nn::ReluCache<double>> relus(sizes.size() > 0 ? sizes.size() - 1 : 0);
    const int epochs = 200, batch = 16;
    const double momentum = 0.9;
    std::vector<Tensor<double>> vel;
    for (auto& fc : clf.fcs) {
      vel.push_back(Tensor<double>(fc.weight.value.shape));
      vel.push_back(Tensor<double>(fc.bias.value.shape));
    }
    for (int epoch = 0; epoch < epochs; ++epoch) {
      const double lr = epoch < 120 ? 0.05 : (epoch < 170 ? 0.005 : 0.0005);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng(derive_seed(spec.seed, "ffnn.epoch", std::uint64_t(epoch)));
      shuffle_rng.shuffle(order);
      double epoch_loss = 0.0;
      for (std::size_t i = 0; i < order.size(); i += batch) {
        const std::size_t hi = std::min(order.size(), i + batch);
        Tensor<double> x({int(hi - i), d});
        std::vector<int> labels(hi - i);
        for (std::size_t r = i; r < hi; ++r) {
          for (int j = 0; j < d; ++j) x.at2(int(r - i), j) = train.vectors.at2(int(order[r]), j);
          labels[r - i] = train.labels[order[r]];
        }
        Tensor<double> h = x;
        for (std::size_t l = 0; l < clf.fcs.size(); ++l) {
          h = clf.fcs[l].forward(h, true);
          if (l + 1 < clf.fcs.size()) h = relus[l].forward(h, true);
        }
        Tensor<double> dl;
        epoch_loss += nn::softmax_cross_entropy(h, labels, &dl) * double(labels.size());
        for (auto& fc : clf.fcs) {
          fc.weight.zero_grad();
          fc.bias.zero_grad();
        }
        Tensor<double> grad = dl;
        for (std::size_t l = clf.fcs.size(); l-- > 0;) {
          if (l + 1 < clf.fcs.size()) grad = relus[l].backward(grad);
          grad = clf.fcs[l].backward(grad);
        }
        std::size_t slot = 0;
        for (auto& fc : clf.fcs) {
          for (Param<double>* p : {&fc.weight, &fc.bias}) {
            Tensor<double>& v = vel[slot++];
            for (std::size_t e = 0; e < p->value.numel(); ++e) {
              v[e] = momentum * v[e] + p->grad[e];
              p->value[e] -= lr * v[e];
            }
          }
        }
      }
      clf.objective_history.push_back(epoch_loss / n);
    }
  } else {
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = train.vectors.at2(i, j);
    clf.weight = Eigen::MatrixXd::Zero(k, d);
    clf.bias = Eigen::VectorXd::Zero(k);
    if (spec.kind == ClassifierKind::svm_linear) {
      detail::HingeProblem problem(x, train.labels, k, spec.reg_constant);
      clf.objective_history = detail::minimize_convex(problem, clf.weight, clf.bias);
    } else {
      detail::SoftmaxProblem problem(x, train.labels, k, spec.reg_constant);
      clf.objective_history = detail::minimize_convex(problem, clf.weight, clf.bias);
    }
  }

  const std::vector<int> predictions = clf.predict(val);
  // validation loss: mean hinge for the SVM, mean cross-entropy otherwise
  double val_loss = 0.0;
  if (val.rows() > 0 && spec.kind != ClassifierKind::ffnn) {
    Eigen::MatrixXd xv(val.rows(), d);
    for (int i = 0; i < val.rows(); ++i)
      for (int j = 0; j < d; ++j) xv(i, j) = val.vectors.at2(i, j);
    Eigen::MatrixXd scores = xv * clf.weight.transpose();
    scores.rowwise() += clf.bias.transpose();
    for (int i = 0; i < val.rows(); ++i) {
      if (spec.kind == ClassifierKind::svm_linear) {
        for (int cls = 0; cls < k; ++cls) {
          const double y = val.labels[i] == cls ? 1.0 : -1.0;
          val_loss += std::max(0.0, 1.0 - y * scores(i, cls));
        }
      } else {
        const double zmax = scores.row(i).maxCoeff();
        double sum = 0.0;
        for (int cls = 0; cls < k; ++cls) sum += std::exp(scores(i, cls) - zmax);
        val_loss += zmax + std::log(sum) - scores(i, val.labels[i]);
      }
    }
    val_loss /= val.rows();
  }
  Metrics metrics = compute_metrics(predictions, val.labels, k, val_loss);
  return {std::move(clf), std::move(metrics)};
}

// ---------------------------------------------------------------------------
// Feature file (.feat): magic "FEATSET1", u32 version, u32 N, u32 D,
// provenance (u32 layer count + layers, u8 pooling, u8 reduction, u32 dims),
// i32 labels[N], f32 row-major data. Little-endian.

inline constexpr char kFeatureMagic[8] = {'F', 'E', 'A', 'T', 'S', 'E', 'T', '1'};

inline void save_feature_set(const FeatureSet& set, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  io::write_bytes(os, kFeatureMagic, 8);
  io::write_u32(os, 1);
  io::write_u32(os, std::uint32_t(set.rows()));
  io::write_u32(os, std::uint32_t(set.dims()));
  io::write_u32(os, std::uint32_t(set.provenance.layers.size()));
  for (int l : set.provenance.layers) io::write_u32(os, std::uint32_t(l));
  io::write_u8(os, set.provenance.pooling == PoolingKind::gap ? 0 : 1);
  io::write_u8(os, std::uint8_t(set.provenance.reduction));
  io::write_u32(os, std::uint32_t(set.provenance.reduced_dims));
  for (int y : set.labels) io::write_i32(os, y);
  for (double v : set.vectors.data) io::write_f32(os, float(v));
  if (!os) throw DataError("write failed: " + path);
}

inline FeatureSet load_feature_set(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[8];
  io::read_bytes(is, magic, 8);
  if (std::memcmp(magic, kFeatureMagic, 8) != 0)
    throw DataError("not a feature file (bad magic): " + path);
  if (io::read_u32(is) != 1) throw DataError("unsupported feature file version");
  FeatureSet set;
  const int n = int(io::read_u32(is));
  const int d = int(io::read_u32(is));
  const int nl = int(io::read_u32(is));
  for (int i = 0; i < nl; ++i) set.provenance.layers.push_back(int(io::read_u32(is)));
  set.provenance.pooling = io::read_u8(is) == 0 ? PoolingKind::gap : PoolingKind::flatten;
  set.provenance.reduction = ReductionKind(io::read_u8(is));
  set.provenance.reduced_dims = int(io::read_u32(is));
  set.labels.resize(n);
  for (auto& y : set.labels) y = io::read_i32(is);
  set.vectors = Tensor<double>({n, d});
  for (auto& v : set.vectors.data) v = io::read_f32(is);
  return set;
}

inline void export_features_csv(const FeatureSet& set, std::ostream& os) {
  for (int j = 0; j < set.dims(); ++j) os << 'f' << j << ',';
  os << "label\n";
  char buf[32];
  for (int i = 0; i < set.rows(); ++i) {
    for (int j = 0; j < set.dims(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g,", set.vectors.at2(i, j));
      os << buf;
    }
    os << set.labels[i] << '\n';
  }
}

}  // namespace stgcn
