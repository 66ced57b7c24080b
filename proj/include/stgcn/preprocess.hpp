#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/skeleton.hpp"

namespace stgcn {

struct Dataset {
  std::vector<SkeletonSequence> samples;
  std::vector<std::string> class_names;
  double frame_rate = 30.0;
  TopologyKind topology_kind = TopologyKind::shared20;

  std::size_t size() const { return samples.size(); }
  int num_classes() const { return int(class_names.size()); }

  void validate() const {
    for (const auto& s : samples) {
      if (s.label < 0 || s.label >= num_classes())
        throw DataError("sample label out of range of class names");
      if (s.topology_kind != topology_kind)
        throw DataError("dataset mixes topology kinds");
    }
  }
};

enum class SplitMethod { cross_subject, random_ratio };

struct SplitSpec {
  SplitMethod method = SplitMethod::random_ratio;
  std::set<int> train_subjects;   // cross_subject
  double train_fraction = 0.7;    // random_ratio
  std::uint64_t seed = 0;
};

struct CleanReport {
  int empty_removed = 0;
  int pseudo_removed = 0;
  int nonfinite_removed = 0;

  int total() const { return empty_removed + pseudo_removed + nonfinite_removed; }
};

namespace detail {

inline bool frame_all_zero(const SkeletonSequence& s, int t) {
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < s.joints; ++v)
      if (s.at(c, t, v) != 0.0) return false;
  return true;
}

inline bool has_nonfinite(const SkeletonSequence& s) {
  for (double x : s.coords)
    if (!std::isfinite(x)) return true;
  return false;
}

// Mean over (channel, joint) of the per-coordinate variance over time.
inline double mean_coordinate_variance(const SkeletonSequence& s) {
  const int t_count = s.frames;
  if (t_count <= 1) return 0.0;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int v = 0; v < s.joints; ++v) {
      double mean = 0.0;
      for (int t = 0; t < t_count; ++t) mean += s.at(c, t, v);
      mean /= t_count;
      double var = 0.0;
      for (int t = 0; t < t_count; ++t) {
        const double d = s.at(c, t, v) - mean;
        var += d * d;
      }
      total += var / t_count;
    }
  }
  return total / (3.0 * s.joints);
}

}  // namespace detail

// Pseudo-skeleton threshold: a tracked but motionless (or mostly untracked)
// skeleton. Mean coordinate variance below 1e-4 m^2 or more than half of the
// frames all-zero counts as pseudo.
inline constexpr double kPseudoVarianceThreshold = 1e-4;

// Removes empty sequences, non-finite sequences and pseudo-skeletons.
inline Dataset clean(const Dataset& dataset, CleanReport* report = nullptr) {
  Dataset out;
  out.class_names = dataset.class_names;
  out.frame_rate = dataset.frame_rate;
  out.topology_kind = dataset.topology_kind;
  CleanReport rep;
  for (const auto& s : dataset.samples) {
    int zero_frames = 0;
    for (int t = 0; t < s.frames; ++t)
      if (detail::frame_all_zero(s, t)) ++zero_frames;
    if (s.frames == 0 || zero_frames == s.frames) {
      ++rep.empty_removed;
      continue;
    }
    if (detail::has_nonfinite(s)) {
      ++rep.nonfinite_removed;
      continue;
    }
    if (detail::mean_coordinate_variance(s) < kPseudoVarianceThreshold ||
        2 * zero_frames > s.frames) {
      ++rep.pseudo_removed;
      continue;
    }
    out.samples.push_back(s);
  }
  if (report) *report = rep;
  return out;
}

// Motion energy: sum over frames and joints of the Euclidean step length.
inline double motion_energy(const SkeletonSequence& s) {
  double e = 0.0;
  for (int t = 0; t + 1 < s.frames; ++t) {
    for (int v = 0; v < s.joints; ++v) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = s.at(c, t + 1, v) - s.at(c, t, v);
        d2 += d * d;
      }
      e += std::sqrt(d2);
    }
  }
  return e;
}

// Picks the body with the most movement; ties go to the lower index.
inline SkeletonSequence select_main_actor(const std::vector<SkeletonSequence>& bodies) {
  if (bodies.empty()) throw DataError("select_main_actor: no bodies present");
  if (bodies.size() == 1) return bodies[0];
  std::size_t best = 0;
  double best_energy = motion_energy(bodies[0]);
  for (std::size_t i = 1; i < bodies.size(); ++i) {
    const double e = motion_energy(bodies[i]);
    if (e > best_energy) {
      best = i;
      best_energy = e;
    }
  }
  return bodies[best];
}

// Fixes the frame count: short sequences repeat cyclically, long sequences
// are sampled at uniformly spaced (rounded) indices.
inline SkeletonSequence pad_to_frames(const SkeletonSequence& seq, int target_frames = 300) {
  if (seq.frames < 1) throw DataError("pad_to_frames: sequence has no frames");
  if (target_frames < 1) throw ConfigError("pad_to_frames: target must be >= 1");
  if (seq.frames == target_frames) return seq;
  SkeletonSequence out(target_frames, seq.joints, seq.topology_kind);
  out.label = seq.label;
  out.subject_id = seq.subject_id;
  out.frame_rate = seq.frame_rate;
  for (int t = 0; t < target_frames; ++t) {
    int src;
    if (seq.frames < target_frames) {
      src = t % seq.frames;
    } else {
      src = int(std::llround(double(t) * seq.frames / target_frames));
      src = std::min(src, seq.frames - 1);
    }
    for (int c = 0; c < 3; ++c)
      for (int v = 0; v < seq.joints; ++v) out.at(c, t, v) = seq.at(c, src, v);
  }
  return out;
}

// Per-frame translation putting the root (mid-spine) joint at the origin.
inline SkeletonSequence translate_to_spine(const SkeletonSequence& seq,
                                           const SkeletonTopology& topology) {
  if (seq.joints != topology.num_joints())
    throw DataError("translate_to_spine: sequence/topology joint count mismatch");
  SkeletonSequence out = seq;
  const int root = topology.root_index;
  for (int t = 0; t < seq.frames; ++t) {
    const double off[3] = {seq.at(0, t, root), seq.at(1, t, root), seq.at(2, t, root)};
    for (int c = 0; c < 3; ++c)
      for (int v = 0; v < seq.joints; ++v) out.at(c, t, v) = seq.at(c, t, v) - off[c];
  }
  return out;
}

namespace detail {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 joint_at(const SkeletonSequence& s, int t, int v) {
  return {s.at(0, t, v), s.at(1, t, v), s.at(2, t, v)};
}

inline Vec3 sub(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 scale(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }

}  // namespace detail

// One rigid rotation, computed from frame 0 and applied to every frame, that
// puts the spine parallel to +z and the facing direction (shoulder line
// crossed with the spine) along +x. Rotating per frame would erase rotational
// motion content, so the first frame fixes the whole sequence.
inline SkeletonSequence rotate_align(const SkeletonSequence& seq,
                                     const SkeletonTopology& topology) {
  using detail::Vec3;
  if (seq.joints != topology.num_joints())
    throw DataError("rotate_align: sequence/topology joint count mismatch");
  if (seq.frames < 1) throw DataError("rotate_align: sequence has no frames");

  const Vec3 base = detail::joint_at(seq, 0, topology.spine_base_index);
  const Vec3 top = detail::joint_at(seq, 0, topology.spine_top_index);
  const Vec3 left = detail::joint_at(seq, 0, topology.shoulder_left_index);
  const Vec3 right = detail::joint_at(seq, 0, topology.shoulder_right_index);

  Vec3 spine = detail::sub(top, base);
  const double spine_len = detail::norm(spine);
  if (spine_len < 1e-9)
    throw DataError("rotate_align: zero-length spine vector (" +
                    topology.joint_names[topology.spine_base_index] + " -> " +
                    topology.joint_names[topology.spine_top_index] + ") in frame 0");
  Vec3 shoulder = detail::sub(left, right);
  if (detail::norm(shoulder) < 1e-9)
    throw DataError("rotate_align: zero-length shoulder vector (" +
                    topology.joint_names[topology.shoulder_left_index] + " -> " +
                    topology.joint_names[topology.shoulder_right_index] + ") in frame 0");

  const Vec3 e3 = detail::scale(spine, 1.0 / spine_len);
  Vec3 facing = detail::cross(shoulder, spine);
  // Remove the spine component, leaving the horizontal facing direction.
  facing = detail::sub(facing, detail::scale(e3, detail::dot(facing, e3)));
  const double facing_len = detail::norm(facing);
  if (facing_len < 1e-9)
    throw DataError("rotate_align: shoulder line (" +
                    topology.joint_names[topology.shoulder_left_index] + " -> " +
                    topology.joint_names[topology.shoulder_right_index] +
                    ") is parallel to the spine in frame 0");
  const Vec3 e1 = detail::scale(facing, 1.0 / facing_len);
  const Vec3 e2 = detail::cross(e3, e1);

  // Rows of the rotation matrix: world frame -> aligned frame.
  const double r[3][3] = {{e1.x, e1.y, e1.z}, {e2.x, e2.y, e2.z}, {e3.x, e3.y, e3.z}};

  SkeletonSequence out = seq;
  for (int t = 0; t < seq.frames; ++t) {
    for (int v = 0; v < seq.joints; ++v) {
      const double p[3] = {seq.at(0, t, v), seq.at(1, t, v), seq.at(2, t, v)};
      for (int c = 0; c < 3; ++c)
        out.at(c, t, v) = r[c][0] * p[0] + r[c][1] * p[1] + r[c][2] * p[2];
    }
  }
  return out;
}

// Keeps frames 0, k, 2k, ... and divides the nominal frame rate accordingly.
inline SkeletonSequence frame_rate_adjust(const SkeletonSequence& seq, int keep_every = 3) {
  if (keep_every < 1) throw ConfigError("frame_rate_adjust: keep_every must be >= 1");
  if (keep_every == 1) return seq;
  const int out_frames = (seq.frames + keep_every - 1) / keep_every;
  SkeletonSequence out(out_frames, seq.joints, seq.topology_kind);
  out.label = seq.label;
  out.subject_id = seq.subject_id;
  out.frame_rate = seq.frame_rate / keep_every;
  for (int t = 0; t < out_frames; ++t)
    for (int c = 0; c < 3; ++c)
      for (int v = 0; v < seq.joints; ++v) out.at(c, t, v) = seq.at(c, t * keep_every, v);
  return out;
}

// Centered moving average per coordinate; boundaries use the truncated
// window (the mean over the frames that exist).
inline SkeletonSequence moving_average(const SkeletonSequence& seq, int window) {
  if (window < 1 || window % 2 == 0)
    throw ConfigError("moving_average: window must be odd and >= 1");
  if (window == 1) return seq;
  const int half = window / 2;
  SkeletonSequence out = seq;
  for (int c = 0; c < 3; ++c) {
    for (int v = 0; v < seq.joints; ++v) {
      for (int t = 0; t < seq.frames; ++t) {
        const int lo = std::max(0, t - half);
        const int hi = std::min(seq.frames - 1, t + half);
        double sum = 0.0;
        for (int u = lo; u <= hi; ++u) sum += seq.at(c, u, v);
        out.at(c, t, v) = sum / (hi - lo + 1);
      }
    }
  }
  return out;
}

// Train/validation split. cross_subject partitions by performer identity;
// random_ratio shuffles with the spec seed and cuts at floor(N * fraction).
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  Dataset train, val;
  for (Dataset* d : {&train, &val}) {
    d->class_names = dataset.class_names;
    d->frame_rate = dataset.frame_rate;
    d->topology_kind = dataset.topology_kind;
  }
  if (spec.method == SplitMethod::cross_subject) {
    for (const auto& s : dataset.samples) {
      if (s.subject_id < 0)
        throw DataError("cross_subject split requires subject ids on every sample");
      (spec.train_subjects.count(s.subject_id) ? train : val).samples.push_back(s);
    }
    return {std::move(train), std::move(val)};
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("random_ratio split requires train_fraction in (0, 1)");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(order);
  const std::size_t n_train = std::size_t(double(dataset.size()) * spec.train_fraction);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : val).samples.push_back(dataset.samples[order[i]]);
  return {std::move(train), std::move(val)};
}

}  // namespace stgcn
