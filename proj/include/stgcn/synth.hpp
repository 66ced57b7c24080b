#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/preprocess.hpp"
#include "stgcn/skeleton.hpp"

// Deterministic procedural skeleton-motion generator. Classes are parametric
// sinusoidal joint trajectories layered on a rest pose; per-sample jitter on
// amplitude, phase and frequency keeps samples of one class distinct. Not a
// physics simulator: the only promises are determinism, class separability
// and valid skeleton geometry.

namespace stgcn {

enum class GeneratorFamily { A, B };

// One additive trajectory term on a single joint coordinate. The raised-
// cosine envelope 0.5*(1-cos) keeps each term non-negative, so classes move
// the mean pose, not just the oscillation.
struct MotionComponent {
  int joint = 0;
  int axis = 0;  // 0 = x, 1 = y, 2 = z
  double amplitude = 0.0;
  double frequency = 1.0;  // Hz
};

struct ClassRecipe {
  std::string name;
  std::vector<MotionComponent> components;
};

struct GeneratorSpec {
  GeneratorFamily family = GeneratorFamily::A;
  std::vector<ClassRecipe> classes;
  int samples_per_class = 10;
  int frames = 48;
  double frame_rate = 30.0;
  double noise_std = 0.01;  // meters
  double limb_scale = 1.0;  // 0.7 for the child-proportioned family B
  std::uint64_t seed = 0;
  int num_subjects = 8;

  void validate() const {
    if (classes.empty()) throw ConfigError("generator: needs at least one class");
    if (samples_per_class < 1) throw ConfigError("generator: samples_per_class must be >= 1");
    if (frames < 2) throw ConfigError("generator: frames must be >= 2");
    if (noise_std < 0.0) throw ConfigError("generator: noise_std must be >= 0");
    if (limb_scale <= 0.0) throw ConfigError("generator: limb_scale must be positive");
    if (num_subjects < 1) throw ConfigError("generator: num_subjects must be >= 1");
  }
};

namespace synth {

// Standing rest pose on the shared 20-joint skeleton (meters, z up,
// facing +x). limb_scale scales the pose about the spine base, which scales
// every bone length by the same factor.
inline std::vector<std::array<double, 3>> rest_pose(double limb_scale = 1.0) {
  static const std::array<std::array<double, 3>, 20> base = {{
      {0.00, 0.00, 0.95},   // SpineBase
      {0.00, 0.00, 1.15},   // SpineMid
      {0.00, 0.00, 1.42},   // Neck
      {0.00, 0.00, 1.60},   // Head
      {0.00, 0.20, 1.38},   // ShoulderLeft
      {0.02, 0.26, 1.10},   // ElbowLeft
      {0.03, 0.28, 0.86},   // WristLeft
      {0.03, 0.29, 0.78},   // HandLeft
      {0.00, -0.20, 1.38},  // ShoulderRight
      {0.02, -0.26, 1.10},  // ElbowRight
      {0.03, -0.28, 0.86},  // WristRight
      {0.03, -0.29, 0.78},  // HandRight
      {0.00, 0.10, 0.92},   // HipLeft
      {0.01, 0.11, 0.50},   // KneeLeft
      {0.02, 0.12, 0.10},   // AnkleLeft
      {0.14, 0.12, 0.04},   // FootLeft
      {0.00, -0.10, 0.92},  // HipRight
      {0.01, -0.11, 0.50},  // KneeRight
      {0.02, -0.12, 0.10},  // AnkleRight
      {0.14, -0.12, 0.04},  // FootRight
  }};
  std::vector<std::array<double, 3>> pose(base.begin(), base.end());
  const auto origin = base[0];
  for (auto& p : pose)
    for (int c = 0; c < 3; ++c) p[c] = origin[c] + limb_scale * (p[c] - origin[c]);
  return pose;
}

inline ClassRecipe raise_arms_recipe() {
  ClassRecipe r{"raise_arms", {}};
  for (int j : {5, 6, 7, 9, 10, 11}) r.components.push_back({j, 2, 0.35, 1.0});
  for (int j : {4, 8}) r.components.push_back({j, 2, 0.12, 1.0});
  return r;
}

inline ClassRecipe crouch_recipe() {
  ClassRecipe r{"crouch", {}};
  for (int j : {0, 1, 2, 3, 4, 8, 12, 16}) r.components.push_back({j, 2, -0.25, 0.8});
  for (int j : {13, 17}) r.components.push_back({j, 0, 0.10, 0.8});
  return r;
}

inline ClassRecipe wave_recipe() {
  ClassRecipe r{"wave", {}};
  for (int j : {10, 11}) r.components.push_back({j, 1, 0.22, 1.2});
  r.components.push_back({9, 1, 0.12, 1.2});
  for (int j : {10, 11}) r.components.push_back({j, 2, 0.08, 2.4});
  return r;
}

inline ClassRecipe jump_recipe() {
  ClassRecipe r{"jump", {}};
  for (int j = 0; j < 20; ++j) r.components.push_back({j, 2, 0.16, 2.0});
  return r;
}

inline ClassRecipe lean_recipe() {
  ClassRecipe r{"lean", {}};
  for (int j : {1, 2, 3, 4, 5, 8, 9}) r.components.push_back({j, 0, 0.22, 0.9});
  return r;
}

inline std::vector<ClassRecipe> family_a_recipes() {
  return {raise_arms_recipe(), crouch_recipe(), wave_recipe(), jump_recipe(), lean_recipe()};
}

// Family B reuses three family-A motion primitives; the generator applies
// the child-proportion limb scaling.
inline std::vector<ClassRecipe> family_b_recipes() {
  return {raise_arms_recipe(), crouch_recipe(), wave_recipe()};
}

}  // namespace synth

inline GeneratorSpec make_generator_spec(GeneratorFamily family, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.family = family;
  spec.seed = seed;
  if (family == GeneratorFamily::A) {
    spec.classes = synth::family_a_recipes();
    spec.limb_scale = 1.0;
  } else {
    spec.classes = synth::family_b_recipes();
    spec.limb_scale = 0.7;
  }
  return spec;
}

// Deterministic generation: sample k draws everything from a seed derived
// from (spec.seed, k). Subjects rotate round-robin so cross-subject splits
// are possible.
inline Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  Dataset d;
  d.topology_kind = TopologyKind::shared20;
  d.frame_rate = spec.frame_rate;
  for (const auto& r : spec.classes) d.class_names.push_back(r.name);
  const auto rest = synth::rest_pose(spec.limb_scale);
  const double two_pi = 2.0 * 3.14159265358979323846;
  int global_index = 0;
  for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
    const auto& recipe = spec.classes[cls];
    for (int k = 0; k < spec.samples_per_class; ++k, ++global_index) {
      Rng rng(derive_seed(spec.seed, "sample", std::uint64_t(global_index)));
      struct Jitter {
        double amp, phase, freq;
      };
      std::vector<Jitter> jitter(recipe.components.size());
      for (auto& j : jitter)
        j = {rng.uniform(0.8, 1.2), rng.uniform(0.0, two_pi), rng.uniform(0.9, 1.1)};
      SkeletonSequence s(spec.frames, 20, TopologyKind::shared20);
      s.label = int(cls);
      s.subject_id = global_index % spec.num_subjects;
      s.frame_rate = spec.frame_rate;
      for (int t = 0; t < spec.frames; ++t) {
        const double sec = double(t) / spec.frame_rate;
        for (int v = 0; v < 20; ++v)
          for (int c = 0; c < 3; ++c) s.at(c, t, v) = rest[v][c];
        for (std::size_t m = 0; m < recipe.components.size(); ++m) {
          const auto& comp = recipe.components[m];
          const auto& j = jitter[m];
          const double envelope =
              0.5 * (1.0 - std::cos(two_pi * comp.frequency * j.freq * sec + j.phase));
          s.at(comp.axis, t, comp.joint) +=
              spec.limb_scale * comp.amplitude * j.amp * envelope;
        }
        if (spec.noise_std > 0.0)
          for (int v = 0; v < 20; ++v)
            for (int c = 0; c < 3; ++c) s.at(c, t, v) += spec.noise_std * rng.normal();
      }
      d.samples.push_back(std::move(s));
    }
  }
  d.validate();
  return d;
}

// Source/target pair for the synthetic transfer benchmark: the target
// classes reuse source motion primitives at child-like proportions
// (limb lengths scaled by 0.7).
struct TransferBenchmark {
  Dataset source;  // 5 classes
  Dataset target;  // 3 classes
};

inline TransferBenchmark transfer_benchmark(std::uint64_t seed, int source_per_class = 12,
                                            int target_per_class = 16, int frames = 32) {
  GeneratorSpec src = make_generator_spec(GeneratorFamily::A, derive_seed(seed, "source"));
  src.samples_per_class = source_per_class;
  src.frames = frames;
  GeneratorSpec tgt = make_generator_spec(GeneratorFamily::B, derive_seed(seed, "target"));
  tgt.samples_per_class = target_per_class;
  tgt.frames = frames;
  return {generate(src), generate(tgt)};
}

}  // namespace stgcn
