#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "stgcn/preprocess.hpp"
#include "stgcn/synth.hpp"
#include "test_util.hpp"

using namespace stgcn;

namespace {

SkeletonSequence random_sequence(int frames, int joints, std::uint64_t seed) {
  SkeletonSequence s(frames, joints, TopologyKind::shared20);
  Rng rng(seed);
  for (auto& x : s.coords) x = rng.uniform(-1.0, 1.0);
  return s;
}

Dataset wrap(std::vector<SkeletonSequence> samples, int num_classes = 2) {
  Dataset d;
  for (int i = 0; i < num_classes; ++i) d.class_names.push_back("c" + std::to_string(i));
  d.samples = std::move(samples);
  for (auto& s : d.samples)
    if (s.label < 0) s.label = 0;
  return d;
}

// Pairwise inter-joint distances per frame; the oracle for rigid transforms.
std::vector<double> pairwise_distances(const SkeletonSequence& s) {
  std::vector<double> out;
  for (int t = 0; t < s.frames; ++t)
    for (int a = 0; a < s.joints; ++a)
      for (int b = a + 1; b < s.joints; ++b) {
        double d2 = 0;
        for (int c = 0; c < 3; ++c) {
          const double d = s.at(c, t, a) - s.at(c, t, b);
          d2 += d * d;
        }
        out.push_back(std::sqrt(d2));
      }
  return out;
}

}  // namespace

TEST(Clean, RemovesAllZeroSample) {
  auto good = random_sequence(20, 4, 1);
  SkeletonSequence empty(20, 4, TopologyKind::shared20);
  CleanReport report;
  const Dataset out = clean(wrap({good, empty}), &report);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(report.empty_removed, 1);
  EXPECT_EQ(report.pseudo_removed, 0);
}

TEST(Clean, IdentityOnCleanData) {
  auto a = random_sequence(20, 4, 2);
  auto b = random_sequence(20, 4, 3);
  CleanReport report;
  const Dataset out = clean(wrap({a, b}), &report);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(report.total(), 0);
  EXPECT_EQ(out.samples[0].coords, a.coords);
  EXPECT_EQ(out.samples[1].coords, b.coords);
}

TEST(Clean, RemovesFrozenSkeletonAsPseudo) {
  // constant pose over time: per-joint variance 0 < 1e-4
  SkeletonSequence frozen(50, 4, TopologyKind::shared20);
  Rng rng(5);
  for (int v = 0; v < 4; ++v) {
    const double px = rng.uniform(-1, 1), py = rng.uniform(-1, 1), pz = rng.uniform(-1, 1);
    for (int t = 0; t < 50; ++t) {
      frozen.at(0, t, v) = px;
      frozen.at(1, t, v) = py;
      frozen.at(2, t, v) = pz;
    }
  }
  CleanReport report;
  const Dataset out = clean(wrap({frozen, random_sequence(50, 4, 6)}), &report);
  EXPECT_EQ(out.size(), 1u);
  EXPECT_EQ(report.pseudo_removed, 1);
}

TEST(Clean, RemovesNonFiniteSample) {
  auto bad = random_sequence(20, 4, 7);
  bad.coords[13] = std::nan("");
  CleanReport report;
  const Dataset out = clean(wrap({bad}), &report);
  EXPECT_EQ(out.size(), 0u);
  EXPECT_EQ(report.nonfinite_removed, 1);
}

TEST(MainActor, SingleBodyReturnedUnchanged) {
  auto body = random_sequence(10, 4, 8);
  const auto out = select_main_actor({body});
  EXPECT_EQ(out.coords, body.coords);
}

TEST(MainActor, MovingBodyBeatsStaticBody) {
  SkeletonSequence still(30, 4, TopologyKind::shared20);
  for (auto& x : still.coords) x = 0.5;
  SkeletonSequence waving(30, 4, TopologyKind::shared20);
  for (int t = 0; t < 30; ++t)
    for (int v = 0; v < 4; ++v) waving.at(2, t, v) = std::sin(0.7 * t);
  // oracle: energy by the formula on this constructed pair
  EXPECT_GT(motion_energy(waving), motion_energy(still));
  const auto out = select_main_actor({still, waving});
  EXPECT_EQ(out.coords, waving.coords);
}

TEST(MainActor, TieGoesToLowerIndex) {
  auto a = random_sequence(10, 4, 9);
  auto b = a;
  const auto out = select_main_actor({a, b});
  EXPECT_EQ(out.coords, a.coords);
}

TEST(MainActor, ZeroBodiesIsError) { EXPECT_THROW(select_main_actor({}), DataError); }

TEST(Pad, CyclicRepeatShortSequence) {
  auto s = random_sequence(100, 3, 10);
  const auto out = pad_to_frames(s, 300);
  ASSERT_EQ(out.frames, 300);
  for (int t = 0; t < 300; ++t)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(out.at(0, t, v), s.at(0, t % 100, v));
}

TEST(Pad, IdentityAtTargetLength) {
  auto s = random_sequence(300, 3, 11);
  const auto out = pad_to_frames(s, 300);
  EXPECT_EQ(out.coords, s.coords);
}

TEST(Pad, UniformDownsampleLongSequence) {
  auto s = random_sequence(600, 3, 12);
  const auto out = pad_to_frames(s, 300);
  ASSERT_EQ(out.frames, 300);
  // indices round(k * 600 / 300) = 2k
  for (int k = 0; k < 300; ++k)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(out.at(1, k, v), s.at(1, 2 * k, v));
}

TEST(Pad, AlwaysProducesTargetFrames) {
  for (int t : {1, 7, 299, 300, 301, 1000}) {
    const auto out = pad_to_frames(random_sequence(t, 2, 13 + t), 300);
    EXPECT_EQ(out.frames, 300);
  }
}

TEST(Translate, RootExactlyZeroPerFrame) {
  const auto topo = build_topology(TopologyKind::shared20);
  auto s = random_sequence(40, 20, 14);
  const auto out = translate_to_spine(s, topo);
  for (int t = 0; t < out.frames; ++t)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, t, topo.root_index), 0.0);
}

TEST(Translate, ConstantOffsetRemoved) {
  const auto topo = test_util::make_chain(4, 1);
  SkeletonSequence s(5, 4, TopologyKind::shared20);
  SkeletonSequence centered(5, 4, TopologyKind::shared20);
  const double offset[3] = {1.0, 2.0, 3.0};
  Rng rng(15);
  for (int t = 0; t < 5; ++t)
    for (int v = 0; v < 4; ++v)
      for (int c = 0; c < 3; ++c) {
        centered.at(c, t, v) = v == 1 ? 0.0 : rng.uniform(-1, 1);
        s.at(c, t, v) = centered.at(c, t, v) + offset[c];
      }
  const auto out = translate_to_spine(s, topo);
  for (std::size_t i = 0; i < out.coords.size(); ++i)
    EXPECT_NEAR(out.coords[i], centered.coords[i], 1e-12);
}

TEST(Translate, PreservesPairwiseDistances) {
  const auto topo = build_topology(TopologyKind::shared20);
  auto s = random_sequence(20, 20, 16);
  const auto before = pairwise_distances(s);
  const auto after = pairwise_distances(translate_to_spine(s, topo));
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_NEAR(after[i], before[i], 1e-9 * std::max(1.0, before[i]));
}

namespace {

// A synthetic standing pose on the shared topology, centered at the root.
SkeletonSequence aligned_pose(int frames = 3) {
  const auto pose = synth::rest_pose();
  SkeletonSequence s(frames, 20, TopologyKind::shared20);
  for (int t = 0; t < frames; ++t)
    for (int v = 0; v < 20; ++v) {
      s.at(0, t, v) = pose[v][0] - pose[1][0];
      s.at(1, t, v) = pose[v][1] - pose[1][1];
      s.at(2, t, v) = pose[v][2] - pose[1][2];
    }
  return s;
}

SkeletonSequence rotate_z(const SkeletonSequence& s, double angle) {
  SkeletonSequence out = s;
  const double c = std::cos(angle), sn = std::sin(angle);
  for (int t = 0; t < s.frames; ++t)
    for (int v = 0; v < s.joints; ++v) {
      const double x = s.at(0, t, v), y = s.at(1, t, v);
      out.at(0, t, v) = c * x - sn * y;
      out.at(1, t, v) = sn * x + c * y;
    }
  return out;
}

}  // namespace

TEST(Rotate, AlreadyAlignedIsIdentity) {
  const auto topo = build_topology(TopologyKind::shared20);
  const auto s = aligned_pose();
  const auto out = rotate_align(s, topo);
  for (std::size_t i = 0; i < s.coords.size(); ++i) EXPECT_NEAR(out.coords[i], s.coords[i], 1e-9);
}

TEST(Rotate, RecoversFromYaw) {
  const auto topo = build_topology(TopologyKind::shared20);
  const auto s = aligned_pose();
  const auto yawed = rotate_z(s, 0.5 * 3.14159265358979323846);
  const auto out = rotate_align(yawed, topo);
  // frame-0 spine back along +z, facing along +x
  using detail::Vec3;
  const Vec3 base = detail::joint_at(out, 0, topo.spine_base_index);
  const Vec3 top = detail::joint_at(out, 0, topo.spine_top_index);
  const Vec3 spine = detail::sub(top, base);
  EXPECT_LE(std::fabs(spine.x), 1e-6 * detail::norm(spine));
  EXPECT_LE(std::fabs(spine.y), 1e-6 * detail::norm(spine));
  EXPECT_GT(spine.z, 0.0);
  const Vec3 left = detail::joint_at(out, 0, topo.shoulder_left_index);
  const Vec3 right = detail::joint_at(out, 0, topo.shoulder_right_index);
  const Vec3 facing = detail::cross(detail::sub(left, right), spine);
  EXPECT_GT(facing.x, 0.0);
  EXPECT_LE(std::fabs(facing.y), 1e-6 * detail::norm(facing));
}

TEST(Rotate, PreservesPairwiseDistances) {
  const auto topo = build_topology(TopologyKind::shared20);
  auto s = random_sequence(10, 20, 17);
  const auto before = pairwise_distances(s);
  const auto after = pairwise_distances(rotate_align(s, topo));
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_NEAR(after[i], before[i], 1e-9 * std::max(1.0, before[i]));
}

TEST(Rotate, DegenerateGeometryNamesJointPair) {
  const auto topo = build_topology(TopologyKind::shared20);
  SkeletonSequence s(2, 20, TopologyKind::shared20);  // all joints coincide
  try {
    rotate_align(s, topo);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("SpineBase"), std::string::npos);
  }
}

TEST(FrameRate, EveryThirdFrame) {
  auto s = random_sequence(300, 3, 18);
  s.frame_rate = 30.0;
  const auto out = frame_rate_adjust(s, 3);
  ASSERT_EQ(out.frames, 100);
  EXPECT_DOUBLE_EQ(out.frame_rate, 10.0);
  for (int t = 0; t < 100; ++t)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(out.at(2, t, v), s.at(2, 3 * t, v));
}

TEST(FrameRate, KeepEveryOneIsIdentity) {
  auto s = random_sequence(17, 3, 19);
  const auto out = frame_rate_adjust(s, 1);
  EXPECT_EQ(out.coords, s.coords);
  EXPECT_EQ(out.frame_rate, s.frame_rate);
}

TEST(FrameRate, CeilingFrameCount) {
  auto s = random_sequence(7, 2, 20);
  const auto out = frame_rate_adjust(s, 3);
  ASSERT_EQ(out.frames, 3);  // frames {0, 3, 6}
  for (int v = 0; v < 2; ++v) {
    EXPECT_EQ(out.at(0, 0, v), s.at(0, 0, v));
    EXPECT_EQ(out.at(0, 1, v), s.at(0, 3, v));
    EXPECT_EQ(out.at(0, 2, v), s.at(0, 6, v));
  }
}

TEST(FrameRate, ComposesMultiplicativelyOnIndices) {
  auto s = random_sequence(60, 2, 21);
  const auto twice = frame_rate_adjust(frame_rate_adjust(s, 2), 3);
  const auto once = frame_rate_adjust(s, 6);
  EXPECT_EQ(twice.frames, once.frames);
  EXPECT_EQ(twice.coords, once.coords);
}

TEST(MovingAverage, ConstantSequenceUnchanged) {
  SkeletonSequence s(10, 2, TopologyKind::shared20);
  for (auto& x : s.coords) x = 4.25;
  const auto out = moving_average(s, 5);
  for (std::size_t i = 0; i < s.coords.size(); ++i) EXPECT_NEAR(out.coords[i], 4.25, 1e-12);
}

TEST(MovingAverage, WindowOneIsIdentity) {
  auto s = random_sequence(10, 2, 22);
  EXPECT_EQ(moving_average(s, 1).coords, s.coords);
}

TEST(MovingAverage, HandComputedTruncatedMeans) {
  SkeletonSequence s(4, 1, TopologyKind::shared20);
  const double values[4] = {0, 3, 6, 9};
  for (int t = 0; t < 4; ++t) s.at(0, t, 0) = values[t];
  const auto out = moving_average(s, 3);
  EXPECT_NEAR(out.at(0, 0, 0), 1.5, 1e-9);
  EXPECT_NEAR(out.at(0, 1, 0), 3.0, 1e-9);
  EXPECT_NEAR(out.at(0, 2, 0), 6.0, 1e-9);
  EXPECT_NEAR(out.at(0, 3, 0), 7.5, 1e-9);
}

TEST(MovingAverage, EvenWindowRejected) {
  auto s = random_sequence(10, 2, 23);
  EXPECT_THROW(moving_average(s, 4), ConfigError);
}

TEST(Split, RandomRatioSeventyThirty) {
  std::vector<SkeletonSequence> samples;
  for (int i = 0; i < 10; ++i) {
    auto s = random_sequence(5, 2, 100 + i);
    s.label = 0;
    s.subject_id = i;
    samples.push_back(s);
  }
  SplitSpec spec;
  spec.method = SplitMethod::random_ratio;
  spec.train_fraction = 0.7;
  spec.seed = 42;
  const auto d = wrap(samples, 1);
  auto [train, val] = split(d, spec);
  EXPECT_EQ(train.size(), 7u);
  EXPECT_EQ(val.size(), 3u);
  auto [train2, val2] = split(d, spec);
  for (std::size_t i = 0; i < train.size(); ++i)
    EXPECT_EQ(train.samples[i].subject_id, train2.samples[i].subject_id);
}

TEST(Split, CrossSubjectPartitionsBySubject) {
  std::vector<SkeletonSequence> samples;
  for (int i = 0; i < 8; ++i) {
    auto s = random_sequence(5, 2, 200 + i);
    s.label = 0;
    s.subject_id = i % 2 + 1;  // subjects 1 and 2
    samples.push_back(s);
  }
  SplitSpec spec;
  spec.method = SplitMethod::cross_subject;
  spec.train_subjects = {1};
  auto [train, val] = split(wrap(samples, 1), spec);
  EXPECT_EQ(train.size(), 4u);
  EXPECT_EQ(val.size(), 4u);
  for (const auto& s : train.samples) EXPECT_EQ(s.subject_id, 1);
  for (const auto& s : val.samples) EXPECT_EQ(s.subject_id, 2);
}

TEST(Split, DifferentSeedsDifferentPartitions) {
  std::vector<SkeletonSequence> samples;
  for (int i = 0; i < 20; ++i) {
    auto s = random_sequence(5, 2, 300 + i);
    s.label = 0;
    s.subject_id = i;
    samples.push_back(s);
  }
  const auto d = wrap(samples, 1);
  SplitSpec a, b;
  a.seed = 1;
  b.seed = 2;
  auto [ta, va] = split(d, a);
  auto [tb, vb] = split(d, b);
  EXPECT_EQ(ta.size(), tb.size());
  bool same = true;
  for (std::size_t i = 0; i < ta.size(); ++i)
    same = same && ta.samples[i].subject_id == tb.samples[i].subject_id;
  EXPECT_FALSE(same);
}

TEST(Split, DisjointExhaustive) {
  std::vector<SkeletonSequence> samples;
  for (int i = 0; i < 13; ++i) {
    auto s = random_sequence(5, 2, 400 + i);
    s.label = 0;
    s.subject_id = i;
    samples.push_back(s);
  }
  const auto d = wrap(samples, 1);
  SplitSpec spec;
  spec.train_fraction = 0.5;
  auto [train, val] = split(d, spec);
  EXPECT_EQ(train.size() + val.size(), d.size());
  std::set<int> seen;
  for (const auto& s : train.samples) seen.insert(s.subject_id);
  for (const auto& s : val.samples) EXPECT_EQ(seen.count(s.subject_id), 0u);
}

TEST(Split, CrossSubjectWithoutIdsIsError) {
  auto s = random_sequence(5, 2, 500);
  s.label = 0;
  s.subject_id = -1;
  SplitSpec spec;
  spec.method = SplitMethod::cross_subject;
  spec.train_subjects = {1};
  EXPECT_THROW(split(wrap({s}, 1), spec), DataError);
}
