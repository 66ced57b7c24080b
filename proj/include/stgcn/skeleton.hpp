#pragma once

#include <algorithm>
#include <array>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stgcn/common.hpp"
#include "stgcn/tensor.hpp"

namespace stgcn {

enum class TopologyKind { kinect_v1, kinect_v2, shared20 };

inline const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::kinect_v1: return "kinect_v1";
    case TopologyKind::kinect_v2: return "kinect_v2";
    case TopologyKind::shared20: return "shared20";
  }
  return "?";
}

inline TopologyKind topology_kind_from_string(const std::string& s) {
  if (s == "kinect_v1") return TopologyKind::kinect_v1;
  if (s == "kinect_v2") return TopologyKind::kinect_v2;
  if (s == "shared20") return TopologyKind::shared20;
  throw ConfigError("unknown topology kind: " + s);
}

// A skeleton topology: named joints plus the kinematic tree connecting them.
// The auxiliary indices (spine base/top, shoulders) drive the geometric
// normalization in the preprocessing pipeline.
struct SkeletonTopology {
  TopologyKind kind = TopologyKind::shared20;
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> edges;  // undirected tree edges
  int root_index = 0;                      // mid-spine joint
  int spine_base_index = 0;
  int spine_top_index = 0;
  int shoulder_left_index = 0;
  int shoulder_right_index = 0;

  int num_joints() const { return int(joint_names.size()); }

  void validate() const {
    const int v = num_joints();
    if (v < 1) throw ConfigError("topology has no joints");
    if (int(edges.size()) != v - 1)
      throw ConfigError("topology edge count must be joints-1 for a tree");
    std::vector<std::vector<int>> adj(v);
    for (auto [a, b] : edges) {
      if (a < 0 || a >= v || b < 0 || b >= v || a == b)
        throw ConfigError("topology edge index out of range");
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    // |E| = V-1 and connected => tree (no cycles).
    std::vector<char> seen(v, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u])
        if (!seen[w]) {
          seen[w] = 1;
          ++reached;
          q.push(w);
        }
    }
    if (reached != v) throw ConfigError("topology edges do not form a connected tree");
    for (int idx : {root_index, spine_base_index, spine_top_index, shoulder_left_index,
                    shoulder_right_index})
      if (idx < 0 || idx >= v) throw ConfigError("topology reference joint index out of range");
  }

  // Hop distance from root along the tree, used by the spatial partitioning.
  std::vector<int> distances_from_root() const {
    const int v = num_joints();
    std::vector<std::vector<int>> adj(v);
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<int> dist(v, -1);
    std::queue<int> q;
    dist[root_index] = 0;
    q.push(root_index);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u])
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          q.push(w);
        }
    }
    return dist;
  }
};

namespace detail {

// Kinect v1 SDK joint order. shared20 reuses the same structure with the
// Kinect v2 joint names of its 20 retained joints.
inline const std::vector<std::string>& kinect_v1_names() {
  static const std::vector<std::string> names = {
      "HipCenter",     "Spine",        "ShoulderCenter", "Head",         "ShoulderLeft",
      "ElbowLeft",     "WristLeft",    "HandLeft",       "ShoulderRight", "ElbowRight",
      "WristRight",    "HandRight",    "HipLeft",        "KneeLeft",     "AnkleLeft",
      "FootLeft",      "HipRight",     "KneeRight",      "AnkleRight",   "FootRight"};
  return names;
}

inline const std::vector<std::string>& kinect_v2_names() {
  static const std::vector<std::string> names = {
      "SpineBase",   "SpineMid",      "Neck",       "Head",        "ShoulderLeft",
      "ElbowLeft",   "WristLeft",     "HandLeft",   "ShoulderRight", "ElbowRight",
      "WristRight",  "HandRight",     "HipLeft",    "KneeLeft",    "AnkleLeft",
      "FootLeft",    "HipRight",      "KneeRight",  "AnkleRight",  "FootRight",
      "SpineShoulder", "HandTipLeft", "ThumbLeft",  "HandTipRight", "ThumbRight"};
  return names;
}

// 20-joint kinematic tree common to Kinect v1 and shared20.
inline const std::vector<std::pair<int, int>>& tree20_edges() {
  static const std::vector<std::pair<int, int>> edges = {
      {0, 1},  {1, 2},  {2, 3},                     // spine and head
      {2, 4},  {4, 5},  {5, 6},  {6, 7},            // left arm
      {2, 8},  {8, 9},  {9, 10}, {10, 11},          // right arm
      {0, 12}, {12, 13}, {13, 14}, {14, 15},        // left leg
      {0, 16}, {16, 17}, {17, 18}, {18, 19}};       // right leg
  return edges;
}

// Kinect v2 kinematic tree (25 joints).
inline const std::vector<std::pair<int, int>>& kinect_v2_edges() {
  static const std::vector<std::pair<int, int>> edges = {
      {0, 1},   {1, 20},  {20, 2},  {2, 3},              // spine, neck, head
      {20, 4},  {4, 5},   {5, 6},   {6, 7},              // left arm
      {20, 8},  {8, 9},   {9, 10},  {10, 11},            // right arm
      {0, 12},  {12, 13}, {13, 14}, {14, 15},            // left leg
      {0, 16},  {16, 17}, {17, 18}, {18, 19},            // right leg
      {7, 21},  {7, 22},  {11, 23}, {11, 24}};           // hand tips and thumbs
  return edges;
}

}  // namespace detail

inline SkeletonTopology build_topology(TopologyKind kind) {
  SkeletonTopology t;
  t.kind = kind;
  switch (kind) {
    case TopologyKind::kinect_v1:
      t.joint_names = detail::kinect_v1_names();
      t.edges = detail::tree20_edges();
      break;
    case TopologyKind::shared20: {
      // Kinect v2 names restricted to the 20 joints shared with Kinect v1.
      const auto& v2 = detail::kinect_v2_names();
      t.joint_names.assign(v2.begin(), v2.begin() + 20);
      t.edges = detail::tree20_edges();
      break;
    }
    case TopologyKind::kinect_v2:
      t.joint_names = detail::kinect_v2_names();
      t.edges = detail::kinect_v2_edges();
      t.spine_top_index = 20;  // SpineShoulder
      break;
  }
  t.root_index = 1;  // SpineMid / Spine
  t.spine_base_index = 0;
  if (kind != TopologyKind::kinect_v2) t.spine_top_index = 2;  // Neck / ShoulderCenter
  t.shoulder_left_index = 4;
  t.shoulder_right_index = 8;
  t.validate();
  return t;
}

// The five Kinect v2 joints with no Kinect v1 counterpart; dropping them
// yields the shared 20-joint skeleton. In the v2 joint order these are
// exactly the trailing five, so the retained joints keep their indices.
inline const std::array<int, 5>& dropped_v2_joints() {
  static const std::array<int, 5> dropped = {20, 21, 22, 23, 24};
  return dropped;
}

inline nlohmann::json topology_to_json(const SkeletonTopology& t) {
  nlohmann::json j;
  j["kind"] = to_string(t.kind);
  j["joint_names"] = t.joint_names;
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : t.edges) edges.push_back({a, b});
  j["edges"] = edges;
  j["root_index"] = t.root_index;
  j["spine_base_index"] = t.spine_base_index;
  j["spine_top_index"] = t.spine_top_index;
  j["shoulder_left_index"] = t.shoulder_left_index;
  j["shoulder_right_index"] = t.shoulder_right_index;
  return j;
}

// One action sample: [C=3][T][V] coordinates in meters, single body.
struct SkeletonSequence {
  std::vector<double> coords;  // row-major [3][T][V]
  int frames = 0;
  int joints = 0;
  int label = -1;
  int subject_id = -1;
  double frame_rate = 30.0;
  TopologyKind topology_kind = TopologyKind::shared20;

  SkeletonSequence() = default;
  SkeletonSequence(int t, int v, TopologyKind kind)
      : coords(std::size_t(3) * t * v, 0.0), frames(t), joints(v), topology_kind(kind) {}

  double& at(int c, int t, int v) {
    return coords[(std::size_t(c) * frames + t) * joints + v];
  }
  double at(int c, int t, int v) const {
    return coords[(std::size_t(c) * frames + t) * joints + v];
  }
};

// Drops the five v2-only joints, keeping the retained coordinates bit-exact.
inline SkeletonSequence remap_to_shared(const SkeletonSequence& seq) {
  if (seq.topology_kind != TopologyKind::kinect_v2)
    throw DataError("remap_to_shared expects a kinect_v2 sequence");
  if (seq.joints != 25) throw DataError("kinect_v2 sequence must have 25 joints");
  SkeletonSequence out(seq.frames, 20, TopologyKind::shared20);
  out.label = seq.label;
  out.subject_id = seq.subject_id;
  out.frame_rate = seq.frame_rate;
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < 20; ++v) out.at(c, t, v) = seq.at(c, t, v);
  return out;
}

enum class PartitionStrategy { uniform, spatial };

inline const char* to_string(PartitionStrategy s) {
  return s == PartitionStrategy::uniform ? "uniform" : "spatial";
}

inline PartitionStrategy strategy_from_string(const std::string& s) {
  if (s == "uniform") return PartitionStrategy::uniform;
  if (s == "spatial") return PartitionStrategy::spatial;
  throw ConfigError("unknown partition strategy: " + s);
}

// Stack of V x V aggregation matrices. matrices[p](j, i) weights the
// contribution of joint i to output joint j; the union over partitions is
// row-stochastic (entries are 1/(1 + tree degree of j)).
struct PartitionedAdjacency {
  int num_partitions = 0;
  std::vector<Tensor<double>> matrices;  // each [V, V]
  TopologyKind topology_kind = TopologyKind::shared20;

  int num_joints() const { return matrices.empty() ? 0 : matrices[0].dim(0); }
};

// Equal edge weights (no trainable mask): A+I is row-normalized as a whole,
// then split per partition for the spatial strategy.
//   uniform:  one partition, D^-1 (A+I)
//   spatial:  root (equal root-distance, i.e. self-loops), centripetal
//             (neighbor closer to root), centrifugal (neighbor farther)
inline PartitionedAdjacency build_adjacency(const SkeletonTopology& topology,
                                            PartitionStrategy strategy) {
  topology.validate();
  const int v = topology.num_joints();

  std::vector<std::vector<char>> linked(v, std::vector<char>(v, 0));
  for (int i = 0; i < v; ++i) linked[i][i] = 1;
  for (auto [a, b] : topology.edges) {
    linked[a][b] = 1;
    linked[b][a] = 1;
  }
  std::vector<double> inv_deg(v, 0.0);
  for (int j = 0; j < v; ++j) {
    int deg = 0;
    for (int i = 0; i < v; ++i) deg += linked[j][i];
    inv_deg[j] = deg > 0 ? 1.0 / deg : 0.0;
  }

  PartitionedAdjacency out;
  out.topology_kind = topology.kind;
  if (strategy == PartitionStrategy::uniform) {
    out.num_partitions = 1;
    Tensor<double> m({v, v});
    for (int j = 0; j < v; ++j)
      for (int i = 0; i < v; ++i)
        if (linked[j][i]) m.at2(j, i) = inv_deg[j];
    out.matrices.push_back(std::move(m));
    return out;
  }

  const std::vector<int> dist = topology.distances_from_root();
  out.num_partitions = 3;
  Tensor<double> root({v, v}), centripetal({v, v}), centrifugal({v, v});
  for (int j = 0; j < v; ++j) {
    for (int i = 0; i < v; ++i) {
      if (!linked[j][i]) continue;
      const double w = inv_deg[j];
      if (dist[i] == dist[j])
        root.at2(j, i) = w;
      else if (dist[i] < dist[j])
        centripetal.at2(j, i) = w;
      else
        centrifugal.at2(j, i) = w;
    }
  }
  out.matrices.push_back(std::move(root));
  out.matrices.push_back(std::move(centripetal));
  out.matrices.push_back(std::move(centrifugal));
  return out;
}

}  // namespace stgcn
