#pragma once

// Shared test helpers: independent oracles (brute-force graph convolution,
// BFS distances, exhaustive tree enumeration) and small data constructors.
// Everything here stays independent of the library's computation paths it
// is used to check.

#include <queue>
#include <string>
#include <vector>

#include "stgcn/skeleton.hpp"
#include "stgcn/tensor.hpp"

namespace test_util {

inline stgcn::SkeletonTopology make_topology(int joints,
                                             const std::vector<std::pair<int, int>>& edges,
                                             int root) {
  stgcn::SkeletonTopology t;
  t.kind = stgcn::TopologyKind::shared20;  // tag only; structure is synthetic
  for (int i = 0; i < joints; ++i) t.joint_names.push_back("j" + std::to_string(i));
  t.edges = edges;
  t.root_index = root;
  t.spine_base_index = 0;
  t.spine_top_index = joints > 1 ? 1 : 0;
  t.shoulder_left_index = joints > 2 ? 2 : 0;
  t.shoulder_right_index = joints > 3 ? 3 : 0;
  t.validate();
  return t;
}

inline stgcn::SkeletonTopology make_chain(int joints, int root = 0) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < joints; ++i) edges.emplace_back(i, i + 1);
  return make_topology(joints, edges, root);
}

// BFS hop distances, independent of SkeletonTopology::distances_from_root.
inline std::vector<int> bfs_distances(int joints, const std::vector<std::pair<int, int>>& edges,
                                      int source) {
  std::vector<std::vector<int>> adj(joints);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> dist(joints, -1);
  std::queue<int> q;
  dist[source] = 0;
  q.push(source);
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

// All labeled trees on n nodes via Prufer sequences (n <= 4 stays tiny:
// 1, 1, 3, 16 trees).
inline std::vector<std::vector<std::pair<int, int>>> all_labeled_trees(int n) {
  std::vector<std::vector<std::pair<int, int>>> trees;
  if (n == 1) {
    trees.push_back({});
    return trees;
  }
  if (n == 2) {
    trees.push_back({{0, 1}});
    return trees;
  }
  const int seq_len = n - 2;
  std::vector<int> seq(seq_len, 0);
  while (true) {
    // decode the Prufer sequence
    std::vector<int> degree(n, 1);
    for (int v : seq) ++degree[v];
    std::vector<std::pair<int, int>> edges;
    std::vector<int> deg = degree;
    std::vector<bool> used(n, false);
    for (int i = 0; i < seq_len; ++i) {
      int leaf = -1;
      for (int v = 0; v < n; ++v)
        if (deg[v] == 1 && !used[v]) {
          leaf = v;
          break;
        }
      edges.emplace_back(leaf, seq[i]);
      used[leaf] = true;
      --deg[seq[i]];
    }
    int a = -1, b = -1;
    for (int v = 0; v < n; ++v)
      if (!used[v] && deg[v] == 1) (a < 0 ? a : b) = v;
    edges.emplace_back(a, b);
    trees.push_back(edges);
    // next sequence
    int pos = seq_len - 1;
    while (pos >= 0 && seq[pos] == n - 1) seq[pos--] = 0;
    if (pos < 0) break;
    ++seq[pos];
  }
  return trees;
}

// Triple-loop reference for the spatial graph convolution:
//   y[co, t, j] = sum_p sum_ci sum_i W[p](co, ci) * A_p(j, i) * x[ci, t, i]
inline stgcn::Tensor<double> brute_force_graph_conv(
    const stgcn::Tensor<double>& x, const stgcn::PartitionedAdjacency& adjacency,
    const std::vector<stgcn::Tensor<double>>& weights) {
  const int ci = x.dim(0), t = x.dim(1), v = x.dim(2);
  const int co = weights[0].dim(0);
  stgcn::Tensor<double> y({co, t, v});
  for (int p = 0; p < adjacency.num_partitions; ++p)
    for (int o = 0; o < co; ++o)
      for (int c = 0; c < ci; ++c)
        for (int tt = 0; tt < t; ++tt)
          for (int j = 0; j < v; ++j)
            for (int i = 0; i < v; ++i)
              y.at3(o, tt, j) +=
                  weights[p].at2(o, c) * adjacency.matrices[p].at2(j, i) * x.at3(c, tt, i);
  return y;
}

// Two well-separated Gaussian blobs per class in D dimensions.
inline void make_blobs(int per_class, int num_classes, int dims, std::uint64_t seed,
                       stgcn::Tensor<double>& x, std::vector<int>& labels) {
  stgcn::Rng rng(seed);
  x = stgcn::Tensor<double>({per_class * num_classes, dims});
  labels.assign(std::size_t(per_class) * num_classes, 0);
  int row = 0;
  for (int k = 0; k < num_classes; ++k) {
    for (int i = 0; i < per_class; ++i, ++row) {
      labels[row] = k;
      for (int j = 0; j < dims; ++j) {
        const double center = (j % num_classes == k) ? 5.0 : 0.0;
        x.at2(row, j) = center + rng.normal() * 0.3;
      }
    }
  }
}

}  // namespace test_util
