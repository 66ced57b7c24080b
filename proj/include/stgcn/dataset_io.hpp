#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgcn/common.hpp"
#include "stgcn/preprocess.hpp"
#include "stgcn/skeleton.hpp"

namespace stgcn {

// ---------------------------------------------------------------------------
// Canonical dataset container (.skds)
//
// Little-endian binary layout:
//   magic   "SKDSET01" (8 bytes)
//   u32     version (1)
//   u8      topology kind (0 = kinect_v1, 1 = kinect_v2, 2 = shared20)
//   f64     frame rate
//   u32     N, C(=3), T, V, M(=1)
//   u32     number of classes, then per class a length-prefixed name
//   i32[N]  labels
//   i32[N]  subject ids
//   f32[N*C*T*V*M]  coordinates, row-major [N][C][T][V][M]
//
// All sequences in a container share one frame count; pad_to_frames first.

inline constexpr char kDatasetMagic[8] = {'S', 'K', 'D', 'S', 'E', 'T', '0', '1'};

inline void save_dataset(const Dataset& dataset, const std::string& path) {
  int frames = 0;
  int joints = 0;
  if (!dataset.samples.empty()) {
    frames = dataset.samples[0].frames;
    joints = dataset.samples[0].joints;
    for (const auto& s : dataset.samples)
      if (s.frames != frames || s.joints != joints)
        throw DataError("save_dataset: container requires a uniform [T, V] shape; run pad_to_frames first");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  io::write_bytes(os, kDatasetMagic, 8);
  io::write_u32(os, 1);
  io::write_u8(os, std::uint8_t(dataset.topology_kind));
  io::write_f64(os, dataset.frame_rate);
  io::write_u32(os, std::uint32_t(dataset.samples.size()));
  io::write_u32(os, 3);
  io::write_u32(os, std::uint32_t(frames));
  io::write_u32(os, std::uint32_t(joints));
  io::write_u32(os, 1);
  io::write_u32(os, std::uint32_t(dataset.class_names.size()));
  for (const auto& name : dataset.class_names) io::write_string(os, name);
  for (const auto& s : dataset.samples) io::write_i32(os, s.label);
  for (const auto& s : dataset.samples) io::write_i32(os, s.subject_id);
  for (const auto& s : dataset.samples)
    for (double x : s.coords) io::write_f32(os, float(x));
  if (!os) throw DataError("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[8];
  io::read_bytes(is, magic, 8);
  if (std::memcmp(magic, kDatasetMagic, 8) != 0)
    throw DataError("not a dataset container (bad magic): " + path);
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) throw DataError("unsupported dataset container version");
  Dataset d;
  d.topology_kind = TopologyKind(io::read_u8(is));
  d.frame_rate = io::read_f64(is);
  const std::uint32_t n = io::read_u32(is);
  const std::uint32_t c = io::read_u32(is);
  const std::uint32_t t = io::read_u32(is);
  const std::uint32_t v = io::read_u32(is);
  const std::uint32_t m = io::read_u32(is);
  if (c != 3 || m != 1) throw DataError("dataset container must have C=3, M=1");
  const std::uint32_t k = io::read_u32(is);
  d.class_names.reserve(k);
  for (std::uint32_t i = 0; i < k; ++i) d.class_names.push_back(io::read_string(is));
  std::vector<int> labels(n), subjects(n);
  for (auto& x : labels) x = io::read_i32(is);
  for (auto& x : subjects) x = io::read_i32(is);
  d.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SkeletonSequence s(int(t), int(v), d.topology_kind);
    s.label = labels[i];
    s.subject_id = subjects[i];
    s.frame_rate = d.frame_rate;
    for (double& x : s.coords) x = io::read_f32(is);
    d.samples.push_back(std::move(s));
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// NTU-style .skeleton importer
//
// Text layout per file:
//   frame count
//   per frame: body count, then per body one 10-column info line,
//   the joint count, and per joint a row whose first three columns are
//   x y z (the remaining columns are parsed and discarded).
// Labels and subject ids come from the SsssCcccPpppRrrrAaaa filename pattern.

struct ImportSummary {
  int samples = 0;
  int dropped_files = 0;
  std::vector<std::string> messages;
};

namespace detail {

inline bool parse_ntu_filename(const std::string& stem, int& subject, int& action) {
  int values[4] = {0, 0, 0, 0};  // C, P, R, A
  const char keys[4] = {'C', 'P', 'R', 'A'};
  if (stem.empty() || stem[0] != 'S') return false;
  std::size_t pos = 1;
  while (pos < stem.size() && std::isdigit(static_cast<unsigned char>(stem[pos]))) ++pos;
  for (int k = 0; k < 4; ++k) {
    if (pos >= stem.size() || stem[pos] != keys[k]) return false;
    ++pos;
    std::size_t start = pos;
    while (pos < stem.size() && std::isdigit(static_cast<unsigned char>(stem[pos]))) ++pos;
    if (start == pos) return false;
    values[k] = std::stoi(stem.substr(start, pos - start));
  }
  subject = values[1];
  action = values[3] - 1;  // action codes are 1-based
  return action >= 0;
}

}  // namespace detail

// Parses one .skeleton file; multi-body frames keep every body so the caller
// can run main-actor selection. Bodies are tracked by their per-frame order.
inline std::vector<SkeletonSequence> parse_ntu_skeleton_stream(std::istream& is,
                                                               const std::string& name) {
  auto fail = [&](int line, const std::string& what) {
    throw DataError(name + ":" + std::to_string(line) + ": " + what);
  };
  int line = 1;
  auto next_int = [&](const char* what) {
    long long v = 0;
    if (!(is >> v)) fail(line, std::string("expected ") + what);
    return int(v);
  };
  const int num_frames = next_int("frame count");
  if (num_frames < 0 || num_frames > 100000) fail(line, "frame count out of range");
  int max_bodies = 0;
  // body id -> per-frame joint data, gathered first because body count varies.
  std::vector<std::vector<std::array<double, 3>>> frames_joints;  // [frame][body*V + joint]
  std::vector<int> frame_body_counts(num_frames, 0);
  frames_joints.resize(num_frames);
  for (int f = 0; f < num_frames; ++f) {
    const int bodies = next_int("body count");
    if (bodies < 0 || bodies > 10) fail(line, "body count out of range");
    frame_body_counts[f] = bodies;
    max_bodies = std::max(max_bodies, bodies);
    for (int b = 0; b < bodies; ++b) {
      // 10 ancillary per-body values (tracking id, lean, state flags).
      for (int i = 0; i < 10; ++i) {
        double ignored;
        if (!(is >> ignored)) fail(line, "expected body info value");
      }
      const int joints = next_int("joint count");
      if (joints != 25) fail(line, "expected 25 joints per body");
      for (int j = 0; j < joints; ++j) {
        double x, y, z;
        if (!(is >> x >> y >> z)) fail(line, "expected joint x y z");
        // 9 ancillary per-joint values (depth/color projections, orientation,
        // tracking state).
        for (int i = 0; i < 9; ++i) {
          double ignored;
          if (!(is >> ignored)) fail(line, "expected joint ancillary value");
        }
        frames_joints[f].push_back({x, y, z});
      }
    }
  }
  std::vector<SkeletonSequence> bodies;
  for (int b = 0; b < max_bodies; ++b) {
    SkeletonSequence s(num_frames, 25, TopologyKind::kinect_v2);
    for (int f = 0; f < num_frames; ++f) {
      if (b >= frame_body_counts[f]) continue;  // absent body: zeros
      for (int j = 0; j < 25; ++j) {
        const auto& p = frames_joints[f][std::size_t(b) * 25 + j];
        s.at(0, f, j) = p[0];
        s.at(1, f, j) = p[1];
        s.at(2, f, j) = p[2];
      }
    }
    bodies.push_back(std::move(s));
  }
  return bodies;
}

// Imports a directory of .skeleton files. Two-body recordings keep the body
// with the most motion; sequences stay on the kinect_v2 topology.
inline Dataset import_ntu_directory(const std::string& dir, ImportSummary* summary = nullptr) {
  namespace fs = std::filesystem;
  Dataset d;
  d.topology_kind = TopologyKind::kinect_v2;
  ImportSummary sum;
  int max_label = -1;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".skeleton")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .skeleton files in " + dir);
  for (const auto& path : files) {
    int subject = -1, action = -1;
    if (!detail::parse_ntu_filename(path.stem().string(), subject, action)) {
      ++sum.dropped_files;
      sum.messages.push_back(path.filename().string() + ": unrecognized filename pattern");
      continue;
    }
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path.string());
    auto bodies = parse_ntu_skeleton_stream(is, path.filename().string());
    if (bodies.empty()) {
      ++sum.dropped_files;
      sum.messages.push_back(path.filename().string() + ": no bodies");
      continue;
    }
    SkeletonSequence s = select_main_actor(bodies);
    s.label = action;
    s.subject_id = subject;
    d.samples.push_back(std::move(s));
    max_label = std::max(max_label, action);
    ++sum.samples;
  }
  for (int i = 0; i <= max_label; ++i) d.class_names.push_back("A" + std::to_string(i + 1));
  d.validate();
  if (summary) *summary = sum;
  return d;
}

// ---------------------------------------------------------------------------
// CSV importer/exporter
//
// One file per sample with header `frame,joint,x,y,z`, plus a sidecar labels
// file `sample_id,label,subject_id` where sample_id is the csv filename stem.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline SkeletonSequence import_csv_sequence(std::istream& is, const std::string& name,
                                            TopologyKind kind) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(name + ":1: empty file");
  auto header = detail::split_csv_line(line);
  const std::vector<std::string> expected = {"frame", "joint", "x", "y", "z"};
  if (header.size() != 5)
    throw DataError(name + ":1: header must have 5 columns frame,joint,x,y,z");
  for (std::size_t i = 0; i < 5; ++i)
    if (header[i] != expected[i])
      throw DataError(name + ":1: bad header column '" + header[i] + "', expected '" +
                      expected[i] + "'");
  struct Row {
    int frame, joint;
    double x, y, z;
  };
  std::vector<Row> rows;
  int max_frame = -1, max_joint = -1;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 5)
      throw DataError(name + ":" + std::to_string(line_no) + ": expected 5 fields");
    try {
      Row r{std::stoi(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
      if (r.frame < 0 || r.joint < 0)
        throw DataError(name + ":" + std::to_string(line_no) + ": negative frame/joint index");
      max_frame = std::max(max_frame, r.frame);
      max_joint = std::max(max_joint, r.joint);
      rows.push_back(r);
    } catch (const std::invalid_argument&) {
      throw DataError(name + ":" + std::to_string(line_no) + ": non-numeric field");
    }
  }
  if (rows.empty()) throw DataError(name + ": no data rows");
  SkeletonSequence s(max_frame + 1, max_joint + 1, kind);
  for (const auto& r : rows) {
    s.at(0, r.frame, r.joint) = r.x;
    s.at(1, r.frame, r.joint) = r.y;
    s.at(2, r.frame, r.joint) = r.z;
  }
  return s;
}

inline void export_csv_sequence(const SkeletonSequence& s, std::ostream& os) {
  os << "frame,joint,x,y,z\n";
  char buf[160];
  for (int t = 0; t < s.frames; ++t) {
    for (int v = 0; v < s.joints; ++v) {
      // %.9g round-trips float32 values exactly.
      std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", t, v, s.at(0, t, v),
                    s.at(1, t, v), s.at(2, t, v));
      os << buf;
    }
  }
}

// Imports `<dir>/*.csv` with labels from `labels_path`. Joint count decides
// the topology: 25 -> kinect_v2, 20 -> shared20.
inline Dataset import_csv_directory(const std::string& dir, const std::string& labels_path,
                                    ImportSummary* summary = nullptr) {
  namespace fs = std::filesystem;
  std::ifstream ls(labels_path);
  if (!ls) throw DataError("cannot open labels file: " + labels_path);
  std::string line;
  if (!std::getline(ls, line)) throw DataError(labels_path + ":1: empty labels file");
  auto header = detail::split_csv_line(line);
  if (header != std::vector<std::string>{"sample_id", "label", "subject_id"})
    throw DataError(labels_path + ":1: labels header must be sample_id,label,subject_id");
  std::map<std::string, std::pair<int, int>> labels;
  int line_no = 1;
  while (std::getline(ls, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 3)
      throw DataError(labels_path + ":" + std::to_string(line_no) + ": expected 3 fields");
    labels[f[0]] = {std::stoi(f[1]), std::stoi(f[2])};
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv files in " + dir);

  Dataset d;
  ImportSummary sum;
  int max_label = -1;
  bool first = true;
  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    auto it = labels.find(stem);
    if (it == labels.end()) {
      ++sum.dropped_files;
      sum.messages.push_back(stem + ": no labels entry");
      continue;
    }
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path.string());
    SkeletonSequence s = import_csv_sequence(is, path.filename().string(), d.topology_kind);
    if (first) {
      d.topology_kind = s.joints == 25 ? TopologyKind::kinect_v2 : TopologyKind::shared20;
      first = false;
    }
    s.topology_kind = d.topology_kind;
    s.label = it->second.first;
    s.subject_id = it->second.second;
    max_label = std::max(max_label, s.label);
    d.samples.push_back(std::move(s));
    ++sum.samples;
  }
  for (int i = 0; i <= max_label; ++i) d.class_names.push_back("class_" + std::to_string(i));
  d.validate();
  if (summary) *summary = sum;
  return d;
}

}  // namespace stgcn
