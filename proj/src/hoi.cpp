#include "ardhoi/hoi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ardhoi {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

namespace rot {

Quat from_axis_angle(const Vec3& aa) {
  const double angle = norm(aa);
  if (angle < 1e-12) return {1.0, 0.5 * aa[0], 0.5 * aa[1], 0.5 * aa[2]};
  const double s = std::sin(0.5 * angle) / angle;
  return normalized({std::cos(0.5 * angle), aa[0] * s, aa[1] * s, aa[2] * s});
}

Vec3 to_axis_angle(const Quat& in) {
  Quat q = normalized(in);
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  const double s = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  if (s < 1e-12) return {2.0 * q.x, 2.0 * q.y, 2.0 * q.z};
  const double angle = 2.0 * std::atan2(s, q.w);
  return {q.x / s * angle, q.y / s * angle, q.z / s * angle};
}

Quat mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

Quat normalized(const Quat& q) {
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat about_y(double angle) { return {std::cos(0.5 * angle), 0.0, std::sin(0.5 * angle), 0.0}; }

Vec3 rotate(const Quat& q, const Vec3& v) { return mat_vec(matrix(q), v); }

Mat3 matrix(const Quat& in) {
  const Quat q = normalized(in);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

Mat3 matrix_from_axis_angle(const Vec3& aa) { return matrix(from_axis_angle(aa)); }

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      c[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
  return c;
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 transpose(const Mat3& m) { return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}; }

Quat slerp(Quat a, Quat b, double t) {
  a = normalized(a);
  b = normalized(b);
  double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (d < 0.0) {
    b = {-b.w, -b.x, -b.y, -b.z};
    d = -d;
  }
  if (d > 0.9995) {
    return normalized({a.w + t * (b.w - a.w), a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)});
  }
  const double theta = std::acos(std::clamp(d, -1.0, 1.0));
  const double sa = std::sin((1 - t) * theta) / std::sin(theta);
  const double sb = std::sin(t * theta) / std::sin(theta);
  return {sa * a.w + sb * b.w, sa * a.x + sb * b.x, sa * a.y + sb * b.y, sa * a.z + sb * b.z};
}

Vec3 canonical_axis_angle(const Vec3& aa) { return to_axis_angle(from_axis_angle(aa)); }

}  // namespace rot

std::array<float, kFrameDims> HoiFrame::flatten() const {
  std::array<float, kFrameDims> out{};
  int k = 0;
  for (double v : root_translation) out[k++] = static_cast<float>(v);
  for (const auto& r : joint_rotations)
    for (double v : r) out[k++] = static_cast<float>(v);
  for (double v : object_translation) out[k++] = static_cast<float>(v);
  for (double v : object_rotation) out[k++] = static_cast<float>(v);
  return out;
}

HoiFrame HoiFrame::unflatten(std::span<const float> values) {
  if (values.size() != kFrameDims)
    throw std::invalid_argument("HoiFrame needs 75 values, got " + std::to_string(values.size()));
  HoiFrame f;
  int k = 0;
  for (auto& v : f.root_translation) v = values[k++];
  for (auto& r : f.joint_rotations)
    for (auto& v : r) v = values[k++];
  for (auto& v : f.object_translation) v = values[k++];
  for (auto& v : f.object_rotation) v = values[k++];
  return f;
}

Skeleton::Skeleton(std::vector<int> parents, std::vector<Vec3> rest_offsets, std::vector<int> contact_joints,
                   std::vector<std::string> names)
    : parents_(std::move(parents)),
      offsets_(std::move(rest_offsets)),
      contacts_(std::move(contact_joints)),
      names_(std::move(names)) {
  const int n = static_cast<int>(parents_.size());
  if (n == 0) throw std::invalid_argument("skeleton has no joints");
  if (static_cast<int>(offsets_.size()) != n) throw std::invalid_argument("one rest offset per joint required");
  if (parents_[0] != -1) throw std::invalid_argument("joint 0 must be the root (parent -1)");
  for (int j = 1; j < n; ++j)
    if (parents_[j] < 0 || parents_[j] >= n || parents_[j] == j)
      throw std::invalid_argument("joint " + std::to_string(j) + " has invalid parent " + std::to_string(parents_[j]));
  // Every chain must reach the root within n steps.
  for (int j = 0; j < n; ++j) {
    int cur = j, steps = 0;
    while (cur != 0) {
      cur = parents_[cur];
      if (++steps > n) throw std::invalid_argument("skeleton contains a cycle through joint " + std::to_string(j));
    }
  }
  std::vector<int> depth(n, 0);
  for (int j = 0; j < n; ++j)
    for (int cur = j; cur != 0; cur = parents_[cur]) ++depth[j];
  order_.resize(n);
  for (int j = 0; j < n; ++j) order_[j] = j;
  std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return depth[a] < depth[b]; });
  for (int c : contacts_)
    if (c < 0 || c >= n) throw std::invalid_argument("contact joint " + std::to_string(c) + " out of range");
  if (names_.empty())
    for (int j = 0; j < n; ++j) names_.push_back("joint" + std::to_string(j));
}

const Skeleton& Skeleton::humanoid() {
  static const Skeleton s(
      {-1, 0, 1, 2, 3, 4, 3, 6, 7, 8, 3, 10, 11, 12, 0, 14, 15, 16, 0, 18, 19, 20},
      {Vec3{0, 0, 0},      {0, 0.10, 0},     {0, 0.12, 0},  {0, 0.12, 0},  {0, 0.12, 0},    {0, 0.10, 0},
       {0.07, 0.09, 0},    {0.11, 0, 0},     {0.28, 0, 0},  {0.27, 0, 0},  {-0.07, 0.09, 0}, {-0.11, 0, 0},
       {-0.28, 0, 0},      {-0.27, 0, 0},    {0.09, -0.06, 0}, {0, -0.42, 0}, {0, -0.40, 0}, {0, -0.06, 0.12},
       {-0.09, -0.06, 0},  {0, -0.42, 0},    {0, -0.40, 0}, {0, -0.06, 0.12}},
      {9, 13, 8, 12},
      {"pelvis", "spine1", "spine2", "spine3", "neck", "head", "l_clavicle", "l_shoulder", "l_elbow", "l_wrist",
       "r_clavicle", "r_shoulder", "r_elbow", "r_wrist", "l_hip", "l_knee", "l_ankle", "l_foot", "r_hip", "r_knee",
       "r_ankle", "r_foot"});
  return s;
}

int Skeleton::index_of(const std::string& name) const {
  for (int j = 0; j < joint_count(); ++j)
    if (names_[j] == name) return j;
  throw std::out_of_range("no joint named " + name);
}

ObjectSpec ObjectSpec::make(std::string label, bool symmetric, std::vector<Vec3> points) {
  if (points.size() != kPointsPerObject)
    throw std::invalid_argument("object '" + label + "' needs exactly 256 points, got " + std::to_string(points.size()));
  Vec3 c{0, 0, 0};
  for (const auto& p : points) c = c + p;
  c = (1.0 / static_cast<double>(points.size())) * c;
  for (auto& p : points) p = p - c;
  return ObjectSpec{std::move(label), symmetric, std::move(points)};
}

double ObjectSpec::radius() const {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, norm(p));
  return r;
}

std::vector<Vec3> forward_kinematics(const HoiFrame& frame, const Skeleton& skeleton) {
  const int n = skeleton.joint_count();
  if (n > kNumJoints) throw std::invalid_argument("skeleton has more joints than a frame carries");
  std::vector<Mat3> global(n);
  std::vector<Vec3> pos(n);
  const auto& parents = skeleton.parents();
  const auto& offsets = skeleton.rest_offsets();
  for (int j : skeleton.order()) {
    const Mat3 local = rot::matrix_from_axis_angle(frame.joint_rotations[j]);
    if (parents[j] < 0) {
      global[j] = local;
      pos[j] = frame.root_translation + offsets[j];
    } else {
      const int p = parents[j];
      global[j] = rot::mat_mul(global[p], local);
      pos[j] = pos[p] + rot::mat_vec(global[p], offsets[j]);
    }
  }
  return pos;
}

std::vector<Vec3> posed_points(const HoiFrame& frame, const ObjectSpec& object) {
  const Mat3 r = rot::matrix_from_axis_angle(frame.object_rotation);
  std::vector<Vec3> out;
  out.reserve(object.points.size());
  for (const auto& p : object.points) out.push_back(rot::mat_vec(r, p) + frame.object_translation);
  return out;
}

double point_object_distance(const Vec3& world, const HoiFrame& frame, const ObjectSpec& object) {
  const Mat3 r = rot::matrix_from_axis_angle(frame.object_rotation);
  const Vec3 q = rot::mat_vec(rot::transpose(r), world - frame.object_translation);
  double best = std::numeric_limits<double>::infinity();
  if (object.vertically_symmetric) {
    const double rq = std::hypot(q[0], q[2]);
    for (const auto& p : object.points) {
      const double dr = rq - std::hypot(p[0], p[2]);
      const double dy = q[1] - p[1];
      best = std::min(best, dr * dr + dy * dy);
    }
  } else {
    for (const auto& p : object.points) {
      const Vec3 d = q - p;
      best = std::min(best, dot(d, d));
    }
  }
  return std::sqrt(best);
}

double ContactDistances::nearest() const {
  return distance.empty() ? std::numeric_limits<double>::infinity() : *std::min_element(distance.begin(), distance.end());
}

double ContactDistances::second() const {
  if (distance.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> d = distance;
  std::partial_sort(d.begin(), d.begin() + 2, d.end());
  return d[1];
}

ContactDistances contact_distances(const HoiFrame& frame, const Skeleton& skeleton, const ObjectSpec& object) {
  const auto pos = forward_kinematics(frame, skeleton);
  ContactDistances out;
  const auto& ids = skeleton.contact_joints();
  for (int j : ids) out.distance.push_back(point_object_distance(pos[j], frame, object));
  std::vector<int> rank(ids.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = static_cast<int>(i);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return out.distance[a] < out.distance[b]; });
  if (!rank.empty()) out.nearest_joint = ids[rank[0]];
  if (rank.size() > 1) out.second_joint = ids[rank[1]];
  return out;
}

Vec3 facing_direction(const HoiFrame& frame) {
  const Vec3 f = rot::mat_vec(rot::matrix_from_axis_angle(frame.joint_rotations[0]), Vec3{0, 0, 1});
  return {f[0], 0.0, f[2]};
}

Canonicalized canonicalize(const HoiSequence& seq) {
  if (seq.frames.empty()) throw std::invalid_argument("canonicalize: empty sequence");
  Canonicalized out{seq, false};
  const Vec3 f = facing_direction(seq.frames[0]);
  double yaw = 0.0;
  if (std::hypot(f[0], f[2]) < 1e-6) {
    out.degenerate_facing = true;
  } else {
    yaw = std::atan2(f[0], f[2]);
  }
  const Quat q = rot::about_y(-yaw);
  const Mat3 r = rot::matrix(q);
  const Vec3 shift{seq.frames[0].root_translation[0], 0.0, seq.frames[0].root_translation[2]};
  for (auto& fr : out.sequence.frames) {
    fr.root_translation = rot::mat_vec(r, fr.root_translation - shift);
    fr.object_translation = rot::mat_vec(r, fr.object_translation - shift);
    fr.joint_rotations[0] = rot::to_axis_angle(rot::mul(q, rot::from_axis_angle(fr.joint_rotations[0])));
    fr.object_rotation = rot::to_axis_angle(rot::mul(q, rot::from_axis_angle(fr.object_rotation)));
  }
  return out;
}

void normalize_rotations(HoiSequence& seq) {
  for (auto& fr : seq.frames) {
    for (auto& r : fr.joint_rotations) r = rot::canonical_axis_angle(r);
    fr.object_rotation = rot::canonical_axis_angle(fr.object_rotation);
  }
}

std::vector<std::string> check_invariants(const HoiSequence& seq) {
  std::vector<std::string> issues;
  const int t = static_cast<int>(seq.frames.size());
  if (t < kMinFrames || t > kMaxFrames)
    issues.push_back("frame count " + std::to_string(t) + " outside [60, 240]");
  if (seq.fps != kFps) issues.push_back("fps " + std::to_string(seq.fps) + " != 30");
  bool finite = true, bounded = true;
  for (const auto& fr : seq.frames) {
    for (float v : fr.flatten()) finite = finite && std::isfinite(v);
    for (const auto& r : fr.joint_rotations) bounded = bounded && norm(r) <= 2.0 * std::numbers::pi + 1e-9;
    bounded = bounded && norm(fr.object_rotation) <= 2.0 * std::numbers::pi + 1e-9;
  }
  if (!finite) issues.push_back("non-finite values");
  if (!bounded) issues.push_back("axis-angle magnitude above 2*pi");
  if (t > 0) {
    const Vec3 f = facing_direction(seq.frames[0]);
    const double h = std::hypot(f[0], f[2]);
    if (h > 1e-6 && std::fabs(std::atan2(f[0], f[2])) > 1e-3) issues.push_back("first frame does not face +z");
  }
  return issues;
}

// ---- files ------------------------------------------------------------------

std::vector<HoiSequence> read_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence file " + path.string());
  std::vector<HoiSequence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    HoiSequence s;
    s.text = j.at("text").get<std::string>();
    s.object = j.at("object").get<std::string>();
    s.fps = j.value("fps", kFps);
    for (const auto& fr : j.at("frames")) {
      const auto v = fr.get<std::vector<float>>();
      if (v.size() != kFrameDims)
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": frame with " + std::to_string(v.size()) +
                                 " values");
      s.frames.push_back(HoiFrame::unflatten(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json sequence_json(const HoiSequence& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& fr : s.frames) {
    const auto flat = fr.flatten();
    frames.push_back(std::vector<float>(flat.begin(), flat.end()));
  }
  return {{"text", s.text}, {"object", s.object}, {"fps", s.fps}, {"frames", frames}};
}

void write_sequences(const std::filesystem::path& path, std::span<const HoiSequence> sequences) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sequence file " + path.string());
  for (const auto& s : sequences) out << sequence_json(s).dump() << '\n';
}

std::vector<ObjectSpec> read_object_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open object library " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<ObjectSpec> out;
  for (const auto& o : j) {
    std::vector<Vec3> pts;
    for (const auto& p : o.at("points")) pts.push_back(p.get<Vec3>());
    out.push_back(ObjectSpec::make(o.at("label").get<std::string>(), o.at("symmetric").get<bool>(), std::move(pts)));
  }
  return out;
}

void write_object_library(const std::filesystem::path& path, std::span<const ObjectSpec> objects) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& o : objects) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : o.points) pts.push_back({p[0], p[1], p[2]});
    j.push_back({{"label", o.label}, {"symmetric", o.vertically_symmetric}, {"points", pts}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write object library " + path.string());
  out << j.dump() << '\n';
}

const ObjectSpec& find_object(std::span<const ObjectSpec> library, const std::string& label) {
  for (const auto& o : library)
    if (o.label == label) return o;
  throw std::out_of_range("object '" + label + "' not in library");
}

}  // namespace ardhoi
