#include "ardhoi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ardhoi::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kStandHeight = 0.94;  // pelvis height with straight legs
constexpr double kGripOutward = 0.01;
constexpr int kReachFrames = 10;
constexpr int kReleaseFrames = 10;

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 unit(const Vec3& v) { return (1.0 / norm(v)) * v; }

Quat quat_from_matrix(const Mat3& m) {
  const double tr = m[0] + m[4] + m[8];
  Quat q;
  if (tr > 0) {
    const double s = std::sqrt(tr + 1.0) * 2;
    q = {0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
  } else if (m[0] > m[4] && m[0] > m[8]) {
    const double s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2;
    q = {(m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
  } else if (m[4] > m[8]) {
    const double s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2;
    q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s};
  } else {
    const double s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2;
    q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s};
  }
  return rot::normalized(q);
}

// Columns a, b, c.
Mat3 from_columns(const Vec3& a, const Vec3& b, const Vec3& c) {
  return {a[0], b[0], c[0], a[1], b[1], c[1], a[2], b[2], c[2]};
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v{n(rng), n(rng), n(rng)};
    const double l = norm(v);
    if (l > 1e-9) return (1.0 / l) * v;
  }
}

void sample_box(const Dims& d, int count, std::mt19937_64& rng, std::vector<Vec3>& out) {
  const double w = d[0], h = d[1], z = d[2];
  const double areas[3] = {h * z, w * z, w * h};
  std::discrete_distribution<int> face({areas[0], areas[0], areas[1], areas[1], areas[2], areas[2]});
  for (int i = 0; i < count; ++i) {
    const int f = face(rng);
    const double s = (f % 2 == 0) ? 0.5 : -0.5;
    const double u = uniform(rng, -0.5, 0.5), v = uniform(rng, -0.5, 0.5);
    if (f < 2) out.push_back({s * w, u * h, v * z});
    else if (f < 4) out.push_back({u * w, s * h, v * z});
    else out.push_back({u * w, v * h, s * z});
  }
}

void sample_disc(double radius, double y, int count, std::mt19937_64& rng, std::vector<Vec3>& out) {
  for (int i = 0; i < count; ++i) {
    const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a = uniform(rng, 0.0, 2 * kPi);
    out.push_back({r * std::cos(a), y, r * std::sin(a)});
  }
}

void sample_tube(double radius, double y0, double y1, int count, std::mt19937_64& rng, std::vector<Vec3>& out) {
  for (int i = 0; i < count; ++i) {
    const double a = uniform(rng, 0.0, 2 * kPi);
    out.push_back({radius * std::cos(a), uniform(rng, y0, y1), radius * std::sin(a)});
  }
}

// Split `count` proportionally to `weights`, remainder to the first part.
std::vector<int> split_counts(int count, std::initializer_list<double> weights) {
  double total = 0;
  for (double w : weights) total += w;
  std::vector<int> out;
  int used = 0;
  for (double w : weights) {
    out.push_back(static_cast<int>(std::floor(count * w / total)));
    used += out.back();
  }
  out[0] += count - used;
  return out;
}

}  // namespace

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::box: return "box";
    case Primitive::cylinder: return "cylinder";
    case Primitive::ball: return "ball";
    case Primitive::stand: return "stand";
    case Primitive::board: return "board";
  }
  return "?";
}

bool primitive_symmetric(Primitive p) {
  return p == Primitive::cylinder || p == Primitive::ball || p == Primitive::stand;
}

namespace {

Dims dims_at(Primitive p, double t0, double t1, double t2) {
  auto lerp = [](double lo, double hi, double t) { return lo + (hi - lo) * t; };
  switch (p) {
    case Primitive::box: return {lerp(0.30, 0.50, t0), lerp(0.25, 0.45, t1), lerp(0.30, 0.45, t2)};
    case Primitive::cylinder: return {lerp(0.12, 0.20, t0), lerp(0.40, 0.70, t1), 0.0};
    case Primitive::ball: return {lerp(0.12, 0.22, t0), 0.0, 0.0};
    case Primitive::stand: return {lerp(0.20, 0.30, t0), lerp(1.40, 1.70, t1), 0.02};
    case Primitive::board: return {lerp(0.40, 0.60, t0), lerp(0.40, 0.60, t1), 0.03};
  }
  return {};
}

}  // namespace

Dims random_dims(Primitive p, std::mt19937_64& rng) {
  const double a = uniform(rng, 0, 1), b = uniform(rng, 0, 1), c = uniform(rng, 0, 1);
  return dims_at(p, a, b, c);
}

std::vector<Vec3> sample_surface(Primitive p, const Dims& d, int count, std::mt19937_64& rng) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  switch (p) {
    case Primitive::box:
    case Primitive::board:
      sample_box(d, count, rng, out);
      break;
    case Primitive::ball:
      for (int i = 0; i < count; ++i) out.push_back(d[0] * random_unit(rng));
      break;
    case Primitive::cylinder: {
      const double r = d[0], h = d[1];
      const auto n = split_counts(count, {2 * kPi * r * h, kPi * r * r, kPi * r * r});
      sample_tube(r, -h / 2, h / 2, n[0], rng, out);
      sample_disc(r, h / 2, n[1], rng, out);
      sample_disc(r, -h / 2, n[2], rng, out);
      break;
    }
    case Primitive::stand: {
      const double base = d[0], h = d[1], pole = d[2], knob = 0.04;
      const auto n = split_counts(count, {2 * kPi * pole * h, 2 * kPi * base * base, 4 * kPi * knob * knob});
      sample_tube(pole, 0.0, h, n[0], rng, out);
      sample_disc(base, 0.0, n[1], rng, out);
      for (int i = 0; i < n[2]; ++i) out.push_back(Vec3{0, h, 0} + knob * random_unit(rng));
      break;
    }
  }
  return out;
}

ObjectSpec make_object(std::string label, Primitive p, const Dims& dims, std::mt19937_64& rng) {
  return ObjectSpec::make(std::move(label), primitive_symmetric(p), sample_surface(p, dims, kPointsPerObject, rng));
}

std::vector<ObjectSpec> default_object_library(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ObjectSpec> lib;
  for (int k = 0; k < kNumPrimitives; ++k) {
    const auto p = static_cast<Primitive>(k);
    lib.push_back(make_object(std::string("small_") + primitive_name(p), p, dims_at(p, 0.2, 0.2, 0.2), rng));
    lib.push_back(make_object(std::string("large_") + primitive_name(p), p, dims_at(p, 0.8, 0.8, 0.8), rng));
  }
  return lib;
}

const char* verb_name(Verb v) {
  switch (v) {
    case Verb::lift: return "lift";
    case Verb::push: return "push";
    case Verb::pull: return "pull";
    case Verb::carry: return "carry";
    case Verb::rotate: return "rotate";
    case Verb::place: return "place";
  }
  return "?";
}

std::optional<Verb> verb_from_text(const std::string& text) {
  const std::string first = text.substr(0, text.find(' '));
  for (int k = 0; k < kNumVerbs; ++k)
    if (first == verb_name(static_cast<Verb>(k))) return static_cast<Verb>(k);
  return std::nullopt;
}

// ---- arm placement ----------------------------------------------------------

ArmPose solve_arm(const Skeleton& sk, bool left, const Vec3& target) {
  const int shoulder = sk.index_of(left ? "l_shoulder" : "r_shoulder");
  const int elbow = sk.index_of(left ? "l_elbow" : "r_elbow");
  const int wrist = sk.index_of(left ? "l_wrist" : "r_wrist");
  HoiFrame rest;
  const Vec3 s = forward_kinematics(rest, sk)[shoulder];
  const double a = norm(sk.rest_offsets()[elbow]);
  const double b = norm(sk.rest_offsets()[wrist]);
  const Vec3 u = unit(sk.rest_offsets()[elbow]);

  ArmPose pose;
  Vec3 q = target - s;
  double r = norm(q);
  const double lo = std::fabs(a - b) + 1e-6, hi = a + b - 1e-6;
  if (r < lo || r > hi) pose.reachable = false;
  r = std::clamp(r, lo, hi);
  const Vec3 d = r > 1e-9 ? unit(q) : Vec3{0, 0, 1};
  const double cpsi = std::clamp((r * r - a * a - b * b) / (2 * a * b), -1.0, 1.0);
  const double psi = std::acos(cpsi);
  const double alpha = std::atan2(b * std::sin(psi), a + b * std::cos(psi));

  // Bend plane: elbow drops down and out.
  Vec3 pole{left ? 0.6 : -0.6, -1.0, 0.0};
  Vec3 n = cross(pole, d);
  if (norm(n) < 1e-6) n = cross(Vec3{0, 0, 1}, d);
  n = unit(n);
  const Vec3 pp = unit(cross(d, n));  // pole direction perpendicular to d
  const Vec3 w = std::cos(alpha) * d + std::sin(alpha) * pp;
  const Vec3 ey{0, 1, 0};
  const Mat3 target_frame = from_columns(w, n, cross(w, n));
  const Mat3 rest_frame = from_columns(u, ey, cross(u, ey));
  pose.shoulder = quat_from_matrix(rot::mat_mul(target_frame, rot::transpose(rest_frame)));
  pose.elbow = rot::from_axis_angle(Vec3{0, psi, 0});
  return pose;
}

namespace {

struct ObjectPose {
  Vec3 position;
  double yaw = 0.0;
};

struct Idle {
  Quat l_shoulder, r_shoulder;
};

Idle idle_arms() {
  return {rot::from_axis_angle(Vec3{0, 0, -80.0 * kPi / 180.0}), rot::from_axis_angle(Vec3{0, 0, 80.0 * kPi / 180.0})};
}

std::string object_words(const std::string& label) {
  std::string s = label;
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

std::string fmt(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string direction_word(const std::array<double, 2>& d) {
  if (std::fabs(d[0]) > std::fabs(d[1])) return d[0] > 0 ? "left" : "right";
  return d[1] > 0 ? "forward" : "back";
}

std::string speed_word(Verb v, double amount, int frames) {
  const double seconds = frames / static_cast<double>(kFps);
  const double rate = amount / seconds;
  const bool angular = v == Verb::rotate;
  const double slow = angular ? 25.0 : 0.25;
  const double fast = angular ? 60.0 : 0.6;
  if (rate < slow) return "slowly";
  if (rate > fast) return "quickly";
  return "";
}

std::string describe(const ScenarioTemplate& s, int manip_frames) {
  std::string text = std::string(verb_name(s.verb)) + " the " + object_words(s.object_label);
  switch (s.verb) {
    case Verb::lift: text += " up " + fmt(s.amount, 2) + " meters"; break;
    case Verb::push: text += " forward " + fmt(s.amount, 1) + " meters"; break;
    case Verb::pull: text += " back " + fmt(s.amount, 1) + " meters"; break;
    case Verb::carry:
    case Verb::place: text += " " + direction_word(*s.direction) + " " + fmt(s.amount, 1) + " meters"; break;
    case Verb::rotate:
      text += std::string(s.direction && (*s.direction)[0] < 0 ? " clockwise " : " counterclockwise ") +
              fmt(s.amount, 0) + " degrees";
      break;
  }
  const std::string speed = speed_word(s.verb, s.amount, manip_frames);
  if (!speed.empty()) text += " " + speed;
  return text;
}

// Horizontal distance from the object centre to where the walker stands.
// Half depth of the slab of points near local height y.
double object_depth(const ObjectSpec& obj, double y) {
  double z = 0.0;
  for (const auto& p : obj.points)
    if (std::fabs(p[1] - y) < 0.1) z = std::max(z, std::fabs(p[2]));
  return z;
}

double min_y(const ObjectSpec& obj) {
  double y = 1e9;
  for (const auto& p : obj.points) y = std::min(y, p[1]);
  return y;
}

double height(const ObjectSpec& obj) {
  double y = -1e9;
  for (const auto& p : obj.points) y = std::max(y, p[1]);
  return y - min_y(obj);
}

// Grip point on the +x (left) or -x side at local height `y`, moved outward.
Vec3 grip_point(const ObjectSpec& obj, double y, bool left) {
  const double sign = left ? 1.0 : -1.0;
  double ext = 0.0;
  for (const auto& p : obj.points)
    if (std::fabs(p[1] - y) < 0.1) ext = std::max(ext, sign * p[0]);
  const Vec3 ideal{sign * ext, y, 0.0};
  Vec3 best = obj.points[0];
  double bd = 1e18;
  for (const auto& p : obj.points) {
    const Vec3 d = p - ideal;
    const double dd = dot(d, d);
    if (dd < bd) {
      bd = dd;
      best = p;
    }
  }
  Vec3 out{best[0], 0.0, best[2]};
  const double h = norm(out);
  out = h > 1e-9 ? (1.0 / h) * out : Vec3{sign, 0, 0};
  return best + kGripOutward * out;
}

Vec3 rotate_y(double yaw, const Vec3& v) { return rot::mat_vec(rot::matrix(rot::about_y(yaw)), v); }

struct Gait {
  double phase = 0.0;
  void step(double distance) { phase += 2 * kPi * distance / 1.2; }
  // amplitude in [0,1] scales with walking speed
  void apply(HoiFrame& f, const Skeleton& sk, double amplitude) const {
    const double s = std::sin(phase);
    const double swing = 0.35 * amplitude;
    f.joint_rotations[sk.index_of("l_hip")] = {-swing * s, 0, 0};
    f.joint_rotations[sk.index_of("r_hip")] = {swing * s, 0, 0};
    f.joint_rotations[sk.index_of("l_knee")] = {0.5 * amplitude * std::max(0.0, s), 0, 0};
    f.joint_rotations[sk.index_of("r_knee")] = {0.5 * amplitude * std::max(0.0, -s), 0, 0};
    f.root_translation[1] = kStandHeight - 0.015 * amplitude * std::fabs(std::cos(phase));
  }
};

}  // namespace

GeneratedSequence realize(const ScenarioTemplate& sc, const ObjectSpec& obj, std::mt19937_64& rng) {
  const Skeleton& sk = Skeleton::humanoid();
  const int T = sc.duration_frames;
  if (T < kMinFrames || T > kMaxFrames) throw std::invalid_argument("scenario duration outside [60, 240]");
  const int idle = uniform_int(rng, 0, 8);
  const int approach_max = std::max(15, std::min(static_cast<int>(0.45 * T), T - kReachFrames - kReleaseFrames - idle - 16));
  const int approach = uniform_int(rng, 15, approach_max);
  const int manip = T - approach - kReachFrames - kReleaseFrames - idle;

  const double walk_speed = uniform(rng, 0.8, 1.2);
  const double walk = std::min(2.5, walk_speed * approach / kFps);
  const double heading = uniform(rng, -0.6, 0.6);
  const Vec3 fwd{std::sin(heading), 0, std::cos(heading)};
  const Vec3 left{std::cos(heading), 0, -std::sin(heading)};
  const Vec3 stand = walk * fwd;

  // Tall objects stand on the floor; the rest sit on an unseen support.
  const bool on_ground = height(obj) > 1.0;
  const double grip_world_y = uniform(rng, 1.0, 1.1);
  const double center_y = on_ground ? -min_y(obj) : grip_world_y;
  const double grip_local_y = on_ground ? grip_world_y - center_y : 0.0;
  const double obj_yaw0 = heading + uniform(rng, -0.08, 0.08);
  const double standoff = std::max(0.3, object_depth(obj, grip_local_y) + 0.15);
  const Vec3 obj0 = stand + standoff * fwd + Vec3{0, center_y, 0};
  const Vec3 grip_l = grip_point(obj, grip_local_y, true);
  const Vec3 grip_r = grip_point(obj, grip_local_y, false);

  Vec3 dir_world = fwd;
  if (sc.direction) dir_world = (*sc.direction)[0] * left + (*sc.direction)[1] * fwd;
  const double amount = sc.amount;

  auto object_at = [&](double u) {
    ObjectPose p{obj0, obj_yaw0};
    const double su = smoothstep(u);
    switch (sc.verb) {
      case Verb::lift: p.position[1] += amount * su; break;
      case Verb::push: p.position = p.position + (amount * su) * fwd; break;
      case Verb::pull: p.position = p.position - (amount * su) * fwd; break;
      case Verb::carry:
      case Verb::place: {
        const double h = sc.verb == Verb::carry ? 0.10 : 0.15;
        p.position[1] += h * (smoothstep(u / 0.2) - smoothstep((u - 0.8) / 0.2));
        p.position = p.position + (amount * smoothstep((u - 0.2) / 0.6)) * dir_world;
        break;
      }
      case Verb::rotate: {
        const double sign = sc.direction && (*sc.direction)[0] < 0 ? -1.0 : 1.0;
        p.yaw += sign * amount * kPi / 180.0 * su;
        break;
      }
    }
    return p;
  };

  // Walker root pose that keeps the grip relative to the object fixed.
  auto root_for = [&](const ObjectPose& p, Vec3& root, double& yaw) {
    const double dyaw = p.yaw - obj_yaw0;
    const Vec3 rel = stand - Vec3{obj0[0], 0, obj0[2]};
    const Vec3 r = rotate_y(dyaw, rel);
    root = Vec3{p.position[0], 0, p.position[2]} + r;
    yaw = heading + dyaw;
  };

  const Idle rest = idle_arms();
  const int ls = sk.index_of("l_shoulder"), le = sk.index_of("l_elbow");
  const int rs = sk.index_of("r_shoulder"), re = sk.index_of("r_elbow");

  auto arm_targets = [&](const ObjectPose& p, const Vec3& root, double yaw, ArmPose& l, ArmPose& r) {
    const Mat3 ro = rot::matrix(rot::about_y(p.yaw));
    const Mat3 rr_t = rot::transpose(rot::matrix(rot::about_y(yaw)));
    const Vec3 root3{root[0], kStandHeight, root[2]};
    const Vec3 wl = rot::mat_vec(ro, grip_l) + p.position;
    const Vec3 wr = rot::mat_vec(ro, grip_r) + p.position;
    // Shoulders are placed relative to a pelvis at standing height.
    l = solve_arm(sk, true, rot::mat_vec(rr_t, wl - root3));
    r = solve_arm(sk, false, rot::mat_vec(rr_t, wr - root3));
  };

  GeneratedSequence out;
  out.scenario = sc;
  out.manip_begin = approach + kReachFrames;
  out.manip_end = out.manip_begin + manip;
  auto& frames = out.sequence.frames;
  frames.resize(static_cast<std::size_t>(T));
  Gait gait;
  Vec3 prev_root{0, 0, 0};

  const ObjectPose start = object_at(0.0);
  ArmPose grip0_l, grip0_r;
  arm_targets(start, stand, heading, grip0_l, grip0_r);
  ObjectPose last = start;
  ArmPose last_l = grip0_l, last_r = grip0_r;

  for (int k = 0; k < T; ++k) {
    HoiFrame& f = frames[static_cast<std::size_t>(k)];
    ObjectPose op = start;
    Vec3 root{0, 0, 0};
    double yaw = heading;
    Quat sl = rest.l_shoulder, sr = rest.r_shoulder, el{}, er{};
    if (k < approach) {
      const double u = approach > 1 ? static_cast<double>(k) / (approach - 1) : 1.0;
      root = smoothstep(u) * stand;
      yaw = heading * smoothstep(k / std::max(1.0, 0.5 * approach));
    } else if (k < approach + kReachFrames) {
      root = stand;
      const double w = smoothstep(static_cast<double>(k - approach + 1) / kReachFrames);
      sl = rot::slerp(rest.l_shoulder, grip0_l.shoulder, w);
      sr = rot::slerp(rest.r_shoulder, grip0_r.shoulder, w);
      el = rot::slerp(Quat{}, grip0_l.elbow, w);
      er = rot::slerp(Quat{}, grip0_r.elbow, w);
    } else if (k < out.manip_end) {
      const double u = manip > 1 ? static_cast<double>(k - out.manip_begin) / (manip - 1) : 1.0;
      op = object_at(u);
      root_for(op, root, yaw);
      ArmPose l, r;
      arm_targets(op, root, yaw, l, r);
      sl = l.shoulder;
      sr = r.shoulder;
      el = l.elbow;
      er = r.elbow;
      last = op;
      last_l = l;
      last_r = r;
    } else {
      op = last;
      root_for(op, root, yaw);
      const double w = smoothstep(static_cast<double>(k - out.manip_end + 1) / kReleaseFrames);
      sl = rot::slerp(last_l.shoulder, rest.l_shoulder, w);
      sr = rot::slerp(last_r.shoulder, rest.r_shoulder, w);
      el = rot::slerp(last_l.elbow, Quat{}, w);
      er = rot::slerp(last_r.elbow, Quat{}, w);
    }
    const double step = k == 0 ? 0.0 : norm(root - prev_root);
    prev_root = root;
    gait.step(step);
    const double amplitude = std::min(1.0, step / 0.02);
    f.root_translation = {root[0], kStandHeight, root[2]};
    // Legs only; the grip targets assume a pelvis at standing height.
    HoiFrame legs;
    gait.apply(legs, sk, amplitude);
    for (int j = 0; j < kNumJoints; ++j) f.joint_rotations[j] = legs.joint_rotations[j];
    f.root_translation[1] = k >= approach && k < out.manip_end ? kStandHeight : legs.root_translation[1];
    f.joint_rotations[0] = {0, yaw, 0};
    f.joint_rotations[ls] = rot::to_axis_angle(sl);
    f.joint_rotations[rs] = rot::to_axis_angle(sr);
    f.joint_rotations[le] = rot::to_axis_angle(el);
    f.joint_rotations[re] = rot::to_axis_angle(er);
    f.object_translation = op.position;
    f.object_rotation = {0, op.yaw, 0};
  }

  out.sequence.fps = kFps;
  out.sequence.object = obj.label;
  out.sequence.text = describe(sc, manip);
  auto canon = canonicalize(out.sequence);
  out.sequence = std::move(canon.sequence);
  normalize_rotations(out.sequence);
  return out;
}

ScenarioTemplate random_scenario(Verb verb, std::span<const ObjectSpec> library, std::mt19937_64& rng) {
  if (library.empty()) throw std::invalid_argument("empty object library");
  ScenarioTemplate s;
  s.verb = verb;
  s.object_label = library[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(library.size()) - 1))].label;
  s.duration_frames = uniform_int(rng, kMinFrames, kMaxFrames);
  switch (verb) {
    case Verb::lift: s.amount = 0.05 * uniform_int(rng, 2, 7); break;
    case Verb::push:
    case Verb::pull: s.amount = 0.1 * uniform_int(rng, 3, 10); break;
    case Verb::carry: {
      static const std::array<std::array<double, 2>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
      s.direction = dirs[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
      s.amount = 0.1 * uniform_int(rng, 5, 15);
      break;
    }
    case Verb::place:
      s.direction = std::array<double, 2>{uniform_int(rng, 0, 1) ? 1.0 : -1.0, 0.0};
      s.amount = 0.1 * uniform_int(rng, 2, 5);
      break;
    case Verb::rotate:
      s.direction = std::array<double, 2>{uniform_int(rng, 0, 1) ? 1.0 : -1.0, 0.0};
      s.amount = 10.0 * uniform_int(rng, 3, 9);
      break;
  }
  return s;
}

std::vector<GeneratedSequence> generate_corpus_detailed(int n, std::uint64_t seed, std::span<const ObjectSpec> library) {
  if (n < 1) throw std::invalid_argument("corpus size must be at least 1");
  std::vector<GeneratedSequence> out;
  out.reserve(static_cast<std::size_t>(n));
  std::set<std::string> seen;
  std::array<int, kNumVerbs> block{};
  for (int i = 0; i < n; ++i) {
    if (i % kNumVerbs == 0) {
      std::seed_seq ss{seed, static_cast<std::uint64_t>(i / kNumVerbs), std::uint64_t{0x5eed}};
      std::mt19937_64 brng(ss);
      for (int k = 0; k < kNumVerbs; ++k) block[static_cast<std::size_t>(k)] = k;
      std::shuffle(block.begin(), block.end(), brng);
    }
    const auto verb = static_cast<Verb>(block[static_cast<std::size_t>(i % kNumVerbs)]);
    std::seed_seq ss{seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(ss);
    GeneratedSequence g;
    for (int attempt = 0; attempt < 200; ++attempt) {
      const ScenarioTemplate sc = random_scenario(verb, library, rng);
      g = realize(sc, find_object(library, sc.object_label), rng);
      if (!seen.count(g.sequence.text)) break;
    }
    seen.insert(g.sequence.text);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<HoiSequence> generate_corpus(int n, std::uint64_t seed, std::span<const ObjectSpec> library) {
  std::vector<HoiSequence> out;
  for (auto& g : generate_corpus_detailed(n, seed, library)) out.push_back(std::move(g.sequence));
  return out;
}

}  // namespace ardhoi::synth
