#pragma once

// Human-object interaction data model: frames, skeleton, forward kinematics,
// contact distances and canonicalisation. Geometry runs in double precision;
// y is up and a canonical sequence starts facing +z.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ardhoi {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline constexpr int kNumJoints = 22;
inline constexpr int kHumanDims = 3 + 3 * kNumJoints;  // 69
inline constexpr int kObjectDims = 6;
inline constexpr int kFrameDims = kHumanDims + kObjectDims;  // 75
inline constexpr int kPointsPerObject = 256;
inline constexpr int kFps = 30;
inline constexpr int kMinFrames = 60;
inline constexpr int kMaxFrames = 240;

namespace rot {

Quat from_axis_angle(const Vec3& aa);
// Angle of the result lies in [0, pi].
Vec3 to_axis_angle(const Quat& q);
Quat mul(const Quat& a, const Quat& b);
Quat conj(const Quat& q);
Quat normalized(const Quat& q);
Quat about_y(double angle);
Vec3 rotate(const Quat& q, const Vec3& v);
Mat3 matrix(const Quat& q);
Mat3 matrix_from_axis_angle(const Vec3& aa);
Mat3 mat_mul(const Mat3& a, const Mat3& b);
Vec3 mat_vec(const Mat3& m, const Vec3& v);
Mat3 transpose(const Mat3& m);
// Shortest-arc spherical interpolation.
Quat slerp(Quat a, Quat b, double t);
// Maps any axis-angle onto the equivalent one with angle in [0, pi].
Vec3 canonical_axis_angle(const Vec3& aa);

}  // namespace rot

Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator*(double s, const Vec3& a);
double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

struct HoiFrame {
  Vec3 root_translation{};
  std::array<Vec3, kNumJoints> joint_rotations{};
  Vec3 object_translation{};
  Vec3 object_rotation{};

  // Layout: root translation, 22 joint rotations, object translation, object rotation.
  std::array<float, kFrameDims> flatten() const;
  static HoiFrame unflatten(std::span<const float> values);
};

class Skeleton {
 public:
  // Rejects anything that is not a tree rooted at joint 0.
  Skeleton(std::vector<int> parents, std::vector<Vec3> rest_offsets, std::vector<int> contact_joints,
           std::vector<std::string> names = {});

  // Simplified 22-joint humanoid: spine x3, neck, head and per side clavicle,
  // shoulder, elbow, wrist, hip, knee, ankle, foot. Contact joints are the
  // wrists and elbows.
  static const Skeleton& humanoid();

  int joint_count() const { return static_cast<int>(parents_.size()); }
  const std::vector<int>& parents() const { return parents_; }
  const std::vector<Vec3>& rest_offsets() const { return offsets_; }
  const std::vector<int>& contact_joints() const { return contacts_; }
  const std::vector<std::string>& names() const { return names_; }
  // Joint ids with every parent listed before its children.
  const std::vector<int>& order() const { return order_; }
  int index_of(const std::string& name) const;

 private:
  std::vector<int> parents_;
  std::vector<Vec3> offsets_;
  std::vector<int> contacts_;
  std::vector<std::string> names_;
  std::vector<int> order_;
};

struct ObjectSpec {
  std::string label;
  bool vertically_symmetric = false;
  std::vector<Vec3> points;  // object-local frame, centroid at the origin

  // Recentres `points` on their centroid; requires exactly 256 points.
  static ObjectSpec make(std::string label, bool symmetric, std::vector<Vec3> points);
  double radius() const;
};

struct HoiSequence {
  std::vector<HoiFrame> frames;
  int fps = kFps;
  std::string text;
  std::string object;  // label into the object library
};

// Joint positions in world coordinates. Joint j sits at its parent's position
// plus the parent's global rotation applied to the rest offset; the root sits
// at root_translation + its rest offset.
std::vector<Vec3> forward_kinematics(const HoiFrame& frame, const Skeleton& skeleton);

// World-space object points for a frame's object pose.
std::vector<Vec3> posed_points(const HoiFrame& frame, const ObjectSpec& object);

// Distance from a world point to the object surface represented by the
// point cloud. For vertically symmetric objects the cloud is treated as a
// surface of revolution about the local y axis.
double point_object_distance(const Vec3& world, const HoiFrame& frame, const ObjectSpec& object);

struct ContactDistances {
  std::vector<double> distance;  // one per skeleton contact joint, same order
  int nearest_joint = -1;        // joint id with the smallest distance
  int second_joint = -1;         // joint id with the second smallest distance

  double nearest() const;
  double second() const;
};

ContactDistances contact_distances(const HoiFrame& frame, const Skeleton& skeleton, const ObjectSpec& object);

// Direction the root faces: root rotation applied to +z, projected to the ground plane.
Vec3 facing_direction(const HoiFrame& frame);

struct Canonicalized {
  HoiSequence sequence;
  bool degenerate_facing = false;  // facing was vertical; identity yaw used
};

// One rigid transform (yaw about y plus horizontal shift) for every frame so
// frame 0 faces +z with its root above the origin.
Canonicalized canonicalize(const HoiSequence& seq);

// Re-expresses every axis-angle with angle in [0, pi].
void normalize_rotations(HoiSequence& seq);

// Empty when the sequence satisfies every invariant; otherwise one message per violation.
std::vector<std::string> check_invariants(const HoiSequence& seq);

// ---- files ------------------------------------------------------------------

// JSON-lines, one sequence per line: {"text", "object", "fps", "frames": [[75 floats], ...]}.
std::vector<HoiSequence> read_sequences(const std::filesystem::path& path);
nlohmann::json sequence_json(const HoiSequence& seq);
void write_sequences(const std::filesystem::path& path, std::span<const HoiSequence> sequences);

// JSON array of {"label", "symmetric", "points": [[x,y,z] x 256]}.
std::vector<ObjectSpec> read_object_library(const std::filesystem::path& path);
void write_object_library(const std::filesystem::path& path, std::span<const ObjectSpec> objects);
const ObjectSpec& find_object(std::span<const ObjectSpec> library, const std::string& label);

}  // namespace ardhoi
