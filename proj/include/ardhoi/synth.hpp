#pragma once

// Procedural HOI corpus: a walker approaches an object, grips it with both
// hands, manipulates it per a verb and lets go.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardhoi/hoi.hpp"

namespace ardhoi::synth {

enum class Primitive { box, cylinder, ball, stand, board };
inline constexpr int kNumPrimitives = 5;
const char* primitive_name(Primitive p);
bool primitive_symmetric(Primitive p);

// Shape parameters in meters, meaning depends on the primitive:
// box/board (width, height, depth), cylinder (radius, height, -),
// ball (radius, -, -), stand (base radius, height, pole radius).
using Dims = std::array<double, 3>;
Dims random_dims(Primitive p, std::mt19937_64& rng);
std::vector<Vec3> sample_surface(Primitive p, const Dims& dims, int count, std::mt19937_64& rng);
ObjectSpec make_object(std::string label, Primitive p, const Dims& dims, std::mt19937_64& rng);

// Two sizes of each primitive, labelled small_<name> and large_<name>.
std::vector<ObjectSpec> default_object_library(std::uint64_t seed = 7);

enum class Verb { lift, push, pull, carry, rotate, place };
inline constexpr int kNumVerbs = 6;
const char* verb_name(Verb v);
std::optional<Verb> verb_from_text(const std::string& text);

struct ScenarioTemplate {
  Verb verb = Verb::lift;
  std::string object_label;
  // Horizontal direction in the walker's frame: x = left, second entry = forward.
  std::optional<std::array<double, 2>> direction;
  int duration_frames = 120;
  // Meters, or degrees for rotate.
  double amount = 0.0;
};

struct GeneratedSequence {
  HoiSequence sequence;
  ScenarioTemplate scenario;
  int manip_begin = 0;  // first frame of the manipulation phase
  int manip_end = 0;    // one past its last frame
};

GeneratedSequence realize(const ScenarioTemplate& scenario, const ObjectSpec& object, std::mt19937_64& rng);

// Draws a scenario for `verb` with random object, amount, direction and length.
ScenarioTemplate random_scenario(Verb verb, std::span<const ObjectSpec> library, std::mt19937_64& rng);

// Texts are unique within a corpus where the grammar allows it; verbs cycle
// through shuffled blocks so counts stay balanced.
std::vector<GeneratedSequence> generate_corpus_detailed(int n, std::uint64_t seed, std::span<const ObjectSpec> library);
std::vector<HoiSequence> generate_corpus(int n, std::uint64_t seed, std::span<const ObjectSpec> library);

// Local rotations that place each wrist at its target (root frame). Exposed for tests.
struct ArmPose {
  Quat shoulder, elbow;
  bool reachable = true;
};
ArmPose solve_arm(const Skeleton& skeleton, bool left, const Vec3& target_in_root_frame);

}  // namespace ardhoi::synth
