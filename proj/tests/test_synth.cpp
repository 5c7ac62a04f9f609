#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "ardhoi/synth.hpp"

using namespace ardhoi;
using namespace ardhoi::synth;

namespace {

const std::vector<ObjectSpec>& lib() {
  static const auto l = default_object_library();
  return l;
}

double min_contact(const HoiFrame& f, const ObjectSpec& o) {
  return contact_distances(f, Skeleton::humanoid(), o).nearest();
}

}  // namespace

TEST_CASE("object library") {
  CHECK(lib().size() == 10);
  int symmetric = 0;
  for (const auto& o : lib()) {
    CHECK(o.points.size() == 256);
    symmetric += o.vertically_symmetric;
  }
  CHECK(symmetric == 6);
}

TEST_CASE("arm solver reaches reachable targets") {
  const Skeleton& sk = Skeleton::humanoid();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  int tried = 0;
  for (int i = 0; i < 200; ++i) {
    const bool left = i % 2 == 0;
    const Vec3 target{(left ? 0.25 : -0.25) + 0.2 * u(rng), 0.25 + 0.2 * u(rng), 0.35 + 0.15 * u(rng)};
    const ArmPose pose = solve_arm(sk, left, target);
    if (!pose.reachable) continue;
    ++tried;
    HoiFrame f;
    f.joint_rotations[sk.index_of(left ? "l_shoulder" : "r_shoulder")] = rot::to_axis_angle(pose.shoulder);
    f.joint_rotations[sk.index_of(left ? "l_elbow" : "r_elbow")] = rot::to_axis_angle(pose.elbow);
    const Vec3 w = forward_kinematics(f, sk)[sk.index_of(left ? "l_wrist" : "r_wrist")];
    CHECK(norm(w - target) < 1e-6);
  }
  CHECK(tried > 150);
}

TEST_CASE("generated sequences satisfy the sequence invariants") {
  const auto corpus = generate_corpus_detailed(60, 3, lib());
  for (const auto& g : corpus) {
    INFO(g.sequence.text);
    CHECK(check_invariants(g.sequence).empty());
    CHECK(g.manip_end > g.manip_begin);
  }
}

TEST_CASE("hands stay on the object while it is manipulated") {
  const auto corpus = generate_corpus_detailed(120, 4, lib());
  int carries = 0;
  for (const auto& g : corpus) {
    const ObjectSpec& o = find_object(lib(), g.sequence.object);
    double worst = 0.0;
    for (int k = g.manip_begin; k < g.manip_end; ++k) worst = std::max(worst, min_contact(g.sequence.frames[k], o));
    INFO(g.sequence.text);
    CHECK(worst < 0.02);
    carries += g.scenario.verb == Verb::carry;
  }
  CHECK(carries >= 15);
}

TEST_CASE("rotating a symmetric object keeps it in place") {
  std::mt19937_64 rng(5);
  const ObjectSpec& cyl = find_object(lib(), "large_cylinder");
  ScenarioTemplate sc;
  sc.verb = Verb::rotate;
  sc.object_label = cyl.label;
  sc.direction = std::array<double, 2>{1, 0};
  sc.amount = 60;
  sc.duration_frames = 150;
  const auto g = realize(sc, cyl, rng);
  const auto& f = g.sequence.frames;
  double prev_yaw = -1e9;
  for (int k = g.manip_begin; k < g.manip_end; ++k) {
    CHECK(norm(f[k].object_translation - f[g.manip_begin].object_translation) < 1e-9);
    const Vec3 aa = f[k].object_rotation;
    CHECK(std::fabs(aa[0]) < 1e-9);
    CHECK(std::fabs(aa[2]) < 1e-9);
    // yaw measured relative to the start of the phase, unwrapped
    const double yaw = std::remainder(aa[1] - f[g.manip_begin].object_rotation[1], 2 * std::numbers::pi);
    CHECK(yaw >= prev_yaw - 1e-12);
    prev_yaw = yaw;
  }
  CHECK(prev_yaw == doctest::Approx(60.0 * std::numbers::pi / 180.0).epsilon(1e-6));
}

TEST_CASE("corpus generation is deterministic and balanced") {
  const auto a = generate_corpus(30, 11, lib());
  const auto b = generate_corpus(30, 11, lib());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    for (std::size_t k = 0; k < a[i].frames.size(); ++k) REQUIRE(a[i].frames[k].flatten() == b[i].frames[k].flatten());
  }
  const auto big = generate_corpus_detailed(1000, 12, lib());
  std::map<Verb, int> counts;
  std::set<std::string> texts;
  for (const auto& g : big) {
    ++counts[g.scenario.verb];
    texts.insert(g.sequence.text);
    CHECK(verb_from_text(g.sequence.text) == g.scenario.verb);
  }
  for (const auto& [v, n] : counts) CHECK(std::fabs(n / 1000.0 - 1.0 / 6.0) < 0.05 / 6.0);
  CHECK(texts.size() > 950);
}

TEST_CASE("texts are unique in a desk-sized corpus") {
  const auto corpus = generate_corpus(564, 0, lib());
  std::set<std::string> texts;
  for (const auto& s : corpus) texts.insert(s.text);
  CHECK(texts.size() == corpus.size());
}
