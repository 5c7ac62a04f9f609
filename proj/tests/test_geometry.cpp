#include <doctest.h>

#include <cmath>
#include <random>

#include "ardhoi/geometry.hpp"
#include "ardhoi/synth.hpp"

using namespace ardhoi;

TEST_CASE("tensor geometry agrees with the double-precision version") {
  const Skeleton& sk = Skeleton::humanoid();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto lib = synth::default_object_library();
  std::vector<HoiFrame> frames;
  std::vector<float> flat;
  std::vector<const ObjectSpec*> objs;
  for (int i = 0; i < 12; ++i) {
    HoiFrame f;
    for (auto& r : f.joint_rotations)
      for (auto& v : r) v = u(rng);
    f.root_translation = {u(rng), 0.9, u(rng)};
    f.object_translation = {u(rng), 1.0, u(rng)};
    f.object_rotation = {0.3 * u(rng), 2 * u(rng), 0.3 * u(rng)};
    frames.push_back(f);
    const auto a = f.flatten();
    flat.insert(flat.end(), a.begin(), a.end());
    objs.push_back(&lib[static_cast<std::size_t>(i) % lib.size()]);
  }
  const Tensor x = Tensor::from({12, kFrameDims}, flat);
  const Tensor joints = geo::forward_kinematics(x, sk);
  const Tensor dist = geo::contact_distances(joints, x, sk, objs);
  for (int i = 0; i < 12; ++i) {
    // Compare against the float-rounded frame so only arithmetic differs.
    const HoiFrame g = HoiFrame::unflatten(std::span<const float>(flat).subspan(static_cast<std::size_t>(i) * kFrameDims, kFrameDims));
    const auto p = forward_kinematics(g, sk);
    for (int j = 0; j < 22; ++j)
      for (int c = 0; c < 3; ++c) CHECK(std::fabs(joints[(static_cast<std::size_t>(i) * 22 + j) * 3 + c] - p[j][c]) < 1e-5);
    const auto cd = contact_distances(g, sk, *objs[static_cast<std::size_t>(i)]);
    for (std::size_t c = 0; c < cd.distance.size(); ++c)
      CHECK(std::fabs(dist[static_cast<std::size_t>(i) * cd.distance.size() + c] - cd.distance[c]) < 1e-5);
  }
}

TEST_CASE("rodrigues matches the quaternion path including tiny angles") {
  for (double scale : {0.0, 1e-7, 1e-3, 0.5, 3.0}) {
    const double r[3] = {scale * 0.6, -scale * 0.8, scale * 0.1};
    double R[9];
    geo::rodrigues(r, R, nullptr);
    const Mat3 m = rot::matrix_from_axis_angle({r[0], r[1], r[2]});
    for (int e = 0; e < 9; ++e) CHECK(std::fabs(R[e] - m[e]) < 1e-12);
  }
}

TEST_CASE("rodrigues derivative matches central differences") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const double s = trial < 5 ? 1e-3 : 1.0;
    double r[3] = {s * u(rng), s * u(rng), s * u(rng)};
    double R[9], dR[3][9];
    geo::rodrigues(r, R, dR);
    for (int k = 0; k < 3; ++k) {
      double rp[3] = {r[0], r[1], r[2]}, rm[3] = {r[0], r[1], r[2]};
      rp[k] += 1e-6;
      rm[k] -= 1e-6;
      double Rp[9], Rm[9];
      geo::rodrigues(rp, Rp, nullptr);
      geo::rodrigues(rm, Rm, nullptr);
      for (int e = 0; e < 9; ++e) CHECK(std::fabs((Rp[e] - Rm[e]) / 2e-6 - dR[k][e]) < 1e-7);
    }
  }
}
