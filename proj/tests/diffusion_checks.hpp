#pragma once

// Oracle checks for the noise schedule and the DDIM sampler, shared by the
// unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ardhoi/diffusion.hpp"

namespace ardhoi::testing {

inline bool alpha_bar_monotone(const NoiseSchedule& s) {
  if (s.alpha_bar(0) != 1.0) return false;
  for (int t = 1; t <= s.steps(); ++t)
    if (!(s.alpha_bar(t) < s.alpha_bar(t - 1))) return false;
  return s.alpha_bar(s.steps()) < 1e-3;
}

struct MonteCarloMatch {
  double worst_z = 0.0;  // largest |difference| / standard error over means and variances
};

// Draws s_t once through the closed form and once by t single noising steps
// from the same s_0, then compares per-dimension means and variances of the two
// samples with each other and with sqrt(ab) s_0 and 1 - ab.
inline MonteCarloMatch q_sample_vs_iterated(const NoiseSchedule& s, int t, int draws, std::uint64_t seed) {
  const std::vector<float> s0{0.8f, -1.2f, 0.1f, 2.0f};
  const std::size_t d = s0.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<double> m1(d, 0), v1(d, 0), m2(d, 0), v2(d, 0);
  std::vector<float> eps(d);
  for (int k = 0; k < draws; ++k) {
    for (auto& e : eps) e = g(rng);
    const auto a = s.q_sample(s0, t, eps);
    std::vector<float> b = s0;
    for (int step = 1; step <= t; ++step) {
      for (auto& e : eps) e = g(rng);
      b = s.q_step(b, step, eps);
    }
    for (std::size_t i = 0; i < d; ++i) {
      m1[i] += a[i];
      v1[i] += static_cast<double>(a[i]) * a[i];
      m2[i] += b[i];
      v2[i] += static_cast<double>(b[i]) * b[i];
    }
  }
  MonteCarloMatch r;
  const double n = draws;
  const double ab = s.alpha_bar(t);
  const double var = 1.0 - ab;
  for (std::size_t i = 0; i < d; ++i) {
    const double ma = m1[i] / n, mb = m2[i] / n;
    const double va = v1[i] / n - ma * ma, vb = v2[i] / n - mb * mb;
    const double se_m = std::sqrt(var / n), se_v = var * std::sqrt(2.0 / (n - 1));
    const double mean_ref = std::sqrt(ab) * s0[i];
    r.worst_z = std::max({r.worst_z, std::fabs(ma - mb) / (std::sqrt(2.0) * se_m),
                          std::fabs(va - vb) / (std::sqrt(2.0) * se_v), std::fabs(ma - mean_ref) / se_m,
                          std::fabs(va - var) / se_v});
  }
  return r;
}

// A plug-in predictor that always returns `target` must make DDIM land on it.
inline double ddim_fixed_oracle_error(const NoiseSchedule& s, const std::vector<float>& target, double xi,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> noise(target.size());
  for (auto& v : noise) v = g(rng);
  const auto out = ddim_sample(s, noise, [&](std::span<const float>, int, bool) { return target; }, xi);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::fabs(static_cast<double>(out[i]) - target[i]));
  return worst;
}

// Noises s_0 with q_sample, then runs DDIM with a perfect x0 predictor.
inline double ddim_reconstruction_error(const NoiseSchedule& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> s0(33), eps(33);
  for (auto& v : s0) v = g(rng);
  for (auto& v : eps) v = g(rng);
  const auto noisy = s.q_sample(s0, s.steps(), eps);
  const auto out = ddim_sample(s, noisy, [&](std::span<const float>, int, bool) { return s0; }, 2.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::fabs(static_cast<double>(out[i]) - s0[i]));
  return worst;
}

// Two different nonlinear predictors for the branches; every traced step must
// satisfy guided = xi * cond + (1 - xi) * uncond.
inline double guidance_affine_error(const NoiseSchedule& s, double xi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> noise(9), w(9);
  for (auto& v : noise) v = g(rng);
  for (auto& v : w) v = g(rng);
  const PredictFn f = [&](std::span<const float> z, int t, bool conditional) {
    std::vector<float> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      out[i] = conditional ? std::tanh(z[i] * w[i]) + 0.001f * static_cast<float>(t) : 0.5f * z[i] - w[i];
    return out;
  };
  GuidanceTrace trace;
  ddim_sample(s, noise, f, xi, &trace);
  double worst = 0.0;
  if (trace.steps.size() != s.ddim_steps().size()) return 1e30;
  for (const auto& st : trace.steps)
    for (std::size_t i = 0; i < st.guided.size(); ++i) {
      const double want = xi * st.cond[i] + (1.0 - xi) * st.uncond[i];
      worst = std::max(worst, std::fabs(want - st.guided[i]) / std::max(1.0, std::fabs(want)));
    }
  return worst;
}

// With xi = 1 the sampler must match a purely conditional run bit for bit and
// never ask for the unconditional branch.
inline bool guidance_one_is_conditional(const NoiseSchedule& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> noise(9);
  for (auto& v : noise) v = g(rng);
  bool asked_uncond = false;
  const PredictFn guided = [&](std::span<const float> z, int t, bool conditional) {
    if (!conditional) asked_uncond = true;
    std::vector<float> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = conditional ? std::sin(z[i]) * 0.7f + 1e-4f * t : 100.0f;
    return out;
  };
  const PredictFn cond_only = [&](std::span<const float> z, int t, bool) {
    std::vector<float> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::sin(z[i]) * 0.7f + 1e-4f * t;
    return out;
  };
  const auto a = ddim_sample(s, noise, guided, 1.0);
  const auto b = ddim_sample(s, noise, cond_only, 1.0);
  return a == b && !asked_uncond;
}

}  // namespace ardhoi::testing
