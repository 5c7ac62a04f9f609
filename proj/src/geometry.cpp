#include "ardhoi/geometry.hpp"

#include <cmath>
#include <limits>

namespace ardhoi::geo {

namespace {

void cross_matrix(const double v[3], double K[9]) {
  K[0] = 0;     K[1] = -v[2]; K[2] = v[1];
  K[3] = v[2];  K[4] = 0;     K[5] = -v[0];
  K[6] = -v[1]; K[7] = v[0];  K[8] = 0;
}

void mm3(const double* a, const double* b, double* c) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
}

// c = a^T b
void mtm3(const double* a, const double* b, double* c) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i * 3 + j] = a[i] * b[j] + a[3 + i] * b[3 + j] + a[6 + i] * b[6 + j];
}

// c = a b^T
void mmt3(const double* a, const double* b, double* c) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i * 3 + j] = a[i * 3] * b[j * 3] + a[i * 3 + 1] * b[j * 3 + 1] + a[i * 3 + 2] * b[j * 3 + 2];
}

void mv3(const double* m, const double* v, double* out) {
  for (int i = 0; i < 3; ++i) out[i] = m[i * 3] * v[0] + m[i * 3 + 1] * v[1] + m[i * 3 + 2] * v[2];
}

void mtv3(const double* m, const double* v, double* out) {
  for (int i = 0; i < 3; ++i) out[i] = m[i] * v[0] + m[3 + i] * v[1] + m[6 + i] * v[2];
}

// Accumulates dL/dr from dL/dR.
void rodrigues_backward(const double dR[3][9], const double* gR, float* g) {
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int e = 0; e < 9; ++e) s += dR[k][e] * gR[e];
    g[k] += static_cast<float>(s);
  }
}

}  // namespace

void rodrigues(const double r[3], double R[9], double dR[3][9]) {
  const double t2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
  const double t = std::sqrt(t2);
  double a, b, c, d;
  if (t < 1e-2) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
    d = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0;
  } else {
    const double s = std::sin(t), co = std::cos(t);
    a = s / t;
    b = (1.0 - co) / t2;
    c = (t * co - s) / (t2 * t);
    d = (t * s - 2.0 * (1.0 - co)) / (t2 * t2);
  }
  double K[9], K2[9];
  cross_matrix(r, K);
  mm3(K, K, K2);
  for (int e = 0; e < 9; ++e) R[e] = a * K[e] + b * K2[e];
  R[0] += 1.0;
  R[4] += 1.0;
  R[8] += 1.0;
  if (!dR) return;
  for (int k = 0; k < 3; ++k) {
    double ek[3] = {0, 0, 0};
    ek[k] = 1.0;
    double E[9], EK[9], KE[9];
    cross_matrix(ek, E);
    mm3(E, K, EK);
    mm3(K, E, KE);
    for (int e = 0; e < 9; ++e) dR[k][e] = c * r[k] * K[e] + a * E[e] + d * r[k] * K2[e] + b * (EK[e] + KE[e]);
  }
}

Tensor rodrigues(const Tensor& aa) {
  if (aa.rank() < 1 || aa.shape().back() != 3) throw ShapeError("rodrigues expects [..., 3], got " + shape_str(aa.shape()));
  const std::size_t n = aa.size() / 3;
  Shape shape = aa.shape();
  shape.push_back(3);
  std::vector<float> out(n * 9);
  const auto x = aa.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double r[3] = {x[i * 3], x[i * 3 + 1], x[i * 3 + 2]};
    double R[9];
    rodrigues(r, R, nullptr);
    for (int e = 0; e < 9; ++e) out[i * 9 + e] = static_cast<float>(R[e]);
  }
  return Tensor::make(std::move(shape), std::move(out), {aa}, "rodrigues", [n](Node& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    float* g = p->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double r[3] = {p->data[i * 3], p->data[i * 3 + 1], p->data[i * 3 + 2]};
      double R[9], dR[3][9], gR[9];
      rodrigues(r, R, dR);
      for (int e = 0; e < 9; ++e) gR[e] = self.grad[i * 9 + e];
      rodrigues_backward(dR, gR, g + i * 3);
    }
  });
}

Tensor forward_kinematics(const Tensor& frames, const Skeleton& skeleton) {
  if (frames.rank() != 2 || frames.dim(1) != kFrameDims)
    throw ShapeError("forward_kinematics expects [N, 75], got " + shape_str(frames.shape()));
  const int n = frames.dim(0);
  const int nj = skeleton.joint_count();
  std::vector<float> out(static_cast<std::size_t>(n) * nj * 3);
  const auto x = frames.data();
  const auto& parents = skeleton.parents();
  const auto& offsets = skeleton.rest_offsets();
  const auto& order = skeleton.order();
  std::vector<double> G(nj * 9), P(nj * 3);
  for (int i = 0; i < n; ++i) {
    const float* f = x.data() + static_cast<std::size_t>(i) * kFrameDims;
    for (int j : order) {
      const double r[3] = {f[3 + 3 * j], f[4 + 3 * j], f[5 + 3 * j]};
      double R[9];
      rodrigues(r, R, nullptr);
      const int p = parents[j];
      if (p < 0) {
        for (int e = 0; e < 9; ++e) G[j * 9 + e] = R[e];
        for (int c = 0; c < 3; ++c) P[j * 3 + c] = f[c] + offsets[j][c];
      } else {
        mm3(&G[p * 9], R, &G[j * 9]);
        double o[3];
        mv3(&G[p * 9], offsets[j].data(), o);
        for (int c = 0; c < 3; ++c) P[j * 3 + c] = P[p * 3 + c] + o[c];
      }
    }
    for (int e = 0; e < nj * 3; ++e) out[static_cast<std::size_t>(i) * nj * 3 + e] = static_cast<float>(P[e]);
  }
  return Tensor::make({n, nj, 3}, std::move(out), {frames}, "forward_kinematics", [n, nj, &skeleton](Node& self) {
    auto& parent = self.parents[0];
    if (!parent->requires_grad) return;
    float* g = parent->grad_buffer();
    const auto& parents = skeleton.parents();
    const auto& offsets = skeleton.rest_offsets();
    const auto& order = skeleton.order();
    std::vector<double> G(nj * 9), Rl(nj * 9), dR(nj * 27), gG(nj * 9), gP(nj * 3);
    for (int i = 0; i < n; ++i) {
      const float* f = parent->data.data() + static_cast<std::size_t>(i) * kFrameDims;
      float* gf = g + static_cast<std::size_t>(i) * kFrameDims;
      for (int j : order) {
        const double r[3] = {f[3 + 3 * j], f[4 + 3 * j], f[5 + 3 * j]};
        double d[3][9];
        rodrigues(r, &Rl[j * 9], d);
        for (int k = 0; k < 3; ++k)
          for (int e = 0; e < 9; ++e) dR[j * 27 + k * 9 + e] = d[k][e];
        const int p = parents[j];
        if (p < 0)
          for (int e = 0; e < 9; ++e) G[j * 9 + e] = Rl[j * 9 + e];
        else
          mm3(&G[p * 9], &Rl[j * 9], &G[j * 9]);
      }
      std::fill(gG.begin(), gG.end(), 0.0);
      for (int e = 0; e < nj * 3; ++e) gP[e] = self.grad[static_cast<std::size_t>(i) * nj * 3 + e];
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int j = *it;
        const int p = parents[j];
        double gR[9];
        if (p < 0) {
          for (int e = 0; e < 9; ++e) gR[e] = gG[j * 9 + e];
          for (int c = 0; c < 3; ++c) gf[c] += static_cast<float>(gP[j * 3 + c]);
        } else {
          // p_j = p_p + G_p o_j ; G_j = G_p R_j
          for (int c = 0; c < 3; ++c) gP[p * 3 + c] += gP[j * 3 + c];
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) gG[p * 9 + a * 3 + b] += gP[j * 3 + a] * offsets[j][b];
          double t[9];
          mmt3(&gG[j * 9], &Rl[j * 9], t);
          for (int e = 0; e < 9; ++e) gG[p * 9 + e] += t[e];
          mtm3(&G[p * 9], &gG[j * 9], gR);
        }
        double d[3][9];
        for (int k = 0; k < 3; ++k)
          for (int e = 0; e < 9; ++e) d[k][e] = dR[j * 27 + k * 9 + e];
        rodrigues_backward(d, gR, gf + 3 + 3 * j);
      }
    }
  });
}

namespace {

struct Nearest {
  double dist = 0.0;
  double dq[3] = {0, 0, 0};  // d dist / d q (object-local query point)
};

Nearest nearest_surface(const double q[3], const ObjectSpec& obj) {
  Nearest out;
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  if (obj.vertically_symmetric) {
    const double rq = std::hypot(q[0], q[2]);
    for (std::size_t k = 0; k < obj.points.size(); ++k) {
      const auto& p = obj.points[k];
      const double dr = rq - std::hypot(p[0], p[2]);
      const double dy = q[1] - p[1];
      const double s = dr * dr + dy * dy;
      if (s < best) {
        best = s;
        arg = k;
      }
    }
    out.dist = std::sqrt(best);
    if (out.dist > 0.0) {
      const auto& p = obj.points[arg];
      const double dr = rq - std::hypot(p[0], p[2]);
      if (rq > 0.0) {
        out.dq[0] = dr / out.dist * q[0] / rq;
        out.dq[2] = dr / out.dist * q[2] / rq;
      }
      out.dq[1] = (q[1] - p[1]) / out.dist;
    }
  } else {
    for (std::size_t k = 0; k < obj.points.size(); ++k) {
      const auto& p = obj.points[k];
      const double s = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]) + (q[2] - p[2]) * (q[2] - p[2]);
      if (s < best) {
        best = s;
        arg = k;
      }
    }
    out.dist = std::sqrt(best);
    if (out.dist > 0.0)
      for (int c = 0; c < 3; ++c) out.dq[c] = (q[c] - obj.points[arg][c]) / out.dist;
  }
  return out;
}

}  // namespace

Tensor contact_distances(const Tensor& joints, const Tensor& frames, const Skeleton& skeleton,
                         std::span<const ObjectSpec* const> objects) {
  const int n = frames.dim(0);
  const int nj = skeleton.joint_count();
  if (joints.shape() != Shape{n, nj, 3}) throw ShapeError("contact_distances: joints " + shape_str(joints.shape()));
  if (frames.shape() != Shape{n, kFrameDims}) throw ShapeError("contact_distances: frames " + shape_str(frames.shape()));
  if (static_cast<int>(objects.size()) != n) throw ShapeError("contact_distances: one object per row required");
  const std::vector<int> ids = skeleton.contact_joints();
  const int nc = static_cast<int>(ids.size());
  std::vector<float> out(static_cast<std::size_t>(n) * nc);
  // Per (row, contact): d dist / d q, the local query point and the world offset v = p - t.
  auto cache = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * nc * 6);
  const auto jx = joints.data();
  const auto fx = frames.data();
  for (int i = 0; i < n; ++i) {
    const float* f = fx.data() + static_cast<std::size_t>(i) * kFrameDims;
    const double r[3] = {f[kHumanDims + 3], f[kHumanDims + 4], f[kHumanDims + 5]};
    double R[9];
    rodrigues(r, R, nullptr);
    for (int c = 0; c < nc; ++c) {
      const float* p = jx.data() + (static_cast<std::size_t>(i) * nj + ids[c]) * 3;
      double v[3], q[3];
      for (int a = 0; a < 3; ++a) v[a] = static_cast<double>(p[a]) - f[kHumanDims + a];
      mtv3(R, v, q);
      const Nearest nb = nearest_surface(q, *objects[i]);
      out[static_cast<std::size_t>(i) * nc + c] = static_cast<float>(nb.dist);
      double* slot = cache->data() + (static_cast<std::size_t>(i) * nc + c) * 6;
      for (int a = 0; a < 3; ++a) {
        slot[a] = nb.dq[a];
        slot[3 + a] = v[a];
      }
    }
  }
  return Tensor::make({n, nc}, std::move(out), {joints, frames}, "contact_distances", [n, nj, nc, ids, cache](Node& self) {
    auto& pj = self.parents[0];
    auto& pf = self.parents[1];
    float* gj = pj->requires_grad ? pj->grad_buffer() : nullptr;
    float* gf = pf->requires_grad ? pf->grad_buffer() : nullptr;
    for (int i = 0; i < n; ++i) {
      const float* f = pf->data.data() + static_cast<std::size_t>(i) * kFrameDims;
      const double r[3] = {f[kHumanDims + 3], f[kHumanDims + 4], f[kHumanDims + 5]};
      double R[9], dR[3][9];
      rodrigues(r, R, dR);
      double gR[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
      double gt[3] = {0, 0, 0};
      for (int c = 0; c < nc; ++c) {
        const double g = self.grad[static_cast<std::size_t>(i) * nc + c];
        if (g == 0.0) continue;
        const double* slot = cache->data() + (static_cast<std::size_t>(i) * nc + c) * 6;
        const double gq[3] = {g * slot[0], g * slot[1], g * slot[2]};
        double gv[3];
        mv3(R, gq, gv);  // q = R^T v  =>  dL/dv = R dL/dq
        if (gj)
          for (int a = 0; a < 3; ++a) gj[(static_cast<std::size_t>(i) * nj + ids[c]) * 3 + a] += static_cast<float>(gv[a]);
        for (int a = 0; a < 3; ++a) {
          gt[a] -= gv[a];
          for (int b = 0; b < 3; ++b) gR[a * 3 + b] += slot[3 + a] * gq[b];
        }
      }
      if (gf) {
        float* row = gf + static_cast<std::size_t>(i) * kFrameDims;
        for (int a = 0; a < 3; ++a) row[kHumanDims + a] += static_cast<float>(gt[a]);
        rodrigues_backward(dR, gR, row + kHumanDims + 3);
      }
    }
  });
}

}  // namespace ardhoi::geo
