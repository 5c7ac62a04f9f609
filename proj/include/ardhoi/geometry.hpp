#pragma once

// Differentiable versions of the HOI geometry, used by the physical losses.

#include <span>

#include "ardhoi/hoi.hpp"
#include "ardhoi/tensor.hpp"

namespace ardhoi::geo {

// Rotation matrix of an axis-angle vector and its partial derivatives dR/dr_k.
void rodrigues(const double r[3], double R[9], double dR[3][9]);

// Axis-angle [..., 3] -> rotation matrices [..., 3, 3].
Tensor rodrigues(const Tensor& aa);

// Frames [N, 75] in world units -> joint positions [N, J, 3].
Tensor forward_kinematics(const Tensor& frames, const Skeleton& skeleton);

// Distance from each skeleton contact joint to the object, one object per row.
// joints [N, J, 3] (output of forward_kinematics), frames [N, 75] -> [N, C].
// Symmetric objects use the same surface-of-revolution distance as
// point_object_distance.
Tensor contact_distances(const Tensor& joints, const Tensor& frames, const Skeleton& skeleton,
                         std::span<const ObjectSpec* const> objects);

}  // namespace ardhoi::geo
