#pragma once

#include "splatsim/materials.hpp"
#include "splatsim/types.hpp"

#include <cstdint>
#include <vector>

namespace splatsim {

/// No material group assigned.
constexpr std::uint32_t kNoGroup = 0;

/// One anisotropic Gaussian: rendering primitive and simulation particle.
struct GaussianKernel {
    Vec3 position = Vec3::Zero();      // world units
    Mat3 covariance = Mat3::Identity(); // world units^2, symmetric PSD
    double opacity = 1.0;              // [0,1]
    Vec3 color = Vec3::Zero();         // RGB in [0,1]
    std::uint32_t group_id = kNoGroup; // material group, 0 = none
};

/// Ordered kernel collection. Index p is the particle identity: every
/// pipeline stage preserves it.
struct SplatCloud {
    std::vector<GaussianKernel> kernels;
    MaterialTable materials; // group id -> properties, filled by perception

    std::size_t count() const { return kernels.size(); }
};

/// Isotropic world <-> simulation-domain map: domain = scale * world + translation.
struct DomainTransform {
    double scale = 1.0; // > 0
    Vec3 translation = Vec3::Zero();

    Vec3 to_domain(const Vec3& world) const { return scale * world + translation; }
    Vec3 to_world(const Vec3& domain) const { return (domain - translation) / scale; }
};

/// Maps the cloud's bounding box isotropically into [padding, 1-padding]^3
/// (longest axis spans it exactly, box centered at 0.5^3); covariances scale
/// by scale^2. padding must lie in [0, 0.45]. Throws ContractError when the
/// bounding box is degenerate (zero extent on every axis).
std::pair<SplatCloud, DomainTransform> normalize_to_domain(const SplatCloud& cloud, double padding);

} // namespace splatsim
