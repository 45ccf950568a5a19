#include "splatsim/splat_cloud.hpp"

#include <limits>

namespace splatsim {

std::pair<SplatCloud, DomainTransform> normalize_to_domain(const SplatCloud& cloud, double padding) {
    if (cloud.kernels.empty()) throw ContractError("normalize_to_domain: empty cloud");
    if (!(padding >= 0.0 && padding <= 0.45))
        throw ContractError("normalize_to_domain: padding must be in [0, 0.45]");

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& k : cloud.kernels) {
        lo = lo.cwiseMin(k.position);
        hi = hi.cwiseMax(k.position);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0))
        throw ContractError("normalize_to_domain: degenerate bounding box (zero extent)");

    DomainTransform t;
    t.scale = (1.0 - 2.0 * padding) / extent;
    t.translation = Vec3::Constant(0.5) - t.scale * 0.5 * (lo + hi);

    SplatCloud out = cloud;
    const double s2 = t.scale * t.scale;
    for (auto& k : out.kernels) {
        k.position = t.to_domain(k.position);
        k.covariance *= s2;
    }
    return {std::move(out), t};
}

} // namespace splatsim
