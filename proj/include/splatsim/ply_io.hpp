#pragma once

#include "splatsim/splat_cloud.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace splatsim {

struct PlyLoadStats {
    std::vector<std::size_t> rejected_records; // vertex indices with non-finite fields
};

struct PlySaveStats {
    std::size_t psd_clamps = 0; // negative covariance eigenvalues clamped to 1e-12
};

/// Reads a 3DGS-layout PLY (binary little-endian or ASCII): vertex properties
/// x,y,z, scale_0..2 (log), rot_0..3 (quaternion, scalar first), opacity
/// (pre-logistic), f_dc_0..2 (SH DC). Covariance is reconstructed as
/// R diag(exp(scale))^2 R^T; opacity passes through the logistic; color is
/// 0.5 + C0*f_dc clamped to [0,1]. Records with non-finite fields are dropped
/// and reported in stats. Missing properties raise ParseError naming them.
SplatCloud load_splat_ply(const std::string& path, PlyLoadStats* stats = nullptr);

/// Writes the same schema, binary little-endian. Covariances are decomposed
/// back to quaternion + log-scales via eigendecomposition; negative
/// eigenvalues are clamped to 1e-12 and counted in stats.
void save_frame(const SplatCloud& cloud, const std::string& path, PlySaveStats* stats = nullptr);

} // namespace splatsim
