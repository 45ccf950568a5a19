#pragma once

#include "splatsim/image.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/splat_cloud.hpp"
#include "splatsim/types.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace splatsim {

/// Pinhole camera, OpenCV convention: x right, y down, z forward.
/// world -> camera: x_cam = R * x_world + T.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 R = Mat3::Identity(); // orthonormal
    Vec3 T = Vec3::Zero();
    int width = 0, height = 0;

    Vec3 center() const { return -R.transpose() * T; }
};

struct Projection {
    Vec2 pixel;   // perspective-divided image coordinates
    double depth; // camera-space z
};

/// Perspective projection; nullopt when the point is at or behind the camera
/// plane (z <= 0).
std::optional<Projection> project(const Camera& cam, const Vec3& point);

/// Per-pixel camera-space depth; +inf marks empty pixels.
struct DepthMap {
    int width = 0, height = 0;
    std::vector<double> depth;

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h),
          depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
};

/// Depth plus per-pixel winning kernel index (-1 where empty), from the same
/// z-buffer pass. Ties at identical quantized depth go to the lowest index.
struct SplatRaster {
    DepthMap depth;
    std::vector<std::int32_t> winner;

    std::int32_t winner_at(int x, int y) const {
        return winner[static_cast<std::size_t>(y) * depth.width + x];
    }
};

/// Default orbit rig layout: 4 elevation rings of 7 azimuths plus one top
/// view = 29 cameras.
inline const std::vector<double>& default_rig_elevations_deg() {
    static const std::vector<double> e{-10.0, 10.0, 30.0, 50.0};
    return e;
}

/// Cameras on azimuth rings looking at `target` from distance `radius`.
/// Elevations are degrees above the xy-plane; when empty, the default rig is
/// used and n_views == 29 adds the top view. Views are distributed as evenly
/// as possible across rings, equidistant azimuths within each ring.
std::vector<Camera> orbit_rig(int n_views, const Vec3& target, double radius,
                              std::vector<double> elevations_deg = {},
                              int width = 256, int height = 256, double focal = 256.0);

/// Z-buffered splat of kernel centers: each kernel stamps a disk of radius
/// ceil(2*sqrt(max eigenvalue of cov)*fx/depth) pixels at its projected
/// center, keeping the per-pixel minimum depth. Kernels behind the camera or
/// with opacity < opacity_min are skipped. Parallel over kernels; the
/// min-reduction makes the result independent of visitation order.
SplatRaster rasterize_splats(const Camera& cam, const SplatCloud& cloud,
                             const ExecContext& ctx = {}, double opacity_min = 0.02);

DepthMap render_depth(const Camera& cam, const SplatCloud& cloud,
                      const ExecContext& ctx = {}, double opacity_min = 0.02);

/// 16-bit PGM debug export. Finite depths map to raw = round(depth / scale)
/// with scale = max finite depth / 65535 recorded in a "depth-scale" header
/// comment; raw 0 encodes +inf.
void save_depth_pgm(const DepthMap& map, const std::string& path);
DepthMap load_depth_pgm(const std::string& path);

/// One view record of the scene manifest. Image/mask/depth are file paths
/// relative to the manifest; depth may be empty (rendered on demand).
struct ManifestView {
    Camera camera;
    std::string image;
    std::string mask;
    std::string depth;
};

struct SceneManifest {
    std::vector<ManifestView> views;
    std::string input_image;  // reference photograph
    std::string input_labels; // 16-bit label PNG defining material groups
    std::vector<std::string> region_hints; // optional, one per input region
};

SceneManifest load_manifest(const std::string& path);
void save_manifest(const SceneManifest& manifest, const std::string& path);

} // namespace splatsim
