#include "splatsim/camera.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace splatsim {

using nlohmann::json;

std::optional<Projection> project(const Camera& cam, const Vec3& point) {
    const Vec3 pc = cam.R * point + cam.T;
    if (!(pc.z() > 0.0)) return std::nullopt;
    return Projection{Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy),
                      pc.z()};
}

namespace {

Camera look_at(const Vec3& center, const Vec3& target, int width, int height, double focal) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;

    const Vec3 fwd = (target - center).normalized();
    Vec3 up(0, 0, 1);
    if (std::abs(fwd.dot(up)) > 1.0 - 1e-9) up = Vec3(0, 1, 0); // straight up/down view
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right);
    cam.R.row(0) = right;
    cam.R.row(1) = down;
    cam.R.row(2) = fwd;
    cam.T = -cam.R * center;
    return cam;
}

} // namespace

std::vector<Camera> orbit_rig(int n_views, const Vec3& target, double radius,
                              std::vector<double> elevations_deg, int width, int height,
                              double focal) {
    if (n_views < 1) throw ContractError("orbit_rig: n_views must be >= 1");
    if (!(radius > 0)) throw ContractError("orbit_rig: radius must be > 0");

    bool with_top = false;
    if (elevations_deg.empty()) {
        elevations_deg = default_rig_elevations_deg();
        with_top = n_views == 1 + 7 * static_cast<int>(elevations_deg.size());
    }

    std::vector<Camera> cams;
    cams.reserve(static_cast<std::size_t>(n_views));
    const int ring_total = with_top ? n_views - 1 : n_views;
    const int rings = static_cast<int>(elevations_deg.size());
    int assigned = 0;
    for (int r = 0; r < rings && assigned < ring_total; ++r) {
        int count = ring_total / rings + (r < ring_total % rings ? 1 : 0);
        count = std::min(count, ring_total - assigned);
        const double elev = elevations_deg[r] * std::numbers::pi / 180.0;
        for (int j = 0; j < count; ++j) {
            const double az = 2.0 * std::numbers::pi * j / count;
            const Vec3 dir(std::cos(az) * std::cos(elev), std::sin(az) * std::cos(elev),
                           std::sin(elev));
            cams.push_back(look_at(target + radius * dir, target, width, height, focal));
        }
        assigned += count;
    }
    if (with_top)
        cams.push_back(look_at(target + radius * Vec3(0, 0, 1), target, width, height, focal));
    return cams;
}

namespace {

// Pixel z-buffer entry packed for a single atomic min: high 32 bits are the
// depth as a round-down float32, low 32 bits the kernel index. Lower key wins,
// so equal quantized depths resolve to the lowest index.
constexpr std::uint64_t kEmptyKey = ~std::uint64_t{0};

std::uint64_t encode_key(double depth, std::uint32_t index) {
    float f = static_cast<float>(depth);
    if (static_cast<double>(f) > depth) f = std::nextafterf(f, 0.0f);
    return (static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(f)) << 32) | index;
}

void atomic_min_u64(std::uint64_t& slot, std::uint64_t value) {
    std::atomic_ref<std::uint64_t> ref(slot);
    std::uint64_t cur = ref.load(std::memory_order_relaxed);
    while (value < cur &&
           !ref.compare_exchange_weak(cur, value, std::memory_order_relaxed)) {
    }
}

} // namespace

SplatRaster rasterize_splats(const Camera& cam, const SplatCloud& cloud, const ExecContext& ctx,
                             double opacity_min) {
    const int W = cam.width, H = cam.height;
    const std::size_t npx = static_cast<std::size_t>(W) * H;
    std::vector<std::uint64_t> keys(npx, kEmptyKey);
    std::vector<double> depths(cloud.count());

    ctx.parallel_ranges(cloud.count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            const auto& k = cloud.kernels[p];
            depths[p] = -1.0;
            if (k.opacity < opacity_min) continue;
            const auto proj = project(cam, k.position);
            if (!proj) continue;
            depths[p] = proj->depth;
            const int px = static_cast<int>(std::llround(proj->pixel.x()));
            const int py = static_cast<int>(std::llround(proj->pixel.y()));
            // 2-sigma footprint in pixels
            Eigen::SelfAdjointEigenSolver<Mat3> eig;
            eig.compute(k.covariance, Eigen::EigenvaluesOnly);
            const double sigma_max = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
            const int r = static_cast<int>(std::ceil(2.0 * sigma_max * cam.fx / proj->depth));
            const std::uint64_t key = encode_key(proj->depth, static_cast<std::uint32_t>(p));
            const long long r2 = static_cast<long long>(r) * r;
            for (int dy = -r; dy <= r; ++dy) {
                const int y = py + dy;
                if (y < 0 || y >= H) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int x = px + dx;
                    if (x < 0 || x >= W) continue;
                    if (static_cast<long long>(dx) * dx + static_cast<long long>(dy) * dy > r2)
                        continue;
                    atomic_min_u64(keys[static_cast<std::size_t>(y) * W + x], key);
                }
            }
        }
    });

    SplatRaster out;
    out.depth = DepthMap(W, H);
    out.winner.assign(npx, -1);
    ctx.parallel_ranges(npx, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            if (keys[i] == kEmptyKey) continue;
            const auto idx = static_cast<std::uint32_t>(keys[i] & 0xffffffffu);
            out.winner[i] = static_cast<std::int32_t>(idx);
            out.depth.depth[i] = depths[idx]; // exact double depth of the winner
        }
    });
    return out;
}

DepthMap render_depth(const Camera& cam, const SplatCloud& cloud, const ExecContext& ctx,
                      double opacity_min) {
    return rasterize_splats(cam, cloud, ctx, opacity_min).depth;
}

void save_depth_pgm(const DepthMap& map, const std::string& path) {
    double dmax = 0.0;
    for (double d : map.depth)
        if (std::isfinite(d)) dmax = std::max(dmax, d);
    const double scale = dmax > 0 ? dmax / 65535.0 : 1.0;

    ImageGray16 img(map.width, map.height);
    for (std::size_t i = 0; i < map.depth.size(); ++i) {
        const double d = map.depth[i];
        if (!std::isfinite(d)) {
            img.data[i] = 0;
        } else {
            const long long raw = std::llround(d / scale);
            img.data[i] = static_cast<std::uint16_t>(std::clamp<long long>(raw, 1, 65535));
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " depth-scale %.17g", scale);
    save_pgm16(img, path, {buf});
}

DepthMap load_depth_pgm(const std::string& path) {
    std::vector<std::string> comments;
    const ImageGray16 img = load_pgm16(path, &comments);
    double scale = -1.0;
    for (const auto& c : comments) {
        std::istringstream ss(c);
        std::string key;
        ss >> key;
        if (key == "depth-scale") ss >> scale;
    }
    if (!(scale > 0)) throw ParseError("depth PGM missing depth-scale comment: " + path);

    DepthMap map(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        if (img.data[i] != 0) map.depth[i] = img.data[i] * scale;
    return map;
}

namespace {

json camera_to_json(const Camera& c) {
    json j;
    j["K"] = {c.fx, c.fy, c.cx, c.cy};
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[3 * i + k] = c.R(i, k);
    j["R"] = r;
    j["T"] = {c.T.x(), c.T.y(), c.T.z()};
    j["width"] = c.width;
    j["height"] = c.height;
    return j;
}

Camera camera_from_json(const json& j) {
    Camera c;
    const auto& K = j.at("K");
    if (K.size() != 4) throw ParseError("manifest: K must have 4 entries [fx,fy,cx,cy]");
    c.fx = K[0];
    c.fy = K[1];
    c.cx = K[2];
    c.cy = K[3];
    const auto& R = j.at("R");
    if (R.size() != 9) throw ParseError("manifest: R must have 9 row-major entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c.R(i, k) = R[3 * i + k];
    const auto& T = j.at("T");
    if (T.size() != 3) throw ParseError("manifest: T must have 3 entries");
    for (int i = 0; i < 3; ++i) c.T[i] = T[i];
    c.width = j.at("width");
    c.height = j.at("height");
    if (!(c.fx > 0) || !(c.fy > 0)) throw ParseError("manifest: fx, fy must be > 0");
    if ((c.R.transpose() * c.R - Mat3::Identity()).norm() > 1e-6)
        throw ParseError("manifest: R is not orthonormal");
    return c;
}

} // namespace

SceneManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("manifest JSON parse error in " + path + ": " + e.what());
    }
    SceneManifest m;
    for (const auto& v : j.at("views")) {
        ManifestView mv;
        mv.camera = camera_from_json(v);
        mv.image = v.value("image", "");
        mv.mask = v.value("mask", "");
        mv.depth = v.value("depth", "");
        m.views.push_back(std::move(mv));
    }
    if (j.contains("input")) {
        const auto& in_block = j["input"];
        m.input_image = in_block.value("image", "");
        m.input_labels = in_block.value("labels", "");
        if (in_block.contains("region_hints"))
            m.region_hints = in_block["region_hints"].get<std::vector<std::string>>();
    }
    return m;
}

void save_manifest(const SceneManifest& manifest, const std::string& path) {
    json j;
    j["views"] = json::array();
    for (const auto& v : manifest.views) {
        json jv = camera_to_json(v.camera);
        if (!v.image.empty()) jv["image"] = v.image;
        if (!v.mask.empty()) jv["mask"] = v.mask;
        if (!v.depth.empty()) jv["depth"] = v.depth;
        j["views"].push_back(std::move(jv));
    }
    if (!manifest.input_image.empty() || !manifest.input_labels.empty()) {
        j["input"]["image"] = manifest.input_image;
        j["input"]["labels"] = manifest.input_labels;
        if (!manifest.region_hints.empty()) j["input"]["region_hints"] = manifest.region_hints;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

} // namespace splatsim
