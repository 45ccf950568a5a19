#include "splatsim/synth.hpp"

#include "splatsim/perception.hpp"
#include "splatsim/ply_io.hpp"
#include "splatsim/reasoners.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

namespace splatsim {

namespace {

GaussianKernel make_kernel(const Vec3& pos, double sigma, const Vec3& color,
                           std::uint32_t group) {
    GaussianKernel k;
    k.position = pos;
    k.covariance = sigma * sigma * Mat3::Identity();
    k.color = color;
    k.group_id = group;
    return k;
}

void finish(SynthScene& scene) {
    for (std::size_t g = 0; g < scene.hints.size(); ++g) {
        MaterialProperties p = StaticTableReasoner::lookup(scene.hints[g]);
        p.name = scene.hints[g];
        scene.cloud.materials[static_cast<std::uint32_t>(g + 1)] = p;
    }
}

constexpr double kGoldenAngle = 2.39996322972865332; // pi*(3 - sqrt 5)

} // namespace

SynthScene make_two_hemisphere_sphere() {
    SynthScene scene;
    scene.name = "two_hemisphere_sphere";
    scene.hints = {"rubber", "snow"};
    const std::size_t n = 10000;
    const Vec3 center(0.5, 0.5, 0.5);
    const double radius = 0.35;
    const double sigma = 0.005;    // ~half the neighbor spacing, crisp silhouette
    const double gap_z = 0.05;     // equator clearance so the groups never interleave on screen
    // Fibonacci sphere with the equator band carved out; grow the candidate
    // count until n points survive the rejection.
    std::size_t candidates = static_cast<std::size_t>(std::ceil(n / (1.0 - gap_z))) - 2;
    std::vector<double> zs;
    while (true) {
        zs.clear();
        for (std::size_t i = 0; i < candidates; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / candidates; // [-1, 1]
            if (std::abs(z) >= gap_z) zs.push_back(z);
        }
        if (zs.size() >= n) break; // smallest such count: at most one excess point
        ++candidates;
    }
    zs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = zs[i];
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = static_cast<double>(i) * kGoldenAngle;
        const Vec3 dir(rxy * std::cos(phi), rxy * std::sin(phi), z);
        const std::uint32_t group = z >= 0.0 ? 1 : 2;
        const Vec3 color = group == 1 ? Vec3(0.9, 0.2, 0.15) : Vec3(0.2, 0.4, 0.9);
        scene.cloud.kernels.push_back(make_kernel(center + radius * dir, sigma, color, group));
    }
    finish(scene);
    return scene;
}

SynthScene make_elastic_cube() {
    SynthScene scene;
    scene.name = "elastic_cube";
    scene.hints = {"elastic"};
    const int n = 8;
    const double lo = 0.35, span = 0.3;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                scene.cloud.kernels.push_back(
                    make_kernel(Vec3(lo + span * (i + 0.5) / n, lo + span * (j + 0.5) / n,
                                     lo + span * (k + 0.5) / n),
                                0.02, Vec3(0.2, 0.75, 0.3), 1));
    finish(scene);
    return scene;
}

SynthScene make_sand_pile() {
    SynthScene scene;
    scene.name = "sand_pile";
    scene.hints = {"sand"};
    const Vec3 apex(0.5, 0.5, 0.75);
    const double height = 0.4, base_radius = 0.3;
    const int layers = 24;
    for (int l = 0; l < layers; ++l) {
        const double t = (l + 0.5) / layers;           // 0 apex -> 1 base
        const double z = apex.z() - height * t;
        const double r_layer = base_radius * t;
        const int count = std::max(1, static_cast<int>(std::round(600.0 * t * t)));
        for (int j = 0; j < count; ++j) {
            const double rr = r_layer * std::sqrt((j + 0.5) / count);
            const double phi = j * kGoldenAngle + l; // de-align successive layers
            scene.cloud.kernels.push_back(
                make_kernel(Vec3(0.5 + rr * std::cos(phi), 0.5 + rr * std::sin(phi), z), 0.012,
                            Vec3(0.85, 0.72, 0.45), 1));
        }
    }
    finish(scene);
    return scene;
}

SynthScene make_layered_block() {
    SynthScene scene;
    scene.name = "layered_block";
    scene.hints = {"rubber", "metal"};
    const int n = 12;
    const double lo = 0.3, span = 0.4;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::uint32_t group = k < n / 2 ? 1 : 2;
                const Vec3 color = group == 1 ? Vec3(0.65, 0.15, 0.2) : Vec3(0.6, 0.62, 0.67);
                scene.cloud.kernels.push_back(
                    make_kernel(Vec3(lo + span * (i + 0.5) / n, lo + span * (j + 0.5) / n,
                                     lo + span * (k + 0.5) / n),
                                0.018, color, group));
            }
    finish(scene);
    return scene;
}

const std::vector<std::string>& synth_scene_names() {
    static const std::vector<std::string> names{"two_hemisphere_sphere", "elastic_cube",
                                               "sand_pile", "layered_block"};
    return names;
}

SynthScene make_scene(const std::string& name) {
    if (name == "two_hemisphere_sphere") return make_two_hemisphere_sphere();
    if (name == "elastic_cube") return make_elastic_cube();
    if (name == "sand_pile") return make_sand_pile();
    if (name == "layered_block") return make_layered_block();
    std::string avail;
    for (const auto& n : synth_scene_names()) avail += (avail.empty() ? "" : ", ") + n;
    throw ContractError("unknown synthetic scene '" + name + "' (available: " + avail + ")");
}

namespace {

struct RenderedView {
    ImageRgb8 image;
    ImageGray16 mask; // group ids (permuted per view for the manifest masks)
    DepthMap depth;
};

RenderedView render_view(const Camera& cam, const SplatCloud& cloud, const ExecContext& exec) {
    const SplatRaster raster = rasterize_splats(cam, cloud, exec);
    RenderedView out;
    out.image = ImageRgb8(cam.width, cam.height);
    out.mask = ImageGray16(cam.width, cam.height);
    out.depth = raster.depth;
    for (std::size_t i = 0; i < raster.winner.size(); ++i) {
        const std::int32_t w = raster.winner[i];
        if (w < 0) continue;
        const GaussianKernel& k = cloud.kernels[static_cast<std::size_t>(w)];
        for (int c = 0; c < 3; ++c)
            out.image.data[3 * i + c] =
                static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(k.color[c], 0.0, 1.0)));
        out.mask.data[i] = static_cast<std::uint16_t>(k.group_id);
    }
    return out;
}

} // namespace

std::string write_scene_bundle(const SynthScene& scene, const std::string& dir, int n_views,
                               const ExecContext& exec) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "views");

    save_frame(scene.cloud, (fs::path(dir) / "cloud.ply").string());
    save_labeled_cloud(scene.cloud, (fs::path(dir) / "truth.json").string());

    Vec3 lo = scene.cloud.kernels.front().position, hi = lo;
    for (const auto& k : scene.cloud.kernels) {
        lo = lo.cwiseMin(k.position);
        hi = hi.cwiseMax(k.position);
    }
    const Vec3 center = 0.5 * (lo + hi);
    const double radius = 2.5 * std::max(0.15, (hi - lo).maxCoeff() * 0.5);

    const std::uint16_t groups = static_cast<std::uint16_t>(scene.hints.size());
    SceneManifest manifest;
    manifest.region_hints = scene.hints;

    // Reference view: true group ids as labels.
    const Camera input_cam = orbit_rig(1, center, radius, {20.0})[0];
    const RenderedView input = render_view(input_cam, scene.cloud, exec);
    save_png(input.image, (fs::path(dir) / "input.png").string());
    save_png(input.mask, (fs::path(dir) / "input_labels.png").string());
    manifest.input_image = "input.png";
    manifest.input_labels = "input_labels.png";

    const std::vector<Camera> rig = orbit_rig(n_views, center, radius);
    for (std::size_t v = 0; v < rig.size(); ++v) {
        RenderedView view = render_view(rig[v], scene.cloud, exec);
        // Rotate region indices per view so segmentation alignment has real
        // work to do; the images keep the true colors.
        for (auto& l : view.mask.data)
            if (l != 0) l = static_cast<std::uint16_t>((l - 1 + v) % groups + 1);

        char base[32];
        std::snprintf(base, sizeof base, "views/view_%03zu", v);
        ManifestView mv;
        mv.camera = rig[v];
        mv.image = std::string(base) + ".png";
        mv.mask = std::string(base) + "_mask.png";
        mv.depth = std::string(base) + "_depth.pgm";
        save_png(view.image, (fs::path(dir) / mv.image).string());
        save_png(view.mask, (fs::path(dir) / mv.mask).string());
        save_depth_pgm(view.depth, (fs::path(dir) / mv.depth).string());
        manifest.views.push_back(std::move(mv));
    }

    const std::string manifest_path = (fs::path(dir) / "scene.json").string();
    save_manifest(manifest, manifest_path);
    return manifest_path;
}

} // namespace splatsim
