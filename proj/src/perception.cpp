#include "splatsim/perception.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace splatsim {

using nlohmann::json;

void SegmentationMap::validate() const {
    if (labels.size() != static_cast<std::size_t>(width) * height)
        throw ContractError("SegmentationMap: label buffer does not match resolution");
    std::vector<bool> seen(static_cast<std::size_t>(region_count) + 1, false);
    for (std::uint16_t l : labels) {
        if (l > region_count)
            throw ContractError("SegmentationMap: label " + std::to_string(l) +
                                " exceeds region_count " + std::to_string(region_count));
        seen[l] = true;
    }
    for (std::uint16_t r = 1; r <= region_count; ++r)
        if (!seen[r])
            throw ContractError("SegmentationMap: region " + std::to_string(r) + " has no pixels");
}

SegmentationMap segmentation_from_image(const ImageGray16& img) {
    SegmentationMap map(img.width, img.height);
    std::uint16_t max_label = 0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        map.labels[i] = img.data[i];
        max_label = std::max(max_label, img.data[i]);
    }
    map.region_count = max_label;
    map.validate();
    return map;
}

double FeatureVector::dot(const FeatureVector& o) const {
    if (values.size() != o.values.size())
        throw ContractError("FeatureVector: dimension mismatch in dot product");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * o.values[i];
    return s;
}

void FeatureVector::normalize() {
    double s = 0.0;
    for (double v : values) s += v * v;
    if (!(s > 0.0) || !std::isfinite(s))
        throw ContractError("FeatureVector: cannot normalize zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : values) v *= inv;
}

FeatureVector embed_region(const ImageRgb8& image, const SegmentationMap& map, int region,
                           const EmbeddingProvider& provider) {
    if (region < 1 || region > map.region_count)
        throw ContractError("embed_region: region " + std::to_string(region) + " out of range");
    if (image.width != map.width || image.height != map.height)
        throw ContractError("embed_region: image and segmentation resolutions differ");

    ImageRgb8 masked(image.width, image.height);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(image.width) * image.height, 0);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (map.labels[i] != region) continue;
        mask[i] = 1;
        ++covered;
        for (int c = 0; c < 3; ++c) masked.data[3 * i + c] = image.data[3 * i + c];
    }
    if (covered == 0)
        throw ContractError("embed_region: region " + std::to_string(region) + " is empty");

    FeatureVector out = provider.embed(masked, mask);
    if (out.dimension() != provider.dimension())
        throw ContractError("embed_region: provider returned wrong dimension");
    out.normalize();
    return out;
}

std::vector<std::uint32_t> align_segmentation(const std::vector<FeatureVector>& ref_embeds,
                                              const std::vector<FeatureVector>& view_embeds) {
    if (ref_embeds.empty()) throw ContractError("align_segmentation: no reference groups");
    std::vector<std::uint32_t> mapping;
    mapping.reserve(view_embeds.size());
    for (const FeatureVector& v : view_embeds) {
        std::uint32_t best = 1;
        double best_sim = v.dot(ref_embeds[0]);
        for (std::size_t m = 1; m < ref_embeds.size(); ++m) {
            const double sim = v.dot(ref_embeds[m]);
            if (sim > best_sim) { // ties keep the lower group
                best_sim = sim;
                best = static_cast<std::uint32_t>(m + 1);
            }
        }
        mapping.push_back(best);
    }
    return mapping;
}

namespace {

/// Group with the highest count; ties go to `own` when it participates,
/// otherwise to the lowest group index.
std::uint32_t majority(const std::vector<std::pair<std::uint32_t, int>>& votes,
                       std::uint32_t own = kNoGroup) {
    int best_count = 0;
    for (const auto& [g, c] : votes) best_count = std::max(best_count, c);
    std::uint32_t winner = kNoGroup;
    for (const auto& [g, c] : votes) {
        if (c != best_count) continue;
        if (g == own) return own;
        if (winner == kNoGroup || g < winner) winner = g;
    }
    return winner;
}

void bump(std::vector<std::pair<std::uint32_t, int>>& votes, std::uint32_t group) {
    for (auto& [g, c] : votes)
        if (g == group) {
            ++c;
            return;
        }
    votes.emplace_back(group, 1);
}

} // namespace

void assign_groups(SplatCloud& cloud, const std::vector<PerceptionView>& views,
                   double occlusion_threshold, const ExecContext& exec) {
    if (!(occlusion_threshold > 0))
        throw ContractError("assign_groups: occlusion threshold must be > 0");
    for (const auto& v : views)
        if (v.labels.width != v.depth.width || v.labels.height != v.depth.height)
            throw ContractError("assign_groups: view label/depth resolutions differ");

    exec.parallel_for(cloud.count(), [&](std::size_t i) {
        std::vector<std::pair<std::uint32_t, int>> votes;
        for (const auto& view : views) {
            const auto proj = project(view.camera, cloud.kernels[i].position);
            if (!proj) continue;
            const int px = static_cast<int>(std::llround(proj->pixel.x()));
            const int py = static_cast<int>(std::llround(proj->pixel.y()));
            if (px < 0 || px >= view.labels.width || py < 0 || py >= view.labels.height) continue;
            const std::uint16_t label = view.labels.at(px, py);
            if (label == 0) continue;
            if (!(std::abs(proj->depth - view.depth.at(px, py)) < occlusion_threshold)) continue;
            bump(votes, label);
        }
        cloud.kernels[i].group_id = votes.empty() ? kNoGroup : majority(votes);
    });
}

void fill_occluded(SplatCloud& cloud) {
    std::vector<std::uint8_t> labeled(cloud.count(), 0);
    std::size_t labeled_count = 0;
    for (std::size_t i = 0; i < cloud.count(); ++i)
        if (cloud.kernels[i].group_id != kNoGroup) {
            labeled[i] = 1;
            ++labeled_count;
        }
    if (labeled_count == 0)
        throw ContractError("fill_occluded: no labeled kernels to copy groups from");
    if (labeled_count == cloud.count()) return;

    std::vector<Vec3> positions(cloud.count());
    for (std::size_t i = 0; i < cloud.count(); ++i) positions[i] = cloud.kernels[i].position;
    const SpatialHashKnn knn(std::move(positions));

    std::vector<std::uint32_t> groups(cloud.count());
    for (std::size_t i = 0; i < cloud.count(); ++i) {
        groups[i] = cloud.kernels[i].group_id;
        if (labeled[i]) continue;
        const auto near = knn.nearest_eligible(cloud.kernels[i].position, labeled);
        groups[i] = cloud.kernels[*near].group_id; // labeled_count > 0 guarantees a hit
    }
    for (std::size_t i = 0; i < cloud.count(); ++i) cloud.kernels[i].group_id = groups[i];
}

void smooth_labels(SplatCloud& cloud, std::size_t k, const ExecContext& exec) {
    if (k < 1) throw ContractError("smooth_labels: k must be >= 1");
    for (std::size_t i = 0; i < cloud.count(); ++i)
        if (cloud.kernels[i].group_id == kNoGroup)
            throw ContractError("smooth_labels: kernel " + std::to_string(i) + " is unlabeled");
    if (cloud.count() == 0) return;
    k = std::min(k, cloud.count());

    std::vector<Vec3> positions(cloud.count());
    for (std::size_t i = 0; i < cloud.count(); ++i) positions[i] = cloud.kernels[i].position;
    const SpatialHashKnn knn(std::move(positions));

    std::vector<std::uint32_t> smoothed(cloud.count());
    exec.parallel_for(cloud.count(), [&](std::size_t i) {
        std::vector<std::pair<std::uint32_t, int>> votes;
        for (std::uint32_t n : knn.nearest(static_cast<std::uint32_t>(i), k))
            bump(votes, cloud.kernels[n].group_id);
        smoothed[i] = majority(votes, cloud.kernels[i].group_id);
    });
    for (std::size_t i = 0; i < cloud.count(); ++i) cloud.kernels[i].group_id = smoothed[i];
}

std::vector<MaterialProperties> reason_materials(const ImageRgb8& full_image,
                                                 const SegmentationMap& map,
                                                 MaterialReasoner& reasoner,
                                                 const std::vector<std::string>& hints) {
    map.validate();
    if (map.region_count < 1) throw ContractError("reason_materials: no regions to reason about");
    if (full_image.width != map.width || full_image.height != map.height)
        throw ContractError("reason_materials: image and segmentation resolutions differ");

    std::vector<ImageRgb8> subs;
    subs.reserve(map.region_count);
    for (int r = 1; r <= map.region_count; ++r) {
        ImageRgb8 sub(map.width, map.height);
        for (std::size_t i = 0; i < map.labels.size(); ++i)
            if (map.labels[i] == r)
                for (int c = 0; c < 3; ++c) sub.data[3 * i + c] = full_image.data[3 * i + c];
        subs.push_back(std::move(sub));
    }
    std::vector<std::string> padded = hints;
    padded.resize(map.region_count);

    std::vector<MaterialProperties> props = reasoner.reason(full_image, subs, padded);
    if (props.size() != static_cast<std::size_t>(map.region_count))
        throw ContractError("reason_materials: reasoner returned " + std::to_string(props.size()) +
                            " entries for " + std::to_string(map.region_count) + " regions");
    for (auto& p : props) p = clamp_properties(p);
    return props;
}

PerceptionStats run_perception(SplatCloud& cloud, const SceneManifest& manifest,
                               const std::string& manifest_dir,
                               const EmbeddingProvider& embedder, MaterialReasoner& reasoner,
                               const PerceptionParams& params, const ExecContext& exec) {
    namespace fs = std::filesystem;
    const auto resolve = [&](const std::string& rel) {
        const fs::path p(rel);
        return p.is_absolute() ? p.string() : (fs::path(manifest_dir) / p).string();
    };

    if (manifest.input_image.empty() || manifest.input_labels.empty())
        throw ContractError("run_perception: manifest lacks input image or labels");
    const ImageRgb8 input = load_png_rgb8(resolve(manifest.input_image));
    const SegmentationMap input_map =
        segmentation_from_image(load_png_gray16(resolve(manifest.input_labels)));
    if (input_map.region_count < 1)
        throw ContractError("run_perception: input segmentation has no regions");

    std::vector<FeatureVector> ref;
    ref.reserve(input_map.region_count);
    for (int m = 1; m <= input_map.region_count; ++m)
        ref.push_back(embed_region(input, input_map, m, embedder));

    std::vector<PerceptionView> views;
    views.reserve(manifest.views.size());
    for (const auto& mv : manifest.views) {
        if (mv.image.empty() || mv.mask.empty())
            throw ContractError("run_perception: view lacks image or mask path");
        PerceptionView view;
        view.camera = mv.camera;
        const ImageRgb8 img = load_png_rgb8(resolve(mv.image));
        SegmentationMap seg = segmentation_from_image(load_png_gray16(resolve(mv.mask)));

        std::vector<FeatureVector> region_embeds;
        region_embeds.reserve(seg.region_count);
        for (int r = 1; r <= seg.region_count; ++r)
            region_embeds.push_back(embed_region(img, seg, r, embedder));
        const std::vector<std::uint32_t> to_group = align_segmentation(ref, region_embeds);
        for (auto& l : seg.labels)
            if (l != 0) l = static_cast<std::uint16_t>(to_group[l - 1]);
        seg.region_count = input_map.region_count;
        view.labels = std::move(seg);

        view.depth = mv.depth.empty() ? render_depth(view.camera, cloud, exec, params.min_opacity)
                                      : load_depth_pgm(resolve(mv.depth));
        views.push_back(std::move(view));
    }

    PerceptionStats stats;
    assign_groups(cloud, views, params.occlusion_threshold, exec);
    for (const auto& k : cloud.kernels)
        if (k.group_id != kNoGroup) ++stats.visible;

    if (stats.visible < cloud.count()) fill_occluded(cloud);
    stats.filled = cloud.count() - stats.visible;

    std::vector<std::uint32_t> before(cloud.count());
    for (std::size_t i = 0; i < cloud.count(); ++i) before[i] = cloud.kernels[i].group_id;
    smooth_labels(cloud, params.smooth_k, exec);
    for (std::size_t i = 0; i < cloud.count(); ++i)
        if (before[i] != cloud.kernels[i].group_id) ++stats.smoothed;

    const std::vector<MaterialProperties> props =
        reason_materials(input, input_map, reasoner, manifest.region_hints);
    cloud.materials.clear();
    for (std::size_t m = 0; m < props.size(); ++m)
        cloud.materials[static_cast<std::uint32_t>(m + 1)] = props[m];
    return stats;
}

namespace {

json props_to_json(std::uint32_t group, const MaterialProperties& p) {
    json j;
    j["group_id"] = group;
    j["material_type"] = to_string(p.material_type);
    j["name"] = p.name;
    j["density"] = p.density;
    j["youngs_modulus"] = p.youngs_modulus;
    j["poissons_ratio"] = p.poissons_ratio;
    j["snow_theta_c"] = p.snow_theta_c;
    j["snow_theta_s"] = p.snow_theta_s;
    j["snow_hardening"] = p.snow_hardening;
    j["sand_friction_deg"] = p.sand_friction_deg;
    return j;
}

MaterialProperties props_from_json(const json& j) {
    MaterialProperties p;
    p.material_type = material_type_from_string(j.at("material_type"));
    p.name = j.value("name", std::string{});
    p.density = j.at("density");
    p.youngs_modulus = j.at("youngs_modulus");
    p.poissons_ratio = j.at("poissons_ratio");
    p.snow_theta_c = j.value("snow_theta_c", p.snow_theta_c);
    p.snow_theta_s = j.value("snow_theta_s", p.snow_theta_s);
    p.snow_hardening = j.value("snow_hardening", p.snow_hardening);
    p.sand_friction_deg = j.value("sand_friction_deg", p.sand_friction_deg);
    return p;
}

} // namespace

void save_labeled_cloud(const SplatCloud& cloud, const std::string& json_path) {
    namespace fs = std::filesystem;
    const fs::path jp(json_path);
    fs::path bin = jp;
    bin.replace_extension(".groups");

    {
        std::ofstream out(bin, std::ios::binary);
        if (!out) throw IoError("cannot write group file: " + bin.string());
        for (const auto& k : cloud.kernels) {
            const std::uint32_t g = k.group_id;
            const unsigned char bytes[4] = {
                static_cast<unsigned char>(g & 0xff), static_cast<unsigned char>((g >> 8) & 0xff),
                static_cast<unsigned char>((g >> 16) & 0xff),
                static_cast<unsigned char>((g >> 24) & 0xff)};
            out.write(reinterpret_cast<const char*>(bytes), 4);
        }
    }

    json j;
    j["kernel_count"] = cloud.count();
    j["groups_file"] = bin.filename().string();
    j["materials"] = json::array();
    for (const auto& [group, props] : cloud.materials)
        j["materials"].push_back(props_to_json(group, props));

    std::ofstream out(jp);
    if (!out) throw IoError("cannot write label sidecar: " + json_path);
    out << j.dump(2) << "\n";
}

void load_labeled_cloud(SplatCloud& cloud, const std::string& json_path) {
    namespace fs = std::filesystem;
    std::ifstream in(json_path);
    if (!in) throw ParseError("cannot open label sidecar: " + json_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("label sidecar JSON parse error in " + json_path + ": " + e.what());
    }

    const std::size_t count = j.at("kernel_count");
    if (count != cloud.count())
        throw ContractError("label sidecar covers " + std::to_string(count) + " kernels, cloud has " +
                            std::to_string(cloud.count()));

    const fs::path bin = fs::path(json_path).parent_path() / j.at("groups_file").get<std::string>();
    std::ifstream gin(bin, std::ios::binary);
    if (!gin) throw ParseError("cannot open group file: " + bin.string());
    std::vector<unsigned char> bytes(4 * count);
    gin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (gin.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw ParseError("group file truncated: " + bin.string());

    for (std::size_t i = 0; i < count; ++i)
        cloud.kernels[i].group_id = static_cast<std::uint32_t>(bytes[4 * i]) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);

    cloud.materials.clear();
    for (const auto& jm : j.at("materials"))
        cloud.materials[jm.at("group_id").get<std::uint32_t>()] = props_from_json(jm);
}

} // namespace splatsim
