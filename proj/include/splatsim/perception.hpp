#pragma once

#include "splatsim/camera.hpp"
#include "splatsim/image.hpp"
#include "splatsim/knn.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/splat_cloud.hpp"
#include "splatsim/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splatsim {

/// Per-pixel region labels, 0 = background. Regions are 1..region_count and
/// every region owns at least one pixel (validate()).
struct SegmentationMap {
    int width = 0, height = 0;
    std::vector<std::uint16_t> labels;
    std::uint16_t region_count = 0;

    SegmentationMap() = default;
    SegmentationMap(int w, int h, std::uint16_t regions = 0)
        : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0), region_count(regions) {}

    std::uint16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

    void validate() const; // throws ContractError on label > region_count or empty region
};

/// Label image -> map; region_count = max label present.
SegmentationMap segmentation_from_image(const ImageGray16& img);

/// Finite real vector; unit L2 norm after normalize().
struct FeatureVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    double dot(const FeatureVector& o) const;
    void normalize(); // throws ContractError on zero/non-finite norm
};

/// Image-region embedding backend. `masked` has out-of-region pixels blacked
/// out; `mask` flags in-region pixels (nonzero), size width*height.
/// Implementations must be deterministic for identical inputs.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual FeatureVector embed(const ImageRgb8& masked,
                                const std::vector<std::uint8_t>& mask) const = 0;
};

/// Material-properties backend: one result per sub-image, in order.
/// `hints` (optional, parallel to sub_images) carry free-text region
/// descriptions when the manifest provides them.
class MaterialReasoner {
public:
    virtual ~MaterialReasoner() = default;
    virtual std::vector<MaterialProperties> reason(const ImageRgb8& full_image,
                                                   const std::vector<ImageRgb8>& sub_images,
                                                   const std::vector<std::string>& hints) = 0;
};

/// Provider applied to the image masked to one region (outside pixels black),
/// output L2-normalized.
FeatureVector embed_region(const ImageRgb8& image, const SegmentationMap& map, int region,
                           const EmbeddingProvider& provider);

/// Per-region group assignment by cosine argmax: out[k-1] is the group for
/// view region k, ties to the lowest group index. Throws when ref is empty or
/// dimensions mismatch.
std::vector<std::uint32_t> align_segmentation(const std::vector<FeatureVector>& ref_embeds,
                                              const std::vector<FeatureVector>& view_embeds);

/// One aligned view: pixel labels are *group* ids after align_segmentation.
struct PerceptionView {
    Camera camera;
    SegmentationMap labels;
    DepthMap depth;
};

/// Majority group over views where the kernel is visible: projected pixel in
/// bounds, |projected depth - depth map| < occlusion_threshold, and label
/// != 0. Ties to the lowest group; kernels visible nowhere get kNoGroup.
void assign_groups(SplatCloud& cloud, const std::vector<PerceptionView>& views,
                   double occlusion_threshold = 0.1, const ExecContext& exec = {});

/// Every unlabeled kernel takes the group of its nearest labeled kernel
/// (ties to the lowest kernel index). Throws when nothing is labeled.
void fill_occluded(SplatCloud& cloud);

/// Majority group among each kernel's k nearest neighbors (itself included),
/// one synchronous pass; ties keep the current group. k clamped to the cloud
/// size; requires every kernel labeled.
void smooth_labels(SplatCloud& cloud, std::size_t k = 300, const ExecContext& exec = {});

/// Sub-images per region -> reasoner -> clamp_properties. Result is indexed
/// by region (group) order 1..M.
std::vector<MaterialProperties> reason_materials(const ImageRgb8& full_image,
                                                 const SegmentationMap& map,
                                                 MaterialReasoner& reasoner,
                                                 const std::vector<std::string>& hints = {});

struct PerceptionParams {
    double occlusion_threshold = 0.1; // world/domain units
    std::size_t smooth_k = 300;
    double min_opacity = 0.02; // depth-render floater cutoff
};

struct PerceptionStats {
    std::size_t visible = 0;  // kernels labeled by voting
    std::size_t filled = 0;   // kernels labeled by nearest-neighbor fill
    std::size_t smoothed = 0; // kernels changed by smoothing
};

/// Full pipeline over a scene manifest: reference embeddings from the input
/// image/labels, per-view alignment, voting, fill, smooth, and material
/// reasoning into cloud.materials. Paths in the manifest resolve relative to
/// `manifest_dir`. Views without a depth path get depths rendered from the
/// cloud.
PerceptionStats run_perception(SplatCloud& cloud, const SceneManifest& manifest,
                               const std::string& manifest_dir,
                               const EmbeddingProvider& embedder, MaterialReasoner& reasoner,
                               const PerceptionParams& params = {},
                               const ExecContext& exec = {});

/// Labeled-cloud sidecar: JSON descriptor plus a raw little-endian u32 group
/// array (one per kernel) in an adjacent file.
void save_labeled_cloud(const SplatCloud& cloud, const std::string& json_path);
void load_labeled_cloud(SplatCloud& cloud, const std::string& json_path);

} // namespace splatsim
