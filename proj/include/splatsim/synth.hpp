#pragma once

#include "splatsim/camera.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/splat_cloud.hpp"

#include <string>
#include <vector>

namespace splatsim {

/// Deterministic synthetic test scene: a labeled cloud (ground-truth groups
/// and materials already set) plus per-group hint strings for the reasoner.
struct SynthScene {
    std::string name;
    SplatCloud cloud;
    std::vector<std::string> hints; // one per group, 1-based order
};

/// 10k kernels on a Fibonacci sphere, upper/lower hemisphere groups.
SynthScene make_two_hemisphere_sphere();
/// 8x8x8 lattice cube, single elastic group.
SynthScene make_elastic_cube();
/// Cone of sand-labeled kernels.
SynthScene make_sand_pile();
/// Two-layer block: soft lower half, stiff upper half.
SynthScene make_layered_block();

const std::vector<std::string>& synth_scene_names();
/// Dispatch by name; unknown names raise ContractError listing the options.
SynthScene make_scene(const std::string& name);

/// Writes the full bundle into dir: cloud.ply, truth.json/.groups sidecar,
/// input.png + input_labels.png, per-view renders (views/view_NNN.png, _mask
/// .png, _depth.pgm) and scene.json manifest. View masks use per-view
/// permuted region indices so alignment is exercised; the input labels carry
/// the true group ids. Returns the manifest path.
std::string write_scene_bundle(const SynthScene& scene, const std::string& dir, int n_views = 29,
                               const ExecContext& exec = {});

} // namespace splatsim
