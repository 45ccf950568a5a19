#pragma once

#include "splatsim/config.hpp"
#include "splatsim/mpm.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/splat_cloud.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace splatsim {

/// Deformed covariance F Σ Fᵀ with F the total deformation gradient from
/// rest and Σ the rest covariance; the product is numerically symmetrized.
Mat3 update_covariance(const Mat3& sigma, const Mat3& F);

/// One simulation output: frames in input-cloud world coordinates.
struct FrameSequence {
    std::vector<SplatCloud> frames;
    double frame_rate = 0.0; // Hz; frame_rate * substeps_per_frame * dt == 1
    int substeps_per_frame = 0;
    double dt = 0.0;
};

struct RunReport {
    bool completed = false;
    std::string failure;          // populated when a run aborts
    int frames_written = 0;
    double simulated_seconds = 0.0;
    double wall_seconds = 0.0;
    std::map<std::string, double> stage_seconds; // init / substeps / export
    MpmDiagnostics diagnostics;
    std::uint64_t covariance_clamps = 0; // negative eigenvalues zeroed on export
};

/// Runs the configured simulation over a labeled world-space cloud and hands
/// every assembled frame (frame 0 = input echo) to `sink` in order. Material
/// overrides from the config are applied to a working copy first. A
/// non-finite state aborts the run after the last good frame: the report
/// comes back completed=false with the failure message, frames already
/// emitted stay valid.
RunReport run_simulation(const SplatCloud& cloud, const SimulationConfig& config,
                         const ExecContext& exec,
                         const std::function<void(int, const SplatCloud&)>& sink);

/// run_simulation collecting frames in memory.
FrameSequence simulate(const SplatCloud& cloud, const SimulationConfig& config,
                       const ExecContext& exec = {}, RunReport* report = nullptr);

/// run_simulation writing frame_%04d.ply files plus run_report.json into
/// out_dir (created if needed).
RunReport simulate_to_directory(const SplatCloud& cloud, const SimulationConfig& config,
                                const std::string& out_dir, const ExecContext& exec = {});

/// Report serialization used by run_report.json and the CLI.
std::string report_to_json(const RunReport& report, const SimulationConfig& config);

} // namespace splatsim
