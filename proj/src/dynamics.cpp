#include "splatsim/dynamics.hpp"

#include "splatsim/log.hpp"
#include "splatsim/ply_io.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace splatsim {

using nlohmann::json;

Mat3 update_covariance(const Mat3& sigma, const Mat3& F) {
    const Mat3 out = F * sigma * F.transpose();
    return 0.5 * (out + out.transpose());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Frame assembly: domain positions back to world, total-F covariances
/// against the rest covariance, everything else copied bit-identically from
/// the input kernels.
SplatCloud assemble_frame(const SplatCloud& input, const MaterialTable& materials,
                          const MpmParticles& particles, const DomainTransform& transform,
                          std::uint64_t& covariance_clamps) {
    SplatCloud frame;
    frame.materials = materials;
    frame.kernels = input.kernels;
    for (std::size_t p = 0; p < frame.kernels.size(); ++p) {
        GaussianKernel& k = frame.kernels[p];
        k.position = transform.to_world(particles.x[p]);
        Mat3 cov = update_covariance(input.kernels[p].covariance, particles.F[p]);
        // F Σ Fᵀ is PSD up to roundoff; zero any stray negative eigenvalue
        if (cov.llt().info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
            const Vec3 clamped = eig.eigenvalues().cwiseMax(0.0);
            cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
            cov = 0.5 * (cov + cov.transpose());
            ++covariance_clamps;
        }
        k.covariance = cov;
        k.group_id = particles.group[p];
    }
    return frame;
}

json config_to_json(const SimulationConfig& cfg) {
    json j;
    j["force_mode"] =
        cfg.force_mode == ForceMode::per_unit_mass ? "per_unit_mass" : "per_particle_force";
    j["grid"] = {{"resolution", cfg.grid_resolution}, {"padding", cfg.domain_padding}};
    j["time"] = {{"dt", cfg.dt},
                 {"substeps_per_frame", cfg.substeps_per_frame},
                 {"frames", cfg.frames}};
    json faces = json::array();
    for (const FaceBc f : cfg.boundary.faces) faces.push_back(f == FaceBc::sticky ? "sticky" : "slip");
    j["boundary"] = {{"faces", faces}, {"friction", cfg.boundary.ground_friction}};
    if (cfg.boundary.ground_height) j["boundary"]["ground"] = *cfg.boundary.ground_height;
    j["forces"] = json::array();
    for (const ForceEntry& e : cfg.forces) {
        json je;
        je["kind"] =
            e.kind == ForceKind::acceleration_field ? "acceleration_field" : "velocity_override";
        je["vector"] = {e.vector.x(), e.vector.y(), e.vector.z()};
        je["t_start"] = e.t_start;
        if (std::isfinite(e.t_end)) je["t_end"] = e.t_end;
        if (e.group) je["group"] = *e.group;
        j["forces"].push_back(je);
    }
    json materials = json::object();
    for (const auto& [group, o] : cfg.material_overrides) {
        json jo = json::object();
        if (o.material_type) jo["material_type"] = to_string(*o.material_type);
        if (o.density) jo["density"] = *o.density;
        if (o.youngs_modulus) jo["youngs_modulus"] = *o.youngs_modulus;
        if (o.poissons_ratio) jo["poissons_ratio"] = *o.poissons_ratio;
        if (o.name) jo["name"] = *o.name;
        if (o.snow_theta_c) jo["snow_theta_c"] = *o.snow_theta_c;
        if (o.snow_theta_s) jo["snow_theta_s"] = *o.snow_theta_s;
        if (o.snow_hardening) jo["snow_hardening"] = *o.snow_hardening;
        if (o.sand_friction_deg) jo["sand_friction_deg"] = *o.sand_friction_deg;
        materials[std::to_string(group)] = jo;
    }
    j["materials"] = materials;
    return j;
}

} // namespace

RunReport run_simulation(const SplatCloud& cloud, const SimulationConfig& config,
                         const ExecContext& exec,
                         const std::function<void(int, const SplatCloud&)>& sink) {
    config.validate();
    const auto wall_start = Clock::now();
    RunReport report;

    auto stage_start = Clock::now();
    SplatCloud input = cloud;
    apply_material_overrides(input.materials, config.material_overrides);

    auto [domain_cloud, transform] = normalize_to_domain(input, config.domain_padding);
    MpmGrid grid(config.grid_resolution);
    MpmParticles particles = init_particle_masses(domain_cloud, grid);
    const ForceSchedule schedule = make_force_schedule(config.forces);
    ParticleBins bins;

    const double dt_bound = stable_dt_bound(particles, grid);
    if (config.dt > dt_bound) {
        log::warn("dt " + std::to_string(config.dt) + " exceeds the stability bound " +
                  std::to_string(dt_bound) + "; expect a noisy or diverging run");
        ++report.diagnostics.cfl_warnings;
    }
    report.stage_seconds["init"] = seconds_since(stage_start);

    double substep_seconds = 0.0, export_seconds = 0.0;

    stage_start = Clock::now();
    sink(0, assemble_frame(input, input.materials, particles, transform,
                           report.covariance_clamps)); // frame 0 echoes the input
    report.frames_written = 1;
    export_seconds += seconds_since(stage_start);

    double t = 0.0;
    try {
        for (int frame = 1; frame < config.frames; ++frame) {
            stage_start = Clock::now();
            for (int s = 0; s < config.substeps_per_frame; ++s) {
                substep(particles, grid, schedule, config.boundary, t, config.dt,
                        config.force_mode, exec, bins, report.diagnostics);
                t += config.dt;
            }
            substep_seconds += seconds_since(stage_start);

            stage_start = Clock::now();
            sink(frame, assemble_frame(input, input.materials, particles, transform,
                                       report.covariance_clamps));
            ++report.frames_written;
            export_seconds += seconds_since(stage_start);
        }
        report.completed = true;
    } catch (const ContractError& e) {
        substep_seconds += seconds_since(stage_start);
        report.failure = e.what();
        log::error("simulation aborted at t=" + std::to_string(t) + ": " + report.failure);
    }

    report.simulated_seconds = t;
    report.stage_seconds["substeps"] = substep_seconds;
    report.stage_seconds["export"] = export_seconds;
    report.wall_seconds = seconds_since(wall_start);
    return report;
}

FrameSequence simulate(const SplatCloud& cloud, const SimulationConfig& config,
                       const ExecContext& exec, RunReport* report) {
    FrameSequence seq;
    seq.dt = config.dt;
    seq.substeps_per_frame = config.substeps_per_frame;
    seq.frame_rate = 1.0 / (config.dt * config.substeps_per_frame);
    RunReport rep = run_simulation(cloud, config, exec,
                                   [&](int, const SplatCloud& frame) { seq.frames.push_back(frame); });
    if (report) *report = rep;
    return seq;
}

RunReport simulate_to_directory(const SplatCloud& cloud, const SimulationConfig& config,
                                const std::string& out_dir, const ExecContext& exec) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    RunReport report = run_simulation(cloud, config, exec, [&](int frame, const SplatCloud& fc) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.ply", frame);
        save_frame(fc, (fs::path(out_dir) / name).string());
    });
    std::ofstream out(fs::path(out_dir) / "run_report.json");
    if (!out) throw IoError("cannot write run report in " + out_dir);
    out << report_to_json(report, config) << "\n";
    return report;
}

std::string report_to_json(const RunReport& report, const SimulationConfig& config) {
    json j;
    j["completed"] = report.completed;
    if (!report.failure.empty()) j["failure"] = report.failure;
    j["frames_written"] = report.frames_written;
    j["simulated_seconds"] = report.simulated_seconds;
    j["wall_seconds"] = report.wall_seconds;
    j["stages"] = report.stage_seconds;
    j["diagnostics"] = {{"substeps", report.diagnostics.substeps},
                        {"det_clamps", report.diagnostics.det_clamps},
                        {"plasticity_projections", report.diagnostics.plasticity_projections},
                        {"cfl_warnings", report.diagnostics.cfl_warnings},
                        {"covariance_clamps", report.covariance_clamps}};
    j["config"] = config_to_json(config);
    j["version"] = kToolVersion;
    return j.dump(2);
}

} // namespace splatsim
