#pragma once

#include "splatsim/constitutive.hpp"
#include "splatsim/force_schedule.hpp"
#include "splatsim/parallel.hpp"
#include "splatsim/splat_cloud.hpp"
#include "splatsim/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace splatsim {

/// Guard for the momentum/mass division on nearly-empty nodes (kg).
constexpr double kGridMassEpsilon = 1e-12;
/// Particles always stay this many cells away from every domain face.
constexpr int kBoundaryMargin = 2;

/// Structure-of-arrays particle state; index p is the kernel identity.
struct MpmParticles {
    std::vector<Vec3> x;            // domain units, [0,1]^3
    std::vector<Vec3> v;            // domain units / s
    std::vector<double> mass;       // kg
    std::vector<double> volume0;    // rest volume V_p, domain units^3
    std::vector<Mat3> F;            // deformation gradient from rest
    std::vector<Mat3> C;            // affine velocity gradient, 1/s
    std::vector<double> Jp;         // snow plastic determinant
    std::vector<std::uint32_t> group;       // material group id
    std::vector<std::uint32_t> model_index; // index into models
    std::vector<MaterialModel> models;      // one per distinct group

    std::size_t size() const { return x.size(); }
    /// Throws ContractError when array lengths disagree or masses are not > 0.
    void validate() const;
};

/// Dense n^3 node grid over [0,1]^3, nodes at x_i = i * dx, dx = 1/n.
struct MpmGrid {
    int n = 50;
    double dx = 1.0 / 50.0;
    std::vector<double> mass;     // kg
    std::vector<Vec3> momentum;   // kg * domain units / s
    std::vector<Vec3> velocity;   // filled by grid_update

    explicit MpmGrid(int resolution = 50);

    std::size_t node_count() const { return static_cast<std::size_t>(n) * n * n; }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    }
    Vec3 node_position(int i, int j, int k) const { return Vec3(i, j, k) * dx; }

    void zero(const ExecContext& exec);
};

enum class FaceBc { sticky, slip };

/// Domain-face handling plus an optional Coulomb-friction ground plane.
/// Faces are ordered -x, +x, -y, +y, -z, +z and act on the 2-node margin.
struct BoundaryCondition {
    std::array<FaceBc, 6> faces{FaceBc::sticky, FaceBc::sticky, FaceBc::sticky,
                                FaceBc::sticky, FaceBc::sticky, FaceBc::sticky};
    std::optional<double> ground_height; // domain units, plane z = height
    double ground_friction = 0.0;        // Coulomb coefficient, >= 0
};

/// Counters surfaced in the run report.
struct MpmDiagnostics {
    std::uint64_t det_clamps = 0;        // F rescued from det <= 0 in g2p
    std::uint64_t plasticity_projections = 0;
    std::uint64_t cfl_warnings = 0;
    std::uint64_t substeps = 0;
};

/// Quadratic B-spline stencil for one particle: 3 per-axis weights over the
/// 3^3 node neighborhood starting at `base`.
struct WeightStencil {
    Vec3i base;              // lowest node of the stencil
    double w[3][3];          // [axis][node offset]
    Vec3 fx;                 // x/dx - base, per axis in [0.5, 1.5)
};

/// base = floor(x/dx - 0.5); per-axis weights
/// (0.5(1.5-fx)^2, 0.75-(fx-1)^2, 0.5(fx-0.5)^2).
/// Throws ContractError when the stencil would leave the grid.
WeightStencil bspline_weights(const Vec3& xp, const MpmGrid& grid);

/// Reusable particle->cell binning for the deterministic scatter: particles
/// sorted by base cell (stable), cells grouped into 4^3 colors so cells of
/// one color have disjoint 3^3 node neighborhoods.
struct ParticleBins {
    std::vector<std::uint32_t> order;       // particle indices, cell-sorted
    std::vector<std::uint32_t> cell_start;  // per cell, prefix offsets (n^3+1)
    std::vector<std::vector<std::uint32_t>> color_cells; // 64 color -> cell list

    void build(const MpmParticles& particles, const MpmGrid& grid);

private:
    std::vector<std::uint32_t> cell_of_;  // scratch, reused across substeps
    std::vector<std::uint32_t> cursor_;
};

/// Scatters mass and fused momentum (APIC affine + stress impulse) to the
/// grid. Deterministic mode colors cells so concurrent cell scatters never
/// share a node; non-deterministic mode uses atomic adds.
/// affine = m_p C_p - dt (4/dx^2) V_p (P F^T); node += w (m_p v_p + affine dpos).
void p2g(const MpmParticles& particles, MpmGrid& grid, double dt,
         const ExecContext& exec, ParticleBins& bins);

/// v_i = (mv)_i / m_i where m_i > kGridMassEpsilon, plus global external
/// acceleration * dt, then face/ground boundary conditions.
void grid_update(MpmGrid& grid, const ForceSchedule& schedule, const BoundaryCondition& bc,
                 double t, double dt, const ExecContext& exec);

/// Gathers velocity and affine state back, advects positions with the
/// pre-gather x, updates F, applies plasticity, clamps to the margin.
void g2p(const MpmGrid& grid, MpmParticles& particles, double dt,
         const ExecContext& exec, MpmDiagnostics& diag);

/// One full step: per-particle force events -> zero grid -> p2g ->
/// grid_update -> g2p. `t` is the simulation time at the start of the step.
/// Throws ContractError naming the stage and particle on non-finite state.
void substep(MpmParticles& particles, MpmGrid& grid, const ForceSchedule& schedule,
             const BoundaryCondition& bc, double t, double dt, ForceMode force_mode,
             const ExecContext& exec, ParticleBins& bins, MpmDiagnostics& diag);

/// Elastic wave CFL-like bound 0.3 dx / sqrt(E_max / rho_min); dt above it
/// earns a warning (once per run).
double stable_dt_bound(const MpmParticles& particles, const MpmGrid& grid);

/// Builds particle state from a labeled, normalized cloud:
/// V_p = occupied_cells * dx^3 / P, m_p = rho(group) V_p, F = I, C = 0, v = 0.
/// Throws ContractError on unlabeled kernels or missing material entries.
MpmParticles init_particle_masses(const SplatCloud& cloud, const MpmGrid& grid);

} // namespace splatsim
