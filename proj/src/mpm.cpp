#include "splatsim/mpm.hpp"

#include "splatsim/log.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace splatsim {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// Records the smallest offending index seen across workers.
struct MinIndex {
    std::atomic<std::size_t> value{kNone};
    void record(std::size_t i) {
        std::size_t cur = value.load(std::memory_order_relaxed);
        while (i < cur && !value.compare_exchange_weak(cur, i, std::memory_order_relaxed)) {
        }
    }
};

bool finite_particle(const MpmParticles& p, std::size_t i) {
    return p.x[i].allFinite() && p.v[i].allFinite() && p.F[i].allFinite() &&
           p.C[i].allFinite() && std::isfinite(p.mass[i]) && std::isfinite(p.Jp[i]);
}

void check_particles(const MpmParticles& particles, const ExecContext& exec,
                     const char* stage) {
    MinIndex bad;
    exec.parallel_ranges(particles.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            if (!finite_particle(particles, i)) {
                bad.record(i);
                return;
            }
    });
    const std::size_t i = bad.value.load();
    if (i != kNone)
        throw ContractError(std::string("substep ") + stage +
                            ": non-finite particle state at index " + std::to_string(i));
}

/// SVD with U, V forced into SO(3); sign flips are folded into sigma(2).
void rotation_svd(const Mat3& A, Mat3& U, Vec3& sigma, Mat3& V) {
    Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    U = svd.matrixU();
    V = svd.matrixV();
    sigma = svd.singularValues();
    if (U.determinant() < 0) {
        U.col(2) *= -1.0;
        sigma(2) *= -1.0;
    }
    if (V.determinant() < 0) {
        V.col(2) *= -1.0;
        sigma(2) *= -1.0;
    }
}

} // namespace

void MpmParticles::validate() const {
    const std::size_t n = x.size();
    if (n == 0) throw ContractError("MpmParticles: empty");
    if (v.size() != n || mass.size() != n || volume0.size() != n || F.size() != n ||
        C.size() != n || Jp.size() != n || group.size() != n || model_index.size() != n)
        throw ContractError("MpmParticles: array lengths disagree");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mass[i] > 0))
            throw ContractError("MpmParticles: mass must be > 0 at index " + std::to_string(i));
        if (model_index[i] >= models.size())
            throw ContractError("MpmParticles: model index out of range at " + std::to_string(i));
    }
}

MpmGrid::MpmGrid(int resolution) : n(resolution), dx(1.0 / resolution) {
    if (resolution < 2 * kBoundaryMargin + 3)
        throw ContractError("MpmGrid: resolution too small for the boundary margin");
    mass.assign(node_count(), 0.0);
    momentum.assign(node_count(), Vec3::Zero());
    velocity.assign(node_count(), Vec3::Zero());
}

void MpmGrid::zero(const ExecContext& exec) {
    exec.parallel_ranges(node_count(), [&](std::size_t b, std::size_t e) {
        std::fill(mass.begin() + b, mass.begin() + e, 0.0);
        std::fill(momentum.begin() + b, momentum.begin() + e, Vec3::Zero());
    });
}

WeightStencil bspline_weights(const Vec3& xp, const MpmGrid& grid) {
    WeightStencil s;
    for (int a = 0; a < 3; ++a) {
        const double xg = xp[a] / grid.dx;
        const double base = std::floor(xg - 0.5);
        s.base[a] = static_cast<int>(base);
        const double f = xg - base; // in [0.5, 1.5)
        s.fx[a] = f;
        s.w[a][0] = 0.5 * (1.5 - f) * (1.5 - f);
        s.w[a][1] = 0.75 - (f - 1.0) * (f - 1.0);
        s.w[a][2] = 0.5 * (f - 0.5) * (f - 0.5);
        if (s.base[a] < 0 || s.base[a] + 2 >= grid.n)
            throw ContractError("bspline_weights: particle outside valid domain");
    }
    return s;
}

void ParticleBins::build(const MpmParticles& particles, const MpmGrid& grid) {
    const std::size_t P = particles.size();
    const std::size_t cells = grid.node_count();
    const int n = grid.n;

    cell_of_.resize(P);
    for (std::size_t p = 0; p < P; ++p) {
        const Vec3& x = particles.x[p];
        int b[3];
        for (int a = 0; a < 3; ++a) {
            b[a] = static_cast<int>(std::floor(x[a] / grid.dx - 0.5));
            if (b[a] < 0 || b[a] + 2 >= n)
                throw ContractError("particle binning: particle " + std::to_string(p) +
                                    " outside valid domain");
        }
        cell_of_[p] =
            static_cast<std::uint32_t>((static_cast<std::size_t>(b[0]) * n + b[1]) * n + b[2]);
    }

    // Stable counting sort by cell: fixed particle order within each cell.
    cell_start.assign(cells + 1, 0);
    for (std::size_t p = 0; p < P; ++p) ++cell_start[cell_of_[p] + 1];
    for (std::size_t c = 0; c < cells; ++c) cell_start[c + 1] += cell_start[c];
    order.resize(P);
    cursor_.assign(cell_start.begin(), cell_start.end() - 1);
    for (std::size_t p = 0; p < P; ++p) order[cursor_[cell_of_[p]]++] = static_cast<std::uint32_t>(p);

    // Occupied cells grouped by 4^3 color; cells of one color are >= 4 apart
    // on every differing axis, so their 3^3 node stencils never share a node.
    color_cells.resize(64);
    for (auto& v : color_cells) v.clear();
    std::uint32_t prev = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t s = 0; s < P; ++s) {
        const std::uint32_t cell = cell_of_[order[s]];
        if (cell == prev) continue;
        prev = cell;
        const int bz = static_cast<int>(cell % n);
        const int by = static_cast<int>((cell / n) % n);
        const int bx = static_cast<int>(cell / (static_cast<std::size_t>(n) * n));
        const int color = (bx & 3) | ((by & 3) << 2) | ((bz & 3) << 4);
        color_cells[color].push_back(cell);
    }
}

namespace {

/// Fused per-particle scatter quantities shared by both p2g modes.
struct ScatterSource {
    WeightStencil s;
    Vec3 mv;
    Mat3 affine;
    double mass;
};

inline ScatterSource scatter_source(const MpmParticles& particles, std::size_t p,
                                    const MpmGrid& grid, double dt) {
    ScatterSource src;
    src.s = bspline_weights(particles.x[p], grid);
    src.mass = particles.mass[p];
    src.mv = src.mass * particles.v[p];
    ElasticState st;
    st.F = particles.F[p];
    st.plastic_determinant = particles.Jp[p];
    const MaterialModel& model = particles.models[particles.model_index[p]];
    const Mat3 stress = pk1_times_Ft(particles.F[p], model, st);
    src.affine = src.mass * particles.C[p] -
                 (dt * 4.0 / (grid.dx * grid.dx)) * particles.volume0[p] * stress;
    return src;
}

} // namespace

void p2g(const MpmParticles& particles, MpmGrid& grid, double dt,
         const ExecContext& exec, ParticleBins& bins) {
    const double dx = grid.dx;

    if (exec.deterministic) {
        bins.build(particles, grid);
        // Color phases in fixed order; cells of one color scatter in
        // parallel to disjoint nodes, so the addition order at every node
        // is independent of the worker count.
        for (int color = 0; color < 64; ++color) {
            const auto& cells = bins.color_cells[color];
            exec.parallel_for(cells.size(), [&](std::size_t ci) {
                const std::uint32_t cell = cells[ci];
                for (std::size_t s = bins.cell_start[cell]; s < bins.cell_start[cell + 1]; ++s) {
                    const std::size_t p = bins.order[s];
                    const ScatterSource src = scatter_source(particles, p, grid, dt);
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) {
                            const double wij = src.s.w[0][i] * src.s.w[1][j];
                            for (int k = 0; k < 3; ++k) {
                                const double w = wij * src.s.w[2][k];
                                const Vec3 dpos =
                                    (Vec3(i, j, k) - src.s.fx) * dx; // x_i - x_p
                                const std::size_t idx = grid.index(
                                    src.s.base[0] + i, src.s.base[1] + j, src.s.base[2] + k);
                                grid.mass[idx] += w * src.mass;
                                grid.momentum[idx] += w * (src.mv + src.affine * dpos);
                            }
                        }
                }
            });
        }
        return;
    }

    // Atomic scatter: faster, last-bit accumulation order unspecified.
    exec.parallel_for(particles.size(), [&](std::size_t p) {
        const ScatterSource src = scatter_source(particles, p, grid, dt);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double wij = src.s.w[0][i] * src.s.w[1][j];
                for (int k = 0; k < 3; ++k) {
                    const double w = wij * src.s.w[2][k];
                    const Vec3 dpos = (Vec3(i, j, k) - src.s.fx) * dx;
                    const std::size_t idx =
                        grid.index(src.s.base[0] + i, src.s.base[1] + j, src.s.base[2] + k);
                    const Vec3 dmv = w * (src.mv + src.affine * dpos);
                    std::atomic_ref<double>(grid.mass[idx]).fetch_add(w * src.mass,
                                                                      std::memory_order_relaxed);
                    for (int a = 0; a < 3; ++a)
                        std::atomic_ref<double>(grid.momentum[idx][a])
                            .fetch_add(dmv[a], std::memory_order_relaxed);
                }
            }
    });
}

void grid_update(MpmGrid& grid, const ForceSchedule& schedule, const BoundaryCondition& bc,
                 double t, double dt, const ExecContext& exec) {
    if (bc.ground_friction < 0)
        throw ContractError("grid_update: ground friction must be >= 0");
    const Vec3 accel = schedule.global_acceleration(t);
    const int n = grid.n;
    const int margin = kBoundaryMargin;
    MinIndex bad;

    exec.parallel_ranges(grid.node_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            const double m = grid.mass[idx];
            if (m <= kGridMassEpsilon) {
                grid.velocity[idx].setZero();
                continue;
            }
            Vec3 v = grid.momentum[idx] / m + accel * dt;

            const int k = static_cast<int>(idx % n);
            const int j = static_cast<int>((idx / n) % n);
            const int i = static_cast<int>(idx / (static_cast<std::size_t>(n) * n));
            const int node[3] = {i, j, k};
            for (int a = 0; a < 3; ++a) {
                const bool lo = node[a] < margin;
                const bool hi = node[a] >= n - margin;
                if (!lo && !hi) continue;
                const FaceBc face = bc.faces[2 * a + (hi ? 1 : 0)];
                if (face == FaceBc::sticky)
                    v.setZero();
                else
                    v[a] = 0.0; // slip: kill the normal component
            }
            if (bc.ground_height && k * grid.dx <= *bc.ground_height && v.z() < 0.0) {
                // Coulomb contact: cancel the approach, shrink the slide.
                const double vn = -v.z();
                v.z() = 0.0;
                const double vt = std::hypot(v.x(), v.y());
                if (vt > 0.0) {
                    const double scale = std::max(0.0, 1.0 - bc.ground_friction * vn / vt);
                    v.x() *= scale;
                    v.y() *= scale;
                }
            }
            if (!v.allFinite()) {
                bad.record(idx);
                v.setZero();
            }
            grid.velocity[idx] = v;
        }
    });

    const std::size_t idx = bad.value.load();
    if (idx != kNone)
        throw ContractError("substep grid_update: non-finite velocity at node " +
                            std::to_string(idx));
}

void g2p(const MpmGrid& grid, MpmParticles& particles, double dt,
         const ExecContext& exec, MpmDiagnostics& diag) {
    const double dx = grid.dx;
    const double inv_d = 4.0 / (dx * dx);
    const double lo = kBoundaryMargin * dx;
    const double hi = 1.0 - kBoundaryMargin * dx;
    MinIndex bad;
    std::atomic<std::uint64_t> det_clamps{0};
    std::atomic<std::uint64_t> projections{0};

    exec.parallel_ranges(particles.size(), [&](std::size_t b, std::size_t e) {
        std::uint64_t local_det = 0;
        std::uint64_t local_proj = 0;
        for (std::size_t p = b; p < e; ++p) {
            const WeightStencil s = bspline_weights(particles.x[p], grid);
            Vec3 vnew = Vec3::Zero();
            Mat3 B = Mat3::Zero();
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const double wij = s.w[0][i] * s.w[1][j];
                    for (int k = 0; k < 3; ++k) {
                        const double w = wij * s.w[2][k];
                        const std::size_t idx =
                            grid.index(s.base[0] + i, s.base[1] + j, s.base[2] + k);
                        const Vec3 wv = w * grid.velocity[idx];
                        const Vec3 dpos = (Vec3(i, j, k) - s.fx) * dx;
                        vnew += wv;
                        B += wv * dpos.transpose();
                    }
                }
            const Mat3 Cnew = inv_d * B;
            // Advect with the pre-gather position, then clamp to the margin.
            const Vec3 xnew =
                (particles.x[p] + dt * vnew).cwiseMax(lo).cwiseMin(hi);

            Mat3 Ftrial = (Mat3::Identity() + dt * Cnew) * particles.F[p];
            if (!(Ftrial.determinant() > 0)) {
                // Inverted element: rebuild with singular values >= 1e-3.
                Mat3 U, V;
                Vec3 sigma;
                rotation_svd(Ftrial, U, sigma, V);
                Ftrial = U * sigma.cwiseMax(1e-3).asDiagonal() * V.transpose();
                ++local_det;
            }
            ElasticState st;
            st.F = particles.F[p];
            st.plastic_determinant = particles.Jp[p];
            bool projected = false;
            const MaterialModel& model = particles.models[particles.model_index[p]];
            const ElasticState ns = apply_plasticity(Ftrial, model, st, &projected);
            if (projected) ++local_proj;

            if (!(vnew.allFinite() && xnew.allFinite() && Cnew.allFinite() &&
                  ns.F.allFinite()))
                bad.record(p);
            particles.v[p] = vnew;
            particles.x[p] = xnew;
            particles.C[p] = Cnew;
            particles.F[p] = ns.F;
            particles.Jp[p] = ns.plastic_determinant;
        }
        det_clamps.fetch_add(local_det, std::memory_order_relaxed);
        projections.fetch_add(local_proj, std::memory_order_relaxed);
    });

    diag.det_clamps += det_clamps.load();
    diag.plasticity_projections += projections.load();
    const std::size_t p = bad.value.load();
    if (p != kNone)
        throw ContractError("substep g2p: non-finite particle state at index " +
                            std::to_string(p));
}

double stable_dt_bound(const MpmParticles& particles, const MpmGrid& grid) {
    double e_max = 0.0;
    for (const MaterialModel& m : particles.models) {
        const double mu = m.lame.mu, lambda = m.lame.lambda;
        e_max = std::max(e_max, mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu));
    }
    double rho_min = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < particles.size(); ++p)
        rho_min = std::min(rho_min, particles.mass[p] / particles.volume0[p]);
    if (e_max <= 0.0 || !std::isfinite(rho_min))
        return std::numeric_limits<double>::infinity();
    return 0.3 * grid.dx / std::sqrt(e_max / rho_min);
}

void substep(MpmParticles& particles, MpmGrid& grid, const ForceSchedule& schedule,
             const BoundaryCondition& bc, double t, double dt, ForceMode force_mode,
             const ExecContext& exec, ParticleBins& bins, MpmDiagnostics& diag) {
    if (!(dt > 0)) throw ContractError("substep: dt must be > 0");

    // Particle-stage force events. In per-unit-mass mode only group-filtered
    // entries touch particles here (global ones act on the grid); in
    // per-particle-force mode every acceleration entry is a Newton force.
    const bool per_particle = force_mode == ForceMode::per_particle_force;
    const bool has_overrides =
        std::any_of(schedule.entries.begin(), schedule.entries.end(), [&](const ForceEntry& e) {
            return e.kind == ForceKind::velocity_override && e.active(t);
        });
    const bool particle_stage = per_particle || has_overrides || schedule.has_group_entries();
    if (particle_stage) {
        exec.parallel_ranges(particles.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) {
                const std::uint32_t g = particles.group[p];
                if (per_particle) {
                    const Vec3 f =
                        schedule.global_acceleration(t) + schedule.group_acceleration(t, g);
                    particles.v[p] += f / particles.mass[p] * dt;
                } else {
                    particles.v[p] += schedule.group_acceleration(t, g) * dt;
                }
                if (const auto ov = schedule.velocity_override(t, g)) particles.v[p] = *ov;
            }
        });
    }

    check_particles(particles, exec, "p2g");
    grid.zero(exec);
    p2g(particles, grid, dt, exec, bins);
    if (per_particle) {
        grid_update(grid, ForceSchedule{}, bc, t, dt, exec);
    } else {
        grid_update(grid, schedule, bc, t, dt, exec);
    }
    g2p(grid, particles, dt, exec, diag);
    ++diag.substeps;
}

MpmParticles init_particle_masses(const SplatCloud& cloud, const MpmGrid& grid) {
    const std::size_t P = cloud.count();
    if (P == 0) throw ContractError("init_particle_masses: empty cloud");

    // Rest volume: occupied-cell volume shared evenly across particles.
    std::vector<char> occupied(grid.node_count(), 0);
    const double lo = kBoundaryMargin * grid.dx;
    const double hi = 1.0 - kBoundaryMargin * grid.dx;
    MpmParticles out;
    out.x.resize(P);
    out.v.assign(P, Vec3::Zero());
    out.mass.resize(P);
    out.volume0.resize(P);
    out.F.assign(P, Mat3::Identity());
    out.C.assign(P, Mat3::Zero());
    out.Jp.assign(P, 1.0);
    out.group.resize(P);
    out.model_index.resize(P);

    std::map<std::uint32_t, std::uint32_t> model_of_group;
    for (const auto& [gid, props] : cloud.materials) {
        model_of_group.emplace(gid, static_cast<std::uint32_t>(out.models.size()));
        out.models.push_back(MaterialModel::from_properties(props));
    }

    std::size_t occupied_count = 0;
    for (std::size_t p = 0; p < P; ++p) {
        const GaussianKernel& kern = cloud.kernels[p];
        if (kern.group_id == kNoGroup)
            throw ContractError("init_particle_masses: kernel " + std::to_string(p) +
                                " is unlabeled; run perception first");
        const auto it = model_of_group.find(kern.group_id);
        if (it == model_of_group.end())
            throw ContractError("init_particle_masses: no material for group " +
                                std::to_string(kern.group_id));
        out.x[p] = kern.position.cwiseMax(lo).cwiseMin(hi);
        out.group[p] = kern.group_id;
        out.model_index[p] = it->second;

        int c[3];
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp(static_cast<int>(std::floor(out.x[p][a] / grid.dx)), 0,
                              grid.n - 1);
        char& cell = occupied[grid.index(c[0], c[1], c[2])];
        if (!cell) {
            cell = 1;
            ++occupied_count;
        }
    }

    const double vp =
        static_cast<double>(occupied_count) * grid.dx * grid.dx * grid.dx / static_cast<double>(P);
    for (std::size_t p = 0; p < P; ++p) {
        const double rho = cloud.materials.at(cloud.kernels[p].group_id).density;
        out.volume0[p] = vp;
        out.mass[p] = rho * vp;
    }
    out.validate();
    return out;
}

} // namespace splatsim
