#pragma once

#include "splatsim/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace splatsim {

enum class ForceKind { acceleration_field, velocity_override };

/// How acceleration_field vectors are interpreted:
///  - per_unit_mass: the vector is an acceleration applied to everything
///    (a literal force proportional to each particle's mass)
///  - per_particle_force: the vector is a Newton force applied to every
///    particle, so a_p = f / m_p and light particles accelerate harder
enum class ForceMode { per_unit_mass, per_particle_force };

struct ForceEntry {
    double t_start = 0.0;
    double t_end = std::numeric_limits<double>::infinity();
    ForceKind kind = ForceKind::acceleration_field;
    Vec3 vector = Vec3::Zero();
    std::optional<std::uint32_t> group; // restrict to one material group

    bool active(double t) const { return t >= t_start && t < t_end; }
    bool scope_intersects(const ForceEntry& other) const {
        return !group || !other.group || *group == *other.group;
    }
};

/// Validated, time-sorted force program. Overlapping acceleration entries
/// sum; overlapping velocity overrides on intersecting scopes are rejected
/// at construction.
struct ForceSchedule {
    std::vector<ForceEntry> entries;

    /// Sum of active global (non-group-filtered) accelerations at time t.
    Vec3 global_acceleration(double t) const;
    /// Sum of active group-filtered accelerations for the given group.
    Vec3 group_acceleration(double t, std::uint32_t group) const;
    /// Active velocity override for a particle of `group`, if any.
    std::optional<Vec3> velocity_override(double t, std::uint32_t group) const;
    /// True if any entry carries a group filter (enables the per-group path).
    bool has_group_entries() const;
};

/// Validates invariants (t_start <= t_end, finite vectors, no overlapping
/// velocity overrides with intersecting scopes) and sorts by t_start.
/// Throws ContractError on violation.
ForceSchedule make_force_schedule(std::vector<ForceEntry> entries);

} // namespace splatsim
