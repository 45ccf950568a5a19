#include "splatsim/force_schedule.hpp"

#include <algorithm>
#include <string>

namespace splatsim {

Vec3 ForceSchedule::global_acceleration(double t) const {
    Vec3 a = Vec3::Zero();
    for (const ForceEntry& e : entries)
        if (e.kind == ForceKind::acceleration_field && !e.group && e.active(t)) a += e.vector;
    return a;
}

Vec3 ForceSchedule::group_acceleration(double t, std::uint32_t group) const {
    Vec3 a = Vec3::Zero();
    for (const ForceEntry& e : entries)
        if (e.kind == ForceKind::acceleration_field && e.group && *e.group == group &&
            e.active(t))
            a += e.vector;
    return a;
}

std::optional<Vec3> ForceSchedule::velocity_override(double t, std::uint32_t group) const {
    for (const ForceEntry& e : entries) {
        if (e.kind != ForceKind::velocity_override || !e.active(t)) continue;
        if (!e.group || *e.group == group) return e.vector;
    }
    return std::nullopt;
}

bool ForceSchedule::has_group_entries() const {
    return std::any_of(entries.begin(), entries.end(),
                       [](const ForceEntry& e) { return e.group.has_value(); });
}

ForceSchedule make_force_schedule(std::vector<ForceEntry> entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ForceEntry& e = entries[i];
        if (!(e.t_start <= e.t_end))
            throw ContractError("force schedule: entry " + std::to_string(i) +
                                " has t_start > t_end");
        if (!e.vector.allFinite())
            throw ContractError("force schedule: entry " + std::to_string(i) +
                                " has a non-finite vector");
        if (e.group && *e.group == 0)
            throw ContractError("force schedule: entry " + std::to_string(i) +
                                " filters on group 0 (reserved for unlabeled)");
    }
    // Velocity overrides may not overlap in time when their scopes can touch
    // the same particle; accelerations are additive and may overlap freely.
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].kind != ForceKind::velocity_override) continue;
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            if (entries[j].kind != ForceKind::velocity_override) continue;
            const ForceEntry& a = entries[i];
            const ForceEntry& b = entries[j];
            const bool time_overlap = a.t_start < b.t_end && b.t_start < a.t_end;
            if (time_overlap && a.scope_intersects(b))
                throw ContractError("force schedule: velocity overrides " + std::to_string(i) +
                                    " and " + std::to_string(j) + " overlap");
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const ForceEntry& a, const ForceEntry& b) { return a.t_start < b.t_start; });
    return ForceSchedule{std::move(entries)};
}

} // namespace splatsim
