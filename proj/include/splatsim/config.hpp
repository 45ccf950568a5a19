#pragma once

#include "splatsim/force_schedule.hpp"
#include "splatsim/materials.hpp"
#include "splatsim/mpm.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace splatsim {

/// Partial per-group material override from the config file; unset fields
/// keep the value loaded from the sidecar.
struct MaterialOverride {
    std::optional<MaterialType> material_type;
    std::optional<double> density;
    std::optional<double> youngs_modulus;
    std::optional<double> poissons_ratio;
    std::optional<std::string> name;
    std::optional<double> snow_theta_c;
    std::optional<double> snow_theta_s;
    std::optional<double> snow_hardening;
    std::optional<double> sand_friction_deg;
};

/// Typed view of the simulation config file. Sections: [grid], [time],
/// [boundary], [[forces]], [materials.<group>], plus the root force_mode
/// key. Defaults reproduce the standard run: 50^3 grid, 14 frames of 714
/// substeps at dt = 5e-5 s, all faces sticky.
struct SimulationConfig {
    int grid_resolution = 50;
    double domain_padding = 0.12;

    double dt = 5e-5;
    int substeps_per_frame = 714;
    int frames = 14;

    BoundaryCondition boundary;
    ForceMode force_mode = ForceMode::per_unit_mass;
    std::vector<ForceEntry> forces;
    std::map<std::uint32_t, MaterialOverride> material_overrides;

    double frame_dt() const { return dt * substeps_per_frame; }

    /// Range checks plus force-schedule validation, ContractError on failure.
    void validate() const;
};

/// Parse config text / load a config file. Unknown keys are rejected so
/// typos fail loudly. ParseError for syntax, ContractError for bad values.
SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::string& path);

/// Applies overrides onto a sidecar-loaded table and re-clamps the result.
/// Overriding a group that is not in the table is an error.
void apply_material_overrides(MaterialTable& table,
                              const std::map<std::uint32_t, MaterialOverride>& overrides);

} // namespace splatsim
