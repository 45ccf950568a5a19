#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace splatsim {

enum class MaterialType { elastic, snow, sand };

std::string to_string(MaterialType t);
MaterialType material_type_from_string(const std::string& s); // throws on unknown

/// Engineering parameters for one material group. Young's modulus is capped at
/// 1e8 Pa and Poisson's ratio at 0.49 (clamp_properties); both caps keep the
/// explicit integrator stable.
struct MaterialProperties {
    MaterialType material_type = MaterialType::elastic;
    double density = 1000.0;        // kg/m^3, > 0
    double youngs_modulus = 1e6;    // Pa, 0 < E <= 1e8 after clamping
    double poissons_ratio = 0.3;    // -0.9 <= nu <= 0.49 after clamping
    std::string name;

    // Plasticity knobs, overridable per group.
    double snow_theta_c = 2.5e-2;   // compression yield
    double snow_theta_s = 7.5e-3;   // stretch yield
    double snow_hardening = 10.0;   // xi in exp(xi*(1-Jp))
    double sand_friction_deg = 30.0;
};

constexpr double kYoungsModulusCap = 1e8;
constexpr double kPoissonsRatioCap = 0.49;
constexpr double kPoissonsRatioFloor = -0.9;

/// Caps E at 1e8 and nu at 0.49; everything else passes through.
/// Throws ContractError for rho <= 0, E <= 0, or nu < -0.9.
MaterialProperties clamp_properties(const MaterialProperties& props);

using MaterialTable = std::map<std::uint32_t, MaterialProperties>;

} // namespace splatsim
