#include "splatsim/materials.hpp"

#include "splatsim/types.hpp"

#include <algorithm>

namespace splatsim {

std::string to_string(MaterialType t) {
    switch (t) {
    case MaterialType::elastic: return "elastic";
    case MaterialType::snow: return "snow";
    case MaterialType::sand: return "sand";
    }
    return "?";
}

MaterialType material_type_from_string(const std::string& s) {
    if (s == "elastic") return MaterialType::elastic;
    if (s == "snow") return MaterialType::snow;
    if (s == "sand") return MaterialType::sand;
    throw ContractError("unknown material type: '" + s + "' (expected elastic|snow|sand)");
}

MaterialProperties clamp_properties(const MaterialProperties& props) {
    if (!(props.density > 0.0))
        throw ContractError("material density must be > 0 (got " + std::to_string(props.density) + ")");
    if (!(props.youngs_modulus > 0.0))
        throw ContractError("Young's modulus must be > 0 (got " + std::to_string(props.youngs_modulus) + ")");
    if (props.poissons_ratio < kPoissonsRatioFloor)
        throw ContractError("Poisson's ratio below " + std::to_string(kPoissonsRatioFloor));
    MaterialProperties out = props;
    out.youngs_modulus = std::min(out.youngs_modulus, kYoungsModulusCap);
    out.poissons_ratio = std::min(out.poissons_ratio, kPoissonsRatioCap);
    return out;
}

} // namespace splatsim
