#include "splatsim/config.hpp"

#include "toml_lite.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace splatsim {

namespace {

using toml::Value;

[[noreturn]] void bad(const std::string& what) { throw ContractError("config: " + what); }

/// Typed accessors with dotted-path error messages.
double number_at(const Value::Table& t, const std::string& key, const std::string& where) {
    const auto it = t.find(key);
    if (it == t.end()) bad(where + "." + key + " is required");
    if (!it->second.is_number()) bad(where + "." + key + " must be a number");
    return it->second.as_number();
}

double number_or(const Value::Table& t, const std::string& key, const std::string& where,
                 double fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (!it->second.is_number()) bad(where + "." + key + " must be a number");
    return it->second.as_number();
}

int integer_or(const Value::Table& t, const std::string& key, const std::string& where,
               int fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (!it->second.is_integer()) bad(where + "." + key + " must be an integer");
    return static_cast<int>(it->second.as_integer());
}

std::string string_at(const Value::Table& t, const std::string& key, const std::string& where) {
    const auto it = t.find(key);
    if (it == t.end()) bad(where + "." + key + " is required");
    if (!it->second.is_string()) bad(where + "." + key + " must be a string");
    return it->second.as_string();
}

void reject_unknown(const Value::Table& t, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, value] : t)
        if (!known.count(key)) bad("unknown key '" + where + "." + key + "'");
}

FaceBc face_from_string(const std::string& s) {
    if (s == "sticky") return FaceBc::sticky;
    if (s == "slip") return FaceBc::slip;
    bad("boundary face must be \"sticky\" or \"slip\", got \"" + s + "\"");
}

Vec3 vec3_at(const Value::Table& t, const std::string& key, const std::string& where) {
    const auto it = t.find(key);
    if (it == t.end()) bad(where + "." + key + " is required");
    if (!it->second.is_array() || it->second.as_array().size() != 3)
        bad(where + "." + key + " must be an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        const Value& e = it->second.as_array()[i];
        if (!e.is_number()) bad(where + "." + key + " must be an array of 3 numbers");
        v[i] = e.as_number();
    }
    return v;
}

void parse_grid(const Value::Table& t, SimulationConfig& cfg) {
    reject_unknown(t, {"resolution", "padding"}, "grid");
    cfg.grid_resolution = integer_or(t, "resolution", "grid", cfg.grid_resolution);
    cfg.domain_padding = number_or(t, "padding", "grid", cfg.domain_padding);
}

void parse_time(const Value::Table& t, SimulationConfig& cfg) {
    reject_unknown(t, {"dt", "substeps_per_frame", "frames"}, "time");
    cfg.dt = number_or(t, "dt", "time", cfg.dt);
    cfg.substeps_per_frame = integer_or(t, "substeps_per_frame", "time", cfg.substeps_per_frame);
    cfg.frames = integer_or(t, "frames", "time", cfg.frames);
}

void parse_boundary(const Value::Table& t, SimulationConfig& cfg) {
    reject_unknown(t, {"faces", "ground", "friction"}, "boundary");
    if (const auto it = t.find("faces"); it != t.end()) {
        if (it->second.is_string()) {
            cfg.boundary.faces.fill(face_from_string(it->second.as_string()));
        } else if (it->second.is_array() && it->second.as_array().size() == 6) {
            for (int f = 0; f < 6; ++f) {
                const Value& e = it->second.as_array()[f];
                if (!e.is_string()) bad("boundary.faces entries must be strings");
                cfg.boundary.faces[f] = face_from_string(e.as_string());
            }
        } else {
            bad("boundary.faces must be one string or an array of 6 "
                "(-x, +x, -y, +y, -z, +z)");
        }
    }
    if (const auto it = t.find("ground"); it != t.end()) {
        if (!it->second.is_number()) bad("boundary.ground must be a number");
        cfg.boundary.ground_height = it->second.as_number();
    }
    cfg.boundary.ground_friction = number_or(t, "friction", "boundary", 0.0);
}

ForceEntry parse_force(const Value::Table& t, std::size_t index) {
    const std::string where = "forces[" + std::to_string(index) + "]";
    reject_unknown(t, {"kind", "vector", "t_start", "t_end", "group"}, where);
    ForceEntry entry;
    const std::string kind = string_at(t, "kind", where);
    if (kind == "acceleration_field") {
        entry.kind = ForceKind::acceleration_field;
    } else if (kind == "velocity_override") {
        entry.kind = ForceKind::velocity_override;
    } else {
        bad(where + ".kind must be \"acceleration_field\" or \"velocity_override\"");
    }
    entry.vector = vec3_at(t, "vector", where);
    entry.t_start = number_or(t, "t_start", where, 0.0);
    entry.t_end = number_or(t, "t_end", where, std::numeric_limits<double>::infinity());
    if (const auto it = t.find("group"); it != t.end()) {
        if (!it->second.is_integer() || it->second.as_integer() < 1)
            bad(where + ".group must be an integer >= 1");
        entry.group = static_cast<std::uint32_t>(it->second.as_integer());
    }
    return entry;
}

MaterialOverride parse_override(const Value::Table& t, const std::string& where) {
    reject_unknown(t,
                   {"material_type", "density", "youngs_modulus", "poissons_ratio", "name",
                    "snow_theta_c", "snow_theta_s", "snow_hardening", "sand_friction_deg"},
                   where);
    MaterialOverride o;
    if (t.count("material_type")) o.material_type = material_type_from_string(string_at(t, "material_type", where));
    if (t.count("name")) o.name = string_at(t, "name", where);
    const auto opt_number = [&](const char* key) -> std::optional<double> {
        if (!t.count(key)) return std::nullopt;
        return number_at(t, key, where);
    };
    o.density = opt_number("density");
    o.youngs_modulus = opt_number("youngs_modulus");
    o.poissons_ratio = opt_number("poissons_ratio");
    o.snow_theta_c = opt_number("snow_theta_c");
    o.snow_theta_s = opt_number("snow_theta_s");
    o.snow_hardening = opt_number("snow_hardening");
    o.sand_friction_deg = opt_number("sand_friction_deg");
    return o;
}

void parse_materials(const Value::Table& t, SimulationConfig& cfg) {
    for (const auto& [key, value] : t) {
        std::uint32_t group = 0;
        try {
            std::size_t consumed = 0;
            const unsigned long g = std::stoul(key, &consumed);
            if (consumed != key.size()) throw std::invalid_argument(key);
            group = static_cast<std::uint32_t>(g);
        } catch (...) {
            bad("materials section keys must be group ids, got 'materials." + key + "'");
        }
        if (group < 1) bad("materials group ids start at 1, got 'materials." + key + "'");
        if (!value.is_table()) bad("materials." + key + " must be a table of overrides");
        cfg.material_overrides[group] = parse_override(value.as_table(), "materials." + key);
    }
}

} // namespace

void SimulationConfig::validate() const {
    if (grid_resolution < 2 * kBoundaryMargin + 4)
        bad("grid.resolution must be at least " + std::to_string(2 * kBoundaryMargin + 4));
    if (!(domain_padding >= 0.0 && domain_padding <= 0.45))
        bad("grid.padding must lie in [0, 0.45]");
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("time.dt must be positive");
    if (substeps_per_frame < 1) bad("time.substeps_per_frame must be >= 1");
    if (frames < 1) bad("time.frames must be >= 1");
    if (boundary.ground_friction < 0.0) bad("boundary.friction must be >= 0");
    if (boundary.ground_height &&
        !(*boundary.ground_height >= 0.0 && *boundary.ground_height <= 1.0))
        bad("boundary.ground must lie in [0, 1] (domain units)");
    for (const auto& [group, o] : material_overrides) {
        if (o.density && !(*o.density > 0.0))
            bad("materials." + std::to_string(group) + ".density must be > 0");
        if (o.youngs_modulus && !(*o.youngs_modulus > 0.0))
            bad("materials." + std::to_string(group) + ".youngs_modulus must be > 0");
    }
    make_force_schedule(forces); // surfaces overlap/ordering violations
}

SimulationConfig parse_simulation_config(const std::string& text) {
    const Value::Table root = toml::parse(text);
    reject_unknown(root, {"force_mode", "grid", "time", "boundary", "forces", "materials"},
                   "<root>");

    SimulationConfig cfg;
    if (const auto it = root.find("force_mode"); it != root.end()) {
        if (!it->second.is_string()) bad("force_mode must be a string");
        const std::string& mode = it->second.as_string();
        if (mode == "per_unit_mass") {
            cfg.force_mode = ForceMode::per_unit_mass;
        } else if (mode == "per_particle_force") {
            cfg.force_mode = ForceMode::per_particle_force;
        } else {
            bad("force_mode must be \"per_unit_mass\" or \"per_particle_force\"");
        }
    }

    const auto section = [&](const char* name) -> const Value::Table* {
        const auto it = root.find(name);
        if (it == root.end()) return nullptr;
        if (!it->second.is_table()) bad(std::string(name) + " must be a [section]");
        return &it->second.as_table();
    };
    if (const auto* t = section("grid")) parse_grid(*t, cfg);
    if (const auto* t = section("time")) parse_time(*t, cfg);
    if (const auto* t = section("boundary")) parse_boundary(*t, cfg);
    if (const auto* t = section("materials")) parse_materials(*t, cfg);

    if (const auto it = root.find("forces"); it != root.end()) {
        if (!it->second.is_array()) bad("forces must be [[forces]] entries");
        const auto& arr = it->second.as_array();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_table()) bad("forces must be [[forces]] entries");
            cfg.forces.push_back(parse_force(arr[i].as_table(), i));
        }
    }

    cfg.validate();
    return cfg;
}

SimulationConfig load_simulation_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_simulation_config(buf.str());
}

void apply_material_overrides(MaterialTable& table,
                              const std::map<std::uint32_t, MaterialOverride>& overrides) {
    for (const auto& [group, o] : overrides) {
        const auto it = table.find(group);
        if (it == table.end())
            throw ContractError("config overrides material group " + std::to_string(group) +
                                " which is not present in the sidecar");
        MaterialProperties& p = it->second;
        if (o.material_type) p.material_type = *o.material_type;
        if (o.density) p.density = *o.density;
        if (o.youngs_modulus) p.youngs_modulus = *o.youngs_modulus;
        if (o.poissons_ratio) p.poissons_ratio = *o.poissons_ratio;
        if (o.name) p.name = *o.name;
        if (o.snow_theta_c) p.snow_theta_c = *o.snow_theta_c;
        if (o.snow_theta_s) p.snow_theta_s = *o.snow_theta_s;
        if (o.snow_hardening) p.snow_hardening = *o.snow_hardening;
        if (o.sand_friction_deg) p.sand_friction_deg = *o.sand_friction_deg;
        p = clamp_properties(p);
    }
}

} // namespace splatsim
