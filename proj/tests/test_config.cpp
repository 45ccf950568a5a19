#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "splatsim/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

using namespace splatsim;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_simulation_config(text);
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("an empty config yields the default run") {
    const SimulationConfig cfg = parse_simulation_config("");
    CHECK(cfg.grid_resolution == 50);
    CHECK(cfg.domain_padding == doctest::Approx(0.12));
    CHECK(cfg.dt == doctest::Approx(5e-5));
    CHECK(cfg.substeps_per_frame == 714);
    CHECK(cfg.frames == 14);
    CHECK(cfg.force_mode == ForceMode::per_unit_mass);
    for (const FaceBc f : cfg.boundary.faces) CHECK(f == FaceBc::sticky);
    CHECK_FALSE(cfg.boundary.ground_height.has_value());
    CHECK(cfg.boundary.ground_friction == 0.0);
    CHECK(cfg.forces.empty());
    CHECK(cfg.material_overrides.empty());
    CHECK(cfg.frame_dt() == doctest::Approx(5e-5 * 714));
}

TEST_CASE("a config exercising every section parses into the right fields") {
    const std::string text = R"(# full demo config
force_mode = "per_particle_force"

[grid]
resolution = 64      # coarser than default
padding = 0.2

[time]
dt = 1e-4
substeps_per_frame = 100
frames = 6

[boundary]
faces = ["sticky", "slip", "sticky", "slip", "sticky", "slip"]
ground = 0.25
friction = 0.4

[[forces]]
kind = "acceleration_field"
vector = [0, 0, -9.8]

[[forces]]
kind = "acceleration_field"
vector = [2.5, 0.0, 0.0]
t_start = 0.01
t_end = 0.02
group = 2

[[forces]]
kind = "velocity_override"
vector = [0.0, 0.1, 0.0]
t_start = 0.03
t_end = 0.04

[materials.1]
youngs_modulus = 2e6
poissons_ratio = 0.4

[materials.2]
material_type = "snow"
density = 300.0
name = "drift"
snow_hardening = 12.0
)";
    const SimulationConfig cfg = parse_simulation_config(text);
    CHECK(cfg.force_mode == ForceMode::per_particle_force);
    CHECK(cfg.grid_resolution == 64);
    CHECK(cfg.domain_padding == doctest::Approx(0.2));
    CHECK(cfg.dt == doctest::Approx(1e-4));
    CHECK(cfg.substeps_per_frame == 100);
    CHECK(cfg.frames == 6);
    CHECK(cfg.frame_dt() == doctest::Approx(0.01));

    CHECK(cfg.boundary.faces[0] == FaceBc::sticky);
    CHECK(cfg.boundary.faces[1] == FaceBc::slip);
    CHECK(cfg.boundary.faces[5] == FaceBc::slip);
    REQUIRE(cfg.boundary.ground_height.has_value());
    CHECK(*cfg.boundary.ground_height == doctest::Approx(0.25));
    CHECK(cfg.boundary.ground_friction == doctest::Approx(0.4));

    REQUIRE(cfg.forces.size() == 3);
    CHECK(cfg.forces[0].kind == ForceKind::acceleration_field);
    CHECK(cfg.forces[0].vector.z() == doctest::Approx(-9.8));
    CHECK(cfg.forces[0].t_start == 0.0);
    CHECK(std::isinf(cfg.forces[0].t_end));
    CHECK_FALSE(cfg.forces[0].group.has_value());
    REQUIRE(cfg.forces[1].group.has_value());
    CHECK(*cfg.forces[1].group == 2);
    CHECK(cfg.forces[1].t_start == doctest::Approx(0.01));
    CHECK(cfg.forces[1].t_end == doctest::Approx(0.02));
    CHECK(cfg.forces[2].kind == ForceKind::velocity_override);

    REQUIRE(cfg.material_overrides.count(1) == 1);
    const MaterialOverride& o1 = cfg.material_overrides.at(1);
    CHECK_FALSE(o1.material_type.has_value());
    CHECK_FALSE(o1.density.has_value());
    CHECK(o1.youngs_modulus == 2e6);
    CHECK(o1.poissons_ratio == 0.4);
    REQUIRE(cfg.material_overrides.count(2) == 1);
    const MaterialOverride& o2 = cfg.material_overrides.at(2);
    CHECK(o2.material_type == MaterialType::snow);
    CHECK(o2.density == 300.0);
    CHECK(o2.name == std::string("drift"));
    CHECK(o2.snow_hardening == 12.0);
    CHECK_FALSE(o2.snow_theta_c.has_value());
}

TEST_CASE("a single faces string applies to all six faces") {
    const SimulationConfig cfg = parse_simulation_config("[boundary]\nfaces = \"slip\"\n");
    for (const FaceBc f : cfg.boundary.faces) CHECK(f == FaceBc::slip);
}

TEST_CASE("dotted keys reach into their sections") {
    const SimulationConfig cfg = parse_simulation_config(
        "grid.resolution = 32\n"
        "time.frames = 2\n"
        "boundary.friction = 0.1\n"
        "materials.3.density = 250.0\n");
    CHECK(cfg.grid_resolution == 32);
    CHECK(cfg.frames == 2);
    CHECK(cfg.boundary.ground_friction == doctest::Approx(0.1));
    REQUIRE(cfg.material_overrides.count(3) == 1);
    CHECK(cfg.material_overrides.at(3).density == 250.0);
}

TEST_CASE("comments, blank lines and escapes survive parsing") {
    const SimulationConfig cfg = parse_simulation_config(
        "# leading comment\n"
        "\n"
        "[materials.1]\n"
        "name = \"tab\\tand \\\"quote\\\"\"  # trailing comment\n");
    CHECK(cfg.material_overrides.at(1).name == std::string("tab\tand \"quote\""));
}

TEST_CASE("unknown keys anywhere fail loudly") {
    CHECK(error_of("grav = 1\n").find("unknown key '<root>.grav'") != std::string::npos);
    CHECK(error_of("[grud]\nresolution = 50\n").find("unknown key '<root>.grud'") !=
          std::string::npos);
    CHECK(error_of("[grid]\nres = 50\n").find("unknown key 'grid.res'") != std::string::npos);
    CHECK(error_of("[[forces]]\nkind = \"acceleration_field\"\nvector = [0,0,0]\nstrength = 2\n")
              .find("unknown key 'forces[0].strength'") != std::string::npos);
    CHECK(error_of("[materials.1]\nhardness = 3\n").find("unknown key 'materials.1.hardness'") !=
          std::string::npos);
}

TEST_CASE("syntax errors carry their line number") {
    CHECK_THROWS_AS(parse_simulation_config("[grid]\nresolution 50\n"), ParseError);
    CHECK(error_of("[grid]\nresolution 50\n").find("config line 2") != std::string::npos);
    // duplicate keys are a parse error too
    CHECK_THROWS_AS(parse_simulation_config("[time]\nframes = 2\nframes = 3\n"), ParseError);
    // unterminated string
    CHECK_THROWS_AS(parse_simulation_config("[materials.1]\nname = \"open\n"), ParseError);
    // trailing garbage after a value
    CHECK_THROWS_AS(parse_simulation_config("[grid]\nresolution = 50 50\n"), ParseError);
}

TEST_CASE("type mismatches name the offending key") {
    CHECK(error_of("[grid]\nresolution = \"high\"\n").find("grid.resolution must be an integer") !=
          std::string::npos);
    CHECK(error_of("[grid]\nresolution = 49.5\n").find("grid.resolution must be an integer") !=
          std::string::npos);
    CHECK(error_of("[time]\nframes = true\n").find("time.frames must be an integer") !=
          std::string::npos);
    CHECK(error_of("[boundary]\nfaces = [\"sticky\", \"slip\"]\n")
              .find("boundary.faces must be one string or an array of 6") != std::string::npos);
    CHECK(error_of("[boundary]\nfaces = \"bouncy\"\n").find("sticky") != std::string::npos);
    CHECK(error_of("[[forces]]\nvector = [0,0,0]\n").find("forces[0].kind is required") !=
          std::string::npos);
    CHECK(error_of("[[forces]]\nkind = \"pull\"\nvector = [0,0,0]\n")
              .find("forces[0].kind must be") != std::string::npos);
    CHECK(error_of("[[forces]]\nkind = \"acceleration_field\"\nvector = [0,0]\n")
              .find("array of 3 numbers") != std::string::npos);
    CHECK(error_of("[[forces]]\nkind = \"acceleration_field\"\nvector = [0,0,0]\ngroup = 0\n")
              .find("group must be an integer >= 1") != std::string::npos);
    CHECK(error_of("[materials.zero]\ndensity = 1.0\n").find("group ids") != std::string::npos);
    CHECK(error_of("[materials.2x]\ndensity = 1.0\n").find("group ids") != std::string::npos);
}

TEST_CASE("range validation rejects out-of-range settings") {
    CHECK(error_of("[grid]\nresolution = 7\n").find("resolution must be at least 8") !=
          std::string::npos);
    CHECK(error_of("[grid]\npadding = 0.5\n").find("padding must lie in [0, 0.45]") !=
          std::string::npos);
    CHECK(error_of("[time]\ndt = 0.0\n").find("dt must be positive") != std::string::npos);
    CHECK(error_of("[time]\ndt = -1e-5\n").find("dt must be positive") != std::string::npos);
    CHECK(error_of("[time]\nsubsteps_per_frame = 0\n").find("substeps_per_frame must be >= 1") !=
          std::string::npos);
    CHECK(error_of("[time]\nframes = 0\n").find("frames must be >= 1") != std::string::npos);
    CHECK(error_of("[boundary]\nfriction = -0.1\n").find("friction must be >= 0") !=
          std::string::npos);
    CHECK(error_of("[boundary]\nground = 1.5\n").find("ground must lie in [0, 1]") !=
          std::string::npos);
    CHECK(error_of("[materials.1]\ndensity = -5.0\n").find("density must be > 0") !=
          std::string::npos);
    CHECK(error_of("[materials.1]\nyoungs_modulus = 0.0\n").find("youngs_modulus must be > 0") !=
          std::string::npos);
}

TEST_CASE("force schedule violations surface at parse time") {
    // overlapping global velocity overrides
    const std::string overlap =
        "[[forces]]\nkind = \"velocity_override\"\nvector = [1,0,0]\nt_end = 1.0\n"
        "[[forces]]\nkind = \"velocity_override\"\nvector = [0,1,0]\nt_start = 0.5\n";
    CHECK_THROWS_AS(parse_simulation_config(overlap), ContractError);
    // reversed window
    const std::string reversed =
        "[[forces]]\nkind = \"acceleration_field\"\nvector = [1,0,0]\nt_start = 2.0\nt_end = 1.0\n";
    CHECK_THROWS_AS(parse_simulation_config(reversed), ContractError);
    // the same overrides on different groups pass
    const std::string scoped =
        "[[forces]]\nkind = \"velocity_override\"\nvector = [1,0,0]\nt_end = 1.0\ngroup = 1\n"
        "[[forces]]\nkind = \"velocity_override\"\nvector = [0,1,0]\nt_start = 0.5\ngroup = 2\n";
    CHECK_NOTHROW(parse_simulation_config(scoped));
}

TEST_CASE("apply_material_overrides patches only the named fields and re-clamps") {
    MaterialTable table;
    MaterialProperties base;
    base.density = 1000.0;
    base.youngs_modulus = 1e6;
    base.poissons_ratio = 0.3;
    base.name = "original";
    table[1] = base;
    table[2] = base;

    std::map<std::uint32_t, MaterialOverride> overrides;
    MaterialOverride o;
    o.material_type = MaterialType::snow;
    o.density = 500.0;
    o.name = "patched";
    overrides[1] = o;
    apply_material_overrides(table, overrides);

    CHECK(table.at(1).material_type == MaterialType::snow);
    CHECK(table.at(1).density == 500.0);
    CHECK(table.at(1).youngs_modulus == 1e6); // untouched
    CHECK(table.at(1).name == "patched");
    CHECK(table.at(2).density == 1000.0); // other groups untouched
}

TEST_CASE("overridden values above the caps come back clamped") {
    MaterialTable table;
    table[1] = MaterialProperties{};
    std::map<std::uint32_t, MaterialOverride> overrides;
    MaterialOverride o;
    o.youngs_modulus = 5e9;
    o.poissons_ratio = 0.6;
    overrides[1] = o;
    apply_material_overrides(table, overrides);
    CHECK(table.at(1).youngs_modulus == kYoungsModulusCap);
    CHECK(table.at(1).poissons_ratio == kPoissonsRatioCap);
}

TEST_CASE("overriding a group missing from the sidecar is an error") {
    MaterialTable table;
    table[1] = MaterialProperties{};
    std::map<std::uint32_t, MaterialOverride> overrides;
    overrides[3] = MaterialOverride{};
    CHECK_THROWS_AS(apply_material_overrides(table, overrides), ContractError);
}

TEST_CASE("load_simulation_config reads files and reports missing ones") {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() /
        ("splatsim_config_" + std::to_string(std::random_device{}()) + ".toml");
    {
        std::ofstream out(path);
        out << "[time]\nframes = 4\n";
    }
    const SimulationConfig cfg = load_simulation_config(path.string());
    CHECK(cfg.frames == 4);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_simulation_config(path.string()), IoError);
}
