// splatsim command line: synthetic scene bundles, material perception over
// multi-view captures, and MPM frame generation, glued by file artifacts
// (PLY cloud, label sidecar, TOML config) so each stage runs standalone.

#include "splatsim/config.hpp"
#include "splatsim/dynamics.hpp"
#include "splatsim/embedders.hpp"
#include "splatsim/log.hpp"
#include "splatsim/perception.hpp"
#include "splatsim/ply_io.hpp"
#include "splatsim/reasoners.hpp"
#include "splatsim/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace splatsim;

namespace {

struct GlobalOpts {
    unsigned threads = 0; // 0 = all cores, 1 = serial
    bool deterministic = true;
    std::string log_level = "info";
};

/// Per-invocation worker pool + execution flags.
struct Runtime {
    std::optional<ThreadPool> pool;
    ExecContext exec;

    explicit Runtime(const GlobalOpts& g) {
        log::set_level(log::parse_level(g.log_level));
        if (g.threads != 1) pool.emplace(g.threads);
        exec.pool = pool ? &*pool : nullptr;
        exec.deterministic = g.deterministic;
    }
};

void remove_if_exists(const fs::path& p) {
    std::error_code ec;
    fs::remove(p, ec);
}

void print_group_table(const SplatCloud& cloud) {
    std::map<std::uint32_t, std::size_t> counts;
    for (const GaussianKernel& k : cloud.kernels) ++counts[k.group_id];
    std::printf("%-6s %-8s %-8s %12s %14s %8s  %s\n", "group", "kernels", "material", "density",
                "youngs_mod", "poisson", "name");
    for (const auto& [group, props] : cloud.materials) {
        const auto it = counts.find(group);
        const std::size_t n = it == counts.end() ? 0 : it->second;
        std::printf("%-6u %-8zu %-8s %12g %14g %8g  %s\n", group, n,
                    to_string(props.material_type).c_str(), props.density, props.youngs_modulus,
                    props.poissons_ratio, props.name.c_str());
    }
    if (counts.count(kNoGroup))
        std::printf("%-6s %-8zu\n", "none", counts.at(kNoGroup));
}

int cmd_synth(const GlobalOpts& g, const std::string& scene_name, const std::string& out_dir,
              int views) {
    Runtime rt(g);
    const SynthScene scene = make_scene(scene_name);
    const bool existed = fs::exists(out_dir);
    if (existed && !fs::is_directory(out_dir))
        throw IoError("output path exists and is not a directory: " + out_dir);
    if (existed && !fs::is_empty(out_dir))
        throw IoError("output directory is not empty: " + out_dir);
    try {
        const std::string manifest = write_scene_bundle(scene, out_dir, views, rt.exec);
        std::printf("scene %s: %zu kernels, %zu groups, %d views\nmanifest: %s\n",
                    scene.name.c_str(), scene.cloud.count(), scene.hints.size(), views,
                    manifest.c_str());
    } catch (...) {
        // leave no partial bundle behind; the directory contents are all ours
        std::error_code ec;
        if (!existed) {
            fs::remove_all(out_dir, ec);
        } else {
            for (fs::directory_iterator it(out_dir, ec); !ec && it != fs::directory_iterator();
                 it.increment(ec))
                fs::remove_all(it->path(), ec);
        }
        throw;
    }
    return 0;
}

struct PerceiveArgs {
    std::string input, manifest, out;
    std::string embedder = "mean-rgb";
    std::string reasoner = "static";
    int hist_grid = 0;
    std::string embedder_url, embedder_key;
    std::size_t embedder_dim = 0;
    double occlusion = 0.1;
    std::size_t smooth_k = 300;
    double min_opacity = 0.02;
};

int cmd_perceive(const GlobalOpts& g, const PerceiveArgs& a) {
    Runtime rt(g);
    SplatCloud cloud = load_splat_ply(a.input);
    const SceneManifest manifest = load_manifest(a.manifest);
    const std::string manifest_dir = fs::path(a.manifest).parent_path().string();

    std::unique_ptr<EmbeddingProvider> embedder;
    if (a.embedder == "mean-rgb") {
        embedder = std::make_unique<MeanRgbEmbedder>(a.hist_grid);
    } else if (a.embedder == "http") {
        if (a.embedder_url.empty() || a.embedder_dim == 0)
            throw ContractError("--embedder http needs --embedder-url and --embedder-dim");
        embedder =
            std::make_unique<HttpEmbeddingProvider>(a.embedder_url, a.embedder_dim, a.embedder_key);
    } else {
        throw ContractError("unknown embedder '" + a.embedder + "' (use mean-rgb or http)");
    }

    std::unique_ptr<MaterialReasoner> reasoner;
    if (a.reasoner == "static") {
        reasoner = std::make_unique<StaticTableReasoner>(); // fully offline
    } else if (a.reasoner == "http") {
        reasoner = std::make_unique<HttpMaterialReasoner>(HttpMaterialReasoner::options_from_env());
    } else {
        throw ContractError("unknown reasoner '" + a.reasoner + "' (use static or http)");
    }

    PerceptionParams params;
    params.occlusion_threshold = a.occlusion;
    params.smooth_k = a.smooth_k;
    params.min_opacity = a.min_opacity;

    fs::path groups_path(a.out);
    groups_path.replace_extension(".groups");
    try {
        const PerceptionStats stats =
            run_perception(cloud, manifest, manifest_dir, *embedder, *reasoner, params, rt.exec);
        save_labeled_cloud(cloud, a.out);
        std::printf("labeled %zu kernels over %zu views (%zu voted, %zu filled, %zu smoothed)\n",
                    cloud.count(), manifest.views.size(), stats.visible, stats.filled,
                    stats.smoothed);
        print_group_table(cloud);
        std::printf("sidecar: %s\n", a.out.c_str());
    } catch (...) {
        remove_if_exists(a.out);
        remove_if_exists(groups_path);
        throw;
    }
    return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& input, const std::string& labels,
                 const std::string& config_path, const std::string& out_dir) {
    Runtime rt(g);
    SplatCloud cloud = load_splat_ply(input);
    load_labeled_cloud(cloud, labels); // kernel-count mismatch dies here, before any dynamics
    SimulationConfig config;
    if (!config_path.empty())
        config = load_simulation_config(config_path);
    else
        config.validate();

    const RunReport report = simulate_to_directory(cloud, config, out_dir, rt.exec);
    std::printf("%d/%d frames -> %s (%.3f s simulated, %.2f s wall)\n", report.frames_written,
                config.frames, out_dir.c_str(), report.simulated_seconds, report.wall_seconds);
    if (!report.completed) {
        log::error("run aborted: " + report.failure);
        return 1;
    }
    return 0;
}

int cmd_info(const GlobalOpts& g, const std::string& input, const std::string& labels) {
    Runtime rt(g);
    SplatCloud cloud = load_splat_ply(input);
    if (!labels.empty()) load_labeled_cloud(cloud, labels);

    std::printf("kernels: %zu\n", cloud.count());
    if (cloud.count() > 0) {
        Vec3 lo = cloud.kernels.front().position, hi = lo;
        double omin = cloud.kernels.front().opacity, omax = omin;
        for (const GaussianKernel& k : cloud.kernels) {
            lo = lo.cwiseMin(k.position);
            hi = hi.cwiseMax(k.position);
            omin = std::min(omin, k.opacity);
            omax = std::max(omax, k.opacity);
        }
        std::printf("bounds: [%g, %g, %g] .. [%g, %g, %g]\n", lo.x(), lo.y(), lo.z(), hi.x(),
                    hi.y(), hi.z());
        std::printf("opacity: %g .. %g\n", omin, omax);
    }
    if (!cloud.materials.empty()) print_group_table(cloud);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splat material perception and MPM simulation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--threads", g.threads, "worker threads (0 = all cores, 1 = serial)");
    app.add_flag("--deterministic,!--no-deterministic", g.deterministic,
                 "bit-reproducible parallel scatter (default on)");
    app.add_option("--log-level", g.log_level, "debug | info | warn | error")
        ->capture_default_str();
    app.set_version_flag("--version", std::string(kToolVersion));

    int status = 0;

    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic scene bundle");
    std::string synth_scene, synth_out;
    int synth_views = 29;
    synth->add_option("scene", synth_scene, "scene name (see error message for the list)")
        ->required();
    synth->add_option("-o,--out", synth_out, "output directory")->required();
    synth->add_option("--views", synth_views, "number of orbit views")->check(CLI::PositiveNumber);
    synth->callback([&] { status = cmd_synth(g, synth_scene, synth_out, synth_views); });

    auto* perceive =
        app.add_subcommand("perceive", "assign material groups and properties to a cloud");
    PerceiveArgs pa;
    perceive->add_option("input", pa.input, "input splat PLY")->required();
    perceive->add_option("-m,--manifest", pa.manifest, "scene manifest JSON")->required();
    perceive->add_option("-o,--out", pa.out, "output label sidecar JSON")->required();
    perceive->add_option("--embedder", pa.embedder, "mean-rgb | http")->capture_default_str();
    perceive->add_option("--hist-grid", pa.hist_grid, "mean-rgb layout histogram grid (0 = off)");
    perceive->add_option("--embedder-url", pa.embedder_url, "http embedder endpoint");
    perceive->add_option("--embedder-dim", pa.embedder_dim, "http embedder dimension");
    perceive->add_option("--embedder-key", pa.embedder_key, "http embedder bearer token");
    perceive
        ->add_option("--reasoner", pa.reasoner,
                     "static | http (http reads REASONER_URL / REASONER_API_KEY)")
        ->capture_default_str();
    perceive->add_option("--occlusion", pa.occlusion, "visibility depth threshold")
        ->capture_default_str();
    perceive->add_option("--smooth-k", pa.smooth_k, "neighborhood size for label smoothing")
        ->capture_default_str();
    perceive->add_option("--min-opacity", pa.min_opacity, "depth-render floater cutoff")
        ->capture_default_str();
    perceive->callback([&] { status = cmd_perceive(g, pa); });

    auto* simulate = app.add_subcommand("simulate", "run the MPM simulation and export frames");
    std::string sim_input, sim_labels, sim_config, sim_out;
    simulate->add_option("input", sim_input, "input splat PLY")->required();
    simulate->add_option("-l,--labels", sim_labels, "label sidecar JSON from perceive")
        ->required();
    simulate->add_option("-c,--config", sim_config, "simulation config TOML (defaults if omitted)");
    simulate->add_option("-o,--out", sim_out, "output frame directory")->required();
    simulate->callback([&] { status = cmd_simulate(g, sim_input, sim_labels, sim_config, sim_out); });

    auto* info = app.add_subcommand("info", "print cloud statistics");
    std::string info_input, info_labels;
    info->add_option("input", info_input, "input splat PLY")->required();
    info->add_option("-l,--labels", info_labels, "optional label sidecar JSON");
    info->callback([&] { status = cmd_info(g, info_input, info_labels); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        log::error(e.what());
        return 1;
    }
    return status;
}
