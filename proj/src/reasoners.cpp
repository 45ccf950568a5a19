#include "splatsim/reasoners.hpp"

#include "splatsim/base64.hpp"
#include "http_json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace splatsim {

using nlohmann::json;

namespace {

MaterialProperties make_props(MaterialType type, double rho, double e, double nu,
                              const std::string& name) {
    MaterialProperties p;
    p.material_type = type;
    p.density = rho;
    p.youngs_modulus = e;
    p.poissons_ratio = nu;
    p.name = name;
    return p;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

const std::vector<std::pair<std::string, MaterialProperties>>& StaticTableReasoner::table() {
    static const std::vector<std::pair<std::string, MaterialProperties>> t = {
        {"snow", make_props(MaterialType::snow, 400.0, 1.4e5, 0.2, "snow")},
        {"sand", make_props(MaterialType::sand, 1600.0, 3.5e5, 0.3, "sand")},
        {"rubber", make_props(MaterialType::elastic, 1100.0, 5e6, 0.47, "rubber")},
        {"jelly", make_props(MaterialType::elastic, 1000.0, 5e4, 0.45, "jelly")},
        {"wood", make_props(MaterialType::elastic, 700.0, 1e8, 0.35, "wood")},
        {"metal", make_props(MaterialType::elastic, 7800.0, 1e8, 0.3, "metal")},
        {"plush", make_props(MaterialType::elastic, 300.0, 2e4, 0.35, "plush")},
        {"plant", make_props(MaterialType::elastic, 800.0, 5e5, 0.35, "plant")},
        {"elastic", make_props(MaterialType::elastic, 1000.0, 1e6, 0.3, "elastic")},
    };
    return t;
}

MaterialProperties StaticTableReasoner::lookup(const std::string& hint) {
    const std::string needle = lowercase(hint);
    for (const auto& [keyword, props] : table())
        if (!needle.empty() && needle.find(keyword) != std::string::npos) return props;
    return table().back().second; // generic elastic
}

std::vector<MaterialProperties> StaticTableReasoner::reason(
    const ImageRgb8&, const std::vector<ImageRgb8>& sub_images,
    const std::vector<std::string>& hints) {
    std::vector<MaterialProperties> out;
    out.reserve(sub_images.size());
    for (std::size_t i = 0; i < sub_images.size(); ++i) {
        const std::string hint = i < hints.size() ? hints[i] : std::string{};
        MaterialProperties p = lookup(hint);
        if (!hint.empty()) p.name = hint;
        out.push_back(p);
    }
    return out;
}

HttpMaterialReasoner::Options HttpMaterialReasoner::options_from_env() {
    Options o;
    if (const char* url = std::getenv("REASONER_URL")) o.url = url;
    if (const char* key = std::getenv("REASONER_API_KEY")) o.api_key = key;
    return o;
}

HttpMaterialReasoner::HttpMaterialReasoner(Options opts) : opts_(std::move(opts)) {
    if (opts_.url.empty())
        throw ContractError("HttpMaterialReasoner: no URL (set REASONER_URL or pass one)");
}

std::vector<MaterialProperties> HttpMaterialReasoner::reason(
    const ImageRgb8& full_image, const std::vector<ImageRgb8>& sub_images,
    const std::vector<std::string>& hints) {
    const std::size_t regions = sub_images.size();

    std::string prompt =
        "You are a materials analyst for a physics simulation. The first image "
        "shows the full scene; each following image isolates one material "
        "region on a black background. For every region, identify the material "
        "and estimate simulation parameters. Reply with JSON only: "
        "{\"materials\":[{\"group_id\":<1-based region>,\"material_type\":"
        "\"elastic\"|\"snow\"|\"sand\",\"name\":<short text>,\"density\":<kg/m3>,"
        "\"youngs_modulus\":<Pa>,\"poissons_ratio\":<number>}]} with exactly one "
        "entry per region, " +
        std::to_string(regions) + " in total.";
    for (std::size_t i = 0; i < hints.size() && i < regions; ++i)
        if (!hints[i].empty())
            prompt += " Region " + std::to_string(i + 1) + " hint: " + hints[i] + ".";

    json body;
    body["prompt"] = prompt;
    body["temperature"] = opts_.temperature;
    body["images"] = json::array();
    body["images"].push_back(base64_encode(encode_png(full_image)));
    for (const auto& sub : sub_images) body["images"].push_back(base64_encode(encode_png(sub)));

    const json reply =
        http_post_json({opts_.url, opts_.api_key, opts_.timeout_s, opts_.retries}, body);
    if (!reply.contains("materials") || !reply["materials"].is_array())
        throw ParseError("reasoner reply lacks a 'materials' array; payload: " + reply.dump());
    const auto& materials = reply["materials"];
    if (materials.size() != regions)
        throw ContractError("reasoner returned " + std::to_string(materials.size()) +
                            " materials for " + std::to_string(regions) + " regions");

    std::vector<MaterialProperties> out(regions);
    std::vector<bool> seen(regions, false);
    for (const auto& jm : materials) {
        std::size_t group;
        try {
            group = jm.at("group_id").get<std::size_t>();
            MaterialProperties p;
            p.material_type = material_type_from_string(jm.at("material_type"));
            p.name = jm.value("name", std::string{});
            p.density = jm.at("density");
            p.youngs_modulus = jm.at("youngs_modulus");
            p.poissons_ratio = jm.at("poissons_ratio");
            if (group < 1 || group > regions)
                throw ContractError("reasoner group_id " + std::to_string(group) +
                                    " outside 1.." + std::to_string(regions));
            out[group - 1] = p;
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed reasoner material entry (") + e.what() +
                             "); payload: " + jm.dump());
        }
        if (seen[group - 1])
            throw ContractError("reasoner repeated group_id " + std::to_string(group));
        seen[group - 1] = true;
    }
    return out;
}

} // namespace splatsim
