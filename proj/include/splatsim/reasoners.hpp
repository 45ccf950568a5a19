#pragma once

#include "splatsim/perception.hpp"

#include <string>
#include <utility>
#include <vector>

namespace splatsim {

/// Offline reasoner: the first table entry whose keyword occurs in the
/// region's hint (case-insensitive substring) supplies the properties; no
/// hint or no match falls back to the generic elastic entry. Shipped values
/// are standard simulation defaults.
class StaticTableReasoner : public MaterialReasoner {
public:
    std::vector<MaterialProperties> reason(const ImageRgb8& full_image,
                                           const std::vector<ImageRgb8>& sub_images,
                                           const std::vector<std::string>& hints) override;

    static const std::vector<std::pair<std::string, MaterialProperties>>& table();
    static MaterialProperties lookup(const std::string& hint);
};

/// Remote reasoner: POST {prompt, images: [base64 PNG...], temperature} ->
/// {materials: [{group_id, material_type, name, density, youngs_modulus,
/// poissons_ratio}, ...]}. The first image is the full view, followed by one
/// masked sub-image per region; replies must cover regions 1..M exactly once.
class HttpMaterialReasoner : public MaterialReasoner {
public:
    struct Options {
        std::string url;
        std::string api_key;
        double temperature = 0.8;
        int timeout_s = 60;
        int retries = 2;
    };

    /// url/api_key from REASONER_URL and REASONER_API_KEY.
    static Options options_from_env();

    explicit HttpMaterialReasoner(Options opts);

    std::vector<MaterialProperties> reason(const ImageRgb8& full_image,
                                           const std::vector<ImageRgb8>& sub_images,
                                           const std::vector<std::string>& hints) override;

private:
    Options opts_;
};

} // namespace splatsim
