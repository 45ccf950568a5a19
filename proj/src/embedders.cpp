#include "splatsim/embedders.hpp"

#include "splatsim/base64.hpp"
#include "http_json.hpp"

namespace splatsim {

using nlohmann::json;

MeanRgbEmbedder::MeanRgbEmbedder(int histogram_grid) : grid_(histogram_grid) {
    if (grid_ < 0) throw ContractError("MeanRgbEmbedder: histogram grid must be >= 0");
}

std::size_t MeanRgbEmbedder::dimension() const {
    return 3 + static_cast<std::size_t>(grid_) * grid_;
}

FeatureVector MeanRgbEmbedder::embed(const ImageRgb8& masked,
                                     const std::vector<std::uint8_t>& mask) const {
    FeatureVector out;
    out.values.assign(dimension(), 0.0);
    std::size_t covered = 0;
    for (int y = 0; y < masked.height; ++y)
        for (int x = 0; x < masked.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * masked.width + x;
            if (!mask[i]) continue;
            ++covered;
            const std::uint8_t* px = masked.px(x, y);
            for (int c = 0; c < 3; ++c) out.values[c] += px[c] / 255.0;
            if (grid_ > 0) {
                const int bx = std::min(grid_ - 1, x * grid_ / masked.width);
                const int by = std::min(grid_ - 1, y * grid_ / masked.height);
                out.values[3 + static_cast<std::size_t>(by) * grid_ + bx] += 1.0;
            }
        }
    if (covered == 0) throw ContractError("MeanRgbEmbedder: empty mask");
    for (double& v : out.values) v /= static_cast<double>(covered);
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::size_t dimension,
                                             std::string api_key, int timeout_s, int retries)
    : url_(std::move(url)), dimension_(dimension), api_key_(std::move(api_key)),
      timeout_s_(timeout_s), retries_(retries) {
    if (dimension_ == 0) throw ContractError("HttpEmbeddingProvider: dimension must be > 0");
}

FeatureVector HttpEmbeddingProvider::embed(const ImageRgb8& masked,
                                           const std::vector<std::uint8_t>& mask) const {
    ImageGray16 mask_img(masked.width, masked.height);
    for (std::size_t i = 0; i < mask.size(); ++i) mask_img.data[i] = mask[i] ? 1 : 0;

    json body;
    body["image"] = base64_encode(encode_png(masked));
    body["mask"] = base64_encode(encode_png(mask_img));

    const json reply =
        http_post_json({url_, api_key_, timeout_s_, retries_}, body);
    if (!reply.contains("embedding") || !reply["embedding"].is_array())
        throw ParseError("embedding service reply lacks an 'embedding' array; payload: " +
                         reply.dump());
    FeatureVector out;
    out.values = reply["embedding"].get<std::vector<double>>();
    if (out.values.size() != dimension_)
        throw ContractError("embedding service returned dimension " +
                            std::to_string(out.values.size()) + ", expected " +
                            std::to_string(dimension_));
    return out;
}

} // namespace splatsim
