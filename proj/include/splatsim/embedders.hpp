#pragma once

#include "splatsim/perception.hpp"

#include <string>

namespace splatsim {

/// Deterministic test embedder: mean RGB of the region ([0,1] channels).
/// histogram_grid > 0 appends a grid x grid occupancy histogram of the
/// region's pixel footprint (normalized image coordinates), which separates
/// same-colored regions by layout; dimension = 3 + grid^2.
class MeanRgbEmbedder : public EmbeddingProvider {
public:
    explicit MeanRgbEmbedder(int histogram_grid = 0);

    std::size_t dimension() const override;
    FeatureVector embed(const ImageRgb8& masked,
                        const std::vector<std::uint8_t>& mask) const override;

private:
    int grid_;
};

/// Remote embedding service: POST {image, mask: base64 PNG} -> {embedding:
/// [doubles]}. The reply dimension must match the one declared here.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string url, std::size_t dimension, std::string api_key = {},
                          int timeout_s = 30, int retries = 2);

    std::size_t dimension() const override { return dimension_; }
    FeatureVector embed(const ImageRgb8& masked,
                        const std::vector<std::uint8_t>& mask) const override;

private:
    std::string url_;
    std::size_t dimension_;
    std::string api_key_;
    int timeout_s_;
    int retries_;
};

} // namespace splatsim
