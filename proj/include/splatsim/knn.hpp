#pragma once

#include "splatsim/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace splatsim {

/// Exact k-nearest-neighbor queries over a fixed point set, backed by a
/// uniform spatial hash with cell size = longest bounding-box extent / 32.
/// Candidates are ranked by (squared distance, index), so results are unique
/// even under distance ties and independent of construction order.
class SpatialHashKnn {
public:
    explicit SpatialHashKnn(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }

    /// The k nearest points to points[query], query itself included, ordered
    /// by (squared distance, index). k is clamped to size().
    std::vector<std::uint32_t> nearest(std::uint32_t query, std::size_t k) const;

    /// Nearest point to pos among those with eligible[i] != 0, by
    /// (squared distance, index). nullopt when no point is eligible.
    /// eligible may be empty, meaning every point qualifies.
    std::optional<std::uint32_t> nearest_eligible(const Vec3& pos,
                                                  const std::vector<std::uint8_t>& eligible) const;

private:
    Vec3i cell_of(const Vec3& p) const;
    std::size_t cell_index(const Vec3i& c) const { return (static_cast<std::size_t>(c.x()) * dims_.y() + c.y()) * dims_.z() + c.z(); }

    std::vector<Vec3> points_;
    Vec3 lo_;
    double cell_ = 1.0;
    Vec3i dims_ = Vec3i::Ones();
    int max_ring_ = 0;
    std::vector<std::uint32_t> cell_start_; // prefix offsets into order_
    std::vector<std::uint32_t> order_;      // point indices grouped by cell
};

} // namespace splatsim
