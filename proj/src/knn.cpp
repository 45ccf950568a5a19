#include "splatsim/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splatsim {

SpatialHashKnn::SpatialHashKnn(std::vector<Vec3> points) : points_(std::move(points)) {
    lo_ = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    if (!points_.empty()) {
        lo_ = hi = points_[0];
        for (const Vec3& p : points_) {
            lo_ = lo_.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    const double extent = (hi - lo_).maxCoeff();
    cell_ = extent > 0.0 ? extent / 32.0 : 1.0;
    for (int a = 0; a < 3; ++a) {
        const int n = static_cast<int>(std::floor((hi[a] - lo_[a]) / cell_)) + 1;
        dims_[a] = std::max(1, n);
        max_ring_ = std::max(max_ring_, dims_[a]);
    }

    // Counting sort into cell buckets; order within a cell is by index.
    cell_start_.assign(static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z() + 1, 0);
    for (const Vec3& p : points_) ++cell_start_[cell_index(cell_of(p)) + 1];
    for (std::size_t i = 1; i < cell_start_.size(); ++i) cell_start_[i] += cell_start_[i - 1];
    order_.resize(points_.size());
    std::vector<std::uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::uint32_t i = 0; i < points_.size(); ++i)
        order_[cursor[cell_index(cell_of(points_[i]))]++] = i;
}

Vec3i SpatialHashKnn::cell_of(const Vec3& p) const {
    Vec3i c;
    for (int a = 0; a < 3; ++a) {
        const int v = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
        c[a] = std::clamp(v, 0, dims_[a] - 1);
    }
    return c;
}

namespace {

struct Candidate {
    double d2;
    std::uint32_t index;
    bool operator<(const Candidate& o) const {
        return d2 != o.d2 ? d2 < o.d2 : index < o.index;
    }
};

} // namespace

std::vector<std::uint32_t> SpatialHashKnn::nearest(std::uint32_t query, std::size_t k) const {
    k = std::min(k, points_.size());
    if (k == 0) return {};
    const Vec3 pos = points_[query];
    const Vec3i qc = cell_of(pos);

    std::vector<Candidate> found;
    found.reserve(2 * k);
    for (int ring = 0; ring <= max_ring_; ++ring) {
        // Chebyshev shell `ring` around the query cell.
        bool any_cell = false;
        for (int dx = -ring; dx <= ring; ++dx) {
            const int x = qc.x() + dx;
            if (x < 0 || x >= dims_.x()) continue;
            for (int dy = -ring; dy <= ring; ++dy) {
                const int y = qc.y() + dy;
                if (y < 0 || y >= dims_.y()) continue;
                const bool face = std::abs(dx) == ring || std::abs(dy) == ring;
                const int step = face ? 1 : std::max(1, 2 * ring);
                for (int dz = -ring; dz <= ring; dz += step) {
                    const int z = qc.z() + dz;
                    if (z < 0 || z >= dims_.z()) continue;
                    any_cell = true;
                    const std::size_t ci = cell_index(Vec3i(x, y, z));
                    for (std::uint32_t o = cell_start_[ci]; o < cell_start_[ci + 1]; ++o) {
                        const std::uint32_t idx = order_[o];
                        found.push_back({(points_[idx] - pos).squaredNorm(), idx});
                    }
                }
            }
        }
        if (!any_cell && ring > 0 && found.size() >= k) break;
        if (found.size() >= k) {
            std::nth_element(found.begin(), found.begin() + (k - 1), found.end());
            // Points in shell ring+1 are at least `ring` cells away.
            const double safe = ring * cell_;
            if (found[k - 1].d2 <= safe * safe) break;
        }
    }
    std::sort(found.begin(), found.end());
    found.resize(k);
    std::vector<std::uint32_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = found[i].index;
    return out;
}

std::optional<std::uint32_t> SpatialHashKnn::nearest_eligible(
    const Vec3& pos, const std::vector<std::uint8_t>& eligible) const {
    if (points_.empty()) return std::nullopt;
    const Vec3i qc = cell_of(pos);
    Candidate best{std::numeric_limits<double>::infinity(), 0};
    bool have = false;
    for (int ring = 0; ring <= max_ring_; ++ring) {
        for (int dx = -ring; dx <= ring; ++dx) {
            const int x = qc.x() + dx;
            if (x < 0 || x >= dims_.x()) continue;
            for (int dy = -ring; dy <= ring; ++dy) {
                const int y = qc.y() + dy;
                if (y < 0 || y >= dims_.y()) continue;
                const bool face = std::abs(dx) == ring || std::abs(dy) == ring;
                const int step = face ? 1 : std::max(1, 2 * ring);
                for (int dz = -ring; dz <= ring; dz += step) {
                    const int z = qc.z() + dz;
                    if (z < 0 || z >= dims_.z()) continue;
                    const std::size_t ci = cell_index(Vec3i(x, y, z));
                    for (std::uint32_t o = cell_start_[ci]; o < cell_start_[ci + 1]; ++o) {
                        const std::uint32_t idx = order_[o];
                        if (!eligible.empty() && !eligible[idx]) continue;
                        const Candidate c{(points_[idx] - pos).squaredNorm(), idx};
                        if (!have || c < best) {
                            best = c;
                            have = true;
                        }
                    }
                }
            }
        }
        if (have) {
            const double safe = ring * cell_;
            if (best.d2 <= safe * safe) break;
        }
    }
    if (!have) return std::nullopt;
    return best.index;
}

} // namespace splatsim
