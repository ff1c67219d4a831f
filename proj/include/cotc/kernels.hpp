#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cotc {

enum class Metric { Cosine, Euclidean };

enum class Execution { Serial, Parallel };

// Row-major n x d matrix with cached row norms.
class PointMatrix {
public:
    PointMatrix() = default;
    explicit PointMatrix(const std::vector<std::vector<double>>& rows);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
    double norm(std::size_t i) const { return norms_[i]; }

    // Exact value used by every kernel, symmetric in (i, j) bit for bit.
    double distance(std::size_t i, std::size_t j, Metric metric) const;

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<double> data_;
    std::vector<double> norms_;
};

double dot(std::span<const double> a, std::span<const double> b);

// Cosine distance is 1 - cos, clamped to [0, 2]; a zero vector is at distance
// 0 from another zero vector and 1 from anything else. Identical rows are at distance exactly 0.
double point_distance(std::span<const double> a, double norm_a, std::span<const double> b, double norm_b,
                      Metric metric);

// Each kernel has a serial reference and an OpenMP variant with identical
// results: rows are computed independently and reductions use a total order.
namespace serial {
std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric);
void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric);
// Index of the unselected entry with the largest min_dist; ties go to the
// smallest tie_rank. Returns size() when every entry is selected.
std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank);
}  // namespace serial

namespace parallel {
std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric);
void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric);
std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank);
}  // namespace parallel

std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric,
                                                     Execution exec);
void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric,
                         Execution exec);
std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank, Execution exec);

}  // namespace cotc
