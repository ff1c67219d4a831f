#include "cotc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cotc/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cotc {

PointMatrix::PointMatrix(const std::vector<std::vector<double>>& rows) : n_(rows.size()) {
    d_ = rows.empty() ? 0 : rows.front().size();
    data_.reserve(n_ * d_);
    norms_.reserve(n_);
    for (const auto& r : rows) {
        if (r.size() != d_) throw InvariantError("points", "dimension mismatch");
        for (double x : r) {
            if (!std::isfinite(x)) throw InvariantError("points", "non-finite coordinate");
        }
        data_.insert(data_.end(), r.begin(), r.end());
        norms_.push_back(std::sqrt(dot(r, r)));
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double point_distance(std::span<const double> a, double norm_a, std::span<const double> b, double norm_b,
                      Metric metric) {
    if (metric == Metric::Euclidean) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double diff = a[k] - b[k];
            s += diff * diff;
        }
        return std::sqrt(s);
    }
    if (norm_a == 0.0 || norm_b == 0.0) return (norm_a == 0.0 && norm_b == 0.0) ? 0.0 : 1.0;
    if (std::equal(a.begin(), a.end(), b.begin(), b.end())) return 0.0;  // no rounding residue for duplicates
    const double cos = dot(a, b) / (norm_a * norm_b);
    return std::clamp(1.0 - cos, 0.0, 2.0);
}

double PointMatrix::distance(std::size_t i, std::size_t j, Metric metric) const {
    if (i == j) return 0.0;
    return point_distance(row(i), norms_[i], row(j), norms_[j], metric);
}

namespace {

std::vector<std::size_t> neighbors_of(const PointMatrix& points, std::size_t i, double eps, Metric metric) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (points.distance(i, j, metric) <= eps) out.push_back(j);
    }
    return out;
}

// Total order: larger distance first, then smaller tie rank.
bool better(double da, std::size_t ra, double db, std::size_t rb) { return da > db || (da == db && ra < rb); }

}  // namespace

namespace serial {

std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric) {
    std::vector<std::vector<std::size_t>> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = neighbors_of(points, i, eps, metric);
    return out;
}

void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric) {
    for (std::size_t j = 0; j < points.size(); ++j) {
        min_dist[j] = std::min(min_dist[j], points.distance(pivot, j, metric));
    }
}

std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank) {
    std::size_t best = min_dist.size();
    for (std::size_t j = 0; j < min_dist.size(); ++j) {
        if (selected[j]) continue;
        if (best == min_dist.size() || better(min_dist[j], tie_rank[j], min_dist[best], tie_rank[best])) best = j;
    }
    return best;
}

}  // namespace serial

namespace parallel {

std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric) {
    const auto n = static_cast<std::ptrdiff_t>(points.size());
    std::vector<std::vector<std::size_t>> out(points.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = neighbors_of(points, static_cast<std::size_t>(i), eps, metric);
    }
    return out;
}

void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric) {
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const auto u = static_cast<std::size_t>(j);
        min_dist[u] = std::min(min_dist[u], points.distance(pivot, u, metric));
    }
}

std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank) {
    const std::size_t none = min_dist.size();
    std::size_t best = none;
    const auto n = static_cast<std::ptrdiff_t>(min_dist.size());
#pragma omp parallel
    {
        std::size_t local = none;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t jj = 0; jj < n; ++jj) {
            const auto j = static_cast<std::size_t>(jj);
            if (selected[j]) continue;
            if (local == none || better(min_dist[j], tie_rank[j], min_dist[local], tie_rank[local])) local = j;
        }
#pragma omp critical(cotc_argmax)
        {
            if (local != none &&
                (best == none || better(min_dist[local], tie_rank[local], min_dist[best], tie_rank[best]))) {
                best = local;
            }
        }
    }
    return best;
}

}  // namespace parallel

std::vector<std::vector<std::size_t>> neighbor_lists(const PointMatrix& points, double eps, Metric metric,
                                                     Execution exec) {
    return exec == Execution::Parallel ? parallel::neighbor_lists(points, eps, metric)
                                       : serial::neighbor_lists(points, eps, metric);
}

void update_min_distance(const PointMatrix& points, std::size_t pivot, std::span<double> min_dist, Metric metric,
                         Execution exec) {
    if (exec == Execution::Parallel) {
        parallel::update_min_distance(points, pivot, min_dist, metric);
    } else {
        serial::update_min_distance(points, pivot, min_dist, metric);
    }
}

std::size_t argmax_unselected(std::span<const double> min_dist, std::span<const char> selected,
                              std::span<const std::size_t> tie_rank, Execution exec) {
    return exec == Execution::Parallel ? parallel::argmax_unselected(min_dist, selected, tie_rank)
                                       : serial::argmax_unselected(min_dist, selected, tie_rank);
}

}  // namespace cotc
