// Grid sweep over base points and partitioning into regions of constant
// dimension and isomorphism class.
//
// Points are independent: workers pull indices from an atomic counter and
// write into a preallocated result array, so parallel and serial runs produce
// identical results. Partitioning is a single-threaded flood fill over
// 4-neighborhoods; a cell joins a region only if it is stable, matches the
// region dimension, and tests isomorphic to the region representative
// (representative-based comparison sidesteps the non-transitivity of the
// tolerance-based relation).

#pragma once

#include <atomic>
#include <cmath>
#include <deque>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "liesym/isoclass.hpp"

namespace liesym {

struct GridSpec {
    double xmin = 0.0, xmax = 5.0, xstep = 0.2;
    double umin = 0.0, umax = 5.0, ustep = 0.2;
    ToleranceConfig tol;

    void validate() const {
        tol.validate();
        if (!(xstep > 0.0) || !(ustep > 0.0)) throw input_error("grid steps must be positive");
        if (!(xmin < xmax) || !(umin < umax)) throw input_error("grid ranges must be nonempty");
    }
};

/// Inclusive axis values min, min+step, ..., through max (within rounding).
inline std::vector<double> axis_values(double min, double max, double step) {
    int n = static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = min + step * i;
    return v;
}

struct PointResult {
    enum class Status { Stable, Borderline, Unstable, Error };

    double x = 0.0, u = 0.0;
    Status status = Status::Error;
    int dim = -1;      // present iff stable/borderline
    int qprime = -1;
    double sigma_lie_max = std::numeric_limits<double>::quiet_NaN();
    double sigma_jacobi_max = std::numeric_limits<double>::quiet_NaN();
    double theta_max = std::numeric_limits<double>::quiet_NaN();
    std::shared_ptr<const StructureTensor> tensor;  // iff stable and dim >= 1
    std::string error;
    int region = 0;
};

inline const char* to_string(PointResult::Status s) {
    switch (s) {
        case PointResult::Status::Stable: return "stable";
        case PointResult::Status::Borderline: return "borderline";
        case PointResult::Status::Unstable: return "unstable";
        case PointResult::Status::Error: return "error";
    }
    return "?";
}

struct ScanResult {
    GridSpec grid;
    std::vector<double> xs, us;
    // row-major: index = iu * xs.size() + ix
    std::vector<PointResult> points;

    std::size_t index(std::size_t ix, std::size_t iu) const { return iu * xs.size() + ix; }
    const PointResult& at(std::size_t ix, std::size_t iu) const { return points[index(ix, iu)]; }
};

namespace detail {

inline PointResult compute_point(ProlongationTower& tower, double x0, double u0,
                                 const ToleranceConfig& cfg) {
    PointResult pr;
    pr.x = x0;
    pr.u = u0;
    try {
        InvolutiveForm IF = involutive_completion(tower, {x0, u0}, cfg);
        switch (IF.status) {
            case CompletionStatus::Stable: pr.status = PointResult::Status::Stable; break;
            case CompletionStatus::Borderline: pr.status = PointResult::Status::Borderline; break;
            case CompletionStatus::Unstable: pr.status = PointResult::Status::Unstable; break;
        }
        if (IF.status != CompletionStatus::Unstable) {
            pr.dim = IF.r;
            pr.qprime = IF.qprime;
        }
        if (IF.status == CompletionStatus::Stable && IF.r >= 1) {
            auto [tensor, rep] = structure_constants(IF);
            pr.sigma_lie_max = rep.sigma_lie_max;
            pr.sigma_jacobi_max = rep.sigma_jacobi_max;
            pr.theta_max = rep.theta_max;
            pr.tensor = std::make_shared<StructureTensor>(std::move(tensor));
        }
    } catch (const std::exception& e) {
        pr = PointResult{};
        pr.x = x0;
        pr.u = u0;
        pr.status = PointResult::Status::Error;
        pr.error = e.what();
    }
    return pr;
}

}  // namespace detail

/// Sweeps the grid; one PointResult per cell, never aborting on per-point
/// failures. `threads` <= 1 runs serially; results are identical either way.
inline ScanResult scan_grid(const ODESpec& ode, const GridSpec& grid, int threads = 1) {
    grid.validate();
    ScanResult out;
    out.grid = grid;
    out.xs = axis_values(grid.xmin, grid.xmax, grid.xstep);
    out.us = axis_values(grid.umin, grid.umax, grid.ustep);
    out.points.resize(out.xs.size() * out.us.size());

    DeterminingSystem sys = generate_determining_system(ode);
    ProlongationTower tower(sys);

    const std::size_t total = out.points.size();
    auto worker_body = [&](std::size_t idx) {
        std::size_t ix = idx % out.xs.size();
        std::size_t iu = idx / out.xs.size();
        out.points[idx] = detail::compute_point(tower, out.xs[ix], out.us[iu], grid.tol);
    };

    if (threads <= 1) {
        for (std::size_t i = 0; i < total; ++i) worker_body(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        int nw = std::min<int>(threads, static_cast<int>(total));
        pool.reserve(static_cast<std::size_t>(nw));
        for (int t = 0; t < nw; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= total) return;
                    worker_body(i);
                }
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

struct Region {
    int id = 0;
    int dim = -1;
    int cell_count = 0;
    std::size_t rep_index = 0;
    std::shared_ptr<const StructureTensor> tensor;  // absent for dim 0
};

struct RegionMap {
    std::vector<int> region_of;  // aligned with ScanResult::points; 0 = no region
    std::vector<Region> regions;
};

/// Flood fill over 4-neighborhoods; updates PointResult::region in place.
inline RegionMap partition_regions(ScanResult& scan, const IsoConfig& iso = {}) {
    const std::size_t nx = scan.xs.size(), nu = scan.us.size();
    RegionMap map;
    map.region_of.assign(scan.points.size(), 0);

    auto stable = [&](std::size_t idx) {
        return scan.points[idx].status == PointResult::Status::Stable;
    };

    int next_id = 1;
    for (std::size_t seed = 0; seed < scan.points.size(); ++seed) {
        if (!stable(seed) || map.region_of[seed] != 0) continue;
        Region reg;
        reg.id = next_id++;
        reg.dim = scan.points[seed].dim;
        reg.rep_index = seed;
        reg.tensor = scan.points[seed].tensor;

        std::deque<std::size_t> queue{seed};
        map.region_of[seed] = reg.id;
        while (!queue.empty()) {
            std::size_t idx = queue.front();
            queue.pop_front();
            ++reg.cell_count;
            std::size_t ix = idx % nx, iu = idx / nx;
            std::size_t nbrs[4];
            int nn = 0;
            if (ix > 0) nbrs[nn++] = idx - 1;
            if (ix + 1 < nx) nbrs[nn++] = idx + 1;
            if (iu > 0) nbrs[nn++] = idx - nx;
            if (iu + 1 < nu) nbrs[nn++] = idx + nx;
            for (int t = 0; t < nn; ++t) {
                std::size_t nb = nbrs[t];
                if (map.region_of[nb] != 0 || !stable(nb)) continue;
                if (scan.points[nb].dim != reg.dim) continue;
                if (reg.dim >= 1) {
                    IsoVerdict v = test_isomorphism(*scan.points[nb].tensor, *reg.tensor, iso);
                    if (v.outcome != IsoOutcome::Isomorphic) continue;
                }
                map.region_of[nb] = reg.id;
                queue.push_back(nb);
            }
        }
        map.regions.push_back(std::move(reg));
    }
    for (std::size_t i = 0; i < scan.points.size(); ++i)
        scan.points[i].region = map.region_of[i];
    return map;
}

}  // namespace liesym
