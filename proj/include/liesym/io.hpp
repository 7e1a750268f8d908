// File formats: structure-tensor JSON, scan CSV/JSON, heatmap PPM + legend,
// isomorphism verdict JSON.
//
// Tensor schema:
//   {"dim": int, "c": [[[float]]],
//    "meta": {"x0","u0","tol","qprime"},
//    "reliability": {"sigma_lie_max","sigma_jacobi_max","theta_max"}}
// Scan CSV header (exact):
//   x,u,status,dim,qprime,sigma_lie_max,sigma_jacobi_max,region

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "liesym/scan.hpp"

namespace liesym {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Structure tensors

inline json tensor_to_json(const StructureTensor& t, double sigma_lie_max = 0.0,
                           double sigma_jacobi_max = 0.0, double theta_max = 0.0) {
    json c = json::array();
    for (int i = 0; i < t.dim; ++i) {
        json ci = json::array();
        for (int j = 0; j < t.dim; ++j) {
            json cij = json::array();
            for (int k = 0; k < t.dim; ++k) cij.push_back(t.at(i, j, k));
            ci.push_back(std::move(cij));
        }
        c.push_back(std::move(ci));
    }
    return json{{"dim", t.dim},
                {"c", std::move(c)},
                {"meta",
                 {{"x0", t.z0.size() > 0 ? t.z0[0] : 0.0},
                  {"u0", t.z0.size() > 1 ? t.z0[1] : 0.0},
                  {"tol", t.tol},
                  {"qprime", t.qprime}}},
                {"reliability",
                 {{"sigma_lie_max", sigma_lie_max},
                  {"sigma_jacobi_max", sigma_jacobi_max},
                  {"theta_max", theta_max}}}};
}

inline json tensor_to_json(const StructureTensor& t, const ReliabilityReport& rep) {
    return tensor_to_json(t, rep.sigma_lie_max, rep.sigma_jacobi_max, rep.theta_max);
}

/// Lenient on input: meta/reliability may be absent in hand-written files.
inline StructureTensor tensor_from_json(const json& j) {
    if (!j.contains("dim") || !j.contains("c"))
        throw io_error("tensor JSON needs 'dim' and 'c'");
    int n = j.at("dim").get<int>();
    if (n < 0 || n > 64) throw io_error("tensor dimension out of range");
    StructureTensor t(n);
    const json& c = j.at("c");
    if (static_cast<int>(c.size()) != n) throw io_error("tensor 'c' has wrong shape");
    for (int i = 0; i < n; ++i)
        for (int jdx = 0; jdx < n; ++jdx)
            for (int k = 0; k < n; ++k)
                t.set(i, jdx, k, c.at(i).at(jdx).at(k).get<double>());
    if (j.contains("meta")) {
        const json& m = j.at("meta");
        t.z0 = {m.value("x0", 0.0), m.value("u0", 0.0)};
        t.tol = m.value("tol", 0.0);
        t.qprime = m.value("qprime", -1);
    }
    return t;
}

inline StructureTensor load_tensor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    json j;
    in >> j;
    return tensor_from_json(j);
}

inline void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Isomorphism verdicts

inline json verdict_to_json(const IsoVerdict& v) {
    json phi = json::array();
    for (int i = 0; i < v.best.phi.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < v.best.phi.cols(); ++j) row.push_back(v.best.phi(i, j));
        phi.push_back(std::move(row));
    }
    return json{{"outcome", to_string(v.outcome)},
                {"residual", v.best.residual},
                {"sigma_min", v.best.sigma_min},
                {"phi", std::move(phi)},
                {"config",
                 {{"tol_iso", v.config.tol_iso},
                  {"delta", v.config.delta},
                  {"starts", v.config.starts},
                  {"max_iters", v.config.max_iters},
                  {"seed", v.config.seed}}}};
}

// ---------------------------------------------------------------------------
// Scan results

namespace detail {

inline std::string fmt_g(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

}  // namespace detail

inline std::string scan_to_csv(const ScanResult& scan) {
    std::string out = "x,u,status,dim,qprime,sigma_lie_max,sigma_jacobi_max,region\n";
    for (const PointResult& p : scan.points) {
        out += detail::fmt_g(p.x, 10);
        out += ',';
        out += detail::fmt_g(p.u, 10);
        out += ',';
        out += to_string(p.status);
        out += ',';
        if (p.dim >= 0) out += std::to_string(p.dim);
        out += ',';
        if (p.qprime >= 0) out += std::to_string(p.qprime);
        out += ',';
        if (std::isfinite(p.sigma_lie_max)) out += detail::fmt_g(p.sigma_lie_max, 9);
        out += ',';
        if (std::isfinite(p.sigma_jacobi_max)) out += detail::fmt_g(p.sigma_jacobi_max, 9);
        out += ',';
        out += std::to_string(p.region);
        out += '\n';
    }
    return out;
}

inline void write_csv(const ScanResult& scan, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    std::string csv = scan_to_csv(scan);
    out.write(csv.data(), static_cast<std::streamsize>(csv.size()));
    if (!out) throw io_error("write failed: " + path);
}

inline json scan_to_json(const ScanResult& scan, const RegionMap* regions = nullptr) {
    json pts = json::array();
    for (const PointResult& p : scan.points) {
        json jp{{"x", p.x}, {"u", p.u}, {"status", to_string(p.status)}, {"region", p.region}};
        if (p.dim >= 0) jp["dim"] = p.dim;
        if (p.qprime >= 0) jp["qprime"] = p.qprime;
        if (std::isfinite(p.sigma_lie_max)) jp["sigma_lie_max"] = p.sigma_lie_max;
        if (std::isfinite(p.sigma_jacobi_max)) jp["sigma_jacobi_max"] = p.sigma_jacobi_max;
        if (!p.error.empty()) jp["error"] = p.error;
        pts.push_back(std::move(jp));
    }
    json out{{"grid",
              {{"xmin", scan.grid.xmin},
               {"xmax", scan.grid.xmax},
               {"xstep", scan.grid.xstep},
               {"umin", scan.grid.umin},
               {"umax", scan.grid.umax},
               {"ustep", scan.grid.ustep},
               {"tol", scan.grid.tol.tol},
               {"kmax", scan.grid.tol.kmax},
               {"rho", scan.grid.tol.rho}}},
             {"points", std::move(pts)}};
    if (regions) {
        json regs = json::array();
        for (const Region& r : regions->regions) {
            json jr{{"id", r.id},
                    {"dim", r.dim},
                    {"cells", r.cell_count},
                    {"representative",
                     {{"x", scan.points[r.rep_index].x}, {"u", scan.points[r.rep_index].u}}}};
            if (r.tensor) {
                const PointResult& rep = scan.points[r.rep_index];
                jr["tensor"] = tensor_to_json(*r.tensor, rep.sigma_lie_max, rep.sigma_jacobi_max,
                                              rep.theta_max);
            }
            regs.push_back(std::move(jr));
        }
        out["regions"] = std::move(regs);
    }
    return out;
}

inline PointResult::Status status_from_string(const std::string& s) {
    if (s == "stable") return PointResult::Status::Stable;
    if (s == "borderline") return PointResult::Status::Borderline;
    if (s == "unstable") return PointResult::Status::Unstable;
    if (s == "error") return PointResult::Status::Error;
    throw io_error("unknown status '" + s + "'");
}

/// Rebuilds a ScanResult from its JSON export (tensors are not round-tripped
/// per point; the per-point scalar payload and grid are).
inline ScanResult scan_from_json(const json& j) {
    ScanResult out;
    const json& g = j.at("grid");
    out.grid.xmin = g.at("xmin").get<double>();
    out.grid.xmax = g.at("xmax").get<double>();
    out.grid.xstep = g.at("xstep").get<double>();
    out.grid.umin = g.at("umin").get<double>();
    out.grid.umax = g.at("umax").get<double>();
    out.grid.ustep = g.at("ustep").get<double>();
    out.grid.tol.tol = g.at("tol").get<double>();
    out.grid.tol.kmax = g.value("kmax", 8);
    out.grid.tol.rho = g.value("rho", 10.0);
    out.xs = axis_values(out.grid.xmin, out.grid.xmax, out.grid.xstep);
    out.us = axis_values(out.grid.umin, out.grid.umax, out.grid.ustep);
    for (const json& jp : j.at("points")) {
        PointResult p;
        p.x = jp.at("x").get<double>();
        p.u = jp.at("u").get<double>();
        p.status = status_from_string(jp.at("status").get<std::string>());
        p.dim = jp.value("dim", -1);
        p.qprime = jp.value("qprime", -1);
        if (jp.contains("sigma_lie_max")) p.sigma_lie_max = jp.at("sigma_lie_max").get<double>();
        if (jp.contains("sigma_jacobi_max"))
            p.sigma_jacobi_max = jp.at("sigma_jacobi_max").get<double>();
        p.region = jp.value("region", 0);
        p.error = jp.value("error", "");
        out.points.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Heatmap (binary PPM, one pixel per cell, u increasing upward)

struct Rgb {
    unsigned char r, g, b;
};

/// Fixed palette: 0 black; 1..8 distinct colors; borderline gray; unstable
/// white; error red. Dimensions above 8 reuse the color of 8.
inline Rgb heatmap_color(const PointResult& p) {
    switch (p.status) {
        case PointResult::Status::Error: return {255, 0, 0};
        case PointResult::Status::Unstable: return {255, 255, 255};
        case PointResult::Status::Borderline: return {128, 128, 128};
        case PointResult::Status::Stable: break;
    }
    static const std::array<Rgb, 9> dim_colors{{{0, 0, 0},        // 0
                                                {230, 159, 0},    // 1
                                                {86, 180, 233},   // 2
                                                {0, 158, 115},    // 3
                                                {240, 228, 66},   // 4
                                                {0, 114, 178},    // 5
                                                {213, 94, 0},     // 6
                                                {204, 121, 167},  // 7
                                                {0, 255, 127}}};  // 8
    int d = std::min(std::max(p.dim, 0), 8);
    return dim_colors[static_cast<std::size_t>(d)];
}

inline std::string legend_path(const std::string& heatmap_out) {
    std::string base = heatmap_out;
    std::size_t slash = base.find_last_of("/\\");
    std::size_t dot = base.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
        base.erase(dot);
    return base + ".legend.json";
}

inline void write_heatmap(const ScanResult& scan, const std::string& path) {
    const std::size_t nx = scan.xs.size(), nu = scan.us.size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << "P6\n" << nx << " " << nu << "\n255\n";
    for (std::size_t row = 0; row < nu; ++row) {
        std::size_t iu = nu - 1 - row;  // top pixel row = largest u
        for (std::size_t ix = 0; ix < nx; ++ix) {
            Rgb c = heatmap_color(scan.at(ix, iu));
            out.put(static_cast<char>(c.r));
            out.put(static_cast<char>(c.g));
            out.put(static_cast<char>(c.b));
        }
    }
    if (!out) throw io_error("write failed: " + path);

    json legend{{"format", "ppm-p6"},
                {"width", nx},
                {"height", nu},
                {"orientation", "row 0 is u = umax; column 0 is x = xmin"},
                {"palette",
                 {{"error", {255, 0, 0}},
                  {"unstable", {255, 255, 255}},
                  {"borderline", {128, 128, 128}},
                  {"dim>8", "uses the dim=8 color"}}}};
    for (int d = 0; d <= 8; ++d) {
        PointResult p;
        p.status = PointResult::Status::Stable;
        p.dim = d;
        Rgb c = heatmap_color(p);
        legend["palette"]["dim " + std::to_string(d)] = {c.r, c.g, c.b};
    }
    save_json(legend, legend_path(path));
}

}  // namespace liesym
