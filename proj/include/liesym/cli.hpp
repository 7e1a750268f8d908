// Command-line front end.
//
// Subcommands:
//   dim        one base point -> dimension, status, q'
//   structure  one base point -> structure tensor + reliability JSON
//   scan       grid sweep -> csv | json | heatmap
//   iso        two tensor JSON files -> isomorphism verdict JSON
//
// Exit codes: 0 success, 1 invalid input, 2 unstable result / no-map-found /
// inconclusive, 3 internal numeric failure.

#pragma once

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "liesym/io.hpp"

namespace liesym {

struct RunConfig {
    std::string ode_text;
    std::vector<double> point;   // x u
    std::string xrange, urange;  // "min:max:step"
    double tol = 1e-9;
    int kmax = 8;
    double rho = 10.0;
    std::uint64_t seed = 20240901;
    int threads = 0;  // 0: hardware concurrency
    std::string out;
    std::string format = "csv";
    std::string file_a, file_b;
    int starts = 50;
    double iso_tol = 1e-8;
    double delta = 1e-3;
    int max_iters = 200;
};

namespace cli_detail {

inline void parse_range(const std::string& s, double& lo, double& hi, double& step) {
    std::size_t c1 = s.find(':');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw input_error("range must be min:max:step, got '" + s + "'");
    try {
        lo = std::stod(s.substr(0, c1));
        hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
        step = std::stod(s.substr(c2 + 1));
    } catch (const std::exception&) {
        throw input_error("range must be numeric min:max:step, got '" + s + "'");
    }
}

inline ToleranceConfig tol_config(const RunConfig& rc) {
    if (!(rc.tol > 0.0 && rc.tol < 1.0)) throw input_error("--tol must lie in (0, 1)");
    ToleranceConfig cfg;
    cfg.tol = rc.tol;
    cfg.kmax = rc.kmax;
    cfg.rho = rc.rho;
    cfg.validate();
    return cfg;
}

inline IsoConfig iso_config(const RunConfig& rc) {
    IsoConfig cfg;
    cfg.tol_iso = rc.iso_tol;
    cfg.delta = rc.delta;
    cfg.starts = rc.starts;
    cfg.max_iters = rc.max_iters;
    cfg.seed = rc.seed;
    return cfg;
}

inline json involutive_to_json(const InvolutiveForm& IF) {
    json table = json::array();
    for (const auto& row : IF.table.rows()) table.push_back(row);
    json decisions = json::array();
    for (const SvdDecision& d : IF.decisions) {
        json sig = json::array();
        for (int i = 0; i < d.sigmas.size(); ++i) sig.push_back(d.sigmas(i));
        decisions.push_back(json{{"k", d.k}, {"ell", d.ell}, {"rank", d.rank}, {"sigmas", sig}});
    }
    json j{{"x0", IF.z0.at(0)},
           {"u0", IF.z0.at(1)},
           {"tol", IF.config.tol},
           {"kmax", IF.config.kmax},
           {"rho", IF.config.rho},
           {"status", to_string(IF.status)},
           {"dimension_table", std::move(table)},
           {"decisions", std::move(decisions)}};
    if (IF.status != CompletionStatus::Unstable) {
        j["dim"] = IF.r;
        j["qprime"] = IF.qprime;
        j["kprime"] = IF.kprime;
        j["ell"] = IF.ell;
    }
    return j;
}

inline int run_dim(const RunConfig& rc, std::ostream& os) {
    ODESpec ode = parse_ode(rc.ode_text);
    DeterminingSystem sys = generate_determining_system(ode);
    CoefficientMatrixFunction M0 = assemble_matrix(sys);
    InvolutiveForm IF = involutive_completion(M0, rc.point, tol_config(rc));
    os << "status " << to_string(IF.status) << "\n";
    if (IF.status != CompletionStatus::Unstable) {
        os << "dim " << IF.r << "\n";
        os << "qprime " << IF.qprime << "\n";
    } else {
        os << "dim -\nqprime -\n";
    }
    if (!rc.out.empty()) save_json(involutive_to_json(IF), rc.out);
    return IF.status == CompletionStatus::Unstable ? 2 : 0;
}

inline int run_structure(const RunConfig& rc, std::ostream& os) {
    ODESpec ode = parse_ode(rc.ode_text);
    DeterminingSystem sys = generate_determining_system(ode);
    CoefficientMatrixFunction M0 = assemble_matrix(sys);
    InvolutiveForm IF = involutive_completion(M0, rc.point, tol_config(rc));
    if (IF.status == CompletionStatus::Unstable) {
        std::cerr << "completion is unstable at this point; no structure constants\n";
        return 2;
    }
    if (IF.status == CompletionStatus::Borderline) {
        std::cerr << "completion is borderline at this point; no structure constants\n";
        return 2;
    }
    json j;
    if (IF.r == 0) {
        StructureTensor empty(0);
        empty.z0 = IF.z0;
        empty.qprime = IF.qprime;
        empty.tol = IF.config.tol;
        j = tensor_to_json(empty);
    } else {
        auto [tensor, rep] = structure_constants(IF);
        j = tensor_to_json(tensor, rep);
    }
    if (!rc.out.empty()) save_json(j, rc.out);
    else os << j.dump(2) << "\n";
    return 0;
}

inline int run_scan(const RunConfig& rc, std::ostream& os) {
    ODESpec ode = parse_ode(rc.ode_text);
    GridSpec grid;
    parse_range(rc.xrange, grid.xmin, grid.xmax, grid.xstep);
    parse_range(rc.urange, grid.umin, grid.umax, grid.ustep);
    grid.tol = tol_config(rc);
    grid.validate();
    int threads = rc.threads > 0 ? rc.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
    ScanResult scan = scan_grid(ode, grid, threads);
    RegionMap regions = partition_regions(scan, iso_config(rc));
    if (rc.format == "csv") {
        write_csv(scan, rc.out);
    } else if (rc.format == "json") {
        save_json(scan_to_json(scan, &regions), rc.out);
    } else if (rc.format == "heatmap") {
        write_heatmap(scan, rc.out);
    } else {
        throw input_error("unknown format '" + rc.format + "'");
    }
    int stable = 0, borderline = 0, unstable = 0, error = 0;
    for (const PointResult& p : scan.points) switch (p.status) {
            case PointResult::Status::Stable: ++stable; break;
            case PointResult::Status::Borderline: ++borderline; break;
            case PointResult::Status::Unstable: ++unstable; break;
            case PointResult::Status::Error: ++error; break;
        }
    os << "cells " << scan.points.size() << " stable " << stable << " borderline " << borderline
       << " unstable " << unstable << " error " << error << " regions "
       << regions.regions.size() << "\n";
    os << "wrote " << rc.out << "\n";
    return 0;
}

inline int run_iso(const RunConfig& rc, std::ostream& os) {
    StructureTensor a = load_tensor(rc.file_a);
    StructureTensor b = load_tensor(rc.file_b);
    IsoVerdict v = test_isomorphism(a, b, iso_config(rc));
    json j = verdict_to_json(v);
    if (!rc.out.empty()) save_json(j, rc.out);
    else os << j.dump(2) << "\n";
    return v.outcome == IsoOutcome::Isomorphic ? 0 : 2;
}

}  // namespace cli_detail

/// Entry point used by the binary and by tests. argv excludes the program
/// name.
inline int run(const std::vector<std::string>& argv, std::ostream& os = std::cout) {
    CLI::App app{"approximate Lie point symmetry algebras of scalar ODEs"};
    app.require_subcommand(1);
    RunConfig rc;

    auto add_tol = [&](CLI::App* cmd) {
        cmd->add_option("--tol", rc.tol, "singular-value tolerance, in (0,1)");
        cmd->add_option("--kmax", rc.kmax, "maximum prolongations");
        cmd->add_option("--rho", rc.rho, "borderline factor");
    };
    auto add_iso_opts = [&](CLI::App* cmd) {
        cmd->add_option("--starts", rc.starts, "random starts");
        cmd->add_option("--iso-tol", rc.iso_tol, "isomorphism residual tolerance");
        cmd->add_option("--delta", rc.delta, "sigma_min lower bound for [phi]");
        cmd->add_option("--max-iters", rc.max_iters, "iteration cap per start");
        cmd->add_option("--seed", rc.seed, "random seed");
    };

    CLI::App* dim = app.add_subcommand("dim", "symmetry dimension at one base point");
    dim->add_option("--ode", rc.ode_text, "ODE text, e.g. \"diff(u,x,2) + u\"")->required();
    dim->add_option("--point", rc.point, "base point X U")->expected(2)->required();
    add_tol(dim);
    dim->add_option("--out", rc.out, "write diagnostics JSON here");

    CLI::App* structure = app.add_subcommand("structure", "structure constants at one point");
    structure->add_option("--ode", rc.ode_text)->required();
    structure->add_option("--point", rc.point)->expected(2)->required();
    add_tol(structure);
    structure->add_option("--out", rc.out, "write tensor JSON here (default stdout)");

    CLI::App* scan = app.add_subcommand("scan", "sweep a grid of base points");
    scan->add_option("--ode", rc.ode_text)->required();
    scan->add_option("--xrange", rc.xrange, "x range min:max:step")->required();
    scan->add_option("--urange", rc.urange, "u range min:max:step")->required();
    add_tol(scan);
    scan->add_option("--format", rc.format, "csv | json | heatmap");
    scan->add_option("--out", rc.out, "output path")->required();
    scan->add_option("--threads", rc.threads, "worker threads (0 = all cores)");
    add_iso_opts(scan);

    CLI::App* iso = app.add_subcommand("iso", "test two structure tensors for isomorphism");
    iso->add_option("--a", rc.file_a, "first tensor JSON")->required();
    iso->add_option("--b", rc.file_b, "second tensor JSON")->required();
    add_iso_opts(iso);
    iso->add_option("--out", rc.out, "write verdict JSON here (default stdout)");

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(dim)) return cli_detail::run_dim(rc, os);
        if (app.got_subcommand(structure)) return cli_detail::run_structure(rc, os);
        if (app.got_subcommand(scan)) return cli_detail::run_scan(rc, os);
        if (app.got_subcommand(iso)) return cli_detail::run_iso(rc, os);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << " at position " << e.position << "\n";
        return 1;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const eval_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const structure_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

}  // namespace liesym
