// Numerical Lie-algebra isomorphism testing.
//
// phi is sought as the matrix [z_ij] with phi(x_i) = sum_k z_ik f_k; the
// residual system over pairs i<j and target indices s is
//   sum_k z_ks a^k_ij - sum_{k,l} z_ik z_jl b^s_kl,
// solved by damped least squares from many seeded random starts. The
// determinant slack equation of the source formulation is replaced by the
// constraint sigma_min([phi]) >= delta, enforced as a hinge penalty.

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "liesym/liestruct.hpp"

namespace liesym {

struct IsoConfig {
    double tol_iso = 1e-8;
    double delta = 1e-3;    // lower bound on sigma_min([phi])
    int starts = 50;
    int max_iters = 200;
    std::uint64_t seed = 20240901;
    double mu = 1e4;        // hinge penalty weight on the sigma_min constraint
};

struct IsoCandidate {
    Eigen::MatrixXd phi;
    double residual = std::numeric_limits<double>::infinity();
    double sigma_min = 0.0;
};

enum class IsoOutcome { Isomorphic, NoMapFound, Inconclusive };

inline const char* to_string(IsoOutcome o) {
    switch (o) {
        case IsoOutcome::Isomorphic: return "isomorphic";
        case IsoOutcome::NoMapFound: return "no-map-found";
        case IsoOutcome::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct IsoVerdict {
    IsoOutcome outcome = IsoOutcome::NoMapFound;
    IsoCandidate best;
    IsoConfig config;
};

namespace detail {

inline void iso_residual_vector(const StructureTensor& a, const StructureTensor& b,
                                const Eigen::MatrixXd& phi, Eigen::VectorXd& F) {
    const int n = a.dim;
    int idx = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int s = 0; s < n; ++s, ++idx) {
                double lhs = 0.0;
                for (int k = 0; k < n; ++k) lhs += phi(k, s) * a.at(i, j, k);
                double rhs = 0.0;
                for (int k = 0; k < n; ++k) {
                    double zik = phi(i, k);
                    if (zik == 0.0) continue;
                    double acc = 0.0;
                    for (int l = 0; l < n; ++l) acc += phi(j, l) * b.at(k, l, s);
                    rhs += zik * acc;
                }
                F(idx) = lhs - rhs;
            }
}

inline void iso_jacobian(const StructureTensor& a, const StructureTensor& b,
                         const Eigen::MatrixXd& phi, Eigen::MatrixXd& J) {
    const int n = a.dim;
    J.setZero();
    int idx = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int s = 0; s < n; ++s, ++idx) {
                for (int p = 0; p < n; ++p) {
                    // d lhs / d z_{p,s}
                    J(idx, p * n + s) += a.at(i, j, p);
                    // d rhs / d z_{i,q} and d z_{j,q}
                    double di = 0.0, dj = 0.0;
                    for (int l = 0; l < n; ++l) di += phi(j, l) * b.at(p, l, s);
                    for (int k = 0; k < n; ++k) dj += phi(i, k) * b.at(k, p, s);
                    J(idx, i * n + p) -= di;
                    J(idx, j * n + p) -= dj;
                }
            }
}

}  // namespace detail

/// Euclidean norm of the bracket-compatibility residual for a given phi.
inline double iso_residual(const StructureTensor& a, const StructureTensor& b,
                           const Eigen::MatrixXd& phi) {
    if (a.dim != b.dim) throw input_error("iso_residual: dimension mismatch");
    const int n = a.dim;
    if (phi.rows() != n || phi.cols() != n)
        throw input_error("iso_residual: phi has the wrong shape");
    long m = static_cast<long>(n) * n * (n - 1) / 2;
    Eigen::VectorXd F(m);
    detail::iso_residual_vector(a, b, phi, F);
    return F.norm();
}

/// Multi-start damped least squares on the residual system; reports the
/// first start meeting (residual <= tol_iso, sigma_min >= delta), otherwise
/// classifies the sweep as no-map-found or inconclusive.
inline IsoVerdict test_isomorphism(const StructureTensor& a, const StructureTensor& b,
                                   const IsoConfig& cfg = {}) {
    IsoVerdict verdict;
    verdict.config = cfg;
    if (a.dim != b.dim) return verdict;  // no-map-found by the dimension condition
    const int n = a.dim;
    if (n == 0) {
        verdict.outcome = IsoOutcome::Isomorphic;
        verdict.best.phi = Eigen::MatrixXd(0, 0);
        verdict.best.residual = 0.0;
        verdict.best.sigma_min = std::numeric_limits<double>::infinity();
        return verdict;
    }

    const long mF = static_cast<long>(n) * n * (n - 1) / 2;
    const long m = mF + 1;  // + hinge penalty row
    const int nz = n * n;
    const double sqrt_mu = std::sqrt(cfg.mu);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    Eigen::VectorXd F(mF), rvec(m), rnew(m), Fnew(mF);
    Eigen::MatrixXd JF(mF, nz), J(m, nz);

    bool any_limit_hit = false;
    double limit_best_residual = std::numeric_limits<double>::infinity();

    auto eval_penalty = [&](const Eigen::MatrixXd& phi, Eigen::VectorXd& u_out,
                            Eigen::VectorXd& v_out) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
        double smin = svd.singularValues()(n - 1);
        u_out = svd.matrixU().col(n - 1);
        v_out = svd.matrixV().col(n - 1);
        return smin;
    };

    for (int start = 0; start < cfg.starts; ++start) {
        Eigen::MatrixXd phi(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) phi(i, j) = uni(rng);

        Eigen::VectorXd umin, vmin;
        detail::iso_residual_vector(a, b, phi, F);
        double smin = eval_penalty(phi, umin, vmin);
        double hinge = std::max(0.0, cfg.delta - smin);
        double cost = F.squaredNorm() + cfg.mu * hinge * hinge;

        double lambda = 1e-3;
        bool converged = false;
        for (int iter = 0; iter < cfg.max_iters; ++iter) {
            detail::iso_jacobian(a, b, phi, JF);
            J.topRows(mF) = JF;
            rvec.head(mF) = F;
            rvec(mF) = sqrt_mu * hinge;
            if (hinge > 0.0) {
                // d sigma_min / d z_pq = u_min(p) v_min(q)
                for (int p = 0; p < n; ++p)
                    for (int q = 0; q < n; ++q)
                        J(mF, p * n + q) = -sqrt_mu * umin(p) * vmin(q);
            } else {
                J.row(mF).setZero();
            }

            Eigen::MatrixXd H = J.transpose() * J;
            Eigen::VectorXd g = J.transpose() * rvec;
            if (g.lpNorm<Eigen::Infinity>() < 1e-14) {
                converged = true;
                break;
            }

            bool stepped = false;
            for (int tries = 0; tries < 25; ++tries) {
                Eigen::MatrixXd Hl = H;
                Hl.diagonal().array() += lambda;
                Eigen::VectorXd dz = Hl.ldlt().solve(-g);
                Eigen::MatrixXd phin = phi;
                for (int p = 0; p < n; ++p)
                    for (int q = 0; q < n; ++q) phin(p, q) += dz(p * n + q);
                detail::iso_residual_vector(a, b, phin, Fnew);
                Eigen::VectorXd un, vn;
                double sminn = eval_penalty(phin, un, vn);
                double hn = std::max(0.0, cfg.delta - sminn);
                double cn = Fnew.squaredNorm() + cfg.mu * hn * hn;
                if (cn < cost) {
                    bool tiny_step = dz.norm() <= 1e-15 * (1.0 + phi.norm());
                    phi = phin;
                    F = Fnew;
                    smin = sminn;
                    umin = un;
                    vmin = vn;
                    hinge = hn;
                    cost = cn;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    stepped = true;
                    if (tiny_step) converged = true;
                    break;
                }
                lambda = std::min(lambda * 5.0, 1e14);
            }
            if (!stepped || converged) {
                converged = true;
                break;
            }
            if (cost < 1e-30) {
                converged = true;
                break;
            }
        }

        double resid = F.norm();
        if (resid <= cfg.tol_iso && smin >= cfg.delta) {
            verdict.outcome = IsoOutcome::Isomorphic;
            verdict.best = IsoCandidate{phi, resid, smin};
            return verdict;
        }
        bool better = resid < verdict.best.residual ||
                      (verdict.best.sigma_min < cfg.delta && smin >= cfg.delta &&
                       resid <= verdict.best.residual * 1.0001);
        if (better) verdict.best = IsoCandidate{phi, resid, smin};
        if (!converged) {
            any_limit_hit = true;
            limit_best_residual = std::min(limit_best_residual, resid);
        }
    }

    verdict.outcome = (any_limit_hit && limit_best_residual <= 10.0 * cfg.tol_iso)
                          ? IsoOutcome::Inconclusive
                          : IsoOutcome::NoMapFound;
    return verdict;
}

}  // namespace liesym
