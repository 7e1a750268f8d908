// Structure constants of the approximate Lie algebra and reliability scores.
//
// The involutive basis at order q' is extended to order q'+1 by least squares
// against the order-above basis, commutators of the extended jets are formed
// with the multi-index Leibniz rule, and structure constants are inner
// products against the orthonormal order-q' basis. Reliability: relative
// closure residual sigma_Lie per pair, the angle theta between a commutator
// and the basis span, and the normalized Jacobi residual per triple.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liesym/giforms.hpp"

namespace liesym {

class structure_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Jet of a symmetry vector field at a point: all partial derivatives of
/// (xi, eta) through a given order, laid out per JetOrdering.
struct VectorFieldJet {
    std::vector<double> z0;
    int order = 0;
    JetOrdering ord;       // m = 2, nb = 2, Q = order
    Eigen::VectorXd coords;

    double value(int unknown, int dx, int du) const {
        return coords(ord.col(unknown, {dx, du}));
    }
};

/// Extends each column of V_q' to an order-(q'+1) jet whose projection is
/// exactly that column; the top-order block is solved by least squares
/// against the span of V_q'+1. Residual above 10*tol signals that the
/// finite-type uniqueness assumption failed.
inline std::vector<VectorFieldJet> extend_basis(const InvolutiveForm& IF) {
    if (IF.status != CompletionStatus::Stable)
        throw structure_error("basis extension requires a stable involutive form");
    if (IF.r <= 0) return {};

    const int n_low = IF.ord_q.cols();
    const int n_high = IF.ord_q1.cols();
    const int top = n_high - n_low;
    if (IF.V_q1.rows() != n_high || IF.V_q.rows() != n_low)
        throw structure_error("involutive form bases have inconsistent layouts");

    Eigen::MatrixXd W = IF.V_q1.bottomRows(n_low);
    Eigen::MatrixXd T = IF.V_q1.topRows(top);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);

    std::vector<VectorFieldJet> jets;
    jets.reserve(static_cast<std::size_t>(IF.r));
    const double limit = 10.0 * IF.config.tol;
    for (int k = 0; k < IF.r; ++k) {
        Eigen::VectorXd v = IF.V_q.col(k);
        Eigen::VectorXd s = qr.solve(v);
        double resid = (W * s - v).norm();
        if (resid > limit)
            throw structure_error("basis extension residual " + std::to_string(resid) +
                                  " exceeds 10*tol; extension is not unique at this point");
        VectorFieldJet jet;
        jet.z0 = IF.z0;
        jet.order = IF.qprime + 1;
        jet.ord = IF.ord_q1;
        jet.coords.resize(n_high);
        jet.coords.head(top) = T * s;
        jet.coords.tail(n_low) = v;
        jets.push_back(std::move(jet));
    }
    return jets;
}

namespace detail {
inline double binom_d(int n, int k) { return static_cast<double>(binom(n, k)); }
}

/// Lie bracket of two vector-field jets at the same point; the result carries
/// one order less. Components w^a = sum_b (zi^b d_b zj^a - zj^b d_b zi^a),
/// derivatives through the multi-index Leibniz rule.
inline VectorFieldJet commutator_jet(const VectorFieldJet& vi, const VectorFieldJet& vj) {
    if (vi.order != vj.order) throw structure_error("commutator of jets of different orders");
    if (vi.order < 1) throw structure_error("commutator needs jets of order >= 1");
    if (vi.z0 != vj.z0) throw structure_error("commutator of jets at different base points");

    const int p = vi.order;
    VectorFieldJet out;
    out.z0 = vi.z0;
    out.order = p - 1;
    out.ord = JetOrdering(2, 2, p - 1);
    out.coords.resize(out.ord.cols());

    // d^(ax,au) of f^b * d_b g^a, summed over base variable b
    auto leibniz = [&](const VectorFieldJet& f, const VectorFieldJet& g, int a, int ax, int au) {
        double total = 0.0;
        for (int b = 0; b < 2; ++b) {
            double s = 0.0;
            for (int bx = 0; bx <= ax; ++bx)
                for (int bu = 0; bu <= au; ++bu) {
                    double coef = detail::binom_d(ax, bx) * detail::binom_d(au, bu);
                    s += coef * f.value(b, bx, bu) *
                         g.value(a, ax - bx + (b == 0 ? 1 : 0), au - bu + (b == 1 ? 1 : 0));
                }
            total += s;
        }
        return total;
    };

    for (int c = 0; c < out.ord.cols(); ++c) {
        auto& [a, alpha] = out.ord.decode(c);
        out.coords(c) = leibniz(vi, vj, a, alpha[0], alpha[1]) -
                        leibniz(vj, vi, a, alpha[0], alpha[1]);
    }
    return out;
}

/// Structure constants c[i][j][k] with antisymmetry enforced by construction.
struct StructureTensor {
    int dim = 0;
    std::vector<double> c;  // ((i*dim)+j)*dim+k

    // basis provenance
    std::vector<double> z0;
    int qprime = -1;
    double tol = 0.0;

    StructureTensor() = default;
    explicit StructureTensor(int n) : dim(n), c(static_cast<std::size_t>(n) * n * n, 0.0) {}

    double at(int i, int j, int k) const {
        return c[(static_cast<std::size_t>(i) * dim + j) * dim + k];
    }
    void set(int i, int j, int k, double v) {
        c[(static_cast<std::size_t>(i) * dim + j) * dim + k] = v;
    }
    double frobenius() const {
        double s = 0.0;
        for (double v : c) s += v * v;
        return std::sqrt(s);
    }
};

struct ReliabilityReport {
    int dim = 0;
    double tol = 0.0;
    Eigen::MatrixXd sigma_lie;   // relative closure residual per pair (0 on diagonal)
    Eigen::MatrixXd theta;       // angle between commutator and span(V_q')
    Eigen::MatrixXd abs_err;     // absolute closure residual per pair
    Eigen::MatrixXd degenerate;  // 1.0 where sigma_lie is undefined (denominator vanished)
    std::vector<double> sigma_jacobi;  // per triple, same layout as StructureTensor::c
    double sigma_lie_max = 0.0;
    double theta_max = 0.0;
    double sigma_jacobi_max = 0.0;

    double jacobi_at(int i, int j, int k) const {
        return sigma_jacobi[(static_cast<std::size_t>(i) * dim + j) * dim + k];
    }
};

/// sigma_Jacobi for the triple (i,j,k): Euclidean norm over l of
/// sum_m (c^m_jk c^l_im + c^m_ki c^l_jm + c^m_ij c^l_km), divided by
/// max(1, ||c||_F).
inline double jacobi_residual(const StructureTensor& t, int i, int j, int k, double cnorm) {
    const int n = t.dim;
    double s2 = 0.0;
    for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int m = 0; m < n; ++m)
            s += t.at(j, k, m) * t.at(i, m, l) + t.at(k, i, m) * t.at(j, m, l) +
                 t.at(i, j, m) * t.at(k, m, l);
        s2 += s * s;
    }
    return std::sqrt(s2) / std::max(1.0, cnorm);
}

/// Computes the structure tensor and its reliability report from a stable
/// involutive form with r >= 1.
inline std::pair<StructureTensor, ReliabilityReport> structure_constants(const InvolutiveForm& IF) {
    if (IF.status != CompletionStatus::Stable)
        throw structure_error("structure constants require a stable involutive form");
    if (IF.r < 1) throw structure_error("structure constants require dimension >= 1");

    std::vector<VectorFieldJet> jets = extend_basis(IF);
    const int r = IF.r;

    StructureTensor tensor(r);
    tensor.z0 = IF.z0;
    tensor.qprime = IF.qprime;
    tensor.tol = IF.config.tol;

    ReliabilityReport rep;
    rep.dim = r;
    rep.tol = IF.config.tol;
    rep.sigma_lie = Eigen::MatrixXd::Zero(r, r);
    rep.theta = Eigen::MatrixXd::Zero(r, r);
    rep.abs_err = Eigen::MatrixXd::Zero(r, r);
    rep.degenerate = Eigen::MatrixXd::Zero(r, r);
    rep.sigma_jacobi.assign(static_cast<std::size_t>(r) * r * r, 0.0);

    const double eps = std::numeric_limits<double>::epsilon();
    for (int i = 0; i < r; ++i) {
        for (int j = i + 1; j < r; ++j) {
            VectorFieldJet w = commutator_jet(jets[static_cast<std::size_t>(i)],
                                              jets[static_cast<std::size_t>(j)]);
            Eigen::VectorXd cvec = IF.V_q.transpose() * w.coords;
            for (int k = 0; k < r; ++k) {
                tensor.set(i, j, k, cvec(k));
                tensor.set(j, i, k, -cvec(k));
            }
            Eigen::VectorXd inspan = IF.V_q * cvec;
            double num = (w.coords - inspan).norm();
            double den = inspan.norm();
            double wn = w.coords.norm();

            rep.abs_err(i, j) = rep.abs_err(j, i) = num;
            double sigma = 0.0;
            bool degen = false;
            if (den <= 100.0 * eps * wn) {
                if (wn > 100.0 * eps) degen = true;  // out-of-span commutator, 0/0 guarded
            } else {
                sigma = num / den;
            }
            rep.sigma_lie(i, j) = rep.sigma_lie(j, i) = sigma;
            rep.degenerate(i, j) = rep.degenerate(j, i) = degen ? 1.0 : 0.0;
            double th = wn == 0.0 ? 0.0 : std::asin(std::min(1.0, num / wn));
            rep.theta(i, j) = rep.theta(j, i) = th;
        }
    }

    double cnorm = tensor.frobenius();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            for (int k = 0; k < r; ++k)
                rep.sigma_jacobi[(static_cast<std::size_t>(i) * r + j) * r + k] =
                    jacobi_residual(tensor, i, j, k, cnorm);

    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            if (rep.degenerate(i, j) == 0.0)
                rep.sigma_lie_max = std::max(rep.sigma_lie_max, rep.sigma_lie(i, j));
            rep.theta_max = std::max(rep.theta_max, rep.theta(i, j));
        }
    for (double v : rep.sigma_jacobi) rep.sigma_jacobi_max = std::max(rep.sigma_jacobi_max, v);

    return {std::move(tensor), std::move(rep)};
}

}  // namespace liesym
