// Tolerance-controlled completion to approximate involutive form at a base
// point. Numerical ranks and nullspaces come from the SVD with an absolute
// singular-value cutoff (applied after row normalization); projected bases
// are re-orthonormalized by a second SVD under the same cutoff.
//
// The completion criterion is the finite-type specialization of projective
// involutivity on the dimension table d(k,l):
//   (a) d(k',l) == d(k',l+1)      zero symbol at the top order,
//   (b) d(k'+1,l+1) == d(k',l)    no new integrability conditions,
//   (c) d(k'+1,l) == d(k',l)      the order-(q'+1) system carries the same
//                                 dimension, so the basis extension of the
//                                 structure-constant stage is well defined.
// Exact theory also gives the containment pi^(l+1) D^(k+1) R within
// pi^l D^k R; a numerically observed dimension increase along that diagonal
// marks the spectrum noise-dominated and the point unstable.

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "liesym/jet.hpp"

namespace liesym {

class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ToleranceConfig {
    double tol = 1e-9;   // singular-value cutoff
    int kmax = 8;        // maximum prolongations
    double rho = 10.0;   // borderline factor: fragile when a cut sigma <= rho*tol

    void validate() const {
        if (!(tol > 0.0)) throw input_error("tolerance must be positive");
        if (kmax < 1) throw input_error("kmax must be >= 1");
        if (!(rho > 1.0)) throw input_error("borderline factor must exceed 1");
    }
};

struct RankResult {
    int rank = 0;
    Eigen::VectorXd singular_values;
};

namespace detail {

struct SvdOut {
    Eigen::VectorXd sigmas;
    Eigen::MatrixXd V;  // full right singular vectors
};

inline SvdOut svd_full_v(const Eigen::MatrixXd& M) {
    if (!M.allFinite()) throw numeric_error("matrix contains non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw numeric_error("SVD failed to converge");
    return {svd.singularValues(), svd.matrixV()};
}

inline int count_above(const Eigen::VectorXd& s, double tol) {
    int r = 0;
    while (r < s.size() && s(r) > tol) ++r;
    return r;
}

}  // namespace detail

/// Numerical rank: the number of singular values strictly above the cutoff.
/// The full singular value list is returned for diagnostics.
inline RankResult numerical_rank(const Eigen::MatrixXd& M, double tol) {
    if (M.rows() == 0 || M.cols() == 0)
        return {0, Eigen::VectorXd()};
    if (!M.allFinite()) throw numeric_error("matrix contains non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    if (svd.info() != Eigen::Success) throw numeric_error("SVD failed to converge");
    Eigen::VectorXd s = svd.singularValues();
    return {detail::count_above(s, tol), std::move(s)};
}

/// Orthonormal basis of the numerical nullspace (trailing right singular
/// vectors whose singular values are <= tol, padded by the dimension gap).
inline Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& M, double tol) {
    const auto n = M.cols();
    if (M.rows() == 0 || n == 0) return Eigen::MatrixXd::Identity(n, n);
    auto svd = detail::svd_full_v(M);
    int r = detail::count_above(svd.sigmas, tol);
    return svd.V.rightCols(n - r);
}

/// Singular values observed at one rank decision.
struct SvdDecision {
    int k = 0;
    int ell = -1;  // -1: the nullspace SVD of the evaluated matrix at level k
    int rank = 0;
    Eigen::VectorXd sigmas;

    /// Smallest retained singular value, or +inf when nothing was retained.
    double cut_sigma() const {
        if (rank < 1 || rank > sigmas.size()) return std::numeric_limits<double>::infinity();
        return sigmas(rank - 1);
    }
};

/// d(k, l) for 0 <= k <= kmax, 0 <= l <= k + q. Entries of -1 were not
/// computed (completion stops early).
class DimensionTable {
public:
    DimensionTable() = default;
    DimensionTable(int kmax, int q) : q_(q), rows_(static_cast<std::size_t>(kmax) + 1) {
        for (int k = 0; k <= kmax; ++k)
            rows_[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(k + q) + 1, -1);
    }
    int q() const { return q_; }
    int kmax() const { return static_cast<int>(rows_.size()) - 1; }
    int d(int k, int ell) const { return rows_.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(ell)); }
    void set(int k, int ell, int v) { rows_.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(ell)) = v; }
    const std::vector<std::vector<int>>& rows() const { return rows_; }

private:
    int q_ = 0;
    std::vector<std::vector<int>> rows_;
};

enum class CompletionStatus { Stable, Borderline, Unstable };

inline const char* to_string(CompletionStatus s) {
    switch (s) {
        case CompletionStatus::Stable: return "stable";
        case CompletionStatus::Borderline: return "borderline";
        case CompletionStatus::Unstable: return "unstable";
    }
    return "?";
}

struct InvolutiveForm {
    std::vector<double> z0;
    CompletionStatus status = CompletionStatus::Unstable;
    int kprime = -1;
    int ell = -1;
    int qprime = -1;
    int r = -1;

    Eigen::MatrixXd V_q;   // orthonormal basis, order-q' coordinates
    Eigen::MatrixXd V_q1;  // orthonormal basis, order-(q'+1) coordinates
    JetOrdering ord_q;
    JetOrdering ord_q1;

    DimensionTable table;                 // entries computed during the search
    std::vector<SvdDecision> decisions;   // the SVDs behind the verdict
    ToleranceConfig config;
};

namespace detail {

// Shared state of one completion/table computation at a fixed base point.
class CompletionRun {
public:
    CompletionRun(ProlongationTower& tower, std::vector<double> z0, const ToleranceConfig& cfg)
        : tower_(tower), z0_(std::move(z0)), cfg_(cfg), q_(tower.base_order()) {}

    struct Projected {
        int rank = 0;
        Eigen::MatrixXd basis;  // orthonormal columns in order-(q+k-ell) coordinates
        Eigen::VectorXd sigmas;
    };

    const Eigen::MatrixXd& null_basis(int k) {
        ensure_level(k);
        return nulls_[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd& null_sigmas(int k) {
        ensure_level(k);
        return nsig_[static_cast<std::size_t>(k)];
    }
    int null_rank(int k) {
        ensure_level(k);
        return nrank_[static_cast<std::size_t>(k)];
    }
    const JetOrdering& ordering(int k) {
        ensure_level(k);
        return ords_[static_cast<std::size_t>(k)];
    }

    const Projected& projected(int k, int ell) {
        auto key = std::make_pair(k, ell);
        auto it = proj_.find(key);
        if (it != proj_.end()) return it->second;
        ensure_level(k);
        Projected p;
        const Eigen::MatrixXd& N = nulls_[static_cast<std::size_t>(k)];
        Eigen::MatrixXd B = project_basis(N, ords_[static_cast<std::size_t>(k)], ell);
        if (B.cols() == 0) {
            p.rank = 0;
            p.basis = Eigen::MatrixXd(B.rows(), 0);
        } else {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU);
            if (svd.info() != Eigen::Success) throw numeric_error("SVD failed to converge");
            p.sigmas = svd.singularValues();
            p.rank = count_above(p.sigmas, cfg_.tol);
            p.basis = svd.matrixU().leftCols(p.rank);
        }
        return proj_.emplace(key, std::move(p)).first->second;
    }

    int d(int k, int ell) { return projected(k, ell).rank; }

    int q() const { return q_; }
    const ToleranceConfig& config() const { return cfg_; }
    const std::vector<double>& z0() const { return z0_; }

    SvdDecision null_decision(int k) {
        ensure_level(k);
        return SvdDecision{k, -1, nrank_[static_cast<std::size_t>(k)], nsig_[static_cast<std::size_t>(k)]};
    }
    SvdDecision proj_decision(int k, int ell) {
        const Projected& p = projected(k, ell);
        return SvdDecision{k, ell, p.rank, p.sigmas};
    }

private:
    void ensure_level(int k) {
        while (static_cast<int>(nulls_.size()) <= k) {
            int kk = static_cast<int>(nulls_.size());
            const CoefficientMatrixFunction& M = tower_.level(kk);
            Eigen::MatrixXd A = evaluate_matrix(M, z0_);
            if (A.rows() == 0) {
                nulls_.push_back(Eigen::MatrixXd::Identity(M.ordering.cols(), M.ordering.cols()));
                nsig_.push_back(Eigen::VectorXd());
                nrank_.push_back(0);
            } else {
                auto svd = svd_full_v(A);
                int r = count_above(svd.sigmas, cfg_.tol);
                nulls_.push_back(svd.V.rightCols(A.cols() - r));
                nsig_.push_back(std::move(svd.sigmas));
                nrank_.push_back(r);
            }
            ords_.push_back(M.ordering);
        }
    }

    ProlongationTower& tower_;
    std::vector<double> z0_;
    ToleranceConfig cfg_;
    int q_;
    std::vector<Eigen::MatrixXd> nulls_;
    std::vector<Eigen::VectorXd> nsig_;
    std::vector<int> nrank_;
    std::vector<JetOrdering> ords_;
    std::map<std::pair<int, int>, Projected> proj_;
};

}  // namespace detail

/// Full dimension table d(k, l), 0 <= k <= kmax, 0 <= l <= k + q.
inline DimensionTable dimension_table(ProlongationTower& tower, const std::vector<double>& z0,
                                      const ToleranceConfig& cfg) {
    cfg.validate();
    detail::CompletionRun run(tower, z0, cfg);
    DimensionTable T(cfg.kmax, run.q());
    for (int k = 0; k <= cfg.kmax; ++k)
        for (int ell = 0; ell <= k + run.q(); ++ell)
            T.set(k, ell, run.d(k, ell));
    return T;
}

inline DimensionTable dimension_table(const CoefficientMatrixFunction& M0,
                                      const std::vector<double>& z0, const ToleranceConfig& cfg) {
    ProlongationTower tower(M0);
    return dimension_table(tower, z0, cfg);
}

/// Completion at a base point. Shares the symbolic tower across calls.
inline InvolutiveForm involutive_completion(ProlongationTower& tower,
                                            const std::vector<double>& z0,
                                            const ToleranceConfig& cfg) {
    cfg.validate();
    detail::CompletionRun run(tower, z0, cfg);
    const int q = run.q();

    InvolutiveForm out;
    out.z0 = z0;
    out.config = cfg;
    out.table = DimensionTable(cfg.kmax, q);

    auto record = [&](int k, int ell) {
        int v = run.d(k, ell);
        out.table.set(k, ell, v);
        return v;
    };

    for (int kp = 0; kp + 1 <= cfg.kmax; ++kp) {
        // containment consistency along diagonals
        if (kp >= 1)
            for (int ell = 1; ell <= kp + q; ++ell)
                if (record(kp, ell) > record(kp - 1, ell - 1)) {
                    out.status = CompletionStatus::Unstable;
                    out.kprime = kp;
                    return out;
                }
        for (int ell = 0; ell <= kp; ++ell) {
            int d00 = record(kp, ell);
            if (record(kp, ell + 1) != d00) continue;       // (a)
            if (record(kp + 1, ell + 1) != d00) continue;   // (b)
            if (record(kp + 1, ell) != d00) continue;       // (c)

            out.kprime = kp;
            out.ell = ell;
            out.qprime = q + kp - ell;
            out.r = d00;
            out.V_q = run.projected(kp, ell).basis;
            out.V_q1 = run.projected(kp + 1, ell).basis;
            out.ord_q = JetOrdering(run.ordering(kp).unknowns(), run.ordering(kp).base_vars(),
                                    out.qprime);
            out.ord_q1 = JetOrdering(run.ordering(kp).unknowns(), run.ordering(kp).base_vars(),
                                     out.qprime + 1);

            out.decisions.push_back(run.null_decision(kp));
            out.decisions.push_back(run.null_decision(kp + 1));
            out.decisions.push_back(run.proj_decision(kp, ell));
            out.decisions.push_back(run.proj_decision(kp, ell + 1));
            out.decisions.push_back(run.proj_decision(kp + 1, ell + 1));
            out.decisions.push_back(run.proj_decision(kp + 1, ell));

            bool fragile = false;
            for (const SvdDecision& dec : out.decisions) {
                double cut = dec.cut_sigma();
                if (std::isfinite(cut) && cut <= cfg.rho * cfg.tol) fragile = true;
            }
            out.status = fragile ? CompletionStatus::Borderline : CompletionStatus::Stable;
            return out;
        }
    }
    out.status = CompletionStatus::Unstable;
    return out;
}

inline InvolutiveForm involutive_completion(const CoefficientMatrixFunction& M0,
                                            const std::vector<double>& z0,
                                            const ToleranceConfig& cfg) {
    ProlongationTower tower(M0);
    return involutive_completion(tower, z0, cfg);
}

}  // namespace liesym
