// Jet-coordinate bookkeeping: the graded column ordering for jet variables,
// the symbolic coefficient matrix of a linear homogeneous system, symbolic
// prolongation, numeric evaluation at a base point, and projection of
// nullspace bases by removal of leading-order coordinates.
//
// Column layout is graded with the highest order first, so the projection
// that forgets the top orders is literal prefix removal.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "liesym/detsys.hpp"
#include "liesym/expr.hpp"

namespace liesym {

using MultiIndex = std::vector<int>;

inline long long binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// All multi-indices over nb variables with |alpha| == order, first component
/// descending (deterministic enumeration shared by columns and prolongations).
inline std::vector<MultiIndex> multi_indices(int nb, int order) {
    std::vector<MultiIndex> out;
    if (nb == 1) {
        out.push_back({order});
        return out;
    }
    for (int i = order; i >= 0; --i)
        for (auto& rest : multi_indices(nb - 1, order - i)) {
            MultiIndex mi;
            mi.reserve(static_cast<std::size_t>(nb));
            mi.push_back(i);
            mi.insert(mi.end(), rest.begin(), rest.end());
            out.push_back(std::move(mi));
        }
    return out;
}

/// Bijection between matrix columns and jet coordinates (unknown a, alpha)
/// with |alpha| <= Q, graded highest order first.
class JetOrdering {
public:
    JetOrdering() = default;
    JetOrdering(int m, int nb, int Q) : m_(m), nb_(nb), Q_(Q) {
        for (int o = Q; o >= 0; --o) {
            order_start_.push_back(static_cast<int>(cols_.size()));
            for (auto& alpha : multi_indices(nb, o))
                for (int a = 0; a < m; ++a) {
                    index_.emplace(key(a, alpha), static_cast<int>(cols_.size()));
                    cols_.emplace_back(a, alpha);
                }
        }
        order_start_.push_back(static_cast<int>(cols_.size()));
    }

    int unknowns() const { return m_; }
    int base_vars() const { return nb_; }
    int max_order() const { return Q_; }
    int cols() const { return static_cast<int>(cols_.size()); }

    int col(int a, const MultiIndex& alpha) const {
        auto it = index_.find(key(a, alpha));
        if (it == index_.end()) throw std::out_of_range("jet coordinate outside ordering");
        return it->second;
    }

    const std::pair<int, MultiIndex>& decode(int c) const {
        return cols_.at(static_cast<std::size_t>(c));
    }

    /// First column of order <= maxorder (the start of the trailing block).
    int first_col_of_order(int maxorder) const {
        if (maxorder >= Q_) return 0;
        if (maxorder < 0) return cols();
        return order_start_.at(static_cast<std::size_t>(Q_ - maxorder));
    }

    static long long expected_cols(int m, int nb, int Q) {
        return m * binom(nb + Q, nb);
    }

private:
    static std::string key(int a, const MultiIndex& alpha) {
        std::string s = std::to_string(a);
        for (int v : alpha) {
            s.push_back(',');
            s += std::to_string(v);
        }
        return s;
    }
    int m_ = 0, nb_ = 0, Q_ = 0;
    std::vector<std::pair<int, MultiIndex>> cols_;
    std::map<std::string, int> index_;
    std::vector<int> order_start_;
};

/// Sparse symbolic matrix A(x): rows are equations, columns jet coordinates,
/// entries coefficient expressions in the base variables.
struct CoefficientMatrixFunction {
    JetOrdering ordering;
    std::vector<std::string> base_vars;
    int rows = 0;
    std::map<std::pair<int, int>, ExprPtr> entries;

    void accumulate(int row, int col, const ExprPtr& c) {
        if (is_const(c, 0.0)) return;
        auto it = entries.find({row, col});
        if (it == entries.end()) entries.emplace(std::make_pair(row, col), c);
        else it->second = add(it->second, c);
    }
};

/// Encodes a determining system as its order-q coefficient matrix.
inline CoefficientMatrixFunction assemble_matrix(const DeterminingSystem& sys) {
    CoefficientMatrixFunction M;
    M.ordering = JetOrdering(static_cast<int>(sys.unknowns.size()),
                             static_cast<int>(sys.base_vars.size()), sys.order);
    M.base_vars = sys.base_vars;
    M.rows = static_cast<int>(sys.equations.size());
    for (std::size_t i = 0; i < sys.equations.size(); ++i)
        for (const DetTerm& t : sys.equations[i])
            M.accumulate(static_cast<int>(i), M.ordering.col(t.unknown, t.alpha), t.coeff);
    return M;
}

/// One prolongation step: keeps every row and appends D_j row for each base
/// variable j. Coefficient c on jet (a, alpha) contributes c on (a, alpha+e_j)
/// plus d_j c on (a, alpha).
inline CoefficientMatrixFunction prolong(const CoefficientMatrixFunction& M) {
    const int nb = M.ordering.base_vars();
    CoefficientMatrixFunction out;
    out.ordering = JetOrdering(M.ordering.unknowns(), nb, M.ordering.max_order() + 1);
    out.base_vars = M.base_vars;
    out.rows = M.rows * (1 + nb);
    for (auto& [rc, c] : M.entries) {
        auto [row, col] = rc;
        auto [a, alpha] = M.ordering.decode(col);
        out.accumulate(row, out.ordering.col(a, alpha), c);
        for (int j = 0; j < nb; ++j) {
            int drow = M.rows * (1 + j) + row;
            MultiIndex shifted = alpha;
            shifted[static_cast<std::size_t>(j)] += 1;
            out.accumulate(drow, out.ordering.col(a, shifted), c);
            ExprPtr dc = differentiate(c, M.base_vars[static_cast<std::size_t>(j)]);
            out.accumulate(drow, out.ordering.col(a, alpha), dc);
        }
    }
    return out;
}

/// Evaluates the coefficient matrix at a base point, rescales every row to
/// unit Euclidean norm and drops identically-zero rows, so the absolute
/// singular-value tolerance is invariant under row rescaling of the input.
inline Eigen::MatrixXd evaluate_matrix(const CoefficientMatrixFunction& M,
                                       const std::vector<double>& z0) {
    if (z0.size() != M.base_vars.size())
        throw eval_error("base point dimension does not match the matrix");
    Bindings b;
    for (std::size_t i = 0; i < z0.size(); ++i) b.set(M.base_vars[i], z0[i]);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M.rows, M.ordering.cols());
    for (auto& [rc, c] : M.entries) {
        try {
            A(rc.first, rc.second) = evaluate(c, b);
        } catch (const eval_error& e) {
            throw eval_error("row " + std::to_string(rc.first) + ": " + e.what());
        }
    }
    Eigen::MatrixXd out(A.rows(), A.cols());
    int kept = 0;
    for (int i = 0; i < A.rows(); ++i) {
        double nrm = A.row(i).norm();
        if (nrm > 0.0) out.row(kept++) = A.row(i) / nrm;
    }
    out.conservativeResize(kept, Eigen::NoChange);
    return out;
}

/// Drops the leading (top ell orders) coordinates from each basis vector
/// (columns of B laid out per `ord`), yielding a spanning set for the
/// projected space in order-(Q-ell) coordinates.
inline Eigen::MatrixXd project_basis(const Eigen::MatrixXd& B, const JetOrdering& ord, int ell) {
    if (ell < 0 || ell > ord.max_order() + 1)
        throw std::out_of_range("projection depth out of range");
    int start = ord.first_col_of_order(ord.max_order() - ell);
    return B.bottomRows(B.rows() - start);
}

// ---------------------------------------------------------------------------
// Prolongation tower
//
// D^k R as a set of equations {D^beta e : |beta| <= k}. Mixed derivatives are
// generated once per multi-index (D_x and D_u commute on coefficient
// expressions), so level k has rows(R) * C(nb+k, nb) rows instead of the
// (1+nb)^k of iterated single-step prolongation; the spanned row space at any
// point is the same. Levels are memoized and extended lazily; safe to share
// across scan workers.

class ProlongationTower {
public:
    explicit ProlongationTower(const DeterminingSystem& sys)
        : base_(assemble_matrix(sys)) {}
    explicit ProlongationTower(CoefficientMatrixFunction base) : base_(std::move(base)) {}

    const CoefficientMatrixFunction& level(int k) {
        std::lock_guard<std::mutex> lock(mu_);
        build_to(k);
        return levels_[static_cast<std::size_t>(k)];
    }

    int base_order() const { return base_.ordering.max_order(); }
    const CoefficientMatrixFunction& base() const { return base_; }

private:
    using Row = std::map<std::pair<int, MultiIndex>, ExprPtr>;

    void build_to(int k) {
        while (static_cast<int>(levels_.size()) <= k) {
            int next = static_cast<int>(levels_.size());
            if (next == 0) {
                seed_rows();
            } else {
                for (int eq = 0; eq < base_.rows; ++eq)
                    for (auto& beta : multi_indices(base_.ordering.base_vars(), next))
                        derive_row(eq, beta);
            }
            levels_.push_back(materialize(next));
        }
    }

    void seed_rows() {
        const int nb = base_.ordering.base_vars();
        for (int eq = 0; eq < base_.rows; ++eq)
            rows_[rkey(eq, MultiIndex(static_cast<std::size_t>(nb), 0))] = {};
        for (auto& [rc, c] : base_.entries) {
            auto [a, alpha] = base_.ordering.decode(rc.second);
            MultiIndex beta(static_cast<std::size_t>(nb), 0);
            rows_[rkey(rc.first, beta)][{a, alpha}] = c;
        }
    }

    void derive_row(int eq, const MultiIndex& beta) {
        if (rows_.count(rkey(eq, beta))) return;
        std::size_t j = 0;
        while (beta[j] == 0) ++j;
        MultiIndex prev = beta;
        prev[j] -= 1;
        const Row& src = rows_.at(rkey(eq, prev));
        Row out;
        for (auto& [coord, c] : src) {
            MultiIndex shifted = coord.second;
            shifted[j] += 1;
            accum(out, coord.first, shifted, c);
            ExprPtr dc = diff_cached(c, static_cast<int>(j));
            if (!is_const(dc, 0.0)) accum(out, coord.first, coord.second, dc);
        }
        rows_[rkey(eq, beta)] = std::move(out);
    }

    static void accum(Row& row, int a, const MultiIndex& alpha, const ExprPtr& c) {
        auto it = row.find({a, alpha});
        if (it == row.end()) row.emplace(std::make_pair(a, alpha), c);
        else it->second = add(it->second, c);
    }

    ExprPtr diff_cached(const ExprPtr& c, int j) {
        auto key = std::make_pair(c.get(), j);
        auto it = dcache_.find(key);
        if (it != dcache_.end()) return it->second;
        ExprPtr d = differentiate(c, base_.base_vars[static_cast<std::size_t>(j)]);
        dcache_.emplace(key, d);
        return d;
    }

    CoefficientMatrixFunction materialize(int k) {
        const int nb = base_.ordering.base_vars();
        CoefficientMatrixFunction M;
        M.ordering = JetOrdering(base_.ordering.unknowns(), nb, base_order() + k);
        M.base_vars = base_.base_vars;
        int row = 0;
        for (int o = 0; o <= k; ++o)
            for (auto& beta : multi_indices(nb, o))
                for (int eq = 0; eq < base_.rows; ++eq) {
                    for (auto& [coord, c] : rows_.at(rkey(eq, beta)))
                        M.accumulate(row, M.ordering.col(coord.first, coord.second), c);
                    ++row;
                }
        M.rows = row;
        return M;
    }

    static std::string rkey(int eq, const MultiIndex& beta) {
        std::string s = std::to_string(eq);
        for (int v : beta) {
            s.push_back(':');
            s += std::to_string(v);
        }
        return s;
    }

    struct PtrJHash {
        std::size_t operator()(const std::pair<const Expr*, int>& p) const {
            return std::hash<const void*>()(p.first) ^ (static_cast<std::size_t>(p.second) << 1);
        }
    };

    CoefficientMatrixFunction base_;
    std::mutex mu_;
    std::map<std::string, Row> rows_;
    std::unordered_map<std::pair<const Expr*, int>, ExprPtr, PtrJHash> dcache_;
    std::vector<CoefficientMatrixFunction> levels_;
};

}  // namespace liesym
