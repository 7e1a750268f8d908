// Determining systems for Lie point symmetries of scalar ODEs.
//
// For u_n = f(x, u, u_1, ..., u_{n-1}) the infinitesimal generator
// X = xi(x,u) d/dx + eta(x,u) d/du is prolonged through
//   eta^(k) = D_x eta^(k-1) - u_k D_x xi,
// the invariance condition X^(n)(u_n - f) = 0 is restricted to the equation
// manifold (u_n -> f), and the result is split by monomials in u_1..u_{n-1}.
// Each coefficient is a linear homogeneous PDE in the jets of (xi, eta).

#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "liesym/expr.hpp"

namespace liesym {

class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scalar ODE in solved form u_n = f(x, u, u_1, ..., u_{n-1}).
struct ODESpec {
    int order = 0;   // n >= 2
    ExprPtr lhs;     // E with E = 0 the input equation
    ExprPtr f;       // solved right-hand side

    static constexpr const char* indep = "x";
    static constexpr const char* dep = "u";
};

/// Builds an ODESpec from the left-hand expression of E = 0. E must be linear
/// in the top-order indeterminate; its coefficient joins f as a reciprocal and
/// is checked numerically at each evaluation point.
inline ODESpec make_ode(const ExprPtr& lhs, int order) {
    if (order < 2)
        throw input_error(order <= 0
                              ? "the equation contains no derivative of u"
                              : "first-order ODEs are rejected: the point symmetry "
                                "algebra is infinite-dimensional");
    const std::string top = deriv_name(ODESpec::dep, order);
    MonomialMap m;
    try {
        m = collect_monomials(lhs, {top});
    } catch (const nonpoly_error&) {
        throw input_error("equation is not linear in " + top);
    }
    ExprPtr lead, rest = constant(0.0);
    for (auto& [deg, coeff] : m) {
        if (deg[0] == 0) rest = coeff;
        else if (deg[0] == 1) lead = coeff;
        else throw input_error("equation is not linear in " + top);
    }
    if (!lead) throw input_error("equation does not involve " + top);
    ODESpec ode;
    ode.order = order;
    ode.lhs = lhs;
    ode.f = is_const(lead, 1.0) ? neg(rest) : mul(neg(rest), inv(lead));
    return ode;
}

/// Parses ODE text under the CLI grammar and returns its ODESpec.
inline ODESpec parse_ode(const std::string& text) {
    ParsedJetExpr pj = parse_jet(text, ODESpec::indep, ODESpec::dep);
    return make_ode(pj.expr, pj.max_order);
}

// ---------------------------------------------------------------------------
// Jet-variable naming for the unknowns xi, eta

inline const std::vector<std::string>& unknown_names() {
    static const std::vector<std::string> names{"xi", "eta"};
    return names;
}

/// Name of d^i/dx^i d^j/du^j of unknown a (0 = xi, 1 = eta), e.g. "eta_xu".
inline std::string unknown_jet_name(int a, int dx, int du) {
    std::string s = unknown_names()[static_cast<std::size_t>(a)];
    if (dx + du > 0) {
        s += "_";
        s.append(static_cast<std::size_t>(dx), 'x');
        s.append(static_cast<std::size_t>(du), 'u');
    }
    return s;
}

/// Inverse of unknown_jet_name; nullopt for non-jet names.
inline std::optional<std::array<int, 3>> decode_jet_name(const std::string& name) {
    for (int a = 0; a < 2; ++a) {
        const std::string& base = unknown_names()[static_cast<std::size_t>(a)];
        if (name == base) return std::array<int, 3>{a, 0, 0};
        if (name.size() > base.size() + 1 && name.compare(0, base.size(), base) == 0 &&
            name[base.size()] == '_') {
            int dx = 0, du = 0;
            for (std::size_t i = base.size() + 1; i < name.size(); ++i) {
                if (name[i] == 'x' && du == 0) ++dx;
                else if (name[i] == 'u') ++du;
                else return std::nullopt;
            }
            return std::array<int, 3>{a, dx, du};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Total derivative D_x

/// Total x-derivative on expressions over x, u, derivative indeterminates
/// u', u'', ... and jets of the unknowns xi, eta:
///   D_x x = 1, D_x u = u', D_x u^(k) = u^(k+1),
///   D_x a_[i,j] = a_[i+1,j] + u' a_[i,j+1].
inline ExprPtr total_derivative(const ExprPtr& e) {
    std::map<std::string, ExprPtr> images;
    const std::string dep = ODESpec::dep;
    for (const std::string& v : variables(e)) {
        if (v == ODESpec::indep) {
            images[v] = constant(1.0);
        } else if (v == dep) {
            images[v] = var(deriv_name(dep, 1));
        } else if (v.size() > dep.size() && v.compare(0, dep.size(), dep) == 0 &&
                   v.find_first_not_of('\'', dep.size()) == std::string::npos) {
            int k = static_cast<int>(v.size() - dep.size());
            images[v] = var(deriv_name(dep, k + 1));
        } else if (auto j = decode_jet_name(v)) {
            auto [a, dx, du] = *j;
            images[v] = add(var(unknown_jet_name(a, dx + 1, du)),
                            mul(var(deriv_name(dep, 1)), var(unknown_jet_name(a, dx, du + 1))));
        }
    }
    return derive(e, images);
}

// ---------------------------------------------------------------------------
// The determining system

struct DetTerm {
    ExprPtr coeff;             // expression in the base variables only
    int unknown = 0;           // 0 = xi, 1 = eta
    std::vector<int> alpha;    // differentiation multi-index (d/dx, d/du)
};

struct DeterminingSystem {
    std::vector<std::string> unknowns{"xi", "eta"};
    std::vector<std::string> base_vars{"x", "u"};
    std::vector<std::vector<DetTerm>> equations;
    int order = 0;  // q: max |alpha| over all terms
};

namespace detail {

// Splits a linear homogeneous expression in the unknown jets into terms.
inline std::vector<DetTerm> linear_terms(const ExprPtr& eq) {
    std::vector<std::string> jets;
    for (const std::string& v : variables(eq))
        if (decode_jet_name(v)) jets.push_back(v);
    std::vector<DetTerm> terms;
    for (auto& [deg, coeff] : collect_monomials(eq, jets)) {
        int total = 0;
        int which = -1;
        for (std::size_t i = 0; i < deg.size(); ++i) {
            total += deg[i];
            if (deg[i] > 0) which = static_cast<int>(i);
        }
        if (total == 0)
            throw std::logic_error("determining equation has an inhomogeneous part");
        if (total != 1)
            throw std::logic_error("determining equation is nonlinear in the unknowns");
        auto [a, dx, du] = *decode_jet_name(jets[static_cast<std::size_t>(which)]);
        terms.push_back(DetTerm{coeff, a, {dx, du}});
    }
    return terms;
}

}  // namespace detail

/// Generates the determining system of the Lie point symmetries of `ode`.
/// Throws input_error when f depends non-polynomially on the derivative
/// indeterminates.
inline DeterminingSystem generate_determining_system(const ODESpec& ode) {
    const int n = ode.order;
    const std::string dep = ODESpec::dep;

    ExprPtr xi = var(unknown_jet_name(0, 0, 0));
    ExprPtr eta = var(unknown_jet_name(1, 0, 0));
    ExprPtr dxi = total_derivative(xi);

    std::vector<ExprPtr> eta_k{eta};  // eta^(0..n)
    for (int k = 1; k <= n; ++k)
        eta_k.push_back(sub(total_derivative(eta_k.back()),
                            mul(var(deriv_name(dep, k)), dxi)));

    ExprPtr inv_cond = eta_k[static_cast<std::size_t>(n)];
    inv_cond = sub(inv_cond, mul(xi, differentiate(ode.f, ODESpec::indep)));
    inv_cond = sub(inv_cond, mul(eta, differentiate(ode.f, dep)));
    for (int k = 1; k <= n - 1; ++k)
        inv_cond = sub(inv_cond,
                       mul(eta_k[static_cast<std::size_t>(k)],
                           differentiate(ode.f, deriv_name(dep, k))));
    inv_cond = substitute(inv_cond, {{deriv_name(dep, n), ode.f}});

    std::vector<std::string> indets;
    for (int k = 1; k <= n - 1; ++k) indets.push_back(deriv_name(dep, k));

    MonomialMap split;
    try {
        split = collect_monomials(inv_cond, indets);
    } catch (const nonpoly_error& e) {
        throw input_error(std::string("right-hand side is not polynomial in the "
                                      "derivative indeterminates: ") +
                          e.what());
    }

    DeterminingSystem sys;
    for (auto& [deg, coeff] : split) {
        (void)deg;
        auto terms = detail::linear_terms(coeff);
        if (terms.empty()) continue;
        for (const DetTerm& t : terms)
            sys.order = std::max(sys.order, t.alpha[0] + t.alpha[1]);
        sys.equations.push_back(std::move(terms));
    }
    return sys;
}

}  // namespace liesym
