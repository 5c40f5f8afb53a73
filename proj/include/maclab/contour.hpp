#ifndef MACLAB_CONTOUR_HPP
#define MACLAB_CONTOUR_HPP

#include "maclab/formal_process.hpp"
#include "maclab/symfunc.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <set>

namespace maclab {

/// A pole that cannot be placed inside or outside a contour, or a violated contour condition.
struct UndecidableContour : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// (v_i - c v_j) with i < j, or (v_i - c) when j == -1; c != 0 in both cases.
struct FormKey {
    int i = 0;
    int j = -1;
    Scalar c;
    friend bool operator==(const FormKey& a, const FormKey& b) { return a.i == b.i && a.j == b.j && a.c == b.c; }
    friend bool operator<(const FormKey& a, const FormKey& b)
    {
        if (a.i != b.i) return a.i < b.i;
        if (a.j != b.j) return a.j < b.j;
        return a.c < b.c;
    }
};

/// Product of a monomial and powers of linear forms; negative exponents are denominators.
struct TermKey {
    std::vector<int> mono;
    std::vector<std::pair<FormKey, int>> forms;  // sorted, nonzero exponents
    friend bool operator==(const TermKey& a, const TermKey& b) { return a.mono == b.mono && a.forms == b.forms; }
    friend bool operator<(const TermKey& a, const TermKey& b)
    {
        if (a.mono != b.mono) return a.mono < b.mono;
        return a.forms < b.forms;
    }
};

/// Sum of rational terms in contour variables v_0..v_{n-1}.
class RationalExpr {
public:
    explicit RationalExpr(int nvars = 0) : n_(nvars) {}

    static RationalExpr constant(int nvars, const Scalar& c);
    static RationalExpr monomial(int nvars, const std::vector<int>& exps, const Scalar& c = 1);
    /// (a v_i + b v_j)^e with i != j
    static RationalExpr binomial_form(int nvars, int i, const Scalar& a, int j, const Scalar& b, int e);
    /// (a v_i + c)^e
    static RationalExpr affine(int nvars, int i, const Scalar& a, const Scalar& c, int e);

    int nvars() const { return n_; }
    const std::map<TermKey, Scalar>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    void add_term(const TermKey& key, const Scalar& c);
    /// Variables that occur in some term.
    std::set<int> variables() const;
    /// Denominator forms removed by matching numerator zeros while the expression was built.
    const std::set<FormKey>& cancelled_forms() const { return cancelled_; }
    void note_cancelled(const FormKey& f) { cancelled_.insert(f); }

    std::complex<double> evaluate(const std::vector<std::complex<double>>& v) const;
    Scalar evaluate_exact(const std::vector<Scalar>& v) const;
    /// Constant value once no variable is left.
    Scalar constant_value() const;
    std::string to_string() const;

    RationalExpr& operator+=(const RationalExpr& o);
    RationalExpr& operator*=(const Scalar& c);
    friend RationalExpr operator+(RationalExpr a, const RationalExpr& b) { return a += b; }
    friend RationalExpr operator*(RationalExpr a, const Scalar& c) { return a *= c; }
    friend RationalExpr operator*(const RationalExpr& a, const RationalExpr& b);

private:
    int n_;
    std::map<TermKey, Scalar> terms_;
    std::set<FormKey> cancelled_;
};

/// Floating-point copy of a RationalExpr for repeated evaluation; each linear form is computed once per point.
class NumericExpr {
public:
    explicit NumericExpr(const RationalExpr& e);
    /// Adds the sum of the absolute values of the terms to *magnitude when given.
    std::complex<double> operator()(const std::vector<std::complex<double>>& v, double* magnitude = nullptr) const;

private:
    struct Term {
        std::complex<double> coeff;
        std::vector<std::pair<int, int>> powers;  // (variable, exponent), then (n + form index, exponent)
    };
    int n_;
    std::vector<FormKey> keys_;
    std::vector<double> c_;
    std::vector<Term> terms_;
};

struct Circle {
    Scalar center;
    Scalar radius;
};

/// Pole location in one variable: 0, a constant, or kappa * v_k.
struct Pole {
    enum class Kind { Zero, Constant, Scaled };
    Kind kind = Kind::Zero;
    Scalar value;  // constant, or kappa
    int other = -1;
    std::string describe(const std::vector<std::string>& names) const;
    friend bool operator<(const Pole& a, const Pole& b);
};

enum class PoleClass { Inside, Outside, Undecidable };

/// R_smaller < factor * R_larger
struct RadiusConstraint {
    int smaller;
    int larger;
    Scalar factor;
};

/// point must be inside (or outside) the contour of var
struct PointCondition {
    int var;
    Scalar point;
    bool inside;
};

/// Concrete exact circles, one per variable, with the theorem's conditions attached.
struct ContourScheme {
    std::vector<std::string> names;
    std::vector<Circle> circles;
    std::vector<int> order;  // integration order
    std::vector<RadiusConstraint> constraints;
    std::vector<PointCondition> points;

    int size() const { return static_cast<int>(circles.size()); }
    /// Throws UndecidableContour when a condition fails or the order is not a permutation.
    void verify() const;
};

PoleClass classify_pole(const ContourScheme& scheme, int var, const Pole& pole);

/// Pole order of a single term at a location (<= 0 means no pole).
int pole_order(const TermKey& key, int var, const Pole& pole);

/// Residue of expr in var at the given pole; other variables stay symbolic.
RationalExpr residue_at(const RationalExpr& expr, int var, const Pole& pole);

/// Classified poles, recorded while integrating.
struct ResiduePlan {
    std::vector<int> order;
    std::vector<std::set<std::string>> inside;
    std::vector<std::set<std::string>> cancelled;
    /// Variables without a name are written v1, v2, ...
    std::string text(const std::vector<std::string>& names) const;
    std::string digest(const std::vector<std::string>& names) const;
    void merge(const ResiduePlan& other);
};

/// (2 pi i)^{-n} times the iterated contour integral, by residues.
RationalExpr integrate(const RationalExpr& expr, const ContourScheme& scheme, ResiduePlan* plan = nullptr);
Scalar integrate_scalar(const RationalExpr& expr, const ContourScheme& scheme, ResiduePlan* plan = nullptr);

/// Laurent polynomial in contour variables with AlphabetSeries coefficients, truncated at alphabet degree D.
class LaurentSeries {
public:
    using Key = std::pair<std::vector<int>, AlphabetSeries::Key>;

    LaurentSeries(int nvars, std::vector<std::string> alphabets, int D);
    static LaurentSeries one(int nvars, std::vector<std::string> alphabets, int D);

    int nvars() const { return n_; }
    int truncation() const { return D_; }
    const std::vector<std::string>& alphabets() const { return layout_.alphabets(); }
    const std::map<Key, Scalar>& terms() const { return terms_; }
    void add(const std::vector<int>& exps, const AlphabetSeries::Key& key, const Scalar& c);

    /// sign * sum_k coeff(k) * s^k * p_k(alphabet) * v_var^{sigma k} / k
    void add_log_pairing(const std::string& alphabet, int var, const Scalar& s, int sigma,
                         const std::function<Scalar(int)>& coeff, int sign);
    /// exp of a series without constant term
    LaurentSeries exp() const;
    /// Coefficient series per v-exponent vector.
    std::map<std::vector<int>, AlphabetSeries> by_exponent() const;
    /// Largest |exponent| of any variable.
    int max_abs_exponent() const;

    friend LaurentSeries operator*(const LaurentSeries& a, const LaurentSeries& b);

private:
    int n_;
    int D_;
    AlphabetSeries layout_;  // empty series used for key helpers
    std::map<Key, Scalar> terms_;
};

/// kernel(v) * numerator(v), integrated termwise, times prefactor.
struct FormalIntegrand {
    RationalExpr kernel;
    LaurentSeries numerator;
    AlphabetSeries prefactor;
    ContourScheme scheme;
};

AlphabetSeries integrate_formal(const FormalIntegrand& integrand, ResiduePlan* plan = nullptr);

/// Variable groups of the multilevel formula: group m has `sizes[m]` variables at level `levels[m]`.
struct GroupLayout {
    std::vector<int> sizes;
    std::vector<int> levels;  // 1-based, nondecreasing
};

/// det[1/(v_i - t v_j)] / r! over the given variables, in Cauchy product form.
RationalExpr cauchy_block(int nvars, const std::vector<int>& vars, const Params& params);

/// Single-level formula with r variables over alphabets X, Y.
FormalIntegrand build_single_level(int r, const std::string& X, const std::string& Y, const Params& params, int D);

/// Multilevel formula for grouped observables, with optional scale constants c_1..c_N.
FormalIntegrand build_multilevel(const GroupLayout& groups, const ProcessSpec& spec,
                                 const std::vector<Scalar>& scales = {});

/// Multilevel formula for the O-hat_1 observable at every level.
FormalIntegrand build_ohat_multilevel(const ProcessSpec& spec);

/// Variable groups for a plan of O_r observables (r > 0), ordered by level.
GroupLayout groups_for_plan(const ObservablePlan& plan, int N);

/// Iterated trapezoidal quadrature on the product of circles. Each circle doubles its own nodes until two
/// successive values agree to its tolerance (`precision` for the outermost, ten times finer per level inward),
/// or to the rounding floor (the larger of 1e-14 * sum of abs(weight * f) and 1e-14 * max abs(f) * product of
/// the radii still to be integrated), or until the differences shrink quadratically with
/// the squared difference below the tolerance. Throws std::runtime_error past `max_evaluations` calls of f.
std::complex<double> numeric_quadrature(const std::function<std::complex<double>(const std::vector<std::complex<double>>&)>& f,
                                        const ContourScheme& scheme, double precision, long max_evaluations = 1L << 24);
/// Same, with the rounding floor taken from the term magnitudes of the expression.
std::complex<double> numeric_quadrature(const NumericExpr& f, const ContourScheme& scheme, double precision,
                                        long max_evaluations = 1L << 24);

/// Numeric value of a formal integrand after substituting p_k(alphabet) -> values[alphabet][k];
/// the prefactor multiplies the quadrature value without truncation.
std::complex<double> numeric_formal(const FormalIntegrand& integrand,
                                    const std::map<std::string, std::vector<double>>& values, double precision);
/// Numeric value of an AlphabetSeries under the same substitution.
double evaluate_series(const AlphabetSeries& s, const std::map<std::string, std::vector<double>>& values);

}  // namespace maclab

#endif
