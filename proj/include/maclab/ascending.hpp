#ifndef MACLAB_ASCENDING_HPP
#define MACLAB_ASCENDING_HPP

#include "maclab/contour.hpp"

namespace maclab {

/// Specialization rho with a certified radius: |p_k(rho)| < R^k.
struct Rho {
    enum class Kind { FiniteAlphabet, Plancherel, Zero };
    Kind kind = Kind::Zero;
    std::vector<Scalar> b;  // finite alphabet
    Scalar gamma;           // Plancherel parameter
    Scalar R;

    /// R defaults to a value strictly between sum |b_j| and 1.
    static Rho finite(std::vector<Scalar> b, std::optional<Scalar> R = std::nullopt);
    static Rho plancherel(const Scalar& gamma, std::optional<Scalar> R = std::nullopt);
    static Rho zero();

    /// Throws InvalidArgument when the radius certificate fails.
    void validate() const;
    bool exact() const { return kind != Kind::Plancherel; }
    Scalar power_sum(int k) const;
    /// Pi(q z; rho) / Pi(z; rho); exact for finite alphabets and zero.
    Scalar shift_ratio(const Scalar& z, const Params& params) const;
    std::complex<double> shift_ratio(std::complex<double> z, const Params& params) const;
    std::string describe() const;
};

struct AscendingConfig {
    int N = 1;
    std::vector<Scalar> a;
    Rho rho;
    Params params;
    /// Common integration circle for the contour formulas; empty means default_contour().
    std::optional<Circle> contour;

    /// Radius conditions |a_i| R < q^strength (InvalidArgument); distinct nonzero a's (ParameterDegeneracy).
    void validate(int strength = 0) const;
    /// Circle around the a's that excludes 0.
    Circle default_contour() const;
    Circle circle() const { return contour.value_or(default_contour()); }
};

/// One Macdonald difference operator M^r_n.
struct OperatorStep {
    int n = 1;
    int r = 0;
};

// ---------------------------------------------------------------- single-variable branching

/// b_lambda with Q_lambda = b_lambda P_lambda.
Scalar b_lambda(const Partition& lambda, const Params& params);
/// Coefficient psi with P_{lambda/mu}(x) = psi x^{|lambda|-|mu|}; 0 unless a horizontal strip.
Scalar branching_psi(const Partition& lambda, const Partition& mu, const Params& params);
bool interlaces(const Partition& lambda, const Partition& mu);
/// P_lambda(x_1..x_n) by branching.
Scalar P_at(const Partition& lambda, const std::vector<Scalar>& xs, const Params& params);
/// Q_lambda(rho) for an exact rho.
Scalar Q_at(const Partition& lambda, const Rho& rho, const Params& params);

struct Interval {
    Scalar lo;
    Scalar hi;
    Scalar width() const { return hi - lo; }
    bool contains(const Scalar& x) const { return lo <= x && x <= hi; }
};

/// Enclosure of Pi(x_1..x_n; rho) for positive x and positive finite alphabets.
Interval pi_enclosure(const std::vector<Scalar>& xs, const Rho& rho, const Params& params, int factors = 64);

/// P_{lambda^1}(a_1) P_{lambda^2/lambda^1}(a_2) ... Q_{lambda^N}(rho), without normalization.
Scalar ascending_numerator(const std::vector<Partition>& lambdas, const AscendingConfig& config);
/// The weight itself, enclosed through the enclosure of Pi(a; rho).
Interval ascending_weight(const std::vector<Partition>& lambdas, const AscendingConfig& config);

// ---------------------------------------------------------------- difference operators

using PointFunction = std::function<Scalar(const std::vector<Scalar>&)>;

/// rational(x) * Pi(x; rho), with Pi kept implicit.
struct ShiftedProduct {
    PointFunction rational;
    Rho rho;
    Params params;
    Scalar value_over_pi(const std::vector<Scalar>& x) const { return rational(x); }
};

/// t^{r(r-1)/2} sum_{|I| = r} prod_{i in I, j not in I} (t x_i - x_j) / (x_i - x_j) prod_{i in I} T_{q,i};
/// hatted uses (1/q, 1/t).
ShiftedProduct apply_difference_operator(int r, int n, const ShiftedProduct& f, bool hatted);

/// (M^{r_m}_{n_m} ... M^{r_1}_{n_1} Pi) / Pi at x = a; steps are listed as (n_1, r_1), ..., (n_m, r_m).
Scalar operator_chain_expectation(const std::vector<OperatorStep>& steps, const AscendingConfig& config, bool hatted);
/// Same chain in floating point; works for every rho kind.
std::complex<double> operator_chain_numeric(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                            bool hatted);

/// Sum over nu in Z_{>=0}^n with |nu| = r of the Noumi operator terms.
ShiftedProduct apply_noumi(int r, int n, const ShiftedProduct& f);
/// u^r coefficient of (Noumi Pi) / Pi at x = a.
Scalar noumi_coefficient(int r, const AscendingConfig& config);
/// u^r coefficient of prod_i (q^{lambda_i} t^{n+1-i} u; q)_inf / (q^{lambda_i} t^{n-i} u; q)_inf.
Scalar noumi_eigenvalue(int r, const Partition& lambda, int n, const Params& params);

// ---------------------------------------------------------------- Fredholm expansions

struct ExactIntegrand {
    RationalExpr expr;
    ContourScheme scheme;
};

/// det[K'(v_i, w_i, w_j)] on its contours; the term is the integral of this.
ExactIntegrand fredholm_qt_integrand(const std::vector<int>& v, const AscendingConfig& config);
/// det of the e_r kernel with r variables; the coefficient is (-1)^r / r! times its integral.
ExactIntegrand fredholm_ek_integrand(int r, const AscendingConfig& config);

/// (2 pi i)^{-k} times the k-fold integral of det[K'(v_i, w_i, w_j)], by residues.
Scalar fredholm_qt_term(const std::vector<int>& v, const AscendingConfig& config, ResiduePlan* plan = nullptr);
/// u^r coefficient of det(I + K); terms with k > max_k are skipped (default N).
Scalar fredholm_qt_coefficient(int r, const AscendingConfig& config, std::optional<int> max_k = std::nullopt,
                               ResiduePlan* plan = nullptr);
/// u^r coefficient of det(I - u J).
Scalar fredholm_ek_coefficient(int r, const AscendingConfig& config, ResiduePlan* plan = nullptr);

// ---------------------------------------------------------------- contour formulas

/// Integrand of the multilevel e_r formula (hatted: the inverted-parameter version).
ExactIntegrand build_ascending_integrand(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                         bool hatted);
/// Integrand of the t = 0 formula for prod q^{lambda^{n_i}_{n_i}}; exact rho only.
ExactIntegrand build_qwhittaker_integrand(const std::vector<int>& ns, const AscendingConfig& config);
/// Numeric value of the t = 0 formula, any rho.
std::complex<double> qwhittaker_numeric(const std::vector<int>& ns, const AscendingConfig& config, double precision);

// ---------------------------------------------------------------- truncated sums

struct TailBound {
    int L = 0;
    Scalar bound;
};

struct TruncatedExpectation {
    Scalar numerator_sum;  // partial sum before dividing by Pi(a; rho)
    Interval value;        // contains the full expectation
    TailBound tail;
};

/// Sum over ascending sequences with |lambda^N| <= L of prod_i e_{r_i}(spectrum of lambda^{n_i}) times the
/// weight, plus a certified tail bound. Requires positive a's and a positive finite alphabet.
TruncatedExpectation truncated_expectation_lhs(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                               bool hatted, int L);
/// Expectation of f(lambda) under the Macdonald measure with |f| <= bound, truncated at |lambda| <= L.
TruncatedExpectation truncated_measure_expectation(const std::function<Scalar(const Partition&)>& f, const Scalar& bound,
                                                   const AscendingConfig& config, int L);
/// Raises L until the interval is narrower than `tolerance`; throws past max_L.
TruncatedExpectation expectation_to_tolerance(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                              bool hatted, const Scalar& tolerance, int max_L = 40);

/// Sequences lambda^1..lambda^N with l(lambda^i) <= i, interlacing, |lambda^N| <= L.
void for_each_ascending(int N, int L, const std::function<void(const std::vector<Partition>&)>& fn);

}  // namespace maclab

#endif
