#ifndef MACLAB_SYMFUNC_HPP
#define MACLAB_SYMFUNC_HPP

#include "maclab/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace maclab {

/// Symmetric function in the power-sum basis, truncated at degree D.
///
/// Terms of degree > D are never stored; products drop them.
class SymFunc {
public:
    explicit SymFunc(int D = 0) : D_(D) {}

    static SymFunc constant(const Scalar& c, int D);
    /// c * p_lambda
    static SymFunc power(const Partition& lambda, int D, const Scalar& c = 1);

    int truncation() const { return D_; }
    const std::map<Partition, Scalar>& terms() const { return terms_; }
    Scalar coefficient(const Partition& lambda) const;
    void add(const Partition& lambda, const Scalar& c);
    bool is_zero() const { return terms_.empty(); }

    SymFunc homogeneous_part(int d) const;
    SymFunc with_truncation(int D) const;
    std::string to_string() const;

    SymFunc& operator+=(const SymFunc& o);
    SymFunc& operator-=(const SymFunc& o);
    SymFunc& operator*=(const Scalar& c);
    friend SymFunc operator+(SymFunc a, const SymFunc& b) { return a += b; }
    friend SymFunc operator-(SymFunc a, const SymFunc& b) { return a -= b; }
    friend SymFunc operator*(SymFunc a, const Scalar& c) { return a *= c; }
    friend SymFunc operator*(const Scalar& c, SymFunc a) { return a *= c; }
    friend SymFunc operator*(const SymFunc& a, const SymFunc& b);
    friend bool operator==(const SymFunc& a, const SymFunc& b) { return a.terms_ == b.terms_; }

private:
    int D_;
    std::map<Partition, Scalar> terms_;
};

/// Polynomial in several named alphabets of power sums, truncated at total degree D.
///
/// A monomial prod_a p_{lambda^a}(A^a) is stored under a byte key holding the
/// multiplicity of p_k(A^a) at position a*D + k - 1.
class AlphabetSeries {
public:
    using Key = std::string;

    AlphabetSeries() = default;
    AlphabetSeries(std::vector<std::string> alphabets, int D);

    static AlphabetSeries constant(std::vector<std::string> alphabets, int D, const Scalar& c);
    /// c * p_k(alphabet)
    static AlphabetSeries power_sum(std::vector<std::string> alphabets, int D, const std::string& alphabet, int k,
                                   const Scalar& c = 1);
    /// Places a SymFunc in the named alphabet.
    static AlphabetSeries from_symfunc(const SymFunc& f, std::vector<std::string> alphabets, const std::string& alphabet,
                                       int D);

    const std::vector<std::string>& alphabets() const { return alphabets_; }
    int truncation() const { return D_; }
    int index_of(const std::string& alphabet) const;
    bool has_alphabet(const std::string& alphabet) const;
    const std::map<Key, Scalar>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    Key key_of(const std::vector<Partition>& parts) const;
    Partition partition_in(const Key& key, int alphabet) const;
    std::vector<Partition> partitions_of_key(const Key& key) const;
    int degree(const Key& key) const;
    int degree_in(const Key& key, int alphabet) const;

    Scalar coefficient(const std::vector<Partition>& parts) const;
    Scalar constant_term() const;
    void add(const Key& key, const Scalar& c);

    /// Same terms over a superset of alphabets (order may change).
    AlphabetSeries embed(const std::vector<std::string>& alphabets) const;
    AlphabetSeries truncated(int D) const;
    /// Renames one alphabet; the new name must not already be present.
    AlphabetSeries renamed(const std::string& from, const std::string& to) const;
    /// Only valid when every alphabet but `alphabet` has degree 0 in all terms.
    SymFunc to_symfunc(const std::string& alphabet) const;
    std::string to_string() const;

    AlphabetSeries& operator+=(const AlphabetSeries& o);
    AlphabetSeries& operator-=(const AlphabetSeries& o);
    AlphabetSeries& operator*=(const Scalar& c);
    friend AlphabetSeries operator+(AlphabetSeries a, const AlphabetSeries& b) { return a += b; }
    friend AlphabetSeries operator-(AlphabetSeries a, const AlphabetSeries& b) { return a -= b; }
    friend AlphabetSeries operator*(AlphabetSeries a, const Scalar& c) { return a *= c; }
    friend AlphabetSeries operator*(const Scalar& c, AlphabetSeries a) { return a *= c; }
    friend AlphabetSeries operator*(const AlphabetSeries& a, const AlphabetSeries& b);
    friend bool operator==(const AlphabetSeries& a, const AlphabetSeries& b);

private:
    std::vector<std::string> alphabets_;
    int D_ = 0;
    std::map<Key, Scalar> terms_;
};

/// Union of alphabet lists, preserving first-seen order.
std::vector<std::string> merge_alphabets(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// exp(s) truncated; s must have zero constant term.
AlphabetSeries exp_series(const AlphabetSeries& s);
/// Formal reciprocal 1/f by Newton iteration g <- g(2 - f g); f needs a nonzero constant term.
AlphabetSeries reciprocal(const AlphabetSeries& f);

/// Transition matrices between m_lambda and p_lambda for one degree.
struct MonomialBlock {
    std::vector<Partition> parts;            // reverse-lex order, (d) first
    std::vector<std::vector<Scalar>> p_to_m; // p_mu = sum_lambda p_to_m[mu][lambda] m_lambda
    std::vector<std::vector<Scalar>> m_to_p; // m_lambda = sum_mu m_to_p[lambda][mu] p_mu
    int index_of(const Partition& lambda) const;
};

/// Read-only cache of MonomialBlock per degree.
class MonomialTable {
public:
    static const MonomialBlock& block(int degree);
};

/// m_lambda expressed in power sums.
SymFunc monomial_symmetric(const Partition& lambda, int D);

Scalar macdonald_pair(const SymFunc& f, const SymFunc& g, const Params& params);
SymFunc macdonald_P(const Partition& lambda, const Params& params, int D);
SymFunc macdonald_Q(const Partition& lambda, const Params& params, int D);
/// <P_lambda, P_lambda>
Scalar macdonald_norm(const Partition& lambda, const Params& params);

/// f(X, Y): p_k -> p_k(X) + p_k(Y).
AlphabetSeries coproduct(const SymFunc& f, const std::string& x, const std::string& y);

/// P_{lambda/mu} = <P_lambda(X,Y), Q_mu(Y)>_Y
SymFunc skew_P(const Partition& lambda, const Partition& mu, const Params& params, int D);
/// Q_{lambda/mu} = <Q_lambda(X,Y), P_mu(Y)>_Y
SymFunc skew_Q(const Partition& lambda, const Partition& mu, const Params& params, int D);

enum class KernelKind { Pi, PiInverse, H, HInverse, W };

/// exp(+-sum_k c_k p_k(X) p_k(Y) / k) truncated at total degree D.
AlphabetSeries kernel_series(KernelKind kind, const std::string& x, const std::string& y, const Params& params, int D);
Scalar kernel_coefficient(KernelKind kind, int k, const Params& params);

/// Bilinear pairing over the shared alphabet `over`. The remaining alphabets
/// of f and g must be disjoint. Exact in degrees <= D when every term has
/// `over`-degree at most its complementary degree.
AlphabetSeries alphabet_pair(const AlphabetSeries& f, const AlphabetSeries& g, const std::string& over,
                             const Params& params);

/// exp(sum_k coeff[k] p_k(alphabet) / k), coeff[k] free of `alphabet`.
struct ExpForm {
    std::string alphabet;
    std::map<int, AlphabetSeries> coeff;
    AlphabetSeries expand(const std::vector<std::string>& alphabets, int D) const;
};

/// Closed-form pairing of two exponentials (no expansion in the paired alphabet).
AlphabetSeries pair_exponentials(const ExpForm& a, const ExpForm& b, const std::vector<std::string>& out_alphabets,
                                 int D, const Params& params);

/// p_k(alphabet) -> pk[k]; removes the alphabet.
AlphabetSeries specialize(const AlphabetSeries& f, const std::string& alphabet, const std::vector<Scalar>& pk);
/// p_k(alphabet) -> c^k p_k(alphabet).
AlphabetSeries scale_alphabet(const AlphabetSeries& f, const std::string& alphabet, const Scalar& c);
/// p_k(from) -> p_k(to_1) + p_k(to_2); result alphabets are f's minus `from` plus the targets.
AlphabetSeries split_alphabet(const AlphabetSeries& f, const std::string& from, const std::string& to1,
                              const std::string& to2);

/// Exact multivariate polynomial in x_1..x_n.
class Polynomial {
public:
    explicit Polynomial(int nvars = 0) : n_(nvars) {}
    int nvars() const { return n_; }
    const std::map<std::vector<int>, Scalar>& terms() const { return terms_; }
    void add(const std::vector<int>& exps, const Scalar& c);
    Scalar evaluate(const std::vector<Scalar>& x) const;
    bool is_zero() const { return terms_.empty(); }
    /// Terms sorted by descending lexicographic exponent.
    std::string to_string() const;
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.terms_ == b.terms_; }

private:
    int n_;
    std::map<std::vector<int>, Scalar> terms_;
};

/// p_k -> x_1^k + ... + x_n^k
Polynomial restrict_to_vars(const SymFunc& f, int n);

}  // namespace maclab

#endif
