#ifndef MACLAB_CORE_HPP
#define MACLAB_CORE_HPP

#include <gmpxx.h>

#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maclab {

/// Exact rational. gmpxx keeps results canonical (reduced, positive denominator).
using Scalar = mpq_class;

/// Raised when a (q,t) choice makes some denominator vanish.
struct ParameterDegeneracy : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised for malformed user input (config values, rationals, ranges).
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

Scalar parse_scalar(std::string_view text);
std::string to_string(const Scalar& x);
Scalar pow(const Scalar& base, long e);
Scalar abs(const Scalar& x);
Scalar inverse(const Scalar& x);
double to_double(const Scalar& x);
Scalar factorial(int n);
Scalar binomial(long n, long k);

/// The two deformation parameters.
///
/// make() enforces 0 < q < 1 and 0 <= t < 1. unchecked() skips the range
/// test and exists for the parameter-inversion property, which needs
/// (1/q, 1/t).
class Params {
public:
    Scalar q;
    Scalar t;

    static Params make(const Scalar& q, const Scalar& t);
    static Params unchecked(const Scalar& q, const Scalar& t);

    /// Throws InvalidArgument when t == 0; `what` names the caller.
    void require_positive_t(const char* what) const;
    std::string key() const;

private:
    Params(Scalar q_, Scalar t_) : q(std::move(q_)), t(std::move(t_)) {}
};

class Partition {
public:
    Partition() = default;
    /// Drops trailing zeros; throws unless weakly decreasing and nonnegative.
    explicit Partition(std::vector<int> parts);
    Partition(std::initializer_list<int> parts) : Partition(std::vector<int>(parts)) {}

    int size() const { return size_; }
    int length() const { return static_cast<int>(parts_.size()); }
    bool empty() const { return parts_.empty(); }
    /// Part i (0-based); zero past the end.
    int operator[](int i) const { return i < length() ? parts_[static_cast<std::size_t>(i)] : 0; }
    const std::vector<int>& parts() const { return parts_; }

    Partition conjugate() const;
    bool contains(const Partition& mu) const;
    /// m_i(lambda) for i = 1..largest part; index 0 unused.
    std::vector<int> multiplicities() const;
    std::string to_string() const;

    friend bool operator==(const Partition&, const Partition&) = default;
    friend auto operator<=>(const Partition& a, const Partition& b) { return a.parts_ <=> b.parts_; }

private:
    std::vector<int> parts_;
    int size_ = 0;
};

/// Partitions of n in reverse-lexicographic order ((n) first).
std::vector<Partition> partitions_of(int n);

/// All partitions with |lambda| <= max_size, ordered by size then reverse-lex.
std::vector<Partition> enumerate_partitions(int max_size);

/// lambda >= mu in dominance order (same size required).
bool dominates(const Partition& lambda, const Partition& mu);

/// (a; base)_n = prod_{k<n} (1 - a base^k).
Scalar q_pochhammer(const Scalar& a, const Scalar& base, int n);

/// prod_i i^{m_i} m_i!
Scalar z_standard(const Partition& lambda);

/// <p_lambda, p_lambda> for the (q,t) scalar product.
Scalar z_factor(const Partition& lambda, const Params& params);

/// Elementary symmetric polynomial e_r of the given values.
Scalar elementary(int r, const std::vector<Scalar>& xs);

}  // namespace maclab

#endif
