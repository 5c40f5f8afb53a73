#include "maclab/ascending.hpp"

#include <algorithm>
#include <cmath>

namespace maclab {

namespace {

Scalar sum_abs(const std::vector<Scalar>& xs)
{
    Scalar s = 0;
    for (const auto& x : xs) s += abs(x);
    return s;
}

Scalar max_abs(const std::vector<Scalar>& xs)
{
    Scalar m = 0;
    for (const auto& x : xs) m = std::max(m, abs(x));
    return m;
}

// x rounded down / up to a multiple of 2^-bits
Scalar round_down(const Scalar& x, int bits)
{
    mpz_class scale = mpz_class(1) << bits;
    mpz_class num = x.get_num() * scale;
    mpz_class f;
    mpz_fdiv_q(f.get_mpz_t(), num.get_mpz_t(), x.get_den().get_mpz_t());
    Scalar r(f, scale);
    r.canonicalize();
    return r;
}

Scalar round_up(const Scalar& x, int bits)
{
    mpz_class scale = mpz_class(1) << bits;
    mpz_class num = x.get_num() * scale;
    mpz_class c;
    mpz_cdiv_q(c.get_mpz_t(), num.get_mpz_t(), x.get_den().get_mpz_t());
    Scalar r(c, scale);
    r.canonicalize();
    return r;
}

constexpr int kBits = 160;

}  // namespace

// ---------------------------------------------------------------- rho and configs

Rho Rho::finite(std::vector<Scalar> b, std::optional<Scalar> R)
{
    Rho r;
    r.kind = Kind::FiniteAlphabet;
    r.b = std::move(b);
    Scalar s = sum_abs(r.b);
    r.R = R.value_or(s > 0 ? Scalar(s + (1 - s) / 1000) : Scalar(1, 100));
    r.validate();
    return r;
}

Rho Rho::plancherel(const Scalar& gamma, std::optional<Scalar> R)
{
    Rho r;
    r.kind = Kind::Plancherel;
    r.gamma = gamma;
    r.R = R.value_or(Scalar(abs(gamma) + (1 - abs(gamma)) / 1000));
    r.validate();
    return r;
}

Rho Rho::zero()
{
    Rho r;
    r.kind = Kind::Zero;
    r.R = Scalar(1, 100);
    return r;
}

void Rho::validate() const
{
    if (!(R > 0 && R < 1)) throw InvalidArgument("rho radius R must satisfy 0 < R < 1");
    if (kind == Kind::FiniteAlphabet) {
        for (const auto& x : b) {
            if (x == 0) throw InvalidArgument("finite alphabet letters must be nonzero");
        }
        // sum |b_j| < R gives |p_k| <= (sum |b_j|)^k < R^k
        if (!(sum_abs(b) < R)) throw InvalidArgument("rho radius R must exceed the sum of |b_j|");
    }
    if (kind == Kind::Plancherel && !(abs(gamma) < R)) throw InvalidArgument("rho radius R must exceed |gamma|");
}

Scalar Rho::power_sum(int k) const
{
    switch (kind) {
    case Kind::FiniteAlphabet: {
        Scalar s = 0;
        for (const auto& x : b) s += pow(x, k);
        return s;
    }
    case Kind::Plancherel:
        return k == 1 ? gamma : Scalar(0);
    case Kind::Zero:
        return 0;
    }
    return 0;
}

Scalar Rho::shift_ratio(const Scalar& z, const Params& params) const
{
    if (kind == Kind::Plancherel) throw InvalidArgument("Plancherel rho has no exact shift ratio");
    Scalar r = 1;
    for (const auto& x : b) {
        Scalar den = 1 - params.t * z * x;
        if (den == 0) throw ParameterDegeneracy("shift ratio evaluated at its pole");
        r *= (1 - z * x) / den;
    }
    return r;
}

std::complex<double> Rho::shift_ratio(std::complex<double> z, const Params& params) const
{
    double t = to_double(params.t);
    if (kind == Kind::Plancherel) return std::exp(-to_double(gamma) * (1 - t) * z);
    std::complex<double> r = 1;
    for (const auto& x : b) {
        double xb = to_double(x);
        r *= (1.0 - z * xb) / (1.0 - t * z * xb);
    }
    return r;
}

std::string Rho::describe() const
{
    switch (kind) {
    case Kind::FiniteAlphabet: {
        std::string s = "finite{";
        for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "," : "") + to_string(b[i]);
        return s + "}";
    }
    case Kind::Plancherel:
        return "plancherel{" + to_string(gamma) + "}";
    case Kind::Zero:
        return "zero";
    }
    return "?";
}

void AscendingConfig::validate(int strength) const
{
    if (N < 1) throw InvalidArgument("N must be positive");
    if (static_cast<int>(a.size()) != N) throw InvalidArgument("exactly N values a_i are required");
    rho.validate();
    Scalar bound = pow(params.q, strength);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) throw ParameterDegeneracy("a_i must be nonzero");
        for (std::size_t j = 0; j < i; ++j) {
            if (a[i] == a[j]) throw ParameterDegeneracy("a_i must be distinct (perturb equal values)");
        }
        if (!(abs(a[i]) * rho.R < bound)) {
            throw InvalidArgument("radius condition |a_i| R < " + to_string(bound) + " fails for a_" +
                                  std::to_string(i + 1) + " = " + to_string(a[i]));
        }
    }
}

Circle AscendingConfig::default_contour() const
{
    Scalar lo = *std::min_element(a.begin(), a.end());
    Scalar hi = *std::max_element(a.begin(), a.end());
    Scalar center = (lo + hi) / 2;
    Scalar half = (hi - lo) / 2;
    Scalar margin = abs(center) / 8;
    if (half > 0 && 2 * half < margin) margin = 2 * half;
    return Circle{center, half + margin};
}

// ---------------------------------------------------------------- branching

Scalar b_lambda(const Partition& lambda, const Params& params)
{
    Partition conj = lambda.conjugate();
    Scalar r = 1;
    for (int i = 0; i < lambda.length(); ++i) {
        for (int j = 0; j < lambda[i]; ++j) {
            int arm = lambda[i] - j - 1;
            int leg = conj[j] - i - 1;
            r *= (1 - pow(params.q, arm) * pow(params.t, leg + 1)) / (1 - pow(params.q, arm + 1) * pow(params.t, leg));
        }
    }
    return r;
}

bool interlaces(const Partition& lambda, const Partition& mu)
{
    // lambda_1 >= mu_1 >= lambda_2 >= mu_2 >= ...
    int n = std::max(lambda.length(), mu.length());
    for (int i = 0; i < n; ++i) {
        if (mu[i] > lambda[i] || mu[i] < lambda[i + 1]) return false;
    }
    return true;
}

namespace {

// f(q^a t^b) / f(q^c t^b) with f(u) = (t u; q)_inf / (q u; q)_inf
Scalar f_ratio(int a, int c, int b, const Params& p)
{
    if (a > c) return inverse(f_ratio(c, a, b, p));
    Scalar tb = pow(p.t, b);
    return q_pochhammer(pow(p.t, b + 1) * pow(p.q, a), p.q, c - a) / q_pochhammer(pow(p.q, a + 1) * tb, p.q, c - a);
}

}  // namespace

Scalar branching_psi(const Partition& lambda, const Partition& mu, const Params& params)
{
    if (!interlaces(lambda, mu)) return 0;
    Scalar r = 1;
    int l = mu.length();
    for (int i = 1; i <= l; ++i) {
        for (int j = i; j <= l; ++j) {
            int li = lambda[i - 1], mi = mu[i - 1], mj = mu[j - 1], lj1 = lambda[j];
            r *= f_ratio(mi - mj, li - mj, j - i, params);
            r *= f_ratio(li - lj1, mi - lj1, j - i, params);
        }
    }
    return r;
}

namespace {

void for_each_interlaced(const Partition& lambda, int maxlen, const std::function<void(const Partition&)>& fn)
{
    std::vector<int> mu(static_cast<std::size_t>(std::max(maxlen, 0)), 0);
    std::function<void(int)> rec = [&](int i) {
        if (i == maxlen) {
            fn(Partition(mu));
            return;
        }
        for (int v = lambda[i + 1]; v <= lambda[i]; ++v) {
            mu[static_cast<std::size_t>(i)] = v;
            rec(i + 1);
        }
    };
    // lambda must have at most maxlen + 1 parts for an interlacing mu of length <= maxlen
    if (lambda.length() > maxlen + 1) return;
    rec(0);
}

}  // namespace

Scalar P_at(const Partition& lambda, const std::vector<Scalar>& xs, const Params& params)
{
    std::map<std::pair<Partition, int>, Scalar> memo;
    std::function<Scalar(const Partition&, int)> rec = [&](const Partition& l, int n) -> Scalar {
        if (l.length() > n) return 0;
        if (n == 0) return l.empty() ? 1 : 0;
        auto key = std::make_pair(l, n);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        Scalar s = 0;
        const Scalar& x = xs[static_cast<std::size_t>(n - 1)];
        for_each_interlaced(l, n - 1, [&](const Partition& mu) {
            s += rec(mu, n - 1) * branching_psi(l, mu, params) * pow(x, l.size() - mu.size());
        });
        memo.emplace(key, s);
        return s;
    };
    return rec(lambda, static_cast<int>(xs.size()));
}

Scalar Q_at(const Partition& lambda, const Rho& rho, const Params& params)
{
    switch (rho.kind) {
    case Rho::Kind::Zero:
        return lambda.empty() ? 1 : 0;
    case Rho::Kind::FiniteAlphabet:
        return b_lambda(lambda, params) * P_at(lambda, rho.b, params);
    case Rho::Kind::Plancherel:
        break;
    }
    throw InvalidArgument("Q_lambda(rho) is exact only for finite alphabets");
}

Interval pi_enclosure(const std::vector<Scalar>& xs, const Rho& rho, const Params& params, int factors)
{
    if (rho.kind == Rho::Kind::Zero) return {Scalar(1), Scalar(1)};
    if (rho.kind != Rho::Kind::FiniteAlphabet) throw InvalidArgument("Pi enclosure needs a finite alphabet");
    const Scalar& q = params.q;
    const Scalar& t = params.t;
    Scalar lo = 1, hi = 1;
    for (const auto& x : xs) {
        for (const auto& b : rho.b) {
            Scalar y = x * b;
            if (!(y > 0 && y < 1)) throw InvalidArgument("Pi enclosure needs 0 < x b < 1");
            Scalar qi = 1;
            for (int i = 0; i < factors; ++i) {
                Scalar f = (1 - t * y * qi) / (1 - y * qi);
                lo = round_down(lo * f, kBits);
                hi = round_up(hi * f, kBits);
                qi *= q;
            }
            // remaining factors lie in [1, exp(eps)] with eps = (1-t) y q^K / ((1-q)(1 - y q^K))
            Scalar eps = (1 - t) * y * qi / ((1 - q) * (1 - y * qi));
            if (!(eps < 1)) throw InvalidArgument("Pi enclosure needs more factors");
            hi = round_up(hi / (1 - eps), kBits);
        }
    }
    return {lo, hi};
}

Scalar ascending_numerator(const std::vector<Partition>& lambdas, const AscendingConfig& config)
{
    if (static_cast<int>(lambdas.size()) != config.N) throw InvalidArgument("one partition per level required");
    Scalar w = 1;
    Partition prev;
    for (int k = 0; k < config.N; ++k) {
        const auto& l = lambdas[static_cast<std::size_t>(k)];
        if (l.length() > k + 1) return 0;
        Scalar psi = branching_psi(l, prev, config.params);
        if (psi == 0) return 0;
        w *= psi * pow(config.a[static_cast<std::size_t>(k)], l.size() - prev.size());
        prev = l;
    }
    return w * Q_at(prev, config.rho, config.params);
}

Interval ascending_weight(const std::vector<Partition>& lambdas, const AscendingConfig& config)
{
    config.validate();
    Scalar num = ascending_numerator(lambdas, config);
    Interval pi = pi_enclosure(config.a, config.rho, config.params);
    Scalar x = num / pi.hi, y = num / pi.lo;
    return {std::min(x, y), std::max(x, y)};
}

void for_each_ascending(int N, int L, const std::function<void(const std::vector<Partition>&)>& fn)
{
    std::vector<Partition> seq(static_cast<std::size_t>(N));
    std::function<void(int)> down = [&](int k) {  // fill seq[k-1] from seq[k]
        if (k == 0) {
            fn(seq);
            return;
        }
        for_each_interlaced(seq[static_cast<std::size_t>(k)], k, [&](const Partition& mu) {
            seq[static_cast<std::size_t>(k - 1)] = mu;
            down(k - 1);
        });
    };
    for (const auto& top : enumerate_partitions(L)) {
        if (top.length() > N) continue;
        seq[static_cast<std::size_t>(N - 1)] = top;
        down(N - 1);
    }
}

// ---------------------------------------------------------------- difference operators

namespace {

template <class T>
struct OperatorParams {
    T q;      // shift
    T tA;     // t inside A_I
    bool hatted;
};

template <class T>
T apply_op_at(int r, int n, const std::vector<T>& x, const T& tA, const T& shift,
              const std::function<T(const T&)>& ratio, const std::function<T(const std::vector<T>&)>& inner)
{
    if (r < 0 || r > n || n > static_cast<int>(x.size())) throw InvalidArgument("operator needs 0 <= r <= n <= number of variables");
    if (r == 0) return inner(x);
    T total = T(0);
    std::vector<int> I(static_cast<std::size_t>(r));
    std::function<void(int, int)> rec = [&](int pos, int start) {
        if (pos == r) {
            std::vector<bool> in(static_cast<std::size_t>(n), false);
            for (int i : I) in[static_cast<std::size_t>(i)] = true;
            // t^{r(r-1)/2} normalizes the eigenvalue to e_r(q^{lambda_i} t^{n-i})
            T A = T(1);
            for (int k = 0; k < r * (r - 1) / 2; ++k) A *= tA;
            for (int i : I) {
                for (int j = 0; j < n; ++j) {
                    if (in[static_cast<std::size_t>(j)]) continue;
                    T den = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
                    if (den == T(0)) throw ParameterDegeneracy("pole collision: x_i = x_j in a difference operator");
                    A *= (tA * x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]) / den;
                }
            }
            std::vector<T> y = x;
            T rat = T(1);
            for (int i : I) {
                rat *= ratio(x[static_cast<std::size_t>(i)]);
                y[static_cast<std::size_t>(i)] *= shift;
            }
            total += A * rat * inner(y);
            return;
        }
        for (int i = start; i < n; ++i) {
            I[static_cast<std::size_t>(pos)] = i;
            rec(pos + 1, i + 1);
        }
    };
    rec(0, 0);
    return total;
}

}  // namespace

ShiftedProduct apply_difference_operator(int r, int n, const ShiftedProduct& f, bool hatted)
{
    if (hatted) f.params.require_positive_t("the inverted difference operator");
    Scalar tA = hatted ? inverse(f.params.t) : f.params.t;
    Scalar shift = hatted ? inverse(f.params.q) : f.params.q;
    Rho rho = f.rho;
    Params params = f.params;
    std::function<Scalar(const Scalar&)> ratio;
    if (hatted) {
        // Pi(x / q) / Pi(x) = 1 / h(x / q)
        ratio = [rho, params](const Scalar& x) { return inverse(rho.shift_ratio(x / params.q, params)); };
    } else {
        ratio = [rho, params](const Scalar& x) { return rho.shift_ratio(x, params); };
    }
    PointFunction inner = f.rational;
    ShiftedProduct out{nullptr, rho, params};
    out.rational = [=](const std::vector<Scalar>& x) { return apply_op_at<Scalar>(r, n, x, tA, shift, ratio, inner); };
    return out;
}

Scalar operator_chain_expectation(const std::vector<OperatorStep>& steps, const AscendingConfig& config, bool hatted)
{
    config.validate(hatted ? static_cast<int>(steps.size()) : 0);
    int prev = config.N;
    for (const auto& s : steps) {
        if (s.n > prev || s.n < 1) throw InvalidArgument("operator levels must satisfy N >= n_1 >= n_2 >= ... >= 1");
        if (s.r < 0 || s.r > s.n) throw InvalidArgument("operator index must satisfy 0 <= r <= n");
        prev = s.n;
    }
    ShiftedProduct f{[](const std::vector<Scalar>&) { return Scalar(1); }, config.rho, config.params};
    for (const auto& s : steps) f = apply_difference_operator(s.r, s.n, f, hatted);
    return f.rational(config.a);
}

std::complex<double> operator_chain_numeric(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                            bool hatted)
{
    using C = std::complex<double>;
    double q = to_double(config.params.q), t = to_double(config.params.t);
    if (hatted) config.params.require_positive_t("the inverted difference operator");
    C tA = hatted ? 1 / t : t;
    C shift = hatted ? 1 / q : q;
    Rho rho = config.rho;
    Params params = config.params;
    std::function<C(const C&)> ratio;
    if (hatted) {
        ratio = [=](const C& x) { return 1.0 / rho.shift_ratio(x / q, params); };
    } else {
        ratio = [=](const C& x) { return rho.shift_ratio(x, params); };
    }
    std::function<C(const std::vector<C>&)> f = [](const std::vector<C>&) { return C(1); };
    for (const auto& s : steps) {
        auto inner = f;
        f = [=](const std::vector<C>& x) { return apply_op_at<C>(s.r, s.n, x, tA, shift, ratio, inner); };
    }
    std::vector<C> a;
    for (const auto& x : config.a) a.push_back(to_double(x));
    return f(a);
}

// ---------------------------------------------------------------- Noumi operator

namespace {

void for_each_composition(int r, int n, const std::function<void(const std::vector<int>&)>& fn)
{
    std::vector<int> nu(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n - 1) {
            nu[static_cast<std::size_t>(i)] = left;
            fn(nu);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            nu[static_cast<std::size_t>(i)] = v;
            rec(i + 1, left - v);
        }
    };
    if (n == 0) {
        if (r == 0) fn(nu);
        return;
    }
    rec(0, r);
}

}  // namespace

ShiftedProduct apply_noumi(int r, int n, const ShiftedProduct& f)
{
    if (r < 0 || n < 1) throw InvalidArgument("Noumi coefficient needs r >= 0 and n >= 1");
    Rho rho = f.rho;
    Params p = f.params;
    PointFunction inner = f.rational;
    ShiftedProduct out{nullptr, rho, p};
    out.rational = [=](const std::vector<Scalar>& x) {
        if (static_cast<int>(x.size()) < n) throw InvalidArgument("too few variables for the Noumi operator");
        Scalar total = 0;
        for_each_composition(r, n, [&](const std::vector<int>& nu) {
            Scalar term = 1;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    Scalar den = x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
                    if (den == 0) throw ParameterDegeneracy("pole collision: x_i = x_j in the Noumi operator");
                    term *= (pow(p.q, nu[static_cast<std::size_t>(j)]) * x[static_cast<std::size_t>(j)] -
                             pow(p.q, nu[static_cast<std::size_t>(i)]) * x[static_cast<std::size_t>(i)]) /
                            den;
                }
            }
            for (int i = 0; i < n; ++i) {
                int ni = nu[static_cast<std::size_t>(i)];
                if (ni == 0) continue;
                for (int j = 0; j < n; ++j) {
                    Scalar ratio = x[static_cast<std::size_t>(i)] / x[static_cast<std::size_t>(j)];
                    Scalar den = q_pochhammer(p.q * ratio, p.q, ni);
                    if (den == 0) throw ParameterDegeneracy("pole collision in the Noumi operator");
                    term *= q_pochhammer(p.t * ratio, p.q, ni) / den;
                }
            }
            std::vector<Scalar> y = x;
            for (int i = 0; i < n; ++i) {
                for (int s = 0; s < nu[static_cast<std::size_t>(i)]; ++s) {
                    term *= rho.shift_ratio(y[static_cast<std::size_t>(i)], p);
                    y[static_cast<std::size_t>(i)] *= p.q;
                }
            }
            total += term * inner(y);
        });
        return total;
    };
    return out;
}

Scalar noumi_coefficient(int r, const AscendingConfig& config)
{
    config.validate();
    ShiftedProduct f{[](const std::vector<Scalar>&) { return Scalar(1); }, config.rho, config.params};
    return apply_noumi(r, config.N, f).rational(config.a);
}

Scalar noumi_eigenvalue(int r, const Partition& lambda, int n, const Params& params)
{
    if (lambda.length() > n) throw InvalidArgument("partition longer than the number of variables");
    const Scalar& q = params.q;
    const Scalar& t = params.t;
    Scalar total = 0;
    for_each_composition(r, n, [&](const std::vector<int>& m) {
        Scalar term = 1;
        for (int i = 0; i < n; ++i) {
            int mi = m[static_cast<std::size_t>(i)];
            Scalar z = pow(q, lambda[i]) * pow(t, n - 1 - i);
            term *= q_pochhammer(t, q, mi) / q_pochhammer(q, q, mi) * pow(z, mi);
        }
        total += term;
    });
    return total;
}

// ---------------------------------------------------------------- Fredholm expansions

namespace {

// det of an n x n matrix of expressions, by permutation expansion
RationalExpr determinant(int nvars, const std::vector<std::vector<RationalExpr>>& m)
{
    int n = static_cast<int>(m.size());
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    RationalExpr total(nvars);
    do {
        int inversions = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) inversions += perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)];
        }
        RationalExpr term = RationalExpr::constant(nvars, inversions % 2 ? -1 : 1);
        for (int i = 0; i < n; ++i) term = term * m[static_cast<std::size_t>(i)][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        total += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

// h(c w) as a rational expression in variable i
RationalExpr shift_ratio_expr(int nvars, int i, const Scalar& c, const Rho& rho, const Params& p)
{
    if (rho.kind == Rho::Kind::Plancherel) throw InvalidArgument("exact contour formulas need a finite alphabet rho");
    RationalExpr e = RationalExpr::constant(nvars, 1);
    for (const auto& b : rho.b) {
        e = e * RationalExpr::affine(nvars, i, -c * b, Scalar(1), 1);
        e = e * RationalExpr::affine(nvars, i, -p.t * c * b, Scalar(1), -1);
    }
    return e;
}

ContourScheme common_circle_scheme(int nvars, const Circle& c, const std::string& prefix)
{
    ContourScheme s;
    for (int i = 0; i < nvars; ++i) {
        s.names.push_back(prefix + std::to_string(i + 1));
        s.circles.push_back(c);
        s.order.push_back(i);
    }
    return s;
}

void require_inside_disc(const Circle& c, const Scalar& radius)
{
    if (!(abs(c.center) + c.radius < radius)) {
        throw UndecidableContour("contour must lie inside the disc of radius " + to_string(radius));
    }
}

// circle and its image under z -> f z must be disjoint and not nested
void require_separated(const Circle& c, const Scalar& f, const std::string& what)
{
    Scalar d = abs(c.center - f * c.center);
    if (!(d > c.radius + abs(f) * c.radius)) throw UndecidableContour("contour meets its image under " + what);
}

void add_points(ContourScheme& s, int var, const std::vector<Scalar>& pts, bool inside)
{
    for (const auto& p : pts) s.points.push_back({var, p, inside});
}

// One circle per operator step. Step s must enclose shift^k a for k <= m-1-s, since the
// later operators evaluate the earlier integral at those shifted points. Circles are built
// from the last step outward so that each one contains the shifted image of the next.
struct LevelContours {
    std::vector<Circle> circles;
    std::vector<std::vector<Scalar>> enclosed;
};

LevelContours level_contours(const AscendingConfig& config, int m, const Scalar& shift, const Scalar& spread)
{
    LevelContours out;
    out.circles.resize(static_cast<std::size_t>(m));
    out.enclosed.resize(static_cast<std::size_t>(m));
    Scalar lo = *std::min_element(config.a.begin(), config.a.end());
    Scalar hi = *std::max_element(config.a.begin(), config.a.end());
    if (lo < 0 && hi > 0) throw UndecidableContour("no circle around the a's avoids 0");
    for (int s = m - 1; s >= 0; --s) {
        auto& pts = out.enclosed[static_cast<std::size_t>(s)];
        for (int k = 0; k <= m - 1 - s; ++k) {
            for (const auto& a : config.a) pts.push_back(pow(shift, k) * a);
        }
        if (config.contour) {
            out.circles[static_cast<std::size_t>(s)] = *config.contour;
            continue;
        }
        if (s < m - 1) {
            const Circle& next = out.circles[static_cast<std::size_t>(s + 1)];
            Scalar a = shift * (next.center - next.radius), b = shift * (next.center + next.radius);
            lo = std::min({lo, a, b});
            hi = std::max({hi, a, b});
        }
        Scalar margin = std::min(abs(lo), abs(hi)) * spread;
        lo -= margin;
        hi += margin;
        out.circles[static_cast<std::size_t>(s)] = Circle{(lo + hi) / 2, (hi - lo) / 2};
    }
    return out;
}

// the image of `inner` under z -> f z lies strictly inside `outer`
void require_nested(const Circle& outer, const Circle& inner, const Scalar& f, const std::string& what)
{
    if (!(abs(outer.center - f * inner.center) + abs(f) * inner.radius < outer.radius)) {
        throw UndecidableContour("contour does not enclose the image of a later contour under " + what);
    }
}

// the image of `other` under z -> f z is disjoint from `c`
void require_apart(const Circle& c, const Circle& other, const Scalar& f, const std::string& what)
{
    if (!(abs(c.center - f * other.center) > c.radius + abs(f) * other.radius)) {
        throw UndecidableContour("contour meets the image of a contour under " + what);
    }
}

ContourScheme ascending_scheme(const std::vector<std::vector<int>>& groups, const std::vector<int>& group_step,
                               const LevelContours& levels, const AscendingConfig& config, const Params& kp, int m,
                               const Scalar& disc, const std::string& qname, const std::string& tname);

}  // namespace

ExactIntegrand fredholm_qt_integrand(const std::vector<int>& v, const AscendingConfig& config)
{
    config.validate();
    const auto& p = config.params;
    int k = static_cast<int>(v.size());
    if (k == 0) throw InvalidArgument("a Fredholm term needs at least one variable");
    for (int x : v) {
        if (x < 1) throw InvalidArgument("Fredholm term indices must be positive");
    }
    std::vector<RationalExpr> F;
    for (int i = 0; i < k; ++i) {
        RationalExpr f = RationalExpr::constant(k, 1);
        for (int s = 0; s < v[static_cast<std::size_t>(i)]; ++s) {
            Scalar qs = pow(p.q, s);
            f = f * shift_ratio_expr(k, i, qs, config.rho, p);
            for (const auto& a : config.a) {
                f = f * RationalExpr::affine(k, i, -p.t * qs / a, Scalar(1), 1);
                f = f * RationalExpr::affine(k, i, -qs / a, Scalar(1), -1);
            }
        }
        F.push_back(f);
    }
    std::vector<std::vector<RationalExpr>> m(static_cast<std::size_t>(k), std::vector<RationalExpr>(static_cast<std::size_t>(k)));
    for (int i = 0; i < k; ++i) {
        Scalar qv = pow(p.q, v[static_cast<std::size_t>(i)]);
        for (int j = 0; j < k; ++j) {
            RationalExpr e = i == j ? RationalExpr::affine(k, i, qv - 1, Scalar(0), -1)
                                    : RationalExpr::binomial_form(k, i, qv, j, Scalar(-1), -1);
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = e * F[static_cast<std::size_t>(i)];
        }
    }
    Circle c = config.circle();
    auto scheme = common_circle_scheme(k, c, "w");
    require_inside_disc(c, inverse(config.rho.R));
    require_separated(c, p.q, "multiplication by q");
    for (int i = 0; i < k; ++i) {
        add_points(scheme, i, config.a, true);
        scheme.points.push_back({i, Scalar(0), false});
        if (p.t > 0) {
            for (int s = 1; s <= 8; ++s) {
                for (const auto& a : config.a) scheme.points.push_back({i, pow(p.q, s) * p.t * a, false});
            }
        }
    }
    scheme.verify();
    return {determinant(k, m), scheme};
}

Scalar fredholm_qt_term(const std::vector<int>& v, const AscendingConfig& config, ResiduePlan* plan)
{
    if (v.empty()) return 1;
    auto in = fredholm_qt_integrand(v, config);
    return integrate_scalar(in.expr, in.scheme, plan);
}

Scalar fredholm_qt_coefficient(int r, const AscendingConfig& config, std::optional<int> max_k, ResiduePlan* plan)
{
    if (r < 0) throw InvalidArgument("coefficient index must be nonnegative");
    if (r == 0) return 1;
    int kmax = std::min(r, max_k.value_or(config.N));
    Scalar total = 0;
    for (int k = 1; k <= kmax; ++k) {
        Scalar sum = 0;
        // compositions of r into k positive parts
        std::function<void(std::vector<int>&, int)> rec = [&](std::vector<int>& v, int left) {
            if (static_cast<int>(v.size()) == k) {
                if (left == 0) sum += fredholm_qt_term(v, config, plan);
                return;
            }
            int remaining = k - static_cast<int>(v.size());
            for (int x = 1; x <= left - (remaining - 1); ++x) {
                v.push_back(x);
                rec(v, left - x);
                v.pop_back();
            }
        };
        std::vector<int> v;
        rec(v, r);
        total += sum / factorial(k);
    }
    return total;
}

ExactIntegrand fredholm_ek_integrand(int r, const AscendingConfig& config)
{
    if (r < 1) throw InvalidArgument("a Fredholm term needs at least one variable");
    config.validate();
    const auto& p = config.params;
    std::vector<RationalExpr> F;
    for (int i = 0; i < r; ++i) {
        RationalExpr f = shift_ratio_expr(r, i, Scalar(1), config.rho, p);
        for (const auto& a : config.a) {
            f = f * RationalExpr::affine(r, i, p.t, -a, 1);
            f = f * RationalExpr::affine(r, i, Scalar(1), -a, -1);
        }
        F.push_back(f);
    }
    std::vector<std::vector<RationalExpr>> m(static_cast<std::size_t>(r), std::vector<RationalExpr>(static_cast<std::size_t>(r)));
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            // 1 / (t w_j - w_i)
            RationalExpr e = i == j ? RationalExpr::affine(r, i, p.t - 1, Scalar(0), -1)
                                    : RationalExpr::binomial_form(r, j, p.t, i, Scalar(-1), -1);
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = e * F[static_cast<std::size_t>(i)];
        }
    }
    Circle c = config.circle();
    auto scheme = common_circle_scheme(r, c, "w");
    require_inside_disc(c, inverse(config.rho.R));
    for (int i = 0; i < r; ++i) {
        add_points(scheme, i, config.a, true);
        scheme.points.push_back({i, Scalar(0), false});
        for (const auto& a : config.a) {
            if (p.t > 0) scheme.points.push_back({i, p.t * a, false});
        }
    }
    scheme.verify();
    return {determinant(r, m), scheme};
}

Scalar fredholm_ek_coefficient(int r, const AscendingConfig& config, ResiduePlan* plan)
{
    if (r < 0) throw InvalidArgument("coefficient index must be nonnegative");
    if (r == 0) return 1;
    auto in = fredholm_ek_integrand(r, config);
    Scalar sign = r % 2 ? -1 : 1;
    return sign / factorial(r) * integrate_scalar(in.expr, in.scheme, plan);
}

// ---------------------------------------------------------------- contour formulas

ExactIntegrand build_ascending_integrand(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                         bool hatted)
{
    const int m = static_cast<int>(steps.size());
    config.validate(hatted ? m : 0);
    if (hatted) config.params.require_positive_t("the inverted contour formula");
    const auto& p = config.params;
    Params kp = hatted ? Params::unchecked(inverse(p.q), inverse(p.t)) : p;
    int prev = config.N;
    std::vector<std::vector<int>> groups;
    std::vector<int> group_step;
    int nvars = 0;
    for (int s = 0; s < m; ++s) {
        const auto& st = steps[static_cast<std::size_t>(s)];
        if (st.n > prev || st.n < 1 || st.r < 0 || st.r > st.n) throw InvalidArgument("invalid operator sequence");
        prev = st.n;
        if (st.r == 0) continue;
        std::vector<int> g;
        for (int i = 0; i < st.r; ++i) g.push_back(nvars++);
        groups.push_back(g);
        group_step.push_back(s);
    }
    ExactIntegrand out{RationalExpr::constant(nvars, 1), ContourScheme{}};
    if (nvars == 0) return out;
    RationalExpr e = RationalExpr::constant(nvars, 1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& vars = groups[g];
        int n = steps[static_cast<std::size_t>(group_step[g])].n;
        // det[1/(t z_i - z_j)] = (-1)^r det[1/(z_i - t z_j)]
        e = e * cauchy_block(nvars, vars, kp) * Scalar(vars.size() % 2 ? -1 : 1);
        for (int v : vars) {
            for (int j = 0; j < n; ++j) {
                const Scalar& a = config.a[static_cast<std::size_t>(j)];
                e = e * RationalExpr::affine(nvars, v, kp.t, -a, 1) * RationalExpr::affine(nvars, v, Scalar(1), -a, -1);
            }
            if (hatted) {
                // Pi(z/q) / Pi(z) = prod_b (1 - t z b / q) / (1 - z b / q)
                for (const auto& b : config.rho.b) {
                    e = e * RationalExpr::affine(nvars, v, -p.t * b / p.q, Scalar(1), 1);
                    e = e * RationalExpr::affine(nvars, v, -b / p.q, Scalar(1), -1);
                }
                if (config.rho.kind == Rho::Kind::Plancherel) throw InvalidArgument("exact contour formulas need a finite alphabet rho");
            } else {
                e = e * shift_ratio_expr(nvars, v, Scalar(1), config.rho, p);
            }
        }
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t h = g + 1; h < groups.size(); ++h) {
            for (int u : groups[g]) {
                for (int w : groups[h]) {
                    // (t u - q w)(u - w) / ((u - q w)(t u - w))
                    e = e * RationalExpr::binomial_form(nvars, u, kp.t, w, -kp.q, 1);
                    e = e * RationalExpr::binomial_form(nvars, u, Scalar(1), w, Scalar(-1), 1);
                    e = e * RationalExpr::binomial_form(nvars, u, Scalar(1), w, -kp.q, -1);
                    e = e * RationalExpr::binomial_form(nvars, u, kp.t, w, Scalar(-1), -1);
                }
            }
        }
    }
    out.expr = e;

    Scalar disc = hatted ? Scalar(p.q / config.rho.R) : inverse(config.rho.R);
    const std::string qname = hatted ? "division by q" : "multiplication by q";
    const std::string tname = hatted ? "multiplication by t" : "division by t";
    // Wide margins keep poles far from the circles; narrow ones keep a circle apart from its image
    // under division by t. Take the widest that satisfies every condition.
    std::optional<UndecidableContour> failure;
    for (const Scalar& spread : {Scalar(1, 2), Scalar(1, 4), Scalar(1, 8), Scalar(1, 16)}) {
        try {
            out.scheme = ascending_scheme(groups, group_step, level_contours(config, m, kp.q, spread), config, kp, m,
                                          disc, qname, tname);
            return out;
        } catch (const UndecidableContour& e) {
            if (!failure) failure = e;
            if (config.contour) break;
        }
    }
    throw *failure;
}

namespace {

ContourScheme ascending_scheme(const std::vector<std::vector<int>>& groups, const std::vector<int>& group_step,
                               const LevelContours& levels, const AscendingConfig& config, const Params& kp, int m,
                               const Scalar& disc, const std::string& qname, const std::string& tname)
{
    int nvars = 0;
    for (const auto& g : groups) nvars += static_cast<int>(g.size());
    ExactIntegrand out{RationalExpr::constant(nvars, 1), ContourScheme{}};
    out.scheme.names.resize(static_cast<std::size_t>(nvars));
    out.scheme.circles.resize(static_cast<std::size_t>(nvars));
    // later levels are integrated first
    for (std::size_t g = groups.size(); g-- > 0;) {
        int step = group_step[g];
        const Circle& c = levels.circles[static_cast<std::size_t>(step)];
        require_inside_disc(c, disc);
        if (kp.t != 0 && groups[g].size() > 1) require_separated(c, inverse(kp.t), tname);
        for (std::size_t h = g + 1; h < groups.size(); ++h) {
            const Circle& later = levels.circles[static_cast<std::size_t>(group_step[h])];
            require_nested(c, later, kp.q, qname);
            if (kp.t != 0) require_apart(c, later, inverse(kp.t), tname);
        }
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            auto v = static_cast<std::size_t>(groups[g][i]);
            out.scheme.names[v] = "z" + std::to_string(step + 1) + "_" + std::to_string(i + 1);
            out.scheme.circles[v] = c;
            out.scheme.order.push_back(groups[g][i]);
        }
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        int step = group_step[g];
        for (int v : groups[g]) {
            add_points(out.scheme, v, levels.enclosed[static_cast<std::size_t>(step)], true);
            out.scheme.points.push_back({v, Scalar(0), false});
            if (kp.t == 0) continue;
            for (int k = 0; k <= m - 1 - step; ++k) {
                for (const auto& a : config.a) out.scheme.points.push_back({v, pow(kp.q, k) * a / kp.t, false});
            }
        }
    }
    out.scheme.verify();
    return out.scheme;
}

ExactIntegrand qwhittaker_kernel(const std::vector<int>& ns, const AscendingConfig& config, bool with_ratio)
{
    const auto& p = config.params;
    if (p.t != 0) throw InvalidArgument("the q-Whittaker formula needs t = 0");
    config.validate();
    int m = static_cast<int>(ns.size());
    int prev = config.N;
    for (int n : ns) {
        if (n > prev || n < 1) throw InvalidArgument("levels must satisfy N >= n_1 >= ... >= n_m >= 1");
        prev = n;
    }
    Scalar sign = m % 2 ? -1 : 1;
    RationalExpr e = RationalExpr::constant(m, sign * pow(p.q, m * (m - 1) / 2));
    for (int a = 0; a < m; ++a) {
        e = e * RationalExpr::monomial(m, [&] {
                std::vector<int> x(static_cast<std::size_t>(m), 0);
                x[static_cast<std::size_t>(a)] = -1;
                return x;
            }());
        for (int i = 0; i < ns[static_cast<std::size_t>(a)]; ++i) {
            const Scalar& ai = config.a[static_cast<std::size_t>(i)];
            e = e * RationalExpr::affine(m, a, Scalar(-1), ai, -1) * ai;
        }
        if (with_ratio) e = e * shift_ratio_expr(m, a, Scalar(1), config.rho, p);
        for (int b = a + 1; b < m; ++b) {
            e = e * RationalExpr::binomial_form(m, a, Scalar(1), b, Scalar(-1), 1);
            e = e * RationalExpr::binomial_form(m, a, Scalar(1), b, -p.q, -1);
        }
    }
    auto levels = level_contours(config, m, p.q, Scalar(1, 4));
    ExactIntegrand out{e, ContourScheme{}};
    for (int a = 0; a < m; ++a) {
        const Circle& c = levels.circles[static_cast<std::size_t>(a)];
        require_inside_disc(c, inverse(config.rho.R));
        for (int b = a + 1; b < m; ++b) {
            require_nested(c, levels.circles[static_cast<std::size_t>(b)], p.q, "multiplication by q");
        }
        out.scheme.names.push_back("z" + std::to_string(a + 1));
        out.scheme.circles.push_back(c);
        out.scheme.order.insert(out.scheme.order.begin(), a);
        add_points(out.scheme, a, levels.enclosed[static_cast<std::size_t>(a)], true);
        out.scheme.points.push_back({a, Scalar(0), false});
    }
    out.scheme.verify();
    return out;
}

}  // namespace

ExactIntegrand build_qwhittaker_integrand(const std::vector<int>& ns, const AscendingConfig& config)
{
    return qwhittaker_kernel(ns, config, true);
}

std::complex<double> qwhittaker_numeric(const std::vector<int>& ns, const AscendingConfig& config, double precision)
{
    auto in = qwhittaker_kernel(ns, config, false);
    const auto& rho = config.rho;
    const auto& p = config.params;
    NumericExpr expr(in.expr);
    auto f = [&](const std::vector<std::complex<double>>& z) {
        std::complex<double> v = expr(z);
        for (const auto& x : z) v *= rho.shift_ratio(x, p);
        return v;
    };
    return numeric_quadrature(f, in.scheme, precision);
}

// ---------------------------------------------------------------- truncated sums

namespace {

// coefficients c_0..c_L of Pi(z a; rho) as a power series in z
std::vector<Scalar> mass_by_degree(const AscendingConfig& config, int L)
{
    const auto& p = config.params;
    std::vector<Scalar> log(static_cast<std::size_t>(L) + 1, Scalar(0));
    for (int k = 1; k <= L; ++k) {
        Scalar pa = 0;
        for (const auto& a : config.a) pa += pow(a, k);
        log[static_cast<std::size_t>(k)] = (1 - pow(p.t, k)) / (1 - pow(p.q, k)) * pa * config.rho.power_sum(k) / k;
    }
    std::vector<Scalar> c(static_cast<std::size_t>(L) + 1, Scalar(0));
    c[0] = 1;
    for (int n = 1; n <= L; ++n) {
        Scalar s = 0;
        for (int k = 1; k <= n; ++k) s += k * log[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(n - k)];
        c[static_cast<std::size_t>(n)] = s / n;
    }
    return c;
}

Scalar observable_value(const std::vector<OperatorStep>& steps, const std::vector<Partition>& lambdas, const Params& p,
                        bool hatted)
{
    Scalar v = 1;
    for (const auto& s : steps) {
        const auto& l = lambdas[static_cast<std::size_t>(s.n - 1)];
        std::vector<Scalar> spec;
        for (int j = 0; j < s.n; ++j) {
            if (hatted) {
                spec.push_back(pow(p.q, -l[j]) * pow(p.t, j + 1 - s.n));
            } else {
                spec.push_back(pow(p.q, l[j]) * pow(p.t, s.n - 1 - j));
            }
        }
        v *= elementary(s.r, spec);
        if (v == 0) return v;
    }
    return v;
}

void require_positive_setup(const AscendingConfig& config)
{
    config.validate();
    if (config.rho.kind != Rho::Kind::FiniteAlphabet) throw InvalidArgument("truncated sums need a finite alphabet rho");
    for (const auto& a : config.a) {
        if (!(a > 0)) throw InvalidArgument("truncated sums need positive a's");
    }
    for (const auto& b : config.rho.b) {
        if (!(b > 0)) throw InvalidArgument("truncated sums need a positive alphabet");
    }
}

// Interval for the full sum from the partial numerator S over |lambda^N| <= L, when every
// observable value is bounded by C s^{|lambda^N|}. One-sided when the observable is nonnegative.
TruncatedExpectation certify(const Scalar& S, const AscendingConfig& config, int L, const Scalar& C, const Scalar& s,
                             bool two_sided)
{
    const auto& p = config.params;
    Interval pi = pi_enclosure(config.a, config.rho, p);

    // Chernoff: sum_{d > L} c_d s^d <= Pi(z0 s a; rho) / z0^{L+1}
    Scalar ymax = s * max_abs(config.a) * max_abs(config.rho.b);
    Scalar zmax = inverse(ymax);
    std::optional<Scalar> best;
    for (int k = 1; k < 16; ++k) {
        Scalar z0 = round_down(1 + (zmax - 1) * k / 16, 20);
        if (!(z0 > 1)) continue;
        std::vector<Scalar> scaled;
        for (const auto& a : config.a) scaled.push_back(z0 * s * a);
        Scalar bound = C * pi_enclosure(scaled, config.rho, p).hi / (pow(z0, L + 1) * pi.lo);
        if (!best || bound < *best) best = bound;
    }
    if (!best) throw InvalidArgument("no admissible Chernoff shift");
    Scalar tail = *best;
    if (s == 1) {
        auto c = mass_by_degree(config, L);
        Scalar head = 0;
        for (const auto& x : c) head += x;
        Scalar complement = C * (1 - head / pi.hi);
        if (complement < tail) tail = complement;
    }
    if (tail < 0) tail = 0;
    tail = round_up(tail, kBits);

    TruncatedExpectation out;
    out.numerator_sum = S;
    out.tail = TailBound{L, tail};
    Scalar x = S / pi.hi, y = S / pi.lo;
    Scalar lo = std::min(x, y), hi = std::max(x, y);
    out.value = Interval{round_down(two_sided ? Scalar(lo - tail) : lo, kBits), round_up(hi + tail, kBits)};
    return out;
}

}  // namespace

TruncatedExpectation truncated_expectation_lhs(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                               bool hatted, int L)
{
    const auto& p = config.params;
    int m = static_cast<int>(steps.size());
    config.validate(hatted ? m : 0);
    if (hatted) p.require_positive_t("inverted observables");
    require_positive_setup(config);
    int prev = config.N;
    for (const auto& s : steps) {
        if (s.n > prev || s.n < 1 || s.r < 0 || s.r > s.n) throw InvalidArgument("invalid operator sequence");
        prev = s.n;
    }

    std::map<Partition, Scalar> qcache;
    Scalar S = 0;
    for_each_ascending(config.N, L, [&](const std::vector<Partition>& ls) {
        Scalar obs = observable_value(steps, ls, p, hatted);
        if (obs == 0) return;
        Scalar w = 1;
        Partition prevl;
        for (int k = 0; k < config.N; ++k) {
            const auto& l = ls[static_cast<std::size_t>(k)];
            w *= branching_psi(l, prevl, p) * pow(config.a[static_cast<std::size_t>(k)], l.size() - prevl.size());
            prevl = l;
        }
        auto it = qcache.find(prevl);
        if (it == qcache.end()) it = qcache.emplace(prevl, Q_at(prevl, config.rho, p)).first;
        S += obs * w * it->second;
    });

    // observable bound C and growth s^{|lambda^N|}
    Scalar C = 1;
    Scalar s = 1;
    for (const auto& st : steps) {
        C *= binomial(st.n, st.r);
        if (hatted) {
            C *= pow(p.t, -static_cast<long>(st.r) * (st.n - 1));
            s /= p.q;
        }
    }
    return certify(S, config, L, C, s, false);
}

TruncatedExpectation truncated_measure_expectation(const std::function<Scalar(const Partition&)>& f, const Scalar& bound,
                                                   const AscendingConfig& config, int L)
{
    require_positive_setup(config);
    Scalar S = 0;
    for (const auto& lambda : enumerate_partitions(L)) {
        if (lambda.length() > config.N) continue;
        Scalar v = f(lambda);
        if (v == 0) continue;
        S += v * P_at(lambda, config.a, config.params) * Q_at(lambda, config.rho, config.params);
    }
    return certify(S, config, L, bound, Scalar(1), true);
}

TruncatedExpectation expectation_to_tolerance(const std::vector<OperatorStep>& steps, const AscendingConfig& config,
                                              bool hatted, const Scalar& tolerance, int max_L)
{
    for (int L = 2;; L += 2) {
        auto r = truncated_expectation_lhs(steps, config, hatted, L);
        if (r.value.width() < tolerance) return r;
        if (L >= max_L) throw std::runtime_error("tail bound did not shrink below the tolerance within the L budget");
    }
}

}  // namespace maclab
