#include "maclab/core.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace maclab {

Scalar parse_scalar(std::string_view text)
{
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    }
    if (s.empty()) throw InvalidArgument("empty rational");
    auto slash = s.find('/');
    auto check_int = [](const std::string& part) {
        std::size_t i = (!part.empty() && (part[0] == '-' || part[0] == '+')) ? 1 : 0;
        if (i >= part.size()) return false;
        for (; i < part.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(part[i]))) return false;
        }
        return true;
    };
    std::string num = s.substr(0, slash);
    std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
    if (!check_int(num) || !check_int(den)) throw InvalidArgument("malformed rational '" + std::string(text) + "'");
    if (num[0] == '+') num.erase(0, 1);
    if (den[0] == '+') den.erase(0, 1);
    mpz_class n(num), d(den);
    if (d == 0) throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
    Scalar r(n, d);
    r.canonicalize();
    return r;
}

std::string to_string(const Scalar& x)
{
    return x.get_str();
}

Scalar pow(const Scalar& base, long e)
{
    if (e < 0) return inverse(pow(base, -e));
    Scalar result = 1;
    Scalar b = base;
    while (e > 0) {
        if (e & 1) result *= b;
        e >>= 1;
        if (e) b *= b;
    }
    return result;
}

Scalar abs(const Scalar& x)
{
    return x < 0 ? Scalar(-x) : x;
}

Scalar inverse(const Scalar& x)
{
    if (x == 0) throw ParameterDegeneracy("division by zero");
    return Scalar(1) / x;
}

double to_double(const Scalar& x)
{
    return x.get_d();
}

Scalar factorial(int n)
{
    Scalar r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

Scalar binomial(long n, long k)
{
    // generalized: n may be negative
    if (k < 0) return 0;
    Scalar r = 1;
    for (long i = 0; i < k; ++i) {
        r *= Scalar(n - i);
        r /= Scalar(i + 1);
    }
    return r;
}

Params Params::make(const Scalar& q, const Scalar& t)
{
    if (!(q > 0 && q < 1)) throw InvalidArgument("q must satisfy 0 < q < 1, got " + to_string(q));
    if (!(t >= 0 && t < 1)) throw InvalidArgument("t must satisfy 0 <= t < 1, got " + to_string(t));
    return Params(q, t);
}

Params Params::unchecked(const Scalar& q, const Scalar& t)
{
    return Params(q, t);
}

void Params::require_positive_t(const char* what) const
{
    if (t == 0) throw InvalidArgument(std::string(what) + " requires t > 0");
}

std::string Params::key() const
{
    return q.get_str() + "," + t.get_str();
}

Partition::Partition(std::vector<int> parts)
{
    while (!parts.empty() && parts.back() == 0) parts.pop_back();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i] < 0) throw InvalidArgument("negative part in partition");
        if (i > 0 && parts[i] > parts[i - 1]) throw InvalidArgument("partition parts must be weakly decreasing");
        size_ += parts[i];
    }
    parts_ = std::move(parts);
}

Partition Partition::conjugate() const
{
    std::vector<int> c;
    if (parts_.empty()) return Partition();
    for (int j = 1; j <= parts_[0]; ++j) {
        int count = 0;
        for (int p : parts_) {
            if (p >= j) ++count;
        }
        c.push_back(count);
    }
    return Partition(std::move(c));
}

bool Partition::contains(const Partition& mu) const
{
    if (mu.length() > length()) return false;
    for (int i = 0; i < mu.length(); ++i) {
        if (mu[i] > (*this)[i]) return false;
    }
    return true;
}

std::vector<int> Partition::multiplicities() const
{
    std::vector<int> m(parts_.empty() ? 1 : static_cast<std::size_t>(parts_[0]) + 1, 0);
    for (int p : parts_) ++m[static_cast<std::size_t>(p)];
    return m;
}

std::string Partition::to_string() const
{
    std::string s = "(";
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(parts_[i]);
    }
    return s + ")";
}

std::vector<Partition> partitions_of(int n)
{
    std::vector<Partition> out;
    if (n < 0) return out;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int remaining, int maxpart) {
        if (remaining == 0) {
            out.emplace_back(cur);
            return;
        }
        for (int p = std::min(remaining, maxpart); p >= 1; --p) {
            cur.push_back(p);
            rec(remaining - p, p);
            cur.pop_back();
        }
    };
    rec(n, n);
    return out;
}

std::vector<Partition> enumerate_partitions(int max_size)
{
    if (max_size < 0) throw InvalidArgument("max_size must be nonnegative");
    std::vector<Partition> out;
    for (int n = 0; n <= max_size; ++n) {
        auto ps = partitions_of(n);
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

bool dominates(const Partition& lambda, const Partition& mu)
{
    if (lambda.size() != mu.size()) return false;
    int a = 0, b = 0;
    int len = std::max(lambda.length(), mu.length());
    for (int i = 0; i < len; ++i) {
        a += lambda[i];
        b += mu[i];
        if (a < b) return false;
    }
    return true;
}

Scalar q_pochhammer(const Scalar& a, const Scalar& base, int n)
{
    Scalar r = 1;
    Scalar power = 1;
    for (int k = 0; k < n; ++k) {
        r *= Scalar(1 - a * power);
        power *= base;
    }
    return r;
}

Scalar z_standard(const Partition& lambda)
{
    Scalar r = 1;
    auto m = lambda.multiplicities();
    for (std::size_t i = 1; i < m.size(); ++i) {
        r *= pow(Scalar(static_cast<long>(i)), m[i]) * factorial(m[i]);
    }
    return r;
}

Scalar z_factor(const Partition& lambda, const Params& params)
{
    Scalar r = z_standard(lambda);
    for (int p : lambda.parts()) {
        Scalar den = 1 - pow(params.t, p);
        if (den == 0) throw ParameterDegeneracy("1 - t^k vanishes in the scalar product");
        r *= Scalar(1 - pow(params.q, p)) / den;
    }
    return r;
}

Scalar elementary(int r, const std::vector<Scalar>& xs)
{
    if (r < 0) return 0;
    std::vector<Scalar> e(static_cast<std::size_t>(r) + 1, Scalar(0));
    e[0] = 1;
    for (const auto& x : xs) {
        for (int k = r; k >= 1; --k) e[static_cast<std::size_t>(k)] += x * e[static_cast<std::size_t>(k - 1)];
    }
    return e[static_cast<std::size_t>(r)];
}

}  // namespace maclab
