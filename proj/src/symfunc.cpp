#include "maclab/symfunc.hpp"

#include <algorithm>
#include <functional>
#include <mutex>
#include <unordered_map>

namespace maclab {

namespace {

void add_to(std::map<Partition, Scalar>& terms, const Partition& key, const Scalar& c)
{
    if (c == 0) return;
    auto [it, inserted] = terms.emplace(key, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms.erase(it);
    }
}

Partition multiply_partitions(const Partition& a, const Partition& b)
{
    std::vector<int> parts = a.parts();
    parts.insert(parts.end(), b.parts().begin(), b.parts().end());
    std::sort(parts.begin(), parts.end(), std::greater<>());
    return Partition(std::move(parts));
}

}  // namespace

// ---------------------------------------------------------------- SymFunc

SymFunc SymFunc::constant(const Scalar& c, int D)
{
    SymFunc f(D);
    f.add(Partition(), c);
    return f;
}

SymFunc SymFunc::power(const Partition& lambda, int D, const Scalar& c)
{
    SymFunc f(D);
    f.add(lambda, c);
    return f;
}

Scalar SymFunc::coefficient(const Partition& lambda) const
{
    auto it = terms_.find(lambda);
    return it == terms_.end() ? Scalar(0) : it->second;
}

void SymFunc::add(const Partition& lambda, const Scalar& c)
{
    if (lambda.size() > D_) return;
    add_to(terms_, lambda, c);
}

SymFunc SymFunc::homogeneous_part(int d) const
{
    SymFunc r(D_);
    for (const auto& [lam, c] : terms_) {
        if (lam.size() == d) r.terms_.emplace(lam, c);
    }
    return r;
}

SymFunc SymFunc::with_truncation(int D) const
{
    SymFunc r(D);
    for (const auto& [lam, c] : terms_) r.add(lam, c);
    return r;
}

std::string SymFunc::to_string() const
{
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [lam, c] : terms_) {
        if (!s.empty()) s += " + ";
        s += "(" + c.get_str() + ")*p" + lam.to_string();
    }
    return s;
}

SymFunc& SymFunc::operator+=(const SymFunc& o)
{
    D_ = std::min(D_, o.D_);
    for (const auto& [lam, c] : o.terms_) add(lam, c);
    if (D_ < o.D_) *this = with_truncation(D_);
    return *this;
}

SymFunc& SymFunc::operator-=(const SymFunc& o)
{
    return *this += o * Scalar(-1);
}

SymFunc& SymFunc::operator*=(const Scalar& c)
{
    if (c == 0) {
        terms_.clear();
        return *this;
    }
    for (auto& [lam, v] : terms_) v *= c;
    return *this;
}

SymFunc operator*(const SymFunc& a, const SymFunc& b)
{
    SymFunc r(std::min(a.D_, b.D_));
    for (const auto& [la, ca] : a.terms_) {
        if (la.size() > r.D_) continue;
        for (const auto& [lb, cb] : b.terms_) {
            if (la.size() + lb.size() > r.D_) continue;
            add_to(r.terms_, multiply_partitions(la, lb), ca * cb);
        }
    }
    return r;
}

// ---------------------------------------------------------------- AlphabetSeries

AlphabetSeries::AlphabetSeries(std::vector<std::string> alphabets, int D) : alphabets_(std::move(alphabets)), D_(D)
{
    if (D < 0) throw InvalidArgument("truncation order must be nonnegative");
    if (D > 255) throw InvalidArgument("truncation order too large");
    std::vector<std::string> sorted = alphabets_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidArgument("duplicate alphabet name");
    }
}

AlphabetSeries AlphabetSeries::constant(std::vector<std::string> alphabets, int D, const Scalar& c)
{
    AlphabetSeries s(std::move(alphabets), D);
    s.add(Key(s.alphabets_.size() * static_cast<std::size_t>(D), '\0'), c);
    return s;
}

AlphabetSeries AlphabetSeries::power_sum(std::vector<std::string> alphabets, int D, const std::string& alphabet, int k,
                                         const Scalar& c)
{
    AlphabetSeries s(std::move(alphabets), D);
    if (k < 1) throw InvalidArgument("power sum index must be positive");
    if (k > D) return s;
    Key key(s.alphabets_.size() * static_cast<std::size_t>(D), '\0');
    key[static_cast<std::size_t>(s.index_of(alphabet) * D + k - 1)] = 1;
    s.add(key, c);
    return s;
}

AlphabetSeries AlphabetSeries::from_symfunc(const SymFunc& f, std::vector<std::string> alphabets,
                                            const std::string& alphabet, int D)
{
    AlphabetSeries s(std::move(alphabets), D);
    int a = s.index_of(alphabet);
    std::vector<Partition> parts(s.alphabets_.size());
    for (const auto& [lam, c] : f.terms()) {
        if (lam.size() > D) continue;
        parts[static_cast<std::size_t>(a)] = lam;
        s.add(s.key_of(parts), c);
    }
    return s;
}

int AlphabetSeries::index_of(const std::string& alphabet) const
{
    for (std::size_t i = 0; i < alphabets_.size(); ++i) {
        if (alphabets_[i] == alphabet) return static_cast<int>(i);
    }
    throw InvalidArgument("unknown alphabet '" + alphabet + "'");
}

bool AlphabetSeries::has_alphabet(const std::string& alphabet) const
{
    return std::find(alphabets_.begin(), alphabets_.end(), alphabet) != alphabets_.end();
}

AlphabetSeries::Key AlphabetSeries::key_of(const std::vector<Partition>& parts) const
{
    if (parts.size() != alphabets_.size()) throw InvalidArgument("one partition per alphabet required");
    Key key(alphabets_.size() * static_cast<std::size_t>(D_), '\0');
    for (std::size_t a = 0; a < parts.size(); ++a) {
        for (int p : parts[a].parts()) {
            if (p > D_) throw InvalidArgument("part exceeds truncation order");
            key[a * static_cast<std::size_t>(D_) + static_cast<std::size_t>(p - 1)]++;
        }
    }
    return key;
}

Partition AlphabetSeries::partition_in(const Key& key, int alphabet) const
{
    std::vector<int> parts;
    for (int k = D_; k >= 1; --k) {
        int m = static_cast<unsigned char>(key[static_cast<std::size_t>(alphabet * D_ + k - 1)]);
        parts.insert(parts.end(), static_cast<std::size_t>(m), k);
    }
    return Partition(std::move(parts));
}

std::vector<Partition> AlphabetSeries::partitions_of_key(const Key& key) const
{
    std::vector<Partition> out;
    for (std::size_t a = 0; a < alphabets_.size(); ++a) out.push_back(partition_in(key, static_cast<int>(a)));
    return out;
}

int AlphabetSeries::degree_in(const Key& key, int alphabet) const
{
    int d = 0;
    for (int k = 1; k <= D_; ++k) d += k * static_cast<unsigned char>(key[static_cast<std::size_t>(alphabet * D_ + k - 1)]);
    return d;
}

int AlphabetSeries::degree(const Key& key) const
{
    int d = 0;
    for (std::size_t i = 0; i < key.size(); ++i) {
        d += static_cast<int>(i % static_cast<std::size_t>(D_) + 1) * static_cast<unsigned char>(key[i]);
    }
    return d;
}

Scalar AlphabetSeries::coefficient(const std::vector<Partition>& parts) const
{
    for (const auto& p : parts) {
        if (!p.empty() && p[0] > D_) return 0;
    }
    auto it = terms_.find(key_of(parts));
    return it == terms_.end() ? Scalar(0) : it->second;
}

Scalar AlphabetSeries::constant_term() const
{
    auto it = terms_.find(Key(alphabets_.size() * static_cast<std::size_t>(D_), '\0'));
    return it == terms_.end() ? Scalar(0) : it->second;
}

void AlphabetSeries::add(const Key& key, const Scalar& c)
{
    if (c == 0) return;
    if (degree(key) > D_) return;
    auto [it, inserted] = terms_.emplace(key, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

namespace {

// Re-lays a key from (alphabets, D) into (dst alphabets, dstD); map[a] = destination index.
bool relayout(const std::string& src, std::size_t nsrc, int srcD, const std::vector<int>& map, std::size_t ndst, int dstD,
              std::string& dst)
{
    dst.assign(ndst * static_cast<std::size_t>(dstD), '\0');
    for (std::size_t a = 0; a < nsrc; ++a) {
        for (int k = 1; k <= srcD; ++k) {
            char m = src[a * static_cast<std::size_t>(srcD) + static_cast<std::size_t>(k - 1)];
            if (m == 0) continue;
            if (k > dstD || map[a] < 0) return false;
            dst[static_cast<std::size_t>(map[a] * dstD + k - 1)] = m;
        }
    }
    return true;
}

}  // namespace

AlphabetSeries AlphabetSeries::embed(const std::vector<std::string>& alphabets) const
{
    if (alphabets == alphabets_) return *this;
    AlphabetSeries r(alphabets, D_);
    std::vector<int> map;
    for (const auto& name : alphabets_) map.push_back(r.index_of(name));
    std::string key;
    for (const auto& [k, c] : terms_) {
        relayout(k, alphabets_.size(), D_, map, alphabets.size(), D_, key);
        r.terms_.emplace(key, c);
    }
    return r;
}

AlphabetSeries AlphabetSeries::truncated(int D) const
{
    if (D == D_) return *this;
    AlphabetSeries r(alphabets_, D);
    std::vector<int> map(alphabets_.size());
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<int>(i);
    std::string key;
    for (const auto& [k, c] : terms_) {
        if (degree(k) > D) continue;
        if (relayout(k, alphabets_.size(), D_, map, alphabets_.size(), D, key)) r.terms_.emplace(key, c);
    }
    return r;
}

AlphabetSeries AlphabetSeries::renamed(const std::string& from, const std::string& to) const
{
    if (from == to) return *this;
    if (has_alphabet(to)) throw InvalidArgument("alphabet '" + to + "' already present");
    AlphabetSeries r = *this;
    r.alphabets_[static_cast<std::size_t>(index_of(from))] = to;
    return r;
}

SymFunc AlphabetSeries::to_symfunc(const std::string& alphabet) const
{
    int a = index_of(alphabet);
    SymFunc f(D_);
    for (const auto& [k, c] : terms_) {
        if (degree_in(k, a) != degree(k)) throw InvalidArgument("series depends on other alphabets");
        f.add(partition_in(k, a), c);
    }
    return f;
}

std::string AlphabetSeries::to_string() const
{
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [k, c] : terms_) {
        if (!s.empty()) s += " + ";
        s += "(" + c.get_str() + ")";
        for (std::size_t a = 0; a < alphabets_.size(); ++a) {
            Partition p = partition_in(k, static_cast<int>(a));
            if (!p.empty()) s += "*p" + p.to_string() + "[" + alphabets_[a] + "]";
        }
    }
    return s;
}

std::vector<std::string> merge_alphabets(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::vector<std::string> r = a;
    for (const auto& n : b) {
        if (std::find(r.begin(), r.end(), n) == r.end()) r.push_back(n);
    }
    return r;
}

namespace {

// Brings both operands to a common alphabet list and truncation order.
void align(AlphabetSeries& a, AlphabetSeries& b)
{
    int D = std::min(a.truncation(), b.truncation());
    if (a.alphabets() != b.alphabets()) {
        auto merged = merge_alphabets(a.alphabets(), b.alphabets());
        a = a.embed(merged);
        b = b.embed(merged);
    }
    a = a.truncated(D);
    b = b.truncated(D);
}

}  // namespace

AlphabetSeries& AlphabetSeries::operator+=(const AlphabetSeries& o)
{
    if (o.alphabets_ == alphabets_ && o.D_ == D_) {
        for (const auto& [k, c] : o.terms_) add(k, c);
        return *this;
    }
    AlphabetSeries other = o;
    align(*this, other);
    for (const auto& [k, c] : other.terms_) add(k, c);
    return *this;
}

AlphabetSeries& AlphabetSeries::operator-=(const AlphabetSeries& o)
{
    return *this += o * Scalar(-1);
}

AlphabetSeries& AlphabetSeries::operator*=(const Scalar& c)
{
    if (c == 0) {
        terms_.clear();
        return *this;
    }
    for (auto& [k, v] : terms_) v *= c;
    return *this;
}

AlphabetSeries operator*(const AlphabetSeries& a_in, const AlphabetSeries& b_in)
{
    const AlphabetSeries* pa = &a_in;
    const AlphabetSeries* pb = &b_in;
    AlphabetSeries a_al, b_al;
    if (a_in.alphabets_ != b_in.alphabets_ || a_in.D_ != b_in.D_) {
        a_al = a_in;
        b_al = b_in;
        align(a_al, b_al);
        pa = &a_al;
        pb = &b_al;
    }
    const AlphabetSeries& a = *pa;
    const AlphabetSeries& b = *pb;
    AlphabetSeries r(a.alphabets_, a.D_);
    // bucket b by degree so pairs above D are skipped wholesale
    std::vector<std::vector<std::pair<const AlphabetSeries::Key*, const Scalar*>>> buckets(
        static_cast<std::size_t>(a.D_) + 1);
    for (const auto& [k, c] : b.terms_) buckets[static_cast<std::size_t>(b.degree(k))].push_back({&k, &c});
    AlphabetSeries::Key key;
    for (const auto& [ka, ca] : a.terms_) {
        int da = a.degree(ka);
        for (int db = 0; da + db <= a.D_; ++db) {
            for (const auto& [kb, cb] : buckets[static_cast<std::size_t>(db)]) {
                key = ka;
                for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<char>(key[i] + (*kb)[i]);
                r.add(key, ca * *cb);
            }
        }
    }
    return r;
}

bool operator==(const AlphabetSeries& a, const AlphabetSeries& b)
{
    if (a.alphabets_ == b.alphabets_ && a.D_ == b.D_) return a.terms_ == b.terms_;
    AlphabetSeries x = a, y = b;
    align(x, y);
    return x.terms_ == y.terms_;
}

AlphabetSeries exp_series(const AlphabetSeries& s)
{
    if (s.constant_term() != 0) throw InvalidArgument("exp_series needs zero constant term");
    AlphabetSeries result = AlphabetSeries::constant(s.alphabets(), s.truncation(), 1);
    AlphabetSeries term = result;
    for (int n = 1; n <= s.truncation(); ++n) {
        term = term * s;
        term *= Scalar(1, n);
        if (term.is_zero()) break;
        result += term;
    }
    return result;
}

AlphabetSeries reciprocal(const AlphabetSeries& f)
{
    Scalar f0 = f.constant_term();
    if (f0 == 0) throw ParameterDegeneracy("reciprocal of a series with zero constant term");
    AlphabetSeries two = AlphabetSeries::constant(f.alphabets(), f.truncation(), 2);
    AlphabetSeries g = AlphabetSeries::constant(f.alphabets(), f.truncation(), inverse(f0));
    // correct degree doubles per step
    for (int precision = 1; precision <= f.truncation(); precision *= 2) {
        g = g * (two - f * g);
    }
    return g;
}

// ---------------------------------------------------------------- MonomialTable

int MonomialBlock::index_of(const Partition& lambda) const
{
    auto it = std::find(parts.begin(), parts.end(), lambda);
    if (it == parts.end()) throw InvalidArgument("partition not in block");
    return static_cast<int>(it - parts.begin());
}

namespace {

// Number of ways to distribute the parts of mu over the rows of lambda with row sums lambda.
long count_fillings(const std::vector<int>& mu, std::size_t idx, std::vector<int>& room)
{
    if (idx == mu.size()) return 1;
    long total = 0;
    for (auto& r : room) {
        if (r >= mu[idx]) {
            r -= mu[idx];
            total += count_fillings(mu, idx + 1, room);
            r += mu[idx];
        }
    }
    return total;
}

std::vector<std::vector<Scalar>> invert(std::vector<std::vector<Scalar>> m)
{
    std::size_t n = m.size();
    std::vector<std::vector<Scalar>> inv(n, std::vector<Scalar>(n, Scalar(0)));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && m[piv][col] == 0) ++piv;
        if (piv == n) throw ParameterDegeneracy("singular transition matrix");
        std::swap(m[piv], m[col]);
        std::swap(inv[piv], inv[col]);
        Scalar s = inverse(m[col][col]);
        for (std::size_t j = 0; j < n; ++j) {
            m[col][j] *= s;
            inv[col][j] *= s;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || m[r][col] == 0) continue;
            Scalar f = m[r][col];
            for (std::size_t j = 0; j < n; ++j) {
                m[r][j] -= f * m[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

MonomialBlock build_block(int d)
{
    MonomialBlock b;
    b.parts = partitions_of(d);
    std::size_t n = b.parts.size();
    b.p_to_m.assign(n, std::vector<Scalar>(n, Scalar(0)));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<int> room = b.parts[j].parts();
            b.p_to_m[i][j] = count_fillings(b.parts[i].parts(), 0, room);
        }
    }
    b.m_to_p = invert(b.p_to_m);
    return b;
}

}  // namespace

const MonomialBlock& MonomialTable::block(int degree)
{
    static std::mutex mu;
    static std::map<int, MonomialBlock> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, build_block(degree)).first;
    return it->second;
}

SymFunc monomial_symmetric(const Partition& lambda, int D)
{
    SymFunc f(D);
    if (lambda.size() > D) return f;
    const auto& b = MonomialTable::block(lambda.size());
    std::size_t i = static_cast<std::size_t>(b.index_of(lambda));
    for (std::size_t j = 0; j < b.parts.size(); ++j) f.add(b.parts[j], b.m_to_p[i][j]);
    return f;
}

// ---------------------------------------------------------------- Macdonald P / Q

Scalar macdonald_pair(const SymFunc& f, const SymFunc& g, const Params& params)
{
    Scalar r = 0;
    for (const auto& [lam, c] : f.terms()) {
        auto it = g.terms().find(lam);
        if (it != g.terms().end()) r += c * it->second * z_factor(lam, params);
    }
    return r;
}

namespace {

struct PBlock {
    std::vector<std::vector<Scalar>> p_coeffs;  // indexed like MonomialBlock::parts
    std::vector<Scalar> norms;
};

PBlock build_p_block(int d, const Params& params)
{
    const auto& mb = MonomialTable::block(d);
    std::size_t n = mb.parts.size();
    std::vector<Scalar> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = z_factor(mb.parts[i], params);
    auto dot = [&](const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
        Scalar s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (a[i] != 0 && b[i] != 0) s += a[i] * b[i] * z[i];
        }
        return s;
    };
    PBlock pb;
    pb.p_coeffs.assign(n, {});
    pb.norms.assign(n, Scalar(0));
    // parts are reverse-lex; walking backwards is a lex-ascending extension of dominance
    std::vector<std::size_t> done;
    for (std::size_t ii = n; ii-- > 0;) {
        std::vector<Scalar> v = mb.m_to_p[ii];
        for (std::size_t j : done) {
            Scalar c = dot(mb.m_to_p[ii], pb.p_coeffs[j]) / pb.norms[j];
            if (c == 0) continue;
            for (std::size_t k = 0; k < n; ++k) v[k] -= c * pb.p_coeffs[j][k];
        }
        Scalar nn = dot(v, v);
        if (nn == 0) throw ParameterDegeneracy("vanishing Gram-Schmidt pivot; choose different (q,t)");
        pb.p_coeffs[ii] = std::move(v);
        pb.norms[ii] = nn;
        done.push_back(ii);
    }
    return pb;
}

const PBlock& p_block(int d, const Params& params)
{
    static std::mutex mu;
    static std::map<std::pair<std::string, int>, PBlock> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(params.key(), d);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_p_block(d, params)).first;
    return it->second;
}

}  // namespace

SymFunc macdonald_P(const Partition& lambda, const Params& params, int D)
{
    if (lambda.size() > D) throw InvalidArgument("|lambda| exceeds truncation order");
    const auto& mb = MonomialTable::block(lambda.size());
    const auto& pb = p_block(lambda.size(), params);
    std::size_t i = static_cast<std::size_t>(mb.index_of(lambda));
    SymFunc f(D);
    for (std::size_t j = 0; j < mb.parts.size(); ++j) f.add(mb.parts[j], pb.p_coeffs[i][j]);
    return f;
}

Scalar macdonald_norm(const Partition& lambda, const Params& params)
{
    const auto& mb = MonomialTable::block(lambda.size());
    return p_block(lambda.size(), params).norms[static_cast<std::size_t>(mb.index_of(lambda))];
}

SymFunc macdonald_Q(const Partition& lambda, const Params& params, int D)
{
    return macdonald_P(lambda, params, D) * inverse(macdonald_norm(lambda, params));
}

// ---------------------------------------------------------------- coproduct and skew

namespace {

// Calls fn(kappa, rest, weight) for each sub-multiset kappa of the parts of nu,
// with weight prod_k binom(m_k(nu), m_k(kappa)).
void for_each_submultiset(const Partition& nu,
                          const std::function<void(const Partition&, const Partition&, const Scalar&)>& fn)
{
    auto m = nu.multiplicities();
    std::size_t K = m.size();
    std::vector<int> take(K, 0);
    std::function<void(std::size_t, Scalar)> rec = [&](std::size_t k, Scalar w) {
        if (k == K) {
            std::vector<int> a, b;
            for (std::size_t j = K; j-- > 1;) {
                a.insert(a.end(), static_cast<std::size_t>(take[j]), static_cast<int>(j));
                b.insert(b.end(), static_cast<std::size_t>(m[j] - take[j]), static_cast<int>(j));
            }
            fn(Partition(std::move(a)), Partition(std::move(b)), w);
            return;
        }
        for (int c = 0; c <= m[k]; ++c) {
            take[k] = c;
            rec(k + 1, w * binomial(m[k], c));
        }
        take[k] = 0;
    };
    rec(1, Scalar(1));
}

SymFunc skew_generic(const SymFunc& full, const SymFunc& dual, const Partition& mu, const Params& params, int D)
{
    SymFunc r(D);
    for (const auto& [nu, c] : full.terms()) {
        for_each_submultiset(nu, [&](const Partition& kappa, const Partition& rest, const Scalar& w) {
            if (kappa.size() != mu.size()) return;
            Scalar d = dual.coefficient(kappa);
            if (d == 0) return;
            r.add(rest, c * w * d * z_factor(kappa, params));
        });
    }
    return r;
}

}  // namespace

AlphabetSeries coproduct(const SymFunc& f, const std::string& x, const std::string& y)
{
    AlphabetSeries r({x, y}, f.truncation());
    for (const auto& [nu, c] : f.terms()) {
        for_each_submultiset(nu, [&](const Partition& kappa, const Partition& rest, const Scalar& w) {
            r.add(r.key_of({rest, kappa}), c * w);
        });
    }
    return r;
}

SymFunc skew_P(const Partition& lambda, const Partition& mu, const Params& params, int D)
{
    if (lambda.size() > D) throw InvalidArgument("|lambda| exceeds truncation order");
    if (mu.size() > lambda.size()) return SymFunc(D);
    return skew_generic(macdonald_P(lambda, params, lambda.size()), macdonald_Q(mu, params, mu.size()), mu, params, D);
}

SymFunc skew_Q(const Partition& lambda, const Partition& mu, const Params& params, int D)
{
    if (lambda.size() > D) throw InvalidArgument("|lambda| exceeds truncation order");
    if (mu.size() > lambda.size()) return SymFunc(D);
    return skew_generic(macdonald_Q(lambda, params, lambda.size()), macdonald_P(mu, params, mu.size()), mu, params, D);
}

// ---------------------------------------------------------------- kernels and pairing

Scalar kernel_coefficient(KernelKind kind, int k, const Params& params)
{
    Scalar tk = 1 - pow(params.t, k);
    Scalar qk = 1 - pow(params.q, k);
    switch (kind) {
    case KernelKind::Pi:
        if (qk == 0) throw ParameterDegeneracy("1 - q^k vanishes");
        return tk / qk;
    case KernelKind::PiInverse:
        if (qk == 0) throw ParameterDegeneracy("1 - q^k vanishes");
        return -tk / qk;
    case KernelKind::H:
        return tk;
    case KernelKind::HInverse:
        return -tk;
    case KernelKind::W:
        return tk * qk;
    }
    return 0;
}

AlphabetSeries kernel_series(KernelKind kind, const std::string& x, const std::string& y, const Params& params, int D)
{
    AlphabetSeries s({x, y}, D);
    for (int k = 1; 2 * k <= D; ++k) {
        std::vector<Partition> parts{Partition{k}, Partition{k}};
        s.add(s.key_of(parts), kernel_coefficient(kind, k, params) / k);
    }
    return exp_series(s);
}

AlphabetSeries alphabet_pair(const AlphabetSeries& f_in, const AlphabetSeries& g_in, const std::string& over,
                             const Params& params)
{
    if (!f_in.has_alphabet(over) || !g_in.has_alphabet(over)) {
        throw InvalidArgument("pairing alphabet '" + over + "' missing from an argument");
    }
    int D = std::min(f_in.truncation(), g_in.truncation());
    AlphabetSeries f = f_in.truncated(D);
    AlphabetSeries g = g_in.truncated(D);
    std::vector<std::string> out;
    for (const auto& n : f.alphabets()) {
        if (n != over) out.push_back(n);
    }
    for (const auto& n : g.alphabets()) {
        if (n == over) continue;
        if (std::find(out.begin(), out.end(), n) != out.end()) {
            throw InvalidArgument("alphabet '" + n + "' appears on both sides of the pairing");
        }
        out.push_back(n);
    }
    AlphabetSeries r(out, D);
    auto make_map = [&](const AlphabetSeries& s) {
        std::vector<int> m;
        for (const auto& n : s.alphabets()) m.push_back(n == over ? -1 : r.index_of(n));
        return m;
    };
    std::vector<int> fmap = make_map(f), gmap = make_map(g);
    int fo = f.index_of(over), go = g.index_of(over);

    auto over_part = [&](int idx, const AlphabetSeries::Key& k) {
        return k.substr(static_cast<std::size_t>(idx * D), static_cast<std::size_t>(D));
    };
    auto strip = [&](int idx, const AlphabetSeries::Key& k) {
        AlphabetSeries::Key c = k;
        for (int i = 0; i < D; ++i) c[static_cast<std::size_t>(idx * D + i)] = 0;
        return c;
    };
    struct Entry {
        AlphabetSeries::Key key;
        int degree;
        Scalar coeff;
    };
    std::map<std::string, std::vector<Entry>> gb;
    std::string tmp;
    for (const auto& [k, c] : g.terms()) {
        relayout(strip(go, k), g.alphabets().size(), D, gmap, out.size(), D, tmp);
        gb[over_part(go, k)].push_back({tmp, g.degree(k) - g.degree_in(k, go), c});
    }
    std::map<std::string, Scalar> zcache;
    for (const auto& [k, c] : f.terms()) {
        auto op = over_part(fo, k);
        auto it = gb.find(op);
        if (it == gb.end()) continue;
        auto zit = zcache.find(op);
        if (zit == zcache.end()) zit = zcache.emplace(op, z_factor(f.partition_in(k, fo), params)).first;
        relayout(strip(fo, k), f.alphabets().size(), D, fmap, out.size(), D, tmp);
        int fd = f.degree(k) - f.degree_in(k, fo);
        Scalar fc = c * zit->second;
        for (const auto& e : it->second) {
            if (fd + e.degree > D) continue;
            AlphabetSeries::Key key = tmp;
            for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<char>(key[i] + e.key[i]);
            r.add(key, fc * e.coeff);
        }
    }
    return r;
}

AlphabetSeries ExpForm::expand(const std::vector<std::string>& alphabets, int D) const
{
    AlphabetSeries s(alphabets, D);
    for (const auto& [k, c] : coeff) {
        if (k < 1) throw InvalidArgument("exponential coefficient index must be positive");
        s += c.embed(alphabets) *
             AlphabetSeries::power_sum(alphabets, D, alphabet, k, Scalar(1, k));
    }
    return exp_series(s);
}

AlphabetSeries pair_exponentials(const ExpForm& a, const ExpForm& b, const std::vector<std::string>& out_alphabets,
                                 int D, const Params& params)
{
    if (a.alphabet != b.alphabet) throw InvalidArgument("exponentials are in different alphabets");
    AlphabetSeries s(out_alphabets, D);
    for (const auto& [k, ca] : a.coeff) {
        auto it = b.coeff.find(k);
        if (it == b.coeff.end()) continue;
        Scalar w = Scalar(1 - pow(params.q, k)) / Scalar(1 - pow(params.t, k)) / k;
        s += ca.embed(out_alphabets).truncated(D) * it->second.embed(out_alphabets).truncated(D) * w;
    }
    return exp_series(s);
}

// ---------------------------------------------------------------- substitutions

AlphabetSeries specialize(const AlphabetSeries& f, const std::string& alphabet, const std::vector<Scalar>& pk)
{
    int a = f.index_of(alphabet);
    int D = f.truncation();
    std::vector<std::string> out;
    std::vector<int> map;
    for (const auto& n : f.alphabets()) {
        map.push_back(n == alphabet ? -1 : static_cast<int>(out.size()));
        if (n != alphabet) out.push_back(n);
    }
    AlphabetSeries r(out, D);
    std::string key;
    for (const auto& [k, c] : f.terms()) {
        Scalar v = c;
        AlphabetSeries::Key stripped = k;
        for (int j = 1; j <= D; ++j) {
            int m = static_cast<unsigned char>(k[static_cast<std::size_t>(a * D + j - 1)]);
            if (m == 0) continue;
            if (static_cast<std::size_t>(j) >= pk.size()) throw InvalidArgument("specialization lacks p_k for k <= D");
            v *= pow(pk[static_cast<std::size_t>(j)], m);
            stripped[static_cast<std::size_t>(a * D + j - 1)] = 0;
        }
        relayout(stripped, f.alphabets().size(), D, map, out.size(), D, key);
        r.add(key, v);
    }
    return r;
}

AlphabetSeries scale_alphabet(const AlphabetSeries& f, const std::string& alphabet, const Scalar& c)
{
    int a = f.index_of(alphabet);
    AlphabetSeries r(f.alphabets(), f.truncation());
    for (const auto& [k, v] : f.terms()) r.add(k, v * pow(c, f.degree_in(k, a)));
    return r;
}

AlphabetSeries split_alphabet(const AlphabetSeries& f, const std::string& from, const std::string& to1,
                              const std::string& to2)
{
    int a = f.index_of(from);
    int D = f.truncation();
    std::vector<std::string> rest;
    for (const auto& n : f.alphabets()) {
        if (n != from) rest.push_back(n);
    }
    auto out = merge_alphabets(rest, {to1, to2});
    AlphabetSeries r(out, D);
    int i1 = r.index_of(to1), i2 = r.index_of(to2);
    std::vector<int> map;
    for (const auto& n : f.alphabets()) map.push_back(n == from ? -1 : r.index_of(n));
    std::string base;
    for (const auto& [k, c] : f.terms()) {
        AlphabetSeries::Key stripped = k;
        for (int j = 0; j < D; ++j) stripped[static_cast<std::size_t>(a * D + j)] = 0;
        relayout(stripped, f.alphabets().size(), D, map, out.size(), D, base);
        Partition nu = f.partition_in(k, a);
        for_each_submultiset(nu, [&](const Partition& kappa, const Partition& restp, const Scalar& w) {
            AlphabetSeries::Key key = base;
            for (int p : restp.parts()) key[static_cast<std::size_t>(i1 * D + p - 1)]++;
            for (int p : kappa.parts()) key[static_cast<std::size_t>(i2 * D + p - 1)]++;
            r.add(key, c * w);
        });
    }
    return r;
}

// ---------------------------------------------------------------- Polynomial

void Polynomial::add(const std::vector<int>& exps, const Scalar& c)
{
    if (static_cast<int>(exps.size()) != n_) throw InvalidArgument("exponent vector has wrong length");
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(exps, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

Scalar Polynomial::evaluate(const std::vector<Scalar>& x) const
{
    if (static_cast<int>(x.size()) != n_) throw InvalidArgument("point has wrong dimension");
    Scalar s = 0;
    for (const auto& [e, c] : terms_) {
        Scalar v = c;
        for (int i = 0; i < n_; ++i) v *= pow(x[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i)]);
        s += v;
    }
    return s;
}

std::string Polynomial::to_string() const
{
    if (terms_.empty()) return "0";
    std::string s;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        if (!s.empty()) s += " + ";
        s += "(" + it->second.get_str() + ")";
        for (int i = 0; i < n_; ++i) {
            int e = it->first[static_cast<std::size_t>(i)];
            if (e == 0) continue;
            s += "*x" + std::to_string(i + 1);
            if (e > 1) s += "^" + std::to_string(e);
        }
    }
    return s;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b)
{
    if (a.n_ != b.n_) throw InvalidArgument("polynomials in different variable counts");
    Polynomial r(a.n_);
    std::vector<int> e(static_cast<std::size_t>(a.n_));
    for (const auto& [ea, ca] : a.terms_) {
        for (const auto& [eb, cb] : b.terms_) {
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
            r.add(e, ca * cb);
        }
    }
    return r;
}

Polynomial restrict_to_vars(const SymFunc& f, int n)
{
    if (n < 1) throw InvalidArgument("need at least one variable");
    std::map<int, Polynomial> pk;
    auto power_sum = [&](int k) -> const Polynomial& {
        auto it = pk.find(k);
        if (it != pk.end()) return it->second;
        Polynomial p(n);
        for (int i = 0; i < n; ++i) {
            std::vector<int> e(static_cast<std::size_t>(n), 0);
            e[static_cast<std::size_t>(i)] = k;
            p.add(e, 1);
        }
        return pk.emplace(k, p).first->second;
    };
    Polynomial r(n);
    for (const auto& [lam, c] : f.terms()) {
        Polynomial term(n);
        term.add(std::vector<int>(static_cast<std::size_t>(n), 0), c);
        for (int p : lam.parts()) term = term * power_sum(p);
        for (const auto& [e, v] : term.terms()) r.add(e, v);
    }
    return r;
}

}  // namespace maclab
