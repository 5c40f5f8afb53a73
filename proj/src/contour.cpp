#include "maclab/contour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace maclab {

namespace {

// ---------------------------------------------------------------- linear forms

struct Lin {
    std::vector<std::pair<int, Scalar>> vars;
    Scalar c0;
};

struct Norm {
    bool zero = false;
    Scalar scale = 1;
    int mono_var = -1;
    std::optional<FormKey> form;
};

Lin form_to_lin(const FormKey& f)
{
    Lin l;
    l.vars.push_back({f.i, Scalar(1)});
    if (f.j >= 0) {
        l.vars.push_back({f.j, Scalar(-f.c)});
        l.c0 = 0;
    } else {
        l.c0 = -f.c;
    }
    return l;
}

Norm normalize(Lin l)
{
    std::map<int, Scalar> merged;
    for (auto& [v, a] : l.vars) merged[v] += a;
    std::vector<std::pair<int, Scalar>> vs;
    for (auto& [v, a] : merged) {
        if (a != 0) vs.push_back({v, a});
    }
    Norm n;
    if (vs.empty()) {
        if (l.c0 == 0) {
            n.zero = true;
        } else {
            n.scale = l.c0;
        }
        return n;
    }
    if (vs.size() == 1) {
        n.scale = vs[0].second;
        if (l.c0 == 0) {
            n.mono_var = vs[0].first;
        } else {
            n.form = FormKey{vs[0].first, -1, Scalar(-l.c0 / vs[0].second)};
        }
        return n;
    }
    if (vs.size() == 2 && l.c0 == 0) {
        n.scale = vs[0].second;
        n.form = FormKey{vs[0].first, vs[1].first, Scalar(-vs[1].second / vs[0].second)};
        return n;
    }
    throw std::logic_error("linear form with more than two terms");
}

void mul_mono(TermKey& k, int var, int e)
{
    k.mono[static_cast<std::size_t>(var)] += e;
}

void mul_form(TermKey& k, const FormKey& f, int e, std::set<FormKey>* cancelled = nullptr)
{
    if (e == 0) return;
    auto it = std::lower_bound(k.forms.begin(), k.forms.end(), f,
                               [](const std::pair<FormKey, int>& a, const FormKey& b) { return a.first < b; });
    if (it != k.forms.end() && it->first == f) {
        int before = it->second;
        it->second += e;
        if (cancelled && (before < 0) != (e < 0)) cancelled->insert(f);
        if (it->second == 0) k.forms.erase(it);
    } else {
        k.forms.insert(it, {f, e});
    }
}

void mul_norm(TermKey& k, Scalar& coeff, const Norm& n, int e, std::set<FormKey>* cancelled = nullptr)
{
    coeff *= pow(n.scale, e);
    if (n.mono_var >= 0) mul_mono(k, n.mono_var, e);
    if (n.form) mul_form(k, *n.form, e, cancelled);
}

TermKey multiply_keys(const TermKey& a, const TermKey& b, std::set<FormKey>* cancelled)
{
    TermKey r = a;
    for (std::size_t i = 0; i < r.mono.size(); ++i) r.mono[i] += b.mono[i];
    for (const auto& [f, e] : b.forms) mul_form(r, f, e, cancelled);
    return r;
}

bool involves(const FormKey& f, int var)
{
    return f.i == var || f.j == var;
}

bool key_involves(const TermKey& k, int var)
{
    if (k.mono[static_cast<std::size_t>(var)] != 0) return true;
    for (const auto& [f, e] : k.forms) {
        if (involves(f, var)) return true;
    }
    return false;
}

std::string scalar_text(const Scalar& s)
{
    return s.get_str();
}

}  // namespace

// ---------------------------------------------------------------- RationalExpr

RationalExpr RationalExpr::constant(int nvars, const Scalar& c)
{
    RationalExpr r(nvars);
    r.add_term(TermKey{std::vector<int>(static_cast<std::size_t>(nvars), 0), {}}, c);
    return r;
}

RationalExpr RationalExpr::monomial(int nvars, const std::vector<int>& exps, const Scalar& c)
{
    if (static_cast<int>(exps.size()) != nvars) throw InvalidArgument("exponent vector has wrong length");
    RationalExpr r(nvars);
    r.add_term(TermKey{exps, {}}, c);
    return r;
}

namespace {

RationalExpr from_lin(int nvars, const Lin& l, int e)
{
    Norm n = normalize(l);
    if (n.zero) {
        if (e < 0) throw ParameterDegeneracy("reciprocal of an identically vanishing factor");
        return e == 0 ? RationalExpr::constant(nvars, 1) : RationalExpr(nvars);
    }
    TermKey k{std::vector<int>(static_cast<std::size_t>(nvars), 0), {}};
    Scalar c = 1;
    mul_norm(k, c, n, e);
    RationalExpr r(nvars);
    r.add_term(k, c);
    return r;
}

}  // namespace

RationalExpr RationalExpr::binomial_form(int nvars, int i, const Scalar& a, int j, const Scalar& b, int e)
{
    if (i == j) throw InvalidArgument("binomial form needs two distinct variables");
    return from_lin(nvars, Lin{{{i, a}, {j, b}}, Scalar(0)}, e);
}

RationalExpr RationalExpr::affine(int nvars, int i, const Scalar& a, const Scalar& c, int e)
{
    return from_lin(nvars, Lin{{{i, a}}, c}, e);
}

void RationalExpr::add_term(const TermKey& key, const Scalar& c)
{
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(key, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

std::set<int> RationalExpr::variables() const
{
    std::set<int> vs;
    for (const auto& [k, c] : terms_) {
        for (int i = 0; i < n_; ++i) {
            if (k.mono[static_cast<std::size_t>(i)] != 0) vs.insert(i);
        }
        for (const auto& [f, e] : k.forms) {
            vs.insert(f.i);
            if (f.j >= 0) vs.insert(f.j);
        }
    }
    return vs;
}

std::complex<double> RationalExpr::evaluate(const std::vector<std::complex<double>>& v) const
{
    std::complex<double> total = 0;
    for (const auto& [k, c] : terms_) {
        std::complex<double> x = to_double(c);
        for (int i = 0; i < n_; ++i) {
            int e = k.mono[static_cast<std::size_t>(i)];
            if (e != 0) x *= std::pow(v[static_cast<std::size_t>(i)], e);
        }
        for (const auto& [f, e] : k.forms) {
            std::complex<double> base = v[static_cast<std::size_t>(f.i)];
            base -= f.j >= 0 ? to_double(f.c) * v[static_cast<std::size_t>(f.j)] : std::complex<double>(to_double(f.c));
            x *= std::pow(base, e);
        }
        total += x;
    }
    return total;
}

NumericExpr::NumericExpr(const RationalExpr& e) : n_(e.nvars())
{
    std::map<FormKey, int> index;
    for (const auto& [k, c] : e.terms()) {
        Term t{to_double(c), {}};
        for (int i = 0; i < n_; ++i) {
            if (int x = k.mono[static_cast<std::size_t>(i)]; x != 0) t.powers.push_back({i, x});
        }
        for (const auto& [f, x] : k.forms) {
            auto [it, fresh] = index.try_emplace(f, static_cast<int>(keys_.size()));
            if (fresh) {
                keys_.push_back(f);
                c_.push_back(to_double(f.c));
            }
            t.powers.push_back({n_ + it->second, x});
        }
        terms_.push_back(std::move(t));
    }
}

std::complex<double> NumericExpr::operator()(const std::vector<std::complex<double>>& v, double* magnitude) const
{
    std::vector<std::complex<double>> base(v.begin(), v.begin() + n_);
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        const auto& f = keys_[k];
        base.push_back(v[static_cast<std::size_t>(f.i)] - (f.j >= 0 ? c_[k] * v[static_cast<std::size_t>(f.j)] : c_[k]));
    }
    std::vector<std::complex<double>> inverse(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) inverse[k] = 1.0 / base[k];
    std::complex<double> total = 0;
    for (const auto& t : terms_) {
        std::complex<double> x = t.coeff;
        for (auto [slot, e] : t.powers) {
            const auto& b = e > 0 ? base[static_cast<std::size_t>(slot)] : inverse[static_cast<std::size_t>(slot)];
            for (int m = std::abs(e); m > 0; --m) x *= b;
        }
        total += x;
        if (magnitude) *magnitude += std::abs(x);
    }
    return total;
}

Scalar RationalExpr::evaluate_exact(const std::vector<Scalar>& v) const
{
    Scalar total = 0;
    for (const auto& [k, c] : terms_) {
        Scalar x = c;
        for (int i = 0; i < n_; ++i) {
            int e = k.mono[static_cast<std::size_t>(i)];
            if (e != 0) x *= pow(v[static_cast<std::size_t>(i)], e);
        }
        for (const auto& [f, e] : k.forms) {
            Scalar base = v[static_cast<std::size_t>(f.i)] - (f.j >= 0 ? Scalar(f.c * v[static_cast<std::size_t>(f.j)]) : f.c);
            x *= pow(base, e);
        }
        total += x;
    }
    return total;
}

Scalar RationalExpr::constant_value() const
{
    Scalar total = 0;
    for (const auto& [k, c] : terms_) {
        if (!k.forms.empty() || std::any_of(k.mono.begin(), k.mono.end(), [](int e) { return e != 0; })) {
            throw std::logic_error("expression still depends on contour variables");
        }
        total += c;
    }
    return total;
}

std::string RationalExpr::to_string() const
{
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [k, c] : terms_) {
        if (!s.empty()) s += " + ";
        s += "(" + c.get_str() + ")";
        for (int i = 0; i < n_; ++i) {
            int e = k.mono[static_cast<std::size_t>(i)];
            if (e != 0) s += "*v" + std::to_string(i) + "^" + std::to_string(e);
        }
        for (const auto& [f, e] : k.forms) {
            s += "*(v" + std::to_string(f.i) + "-" + f.c.get_str();
            if (f.j >= 0) s += "*v" + std::to_string(f.j);
            s += ")^" + std::to_string(e);
        }
    }
    return s;
}

RationalExpr& RationalExpr::operator+=(const RationalExpr& o)
{
    if (o.n_ != n_) throw InvalidArgument("expressions over different variable counts");
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    cancelled_.insert(o.cancelled_.begin(), o.cancelled_.end());
    return *this;
}

RationalExpr& RationalExpr::operator*=(const Scalar& c)
{
    if (c == 0) {
        terms_.clear();
        return *this;
    }
    for (auto& [k, v] : terms_) v *= c;
    return *this;
}

RationalExpr operator*(const RationalExpr& a, const RationalExpr& b)
{
    if (a.n_ != b.n_) throw InvalidArgument("expressions over different variable counts");
    RationalExpr r(a.n_);
    r.cancelled_ = a.cancelled_;
    r.cancelled_.insert(b.cancelled_.begin(), b.cancelled_.end());
    for (const auto& [ka, ca] : a.terms_) {
        for (const auto& [kb, cb] : b.terms_) r.add_term(multiply_keys(ka, kb, &r.cancelled_), ca * cb);
    }
    return r;
}

// ---------------------------------------------------------------- poles

std::string Pole::describe(const std::vector<std::string>& names) const
{
    switch (kind) {
    case Kind::Zero:
        return "0";
    case Kind::Constant:
        return scalar_text(value);
    case Kind::Scaled:
        return scalar_text(value) + "*" +
               (other >= 0 && other < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(other)]
                                                                     : "v" + std::to_string(other));
    }
    return "?";
}

bool operator<(const Pole& a, const Pole& b)
{
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.other != b.other) return a.other < b.other;
    return a.value < b.value;
}

namespace {

std::vector<Pole> candidate_poles(const TermKey& k, int var)
{
    std::set<Pole> out;
    if (k.mono[static_cast<std::size_t>(var)] < 0) out.insert(Pole{Pole::Kind::Zero, Scalar(0), -1});
    for (const auto& [f, e] : k.forms) {
        if (e >= 0) continue;
        if (f.i == var && f.j < 0) {
            out.insert(Pole{Pole::Kind::Constant, f.c, -1});
        } else if (f.i == var) {
            out.insert(Pole{Pole::Kind::Scaled, f.c, f.j});
        } else if (f.j == var) {
            out.insert(Pole{Pole::Kind::Scaled, inverse(f.c), f.i});
        }
    }
    return {out.begin(), out.end()};
}

bool vanishes_at(const FormKey& f, int var, const Pole& p)
{
    switch (p.kind) {
    case Pole::Kind::Zero:
        return false;
    case Pole::Kind::Constant:
        return f.i == var && f.j < 0 && f.c == p.value;
    case Pole::Kind::Scaled:
        if (f.i == var && f.j == p.other) return f.c == p.value;
        if (f.j == var && f.i == p.other) return f.c * p.value == 1;
        return false;
    }
    return false;
}

Lin substitute(const Lin& l, int var, const Pole& p, Scalar& a)
{
    Lin out;
    out.c0 = l.c0;
    a = 0;
    for (const auto& [v, c] : l.vars) {
        if (v == var) {
            a += c;
        } else {
            out.vars.push_back({v, c});
        }
    }
    if (p.kind == Pole::Kind::Constant) out.c0 += a * p.value;
    if (p.kind == Pole::Kind::Scaled) out.vars.push_back({p.other, Scalar(a * p.value)});
    return out;
}

struct SeriesEntry {
    Scalar c;
    Norm basis;
    int exponent;
};

void residue_term(const TermKey& key, const Scalar& coeff, int var, const Pole& pole, int m, RationalExpr& out)
{
    TermKey base = key;
    base.mono[static_cast<std::size_t>(var)] = 0;
    base.forms.erase(std::remove_if(base.forms.begin(), base.forms.end(),
                                    [&](const std::pair<FormKey, int>& fe) { return involves(fe.first, var); }),
                     base.forms.end());
    Scalar bcoeff = coeff;
    int shift = 0;
    std::vector<std::vector<SeriesEntry>> series;

    auto handle = [&](const Lin& l, int e) {
        Scalar a;
        Lin lp = substitute(l, var, pole, a);
        Norm n = normalize(lp);
        if (n.zero) {
            bcoeff *= pow(a, e);
            shift += e;
            return;
        }
        std::vector<SeriesEntry> s;
        for (int k = 0; k < m; ++k) {
            Scalar b = binomial(e, k);
            if (b == 0) break;
            s.push_back({b * pow(a, k), n, e - k});
        }
        series.push_back(std::move(s));
    };

    int me = key.mono[static_cast<std::size_t>(var)];
    if (me != 0) handle(Lin{{{var, Scalar(1)}}, Scalar(0)}, me);
    for (const auto& [f, e] : key.forms) {
        if (involves(f, var)) handle(form_to_lin(f), e);
    }
    if (shift != -m) throw std::logic_error("pole order bookkeeping mismatch");

    // coefficient of eps^{m-1} in the product of the factor expansions
    std::set<FormKey> cancelled;
    std::vector<std::map<TermKey, Scalar>> acc(static_cast<std::size_t>(m));
    acc[0][base] = bcoeff;
    for (const auto& s : series) {
        std::vector<std::map<TermKey, Scalar>> next(static_cast<std::size_t>(m));
        for (int d = 0; d < m; ++d) {
            for (const auto& [k, c] : acc[static_cast<std::size_t>(d)]) {
                for (std::size_t n = 0; n < s.size() && d + static_cast<int>(n) < m; ++n) {
                    TermKey nk = k;
                    Scalar nc = c * s[n].c;
                    mul_norm(nk, nc, s[n].basis, s[n].exponent, &cancelled);
                    auto& slot = next[static_cast<std::size_t>(d) + n];
                    auto [it, inserted] = slot.emplace(nk, nc);
                    if (!inserted) {
                        it->second += nc;
                        if (it->second == 0) slot.erase(it);
                    }
                }
            }
        }
        acc = std::move(next);
    }
    for (const auto& [k, c] : acc[static_cast<std::size_t>(m - 1)]) out.add_term(k, c);
    for (const auto& f : cancelled) out.note_cancelled(f);
}

}  // namespace

int pole_order(const TermKey& key, int var, const Pole& pole)
{
    int s = 0;
    if (pole.kind == Pole::Kind::Zero) return -key.mono[static_cast<std::size_t>(var)];
    for (const auto& [f, e] : key.forms) {
        if (vanishes_at(f, var, pole)) s += e;
    }
    return -s;
}

RationalExpr residue_at(const RationalExpr& expr, int var, const Pole& pole)
{
    RationalExpr out(expr.nvars());
    for (const auto& [k, c] : expr.terms()) {
        int m = pole_order(k, var, pole);
        if (m > 0) residue_term(k, c, var, pole, m, out);
    }
    return out;
}

PoleClass classify_pole(const ContourScheme& scheme, int var, const Pole& pole)
{
    const Circle& g = scheme.circles[static_cast<std::size_t>(var)];
    if (pole.kind != Pole::Kind::Scaled) {
        Scalar p = pole.kind == Pole::Kind::Zero ? Scalar(0) : pole.value;
        Scalar d = abs(p - g.center);
        if (d < g.radius) return PoleClass::Inside;
        if (d > g.radius) return PoleClass::Outside;
        return PoleClass::Undecidable;
    }
    const Circle& h = scheme.circles[static_cast<std::size_t>(pole.other)];
    Scalar c = pole.value * h.center;
    Scalar r = abs(pole.value) * h.radius;
    Scalar d = abs(c - g.center);
    if (d + r < g.radius) return PoleClass::Inside;
    if (d > g.radius + r) return PoleClass::Outside;
    if (r > d + g.radius) return PoleClass::Outside;
    return PoleClass::Undecidable;
}

void ContourScheme::verify() const
{
    std::size_t n = circles.size();
    if (names.size() != n) throw UndecidableContour("contour names do not match circles");
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != static_cast<int>(i)) throw UndecidableContour("integration order is not a permutation");
    }
    if (sorted.size() != n) throw UndecidableContour("integration order is not a permutation");
    for (const auto& c : circles) {
        if (c.radius <= 0) throw UndecidableContour("contour radius must be positive");
    }
    for (const auto& c : constraints) {
        if (!(circles[static_cast<std::size_t>(c.smaller)].radius < c.factor * circles[static_cast<std::size_t>(c.larger)].radius)) {
            throw UndecidableContour("radius condition R(" + names[static_cast<std::size_t>(c.smaller)] + ") < " +
                                     c.factor.get_str() + " R(" + names[static_cast<std::size_t>(c.larger)] +
                                     ") fails");
        }
    }
    for (const auto& p : points) {
        const Circle& g = circles[static_cast<std::size_t>(p.var)];
        Scalar d = abs(p.point - g.center);
        bool ok = p.inside ? d < g.radius : d > g.radius;
        if (!ok) {
            throw UndecidableContour("point " + p.point.get_str() + " must lie " + (p.inside ? "inside" : "outside") +
                                     " the contour of " + names[static_cast<std::size_t>(p.var)]);
        }
    }
}

// ---------------------------------------------------------------- plans and integration

std::string ResiduePlan::text(const std::vector<std::string>& names) const
{
    auto name = [&](int v) {
        return static_cast<std::size_t>(v) < names.size() ? names[static_cast<std::size_t>(v)] : "v" + std::to_string(v + 1);
    };
    std::string s = "order:";
    for (int v : order) s += " " + name(v);
    for (std::size_t i = 0; i < order.size(); ++i) {
        s += "; " + name(order[i]) + " inside{";
        bool first = true;
        for (const auto& p : inside[i]) {
            s += (first ? "" : ",") + p;
            first = false;
        }
        s += "} cancelled{";
        first = true;
        for (const auto& p : cancelled[i]) {
            s += (first ? "" : ",") + p;
            first = false;
        }
        s += "}";
    }
    return s;
}

std::string ResiduePlan::digest(const std::vector<std::string>& names) const
{
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : text(names)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ResiduePlan::merge(const ResiduePlan& other)
{
    if (order.empty()) {
        *this = other;
        return;
    }
    for (std::size_t i = 0; i < order.size() && i < other.order.size(); ++i) {
        inside[i].insert(other.inside[i].begin(), other.inside[i].end());
        cancelled[i].insert(other.cancelled[i].begin(), other.cancelled[i].end());
    }
}

RationalExpr integrate(const RationalExpr& expr, const ContourScheme& scheme, ResiduePlan* plan)
{
    if (expr.nvars() != scheme.size()) throw InvalidArgument("scheme does not match the expression's variables");
    ResiduePlan local;
    local.order = scheme.order;
    local.inside.assign(scheme.order.size(), {});
    local.cancelled.assign(scheme.order.size(), {});
    RationalExpr current = expr;
    for (std::size_t step = 0; step < scheme.order.size(); ++step) {
        int var = scheme.order[step];
        RationalExpr next(expr.nvars());
        for (const auto& f : current.cancelled_forms()) {
            if (!involves(f, var)) {
                next.note_cancelled(f);
                continue;
            }
            TermKey probe{std::vector<int>(static_cast<std::size_t>(expr.nvars()), 0), {{f, -1}}};
            for (const auto& pole : candidate_poles(probe, var)) local.cancelled[step].insert(pole.describe(scheme.names));
        }
        for (const auto& [k, c] : current.terms()) {
            if (!key_involves(k, var)) continue;  // no pole: the integral of dv vanishes
            for (const auto& pole : candidate_poles(k, var)) {
                int m = pole_order(k, var, pole);
                if (m <= 0) {
                    local.cancelled[step].insert(pole.describe(scheme.names));
                    continue;
                }
                PoleClass cls = classify_pole(scheme, var, pole);
                if (cls == PoleClass::Undecidable) {
                    throw UndecidableContour("cannot place pole " + pole.describe(scheme.names) + " relative to the contour of " +
                                             scheme.names[static_cast<std::size_t>(var)]);
                }
                if (cls == PoleClass::Outside) continue;
                local.inside[step].insert(pole.describe(scheme.names));
                residue_term(k, c, var, pole, m, next);
            }
        }
        current = std::move(next);
    }
    if (plan) plan->merge(local);
    return current;
}

Scalar integrate_scalar(const RationalExpr& expr, const ContourScheme& scheme, ResiduePlan* plan)
{
    return integrate(expr, scheme, plan).constant_value();
}

// ---------------------------------------------------------------- LaurentSeries

LaurentSeries::LaurentSeries(int nvars, std::vector<std::string> alphabets, int D)
    : n_(nvars), D_(D), layout_(std::move(alphabets), D)
{
}

LaurentSeries LaurentSeries::one(int nvars, std::vector<std::string> alphabets, int D)
{
    LaurentSeries s(nvars, std::move(alphabets), D);
    s.add(std::vector<int>(static_cast<std::size_t>(nvars), 0),
          AlphabetSeries::Key(s.alphabets().size() * static_cast<std::size_t>(D), '\0'), 1);
    return s;
}

void LaurentSeries::add(const std::vector<int>& exps, const AlphabetSeries::Key& key, const Scalar& c)
{
    if (c == 0) return;
    if (layout_.degree(key) > D_) return;
    auto [it, inserted] = terms_.emplace(Key{exps, key}, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

void LaurentSeries::add_log_pairing(const std::string& alphabet, int var, const Scalar& s, int sigma,
                                    const std::function<Scalar(int)>& coeff, int sign)
{
    int a = layout_.index_of(alphabet);
    for (int k = 1; k <= D_; ++k) {
        std::vector<int> exps(static_cast<std::size_t>(n_), 0);
        exps[static_cast<std::size_t>(var)] = sigma * k;
        AlphabetSeries::Key key(alphabets().size() * static_cast<std::size_t>(D_), '\0');
        key[static_cast<std::size_t>(a * D_ + k - 1)] = 1;
        add(exps, key, Scalar(sign) * coeff(k) * pow(s, k) / k);
    }
}

LaurentSeries operator*(const LaurentSeries& a, const LaurentSeries& b)
{
    if (a.n_ != b.n_ || a.alphabets() != b.alphabets() || a.D_ != b.D_) {
        throw InvalidArgument("Laurent series layouts differ");
    }
    LaurentSeries r(a.n_, a.alphabets(), a.D_);
    std::vector<std::vector<const std::pair<const LaurentSeries::Key, Scalar>*>> buckets(static_cast<std::size_t>(a.D_) + 1);
    for (const auto& e : b.terms_) buckets[static_cast<std::size_t>(b.layout_.degree(e.first.second))].push_back(&e);
    std::vector<int> exps(static_cast<std::size_t>(a.n_));
    for (const auto& [ka, ca] : a.terms_) {
        int da = a.layout_.degree(ka.second);
        for (int db = 0; da + db <= a.D_; ++db) {
            for (const auto* eb : buckets[static_cast<std::size_t>(db)]) {
                const auto& kb = eb->first;
                for (std::size_t i = 0; i < exps.size(); ++i) exps[i] = ka.first[i] + kb.first[i];
                AlphabetSeries::Key key = ka.second;
                for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<char>(key[i] + kb.second[i]);
                r.add(exps, key, ca * eb->second);
            }
        }
    }
    return r;
}

LaurentSeries LaurentSeries::exp() const
{
    for (const auto& [k, c] : terms_) {
        if (layout_.degree(k.second) == 0) throw InvalidArgument("exponent has a term of alphabet degree 0");
    }
    LaurentSeries result = one(n_, alphabets(), D_);
    LaurentSeries term = result;
    for (int n = 1; n <= D_; ++n) {
        term = term * *this;
        for (auto& [k, c] : term.terms_) c /= n;
        if (term.terms_.empty()) break;
        for (const auto& [k, c] : term.terms_) result.add(k.first, k.second, c);
    }
    return result;
}

std::map<std::vector<int>, AlphabetSeries> LaurentSeries::by_exponent() const
{
    std::map<std::vector<int>, AlphabetSeries> out;
    for (const auto& [k, c] : terms_) {
        auto it = out.find(k.first);
        if (it == out.end()) it = out.emplace(k.first, AlphabetSeries(alphabets(), D_)).first;
        it->second.add(k.second, c);
    }
    return out;
}

int LaurentSeries::max_abs_exponent() const
{
    int m = 0;
    for (const auto& [k, c] : terms_) {
        for (int e : k.first) m = std::max(m, std::abs(e));
    }
    return m;
}

AlphabetSeries integrate_formal(const FormalIntegrand& integrand, ResiduePlan* plan)
{
    const auto& num = integrand.numerator;
    if (num.max_abs_exponent() > num.truncation()) throw std::logic_error("Laurent exponent exceeds the degree bound");
    AlphabetSeries result(num.alphabets(), num.truncation());
    for (const auto& [exps, coeff] : num.by_exponent()) {
        RationalExpr shifted(integrand.kernel.nvars());
        for (const auto& [k, c] : integrand.kernel.terms()) {
            TermKey nk = k;
            for (std::size_t i = 0; i < exps.size(); ++i) nk.mono[i] += exps[i];
            shifted.add_term(nk, c);
        }
        for (const auto& f : integrand.kernel.cancelled_forms()) shifted.note_cancelled(f);
        Scalar value = integrate_scalar(shifted, integrand.scheme, plan);
        if (value != 0) result += coeff * value;
    }
    return result * integrand.prefactor;
}

// ---------------------------------------------------------------- integrand builders

RationalExpr cauchy_block(int nvars, const std::vector<int>& vars, const Params& params)
{
    const Scalar& t = params.t;
    int r = static_cast<int>(vars.size());
    RationalExpr e = RationalExpr::constant(nvars, pow(t, r * (r - 1) / 2) / (pow(Scalar(1 - t), r) * factorial(r)));
    if (e.is_zero()) return e;
    std::vector<int> mono(static_cast<std::size_t>(nvars), 0);
    for (int v : vars) mono[static_cast<std::size_t>(v)] = -1;
    e = e * RationalExpr::monomial(nvars, mono);
    for (int k : vars) {
        for (int l : vars) {
            if (k == l) continue;
            e = e * RationalExpr::binomial_form(nvars, k, Scalar(1), l, Scalar(-1), 1);
            e = e * RationalExpr::binomial_form(nvars, k, Scalar(1), l, Scalar(-t), -1);
        }
    }
    return e;
}

namespace {

// Spread of radii inside one group: ratios stay below min(5/4, (1+1/t)/2).
Scalar group_spread(const Params& params, int r)
{
    Scalar delta(1, 4);
    if (params.t > 0) {
        Scalar alt = (inverse(params.t) - 1) / 2;
        if (alt < delta) delta = alt;
    }
    return r > 1 ? Scalar(delta / (r - 1)) : Scalar(0);
}

std::vector<int> order_by_radius(const std::vector<Circle>& circles)
{
    std::vector<int> order(circles.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return circles[static_cast<std::size_t>(a)].radius < circles[static_cast<std::size_t>(b)].radius;
    });
    return order;
}

void add_group_constraints(ContourScheme& s, const std::vector<int>& vars, const Params& params)
{
    if (params.t == 0) return;
    for (int k : vars) {
        for (int l : vars) {
            if (k != l) s.constraints.push_back({l, k, inverse(params.t)});  // t R_l < R_k
        }
    }
}

Scalar one_minus_t_pow(const Params& p, int k)
{
    return 1 - pow(p.t, k);
}

}  // namespace

FormalIntegrand build_single_level(int r, const std::string& X, const std::string& Y, const Params& params, int D)
{
    if (r < 0) throw InvalidArgument("r must be nonnegative");
    std::vector<std::string> alphs{X, Y};
    FormalIntegrand in{RationalExpr::constant(r, 1), LaurentSeries::one(r, alphs, D),
                       AlphabetSeries::constant(alphs, D, 1), ContourScheme{}};
    if (r == 0) return in;
    std::vector<int> vars(static_cast<std::size_t>(r));
    std::iota(vars.begin(), vars.end(), 0);
    in.kernel = cauchy_block(r, vars, params);
    LaurentSeries log(r, alphs, D);
    auto c = [&](int k) { return one_minus_t_pow(params, k); };
    for (int v : vars) {
        log.add_log_pairing(X, v, Scalar(1), 1, c, 1);
        log.add_log_pairing(Y, v, inverse(params.q), -1, c, 1);
    }
    in.numerator = log.exp();
    Scalar spread = group_spread(params, r);
    for (int v : vars) {
        in.scheme.names.push_back("w" + std::to_string(v + 1));
        in.scheme.circles.push_back({Scalar(0), Scalar(1 + v * spread)});
    }
    add_group_constraints(in.scheme, vars, params);
    in.scheme.order = order_by_radius(in.scheme.circles);
    in.scheme.verify();
    return in;
}

GroupLayout groups_for_plan(const ObservablePlan& plan, int N)
{
    std::vector<std::pair<int, int>> g;  // (level, r)
    for (const auto& e : plan.entries) {
        if (e.kind != ObservableKind::O) throw InvalidArgument("only O_r observables have grouped contour formulas");
        if (e.level < 1 || e.level > N) throw InvalidArgument("observable level out of range");
        if (e.r == 0) continue;
        for (int i = 0; i < e.multiplicity; ++i) g.push_back({e.level, e.r});
    }
    std::stable_sort(g.begin(), g.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    GroupLayout layout;
    for (const auto& [level, r] : g) {
        layout.levels.push_back(level);
        layout.sizes.push_back(r);
    }
    return layout;
}

FormalIntegrand build_multilevel(const GroupLayout& groups, const ProcessSpec& spec, const std::vector<Scalar>& scales)
{
    const auto& p = spec.params;
    const int N = spec.N;
    const int D = spec.D;
    if (groups.sizes.size() != groups.levels.size()) throw InvalidArgument("group sizes and levels differ in length");
    for (std::size_t m = 0; m < groups.levels.size(); ++m) {
        if (groups.levels[m] < 1 || groups.levels[m] > N) throw InvalidArgument("group level out of range");
        if (m > 0 && groups.levels[m] < groups.levels[m - 1]) throw InvalidArgument("group levels must be nondecreasing");
        if (groups.sizes[m] < 1) throw InvalidArgument("group sizes must be positive");
    }
    if (!scales.empty() && static_cast<int>(scales.size()) != N) throw InvalidArgument("one scale constant per level");

    // d_i = c_i c_{i+1} ... c_N, d_{N+1} = 1
    std::vector<Scalar> d(static_cast<std::size_t>(N) + 2, Scalar(1));
    for (int i = N; i >= 1; --i) {
        d[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i) + 1] *
                                         (scales.empty() ? Scalar(1) : scales[static_cast<std::size_t>(i - 1)]);
    }

    int nvars = std::accumulate(groups.sizes.begin(), groups.sizes.end(), 0);
    auto alphs = spec.alphabets();
    std::vector<std::vector<int>> gvars;
    int next = 0;
    for (int s : groups.sizes) {
        std::vector<int> vs;
        for (int i = 0; i < s; ++i) vs.push_back(next++);
        gvars.push_back(vs);
    }

    FormalIntegrand in{RationalExpr::constant(nvars, 1), LaurentSeries::one(nvars, alphs, D),
                       AlphabetSeries::constant(alphs, D, 1), ContourScheme{}};

    // prefactor prod_{a<=b} Pi(d_a A^a; d_{b+1}^{-1} B^b) / Pi(A^a; B^b)
    if (!scales.empty()) {
        AlphabetSeries pre = AlphabetSeries::constant(alphs, D, 1);
        for (int a = 1; a <= N; ++a) {
            for (int b = a; b <= N; ++b) {
                const auto& A = spec.A[static_cast<std::size_t>(a - 1)];
                const auto& B = spec.B[static_cast<std::size_t>(b - 1)];
                Scalar ratio = d[static_cast<std::size_t>(a)] / d[static_cast<std::size_t>(b) + 1];
                pre = pre * scale_alphabet(kernel_series(KernelKind::Pi, A, B, p, D), A, ratio).embed(alphs);
                pre = pre * kernel_series(KernelKind::PiInverse, A, B, p, D).embed(alphs);
            }
        }
        in.prefactor = pre;
    }
    if (nvars == 0) return in;

    RationalExpr kernel = RationalExpr::constant(nvars, 1);
    for (const auto& vs : gvars) kernel = kernel * cauchy_block(nvars, vs, p);
    for (std::size_t m = 0; m < gvars.size(); ++m) {
        for (std::size_t m2 = m + 1; m2 < gvars.size(); ++m2) {
            for (int u : gvars[m]) {
                for (int w : gvars[m2]) {
                    // W((q u)^{-1}; w) = (q u - t w)(u - w) / ((q u - w)(u - t w))
                    kernel = kernel * RationalExpr::binomial_form(nvars, u, p.q, w, Scalar(-p.t), 1);
                    kernel = kernel * RationalExpr::binomial_form(nvars, u, Scalar(1), w, Scalar(-1), 1);
                    kernel = kernel * RationalExpr::binomial_form(nvars, u, p.q, w, Scalar(-1), -1);
                    kernel = kernel * RationalExpr::binomial_form(nvars, u, Scalar(1), w, Scalar(-p.t), -1);
                }
            }
        }
    }
    in.kernel = kernel;

    LaurentSeries log(nvars, alphs, D);
    auto c = [&](int k) { return one_minus_t_pow(p, k); };
    for (std::size_t m = 0; m < gvars.size(); ++m) {
        int level = groups.levels[m];
        for (int v : gvars[m]) {
            for (int a = 1; a <= level; ++a) {
                log.add_log_pairing(spec.A[static_cast<std::size_t>(a - 1)], v, d[static_cast<std::size_t>(a)], 1, c, 1);
            }
            for (int b = level; b <= N; ++b) {
                log.add_log_pairing(spec.B[static_cast<std::size_t>(b - 1)], v,
                                    inverse(p.q * d[static_cast<std::size_t>(b) + 1]), -1, c, 1);
            }
        }
    }
    in.numerator = log.exp();

    Scalar base = 1;
    for (std::size_t m = 0; m < gvars.size(); ++m) {
        Scalar spread = group_spread(p, static_cast<int>(gvars[m].size()));
        for (std::size_t i = 0; i < gvars[m].size(); ++i) {
            in.scheme.names.push_back("v" + std::to_string(m + 1) + "_" + std::to_string(i + 1));
            in.scheme.circles.push_back({Scalar(0), base * (1 + static_cast<long>(i) * spread)});
        }
        add_group_constraints(in.scheme, gvars[m], p);
        base *= p.q / 4;
    }
    for (std::size_t m = 0; m < gvars.size(); ++m) {
        for (std::size_t m2 = m + 1; m2 < gvars.size(); ++m2) {
            for (int u : gvars[m]) {
                for (int w : gvars[m2]) in.scheme.constraints.push_back({w, u, p.q});  // R_w < q R_u
            }
        }
    }
    in.scheme.order = order_by_radius(in.scheme.circles);
    in.scheme.verify();
    return in;
}

FormalIntegrand build_ohat_multilevel(const ProcessSpec& spec)
{
    const auto& p = spec.params;
    p.require_positive_t("the O-hat_1 contour formula");
    const int N = spec.N;
    const int D = spec.D;
    auto alphs = spec.alphabets();
    FormalIntegrand in{RationalExpr::constant(N, 1), LaurentSeries::one(N, alphs, D),
                       AlphabetSeries::constant(alphs, D, 1), ContourScheme{}};
    in.kernel = RationalExpr::monomial(N, std::vector<int>(static_cast<std::size_t>(N), -1));
    for (int a = 0; a < N; ++a) {
        for (int b = a + 1; b < N; ++b) {
            // W((t v_a)^{-1}; v_b) = (v_a - v_b)(t v_a - q v_b) / ((t v_a - v_b)(v_a - q v_b))
            in.kernel = in.kernel * RationalExpr::binomial_form(N, a, Scalar(1), b, Scalar(-1), 1);
            in.kernel = in.kernel * RationalExpr::binomial_form(N, a, p.t, b, Scalar(-p.q), 1);
            in.kernel = in.kernel * RationalExpr::binomial_form(N, a, p.t, b, Scalar(-1), -1);
            in.kernel = in.kernel * RationalExpr::binomial_form(N, a, Scalar(1), b, Scalar(-p.q), -1);
        }
    }
    LaurentSeries log(N, alphs, D);
    auto c = [&](int k) { return one_minus_t_pow(p, k); };
    for (int a = 0; a < N; ++a) {
        for (int b = a; b < N; ++b) {
            log.add_log_pairing(spec.B[static_cast<std::size_t>(b)], a, inverse(p.t), -1, c, -1);
            log.add_log_pairing(spec.A[static_cast<std::size_t>(a)], b, Scalar(1), 1, c, -1);
        }
    }
    in.numerator = log.exp();
    Scalar base = 1;
    for (int a = 0; a < N; ++a) {
        in.scheme.names.push_back("v" + std::to_string(a + 1));
        in.scheme.circles.push_back({Scalar(0), base});
        base *= p.t / 4;
    }
    for (int a = 0; a < N; ++a) {
        for (int b = a + 1; b < N; ++b) in.scheme.constraints.push_back({b, a, p.t});  // R_b < t R_a
    }
    in.scheme.order = order_by_radius(in.scheme.circles);
    in.scheme.verify();
    return in;
}

// ---------------------------------------------------------------- numeric oracle

namespace {

// f returns its value and the scale of the rounding in it (the sum of the absolute values of its terms)
std::complex<double> iterated_trapezoid(
    const std::function<std::pair<std::complex<double>, double>(const std::vector<std::complex<double>>&)>& f,
    const ContourScheme& scheme, double precision, long max_evaluations)
{
    const int n = scheme.size();
    if (n == 0) return f({}).first;
    const double pi = std::acos(-1.0);
    const double phase = 0.3183;  // keeps nodes off the real axis, where the poles sit
    std::vector<std::complex<double>> z(static_cast<std::size_t>(n));
    long evaluations = 0;
    // f may cancel internally (a vanishing determinant, say), so rounding in an inner integral is judged against
    // the largest term magnitude seen times the product of the remaining radii
    double fmax = 0;
    std::vector<double> radius_product(static_cast<std::size_t>(n) + 1, 1.0);
    for (int i = n - 1; i >= 0; --i) {
        radius_product[static_cast<std::size_t>(i)] =
            radius_product[static_cast<std::size_t>(i) + 1] * to_double(scheme.circles[static_cast<std::size_t>(i)].radius);
    }

    // one circle at a time: the inner integral is a function of the outer variables, and each dimension
    // doubles its own nodes (nested, so old values are reused) until it converges
    std::function<std::complex<double>(int, double)> level = [&](int d, double tol) -> std::complex<double> {
        if (d == n) {
            if (++evaluations > max_evaluations) {
                throw std::runtime_error("numeric quadrature did not converge within the node budget");
            }
            auto [value, magnitude] = f(z);
            fmax = std::max(fmax, magnitude);
            return value;
        }
        const auto& circle = scheme.circles[static_cast<std::size_t>(d)];
        double c = to_double(circle.center);
        double r = to_double(circle.radius);
        std::complex<double> sum = 0;
        double mass = 0;
        auto add = [&](long M, long j) {
            std::complex<double> e = std::polar(1.0, 2 * pi * static_cast<double>(j) / static_cast<double>(M) + phase);
            z[static_cast<std::size_t>(d)] = c + r * e;
            std::complex<double> term = e * level(d + 1, tol / 10);
            sum += term;
            mass += std::abs(term);
        };
        long M = 8;
        for (long j = 0; j < M; ++j) add(M, j);
        std::complex<double> prev = r * sum / static_cast<double>(M);
        double prev_diff = -1;
        while (true) {
            if (M >= (1L << 20)) throw std::runtime_error("numeric quadrature did not converge within the node budget");
            for (long j = 1; j < 2 * M; j += 2) add(2 * M, j);
            M *= 2;
            std::complex<double> cur = r * sum / static_cast<double>(M);
            double scale = std::max(r * mass / static_cast<double>(M), 1e-300);
            double diff = std::abs(cur - prev);
            // below the rounding floor of the node sum further doubling cannot help
            double floor = std::max(1e-14 * scale, 1e-14 * fmax * radius_product[static_cast<std::size_t>(d)]);
            if (diff < std::max(tol, floor)) return cur;
            // the trapezoid error on a circle decays geometrically, so once the differences square from one
            // doubling to the next the error of cur is about diff^2 / scale
            if (prev_diff > 0 && diff * scale < 10 * prev_diff * prev_diff && diff < 1e-3 * scale &&
                diff * diff / scale < tol) {
                return cur;
            }
            prev_diff = diff;
            prev = cur;
        }
    };
    return level(0, precision);
}

}  // namespace

std::complex<double> numeric_quadrature(const std::function<std::complex<double>(const std::vector<std::complex<double>>&)>& f,
                                        const ContourScheme& scheme, double precision, long max_evaluations)
{
    auto g = [&](const std::vector<std::complex<double>>& z) {
        std::complex<double> v = f(z);
        return std::pair{v, std::abs(v)};
    };
    return iterated_trapezoid(g, scheme, precision, max_evaluations);
}

std::complex<double> numeric_quadrature(const NumericExpr& f, const ContourScheme& scheme, double precision,
                                        long max_evaluations)
{
    auto g = [&](const std::vector<std::complex<double>>& z) {
        double magnitude = 0;
        std::complex<double> v = f(z, &magnitude);
        return std::pair{v, magnitude};
    };
    return iterated_trapezoid(g, scheme, precision, max_evaluations);
}

double evaluate_series(const AlphabetSeries& s, const std::map<std::string, std::vector<double>>& values)
{
    double total = 0;
    int D = s.truncation();
    for (const auto& [k, c] : s.terms()) {
        double x = to_double(c);
        for (std::size_t a = 0; a < s.alphabets().size(); ++a) {
            for (int j = 1; j <= D; ++j) {
                int m = static_cast<unsigned char>(k[a * static_cast<std::size_t>(D) + static_cast<std::size_t>(j - 1)]);
                if (m == 0) continue;
                auto it = values.find(s.alphabets()[a]);
                if (it == values.end() || static_cast<int>(it->second.size()) <= j) {
                    throw InvalidArgument("missing numeric power sum for alphabet " + s.alphabets()[a]);
                }
                x *= std::pow(it->second[static_cast<std::size_t>(j)], m);
            }
        }
        total += x;
    }
    return total;
}

std::complex<double> numeric_formal(const FormalIntegrand& integrand,
                                    const std::map<std::string, std::vector<double>>& values, double precision)
{
    std::vector<std::pair<std::vector<int>, double>> num;
    for (const auto& [exps, coeff] : integrand.numerator.by_exponent()) num.push_back({exps, evaluate_series(coeff, values)});
    NumericExpr kernel(integrand.kernel);
    auto f = [&](const std::vector<std::complex<double>>& v) {
        std::complex<long double> s = 0;
        for (const auto& [exps, c] : num) {
            std::complex<long double> x = c;
            for (std::size_t i = 0; i < exps.size(); ++i) {
                if (exps[i] != 0) x *= std::pow(std::complex<long double>(v[i]), exps[i]);
            }
            s += x;
        }
        return std::complex<double>(s) * kernel(v);
    };
    return numeric_quadrature(f, integrand.scheme, precision) * evaluate_series(integrand.prefactor, values);
}

}  // namespace maclab
