#include "maclab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace maclab {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys{"q",     "t",      "N",       "D",         "a",      "rho",   "contour",
                                       "r",     "levels", "hatted",  "scales",    "multiplicity",   "tolerance",
                                       "L_max", "seed",   "trials",  "max_r",     "max_size", "points", "quadrature"};

const std::set<std::string> kAscendingIds{"prop-4.1-bridge", "thm-4.2",  "thm-4.3", "cor-4.7",
                                          "prop-4.12",       "thm-4.10", "thm-4.14"};

std::string key_error(const std::string& key, const std::string& what) { return "key '" + key + "': " + what; }

Scalar scalar_value(const json& v, const std::string& key)
{
    if (v.is_number_integer()) return Scalar(v.get<long>());
    if (!v.is_string()) throw ConfigError(key_error(key, "expected a rational string such as \"1/3\""));
    try {
        return parse_scalar(v.get<std::string>());
    } catch (const InvalidArgument& e) {
        throw ConfigError(key_error(key, e.what()));
    }
}

Scalar get_scalar(const json& c, const std::string& key) { return scalar_value(c.at(key), key); }

std::vector<Scalar> get_scalars(const json& c, const std::string& key)
{
    const auto& v = c.at(key);
    if (!v.is_array()) throw ConfigError(key_error(key, "expected a list of rational strings"));
    std::vector<Scalar> out;
    for (const auto& x : v) out.push_back(scalar_value(x, key));
    return out;
}

long get_int(const json& c, const std::string& key, long lo, long hi)
{
    const auto& v = c.at(key);
    if (!v.is_number_integer()) throw ConfigError(key_error(key, "expected an integer"));
    long x = v.get<long>();
    if (x < lo || x > hi) {
        throw ConfigError(key_error(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"));
    }
    return x;
}

std::vector<int> get_ints(const json& c, const std::string& key, int lo, int hi)
{
    const auto& v = c.at(key);
    if (!v.is_array()) throw ConfigError(key_error(key, "expected a list of integers"));
    std::vector<int> out;
    for (const auto& x : v) {
        if (!x.is_number_integer()) throw ConfigError(key_error(key, "expected a list of integers"));
        int y = x.get<int>();
        if (y < lo || y > hi) throw ConfigError(key_error(key, "entries must lie in [" + std::to_string(lo) + ", " +
                                                                   std::to_string(hi) + "]"));
        out.push_back(y);
    }
    return out;
}

bool get_bool(const json& c, const std::string& key)
{
    const auto& v = c.at(key);
    if (!v.is_boolean()) throw ConfigError(key_error(key, "expected true or false"));
    return v.get<bool>();
}

Rho parse_rho(const json& v)
{
    if (!v.is_object()) throw ConfigError(key_error("rho", "expected an object with a \"kind\""));
    for (const auto& [k, _] : v.items()) {
        if (k != "kind" && k != "b" && k != "gamma" && k != "R") throw ConfigError(key_error("rho." + k, "unknown key"));
    }
    if (!v.contains("kind") || !v["kind"].is_string()) throw ConfigError(key_error("rho.kind", "missing"));
    std::string kind = v["kind"];
    std::optional<Scalar> R;
    if (v.contains("R")) R = scalar_value(v["R"], "rho.R");
    try {
        if (kind == "finite") {
            if (!v.contains("b")) throw ConfigError(key_error("rho.b", "missing"));
            return Rho::finite(get_scalars(v, "b"), R);
        }
        if (kind == "plancherel") {
            if (!v.contains("gamma")) throw ConfigError(key_error("rho.gamma", "missing"));
            return Rho::plancherel(scalar_value(v["gamma"], "rho.gamma"), R);
        }
        if (kind == "zero") return Rho::zero();
    } catch (const InvalidArgument& e) {
        throw ConfigError(key_error("rho", e.what()));
    }
    throw ConfigError(key_error("rho.kind", "expected finite, plancherel or zero"));
}

// ---------------------------------------------------------------- defect tracking

struct Tracker {
    Scalar defect = 0;
    bool ok = true;
    std::vector<std::string> details;

    void exact(const Scalar& lhs, const Scalar& rhs, const std::string& label)
    {
        Scalar d = abs(lhs - rhs);
        if (d > defect) defect = d;
        if (d != 0) {
            ok = false;
            details.push_back(label + ": " + to_string(lhs) + " != " + to_string(rhs));
        }
    }

    void series(const AlphabetSeries& lhs, const AlphabetSeries& rhs, const std::string& label)
    {
        auto names = merge_alphabets(lhs.alphabets(), rhs.alphabets());
        auto diff = lhs.embed(names) - rhs.embed(names);
        Scalar d = 0;
        for (const auto& [k, c] : diff.terms()) d = std::max(d, abs(c));
        if (d > defect) defect = d;
        if (d != 0) {
            ok = false;
            details.push_back(label + ": " + std::to_string(diff.terms().size()) + " coefficients differ");
        }
    }
};

struct NumericTracker {
    double defect = 0;
    bool ok = true;

    void check(double d, double tolerance, Tracker& t, const std::string& label)
    {
        defect = std::max(defect, d);
        if (!(d < tolerance)) {
            ok = false;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3e", d);
            t.details.push_back(label + ": numeric difference " + buf);
        }
    }
};

std::string decimal(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- oracles independent of the engines

void for_each_sequence(int N, int maxsize, const std::function<void(const std::vector<Partition>&)>& fn)
{
    auto parts = enumerate_partitions(maxsize);
    std::vector<Partition> cur(static_cast<std::size_t>(N));
    std::function<void(int)> rec = [&](int k) {
        if (k == N) {
            fn(cur);
            return;
        }
        for (const auto& l : parts) {
            cur[static_cast<std::size_t>(k)] = l;
            rec(k + 1);
        }
    };
    rec(0);
}

SymFunc complete_h(int n, int D)
{
    SymFunc h(D);
    if (n < 0) return h;
    for (const auto& mu : partitions_of(n)) h.add(mu, inverse(z_standard(mu)));
    return h;
}

SymFunc jacobi_trudi(const Partition& lambda, int D)
{
    int n = lambda.length();
    if (n == 0) return SymFunc::constant(1, D);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    SymFunc total(D);
    do {
        int inversions = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) inversions += perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)];
        }
        SymFunc term = SymFunc::constant(inversions % 2 ? -1 : 1, D);
        for (int i = 0; i < n; ++i) term = term * complete_h(lambda[i] - i + perm[static_cast<std::size_t>(i)], D);
        total += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

AlphabetSeries random_homogeneous(std::mt19937& rng, const std::string& alph, int k, int D)
{
    std::uniform_int_distribution<int> coef(-3, 3);
    AlphabetSeries s({alph}, D);
    for (const auto& mu : partitions_of(k)) {
        int c = coef(rng);
        Scalar v(c, 1 + static_cast<int>(rng() % 3));
        v.canonicalize();
        if (c != 0) s.add(s.key_of({mu}), v);
    }
    return s;
}

// distinct nonzero rationals with small numerators and denominators
std::vector<Scalar> random_point(std::mt19937& rng, int n)
{
    std::uniform_int_distribution<int> num(-9, 9), den(2, 13);
    std::vector<Scalar> x;
    while (static_cast<int>(x.size()) < n) {
        int a = num(rng);
        if (a == 0) continue;
        Scalar v(a, den(rng));
        v.canonicalize();
        if (std::find(x.begin(), x.end(), v) == x.end()) x.push_back(v);
    }
    return x;
}

// numeric power sums for formal alphabets: A_i = {1/(5i), 1/10}, B_i = {3/20}
std::map<std::string, std::vector<double>> sample_values(const std::vector<std::string>& alphabets, int D)
{
    std::map<std::string, std::vector<double>> out;
    for (std::size_t i = 0; i < alphabets.size(); ++i) {
        std::vector<double> xs;
        if (alphabets[i][0] == 'A') {
            xs = {0.2 / static_cast<double>(1 + i % 4), 0.1};
        } else {
            xs = {0.15};
        }
        std::vector<double> pk(static_cast<std::size_t>(D) + 1, 0.0);
        for (int k = 1; k <= D; ++k) {
            for (double x : xs) pk[static_cast<std::size_t>(k)] += std::pow(x, k);
        }
        out[alphabets[i]] = pk;
    }
    return out;
}

// ---------------------------------------------------------------- executors

struct Outcome {
    Tracker exact;
    std::optional<NumericTracker> numeric;
    std::optional<Scalar> width;  // bounded checks report the interval width as defect
    std::string digest;
};

using Executor = std::function<void(const json&, Outcome&)>;

// Radii as close together as the constraints allow (smaller = 3/8 * factor * larger). The builder's
// circles are valid but spread far apart, and v^-k terms on tiny circles swamp double precision.
ContourScheme balanced(const ContourScheme& scheme)
{
    for (const auto& c : scheme.circles) {
        if (c.center != 0) return scheme;
    }
    ContourScheme out = scheme;
    std::vector<int> by_radius(static_cast<std::size_t>(scheme.size()));
    for (int i = 0; i < scheme.size(); ++i) by_radius[static_cast<std::size_t>(i)] = i;
    std::sort(by_radius.begin(), by_radius.end(), [&](int a, int b) {
        return scheme.circles[static_cast<std::size_t>(a)].radius > scheme.circles[static_cast<std::size_t>(b)].radius;
    });
    for (int i : by_radius) {
        std::optional<Scalar> r;
        for (const auto& c : scheme.constraints) {
            if (c.smaller != i) continue;
            Scalar bound = Scalar(3, 8) * c.factor * out.circles[static_cast<std::size_t>(c.larger)].radius;
            if (!r || bound < *r) r = bound;
        }
        if (r) out.circles[static_cast<std::size_t>(i)].radius = *r;
    }
    try {
        out.verify();
    } catch (const UndecidableContour&) {
        return scheme;
    }
    return out;
}

void formal_compare(const FormalIntegrand& in, const AlphabetSeries& lhs, const json& c, Outcome& out,
                    const std::string& label)
{
    ResiduePlan plan;
    auto rhs = integrate_formal(in, &plan);
    out.exact.series(lhs, rhs, label);
    out.digest = plan.digest(in.scheme.names);
    if (get_bool(c, "quadrature")) {
        if (!out.numeric) out.numeric = NumericTracker{};
        // the prefactor product is truncated at degree D on the exact side, so compare the bare integral
        auto bare = in;
        bare.prefactor = AlphabetSeries::constant(in.prefactor.alphabets(), in.prefactor.truncation(), 1);
        bare.scheme = balanced(in.scheme);
        auto values = sample_values(merge_alphabets(in.numerator.alphabets(), rhs.alphabets()),
                                    in.numerator.truncation());
        double exact = evaluate_series(integrate_formal(bare), values);
        auto numeric = numeric_formal(bare, values, 1e-11);
        out.numeric->check(std::abs(numeric - exact), 1e-8, out.exact, label + " quadrature");
    }
}

void run_mass_one(const json& c, Outcome& out)
{
    auto spec = ProcessSpec::make(static_cast<int>(get_int(c, "N", 1, 4)), static_cast<int>(get_int(c, "D", 0, 12)),
                                  config_params(c));
    AlphabetSeries total(spec.alphabets(), spec.D);
    for_each_sequence(spec.N, spec.D / 2, [&](const std::vector<Partition>& ls) { total += mp_weight(ls, spec); });
    out.exact.series(total, AlphabetSeries::constant(spec.alphabets(), spec.D, 1), "sum of weights");
}

void run_single_level(const json& c, Outcome& out)
{
    auto p = config_params(c);
    int D = static_cast<int>(get_int(c, "D", 0, 12));
    auto spec = ProcessSpec::make(1, D, p);
    for (int r : get_ints(c, "r", 1, 6)) {
        std::string label = "r=" + std::to_string(r);
        auto in = build_single_level(r, "A1", "B1", p, D);
        formal_compare(in, expectation_lhs(ObservablePlan::levels({r}), spec), c, out, label);
        auto base = integrate_formal(in);
        auto swapped = integrate_formal(build_single_level(r, "B1", "A1", p, D));
        out.exact.series(base, swapped, label + " alphabet exchange");
        for (auto scale : {Scalar(1, 3), Scalar(7, 2)}) {
            auto moved = in;
            for (auto& circle : moved.scheme.circles) circle.radius *= scale;
            out.exact.series(base, integrate_formal(moved), label + " radius x" + to_string(scale));
        }
    }
}

ProcessSpec formal_spec(const json& c)
{
    return ProcessSpec::make(static_cast<int>(get_int(c, "N", 1, 4)), static_cast<int>(get_int(c, "D", 0, 12)),
                             config_params(c));
}

std::vector<int> level_rs(const json& c, int N)
{
    auto r = get_ints(c, "r", 0, 6);
    if (static_cast<int>(r.size()) != N) throw ConfigError(key_error("r", "needs one entry per level (N entries)"));
    return r;
}

void run_multilevel(const json& c, Outcome& out)
{
    auto spec = formal_spec(c);
    auto plan = ObservablePlan::levels(level_rs(c, spec.N));
    formal_compare(build_multilevel(groups_for_plan(plan, spec.N), spec), expectation_lhs(plan, spec), c, out,
                   "multilevel");
}

void run_grouped(const json& c, Outcome& out)
{
    auto spec = formal_spec(c);
    auto r = level_rs(c, spec.N);
    int mult = static_cast<int>(get_int(c, "multiplicity", 1, 4));
    ObservablePlan plan;
    for (int k = 0; k < spec.N; ++k) {
        if (r[static_cast<std::size_t>(k)] == 0) continue;
        plan.entries.push_back({k + 1, ObservableKind::O, r[static_cast<std::size_t>(k)], k == 0 ? mult : 1});
    }
    formal_compare(build_multilevel(groups_for_plan(plan, spec.N), spec), expectation_lhs(plan, spec), c, out,
                   "grouped");
}

void run_scaled(const json& c, Outcome& out)
{
    auto spec = formal_spec(c);
    auto plan = ObservablePlan::levels(level_rs(c, spec.N));
    plan.scales = get_scalars(c, "scales");
    if (static_cast<int>(plan.scales.size()) != spec.N) throw ConfigError(key_error("scales", "needs N entries"));
    for (const auto& s : plan.scales) {
        if (s == 0) throw ConfigError(key_error("scales", "entries must be nonzero"));
    }
    formal_compare(build_multilevel(groups_for_plan(plan, spec.N), spec, plan.scales), expectation_lhs(plan, spec), c,
                   out, "scaled");
}

void run_ohat(const json& c, Outcome& out)
{
    auto spec = formal_spec(c);
    ObservablePlan plan;
    for (int k = 1; k <= spec.N; ++k) plan.entries.push_back({k, ObservableKind::OHat1, 0, 1});
    formal_compare(build_ohat_multilevel(spec), expectation_lhs(plan, spec), c, out, "O-hat");
}

// smallest distance from a circle to a pole of the integrand, relative to the radius; a pole kappa v_j sweeps
// the image of the circle of v_j, and a negative value means the two circles meet
double pole_margin(const RationalExpr& e, const ContourScheme& s)
{
    auto circle = [&](int i) {
        const auto& c = s.circles[static_cast<std::size_t>(i)];
        return std::pair{to_double(c.center), to_double(c.radius)};
    };
    // gap between circle i and the circle (center, radius) of pole positions
    auto gap = [&](int i, double center, double radius) {
        auto [c, r] = circle(i);
        double d = std::abs(center - c);
        return std::max({r - d - radius, d - r - radius, radius - d - r}) / r;
    };
    double margin = std::numeric_limits<double>::infinity();
    std::set<FormKey> forms;
    for (const auto& [key, coeff] : e.terms()) {
        for (const auto& [form, exp] : key.forms) {
            if (exp < 0) forms.insert(form);
        }
        for (std::size_t i = 0; i < key.mono.size(); ++i) {
            if (key.mono[i] < 0) margin = std::min(margin, gap(static_cast<int>(i), 0, 0));
        }
    }
    for (const auto& form : forms) {
        double k = to_double(form.c);
        if (form.j < 0) {
            margin = std::min(margin, gap(form.i, k, 0));
            continue;
        }
        auto [cj, rj] = circle(form.j);
        auto [ci, ri] = circle(form.i);
        margin = std::min(margin, gap(form.i, k * cj, std::abs(k) * rj));
        margin = std::min(margin, gap(form.j, ci / k, ri / std::abs(k)));
    }
    return margin;
}

// Any circles that enclose the same poles give the same integral, and trapezoid sums converge faster the
// farther the poles are. Circles are moved one at a time while the margin improves and the scheme verifies;
// the result is used only if the residue computation classifies every pole as before.
ContourScheme roomy_scheme(const ExactIntegrand& in)
{
    const int n = in.scheme.size();
    const std::vector<Scalar> shifts{Scalar(0), Scalar(1, 8), Scalar(-1, 8), Scalar(1, 4), Scalar(-1, 4), Scalar(1, 2), Scalar(-1, 2)};
    const std::vector<Scalar> factors{Scalar(1), Scalar(7, 8), Scalar(3, 4), Scalar(1, 2), Scalar(9, 8), Scalar(5, 4), Scalar(3, 2)};
    ContourScheme best = in.scheme;
    double best_margin = pole_margin(in.expr, best);
    const double original = best_margin;
    std::vector<ContourScheme> path;
    for (int round = 0; round < 30; ++round) {
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            const Circle c = best.circles[static_cast<std::size_t>(i)];
            ContourScheme pick = best;
            for (const auto& shift : shifts) {
                for (const auto& factor : factors) {
                    ContourScheme s = best;
                    s.circles[static_cast<std::size_t>(i)] = Circle{c.center + shift * c.radius, c.radius * factor};
                    try {
                        s.verify();
                    } catch (const UndecidableContour&) {
                        continue;
                    }
                    double m = pole_margin(in.expr, s);
                    if (m > best_margin * 1.01) {
                        best_margin = m;
                        pick = std::move(s);
                        moved = true;
                    }
                }
            }
            if (moved) path.push_back(pick);
            best = std::move(pick);
        }
        if (!moved) break;
    }
    if (best_margin < 1.5 * original) return in.scheme;
    ResiduePlan reference;
    Scalar value = integrate_scalar(in.expr, in.scheme, &reference);
    std::string digest = reference.digest(in.scheme.names);
    // later schemes have larger margins; walk back to the first the residue computation agrees with
    for (std::size_t k = path.size(); k-- > 0;) {
        if (pole_margin(in.expr, path[k]) < 1.5 * original) break;
        try {
            ResiduePlan plan;
            if (integrate_scalar(in.expr, path[k], &plan) == value && plan.digest(path[k].names) == digest) {
                return path[k];
            }
        } catch (const UndecidableContour&) {
        }
    }
    return in.scheme;
}

void quadrature_check(const ExactIntegrand& in, const Scalar& exact, Outcome& out, const std::string& label)
{
    if (!out.numeric) out.numeric = NumericTracker{};
    auto numeric = numeric_quadrature(NumericExpr(in.expr), roomy_scheme(in), 1e-11, 1L << 28);
    out.numeric->check(std::abs(numeric - to_double(exact)), 1e-8, out.exact, label + " quadrature");
}

void for_each_composition(int r, int max_parts, const std::function<void(const std::vector<int>&)>& fn)
{
    std::vector<int> v;
    std::function<void(int)> rec = [&](int left) {
        if (left == 0) {
            if (!v.empty()) fn(v);
            return;
        }
        if (static_cast<int>(v.size()) == max_parts) return;
        for (int x = 1; x <= left; ++x) {
            v.push_back(x);
            rec(left - x);
            v.pop_back();
        }
    };
    rec(r);
}

void integral_vs_chain(const json& c, Outcome& out, bool hatted)
{
    auto cfg = config_ascending(c);
    auto steps = config_steps(c);
    Scalar chain = operator_chain_expectation(steps, cfg, hatted);
    auto in = build_ascending_integrand(steps, cfg, hatted);
    ResiduePlan plan;
    Scalar integral = integrate_scalar(in.expr, in.scheme, &plan);
    out.digest = plan.digest(in.scheme.names);
    out.exact.exact(integral, chain, "integral vs operator chain");
    out.exact.details.push_back("value " + to_string(chain));
    if (get_bool(c, "quadrature") && in.scheme.size() > 0) quadrature_check(in, integral, out, "integral");
}

void run_bridge(const json& c, Outcome& out)
{
    auto cfg = config_ascending(c);
    auto steps = config_steps(c);
    bool hatted = get_bool(c, "hatted");
    Scalar chain = operator_chain_expectation(steps, cfg, hatted);
    Scalar tol = get_scalar(c, "tolerance");
    auto tr = expectation_to_tolerance(steps, cfg, hatted, tol, static_cast<int>(get_int(c, "L_max", 2, 80)));
    out.width = tr.value.width();
    if (!tr.value.contains(chain)) {
        out.exact.ok = false;
        out.exact.details.push_back("operator chain " + to_string(chain) + " outside the certified interval");
    }
    out.exact.details.push_back("L=" + std::to_string(tr.tail.L) + " interval width " + decimal(to_double(*out.width)));
}

void run_qwhittaker(const json& c, Outcome& out)
{
    auto cfg = config_ascending(c);
    auto ns = get_ints(c, "levels", 1, cfg.N);
    std::vector<OperatorStep> steps;
    for (int n : ns) steps.push_back({n, 1});
    out.numeric = NumericTracker{};
    if (cfg.rho.exact()) {
        Scalar chain = operator_chain_expectation(steps, cfg, false);
        auto in = build_qwhittaker_integrand(ns, cfg);
        ResiduePlan plan;
        out.exact.exact(integrate_scalar(in.expr, in.scheme, &plan), chain, "integral vs operator chain");
        out.digest = plan.digest(in.scheme.names);
        out.numeric->check(std::abs(qwhittaker_numeric(ns, cfg, 1e-11) - to_double(chain)), 1e-8, out.exact,
                           "numeric integral");
    } else {
        auto chain = operator_chain_numeric(steps, cfg, false);
        out.numeric->check(std::abs(qwhittaker_numeric(ns, cfg, 1e-11) - chain), 1e-8, out.exact, "numeric integral");
    }
}

void run_noumi_eigen(const json& c, Outcome& out)
{
    auto p = config_params(c);
    int N = static_cast<int>(get_int(c, "N", 1, 4));
    int max_size = static_cast<int>(get_int(c, "max_size", 0, 6));
    int max_r = static_cast<int>(get_int(c, "max_r", 0, 5));
    int points = static_cast<int>(get_int(c, "points", 1, 20));
    std::mt19937 rng(static_cast<unsigned>(get_int(c, "seed", 0, 1L << 31)));
    auto zero = Rho::zero();
    for (int n = 1; n <= N; ++n) {
        std::vector<std::vector<Scalar>> xs;
        for (int i = 0; i < points; ++i) xs.push_back(random_point(rng, n));
        for (const auto& lambda : enumerate_partitions(max_size)) {
            if (lambda.length() > n) continue;
            ShiftedProduct f{[&](const std::vector<Scalar>& y) { return P_at(lambda, y, p); }, zero, p};
            std::vector<Scalar> z;
            for (int j = 0; j < n; ++j) z.push_back(pow(p.q, lambda[j]) * pow(p.t, n - 1 - j));
            for (int r = 0; r <= max_r; ++r) {
                std::string label = "n=" + std::to_string(n) + " lambda=" + lambda.to_string() + " r=" + std::to_string(r);
                Scalar ev = noumi_eigenvalue(r, lambda, n, p);
                Scalar g = r == 0 ? Scalar(1) : restrict_to_vars(macdonald_Q(Partition{r}, p, r), n).evaluate(z);
                out.exact.exact(ev, g, label + " eigenvalue");
                auto applied = apply_noumi(r, n, f);
                for (const auto& x : xs) out.exact.exact(applied.rational(x), ev * f.rational(x), label);
            }
        }
    }
}

void run_operator_eigen(const json& c, Outcome& out)
{
    auto p = config_params(c);
    int N = static_cast<int>(get_int(c, "N", 1, 4));
    int max_size = static_cast<int>(get_int(c, "max_size", 0, 6));
    int points = static_cast<int>(get_int(c, "points", 1, 20));
    std::mt19937 rng(static_cast<unsigned>(get_int(c, "seed", 0, 1L << 31)));
    auto zero = Rho::zero();
    for (int n = 1; n <= N; ++n) {
        std::vector<std::vector<Scalar>> xs;
        for (int i = 0; i < points; ++i) xs.push_back(random_point(rng, n));
        for (const auto& lambda : enumerate_partitions(max_size)) {
            if (lambda.length() > n) continue;
            ShiftedProduct f{[&](const std::vector<Scalar>& y) { return P_at(lambda, y, p); }, zero, p};
            std::vector<Scalar> spec;
            for (int j = 0; j < n; ++j) spec.push_back(pow(p.q, lambda[j]) * pow(p.t, n - 1 - j));
            for (int r = 0; r <= n; ++r) {
                auto g = apply_difference_operator(r, n, f, false);
                Scalar ev = elementary(r, spec);
                for (const auto& x : xs) {
                    out.exact.exact(g.rational(x), ev * f.rational(x),
                                    "n=" + std::to_string(n) + " lambda=" + lambda.to_string() + " r=" + std::to_string(r));
                }
            }
        }
    }
}

void run_fredholm_noumi(const json& c, Outcome& out)
{
    auto cfg = config_ascending(c);
    int max_r = static_cast<int>(get_int(c, "max_r", 0, 5));
    ResiduePlan plan;
    for (int r = 0; r <= max_r; ++r) {
        Scalar lhs = noumi_coefficient(r, cfg);
        Scalar rhs = fredholm_qt_coefficient(r, cfg, std::nullopt, &plan);
        out.exact.exact(rhs, lhs, "r=" + std::to_string(r));
        out.exact.details.push_back("coefficient r=" + std::to_string(r) + ": " + to_string(lhs));
    }
    std::vector<int> ones(static_cast<std::size_t>(cfg.N + 1), 1);
    out.exact.exact(fredholm_qt_term(ones, cfg), Scalar(0), "term with k = N + 1");
    out.digest = plan.digest({});
    if (get_bool(c, "quadrature")) {
        for (int r = 1; r <= max_r; ++r) {
            for_each_composition(r, cfg.N, [&](const std::vector<int>& v) {
                std::string label = "term (";
                for (int x : v) label += std::to_string(x) + (&x == &v.back() ? ")" : ",");
                quadrature_check(fredholm_qt_integrand(v, cfg), fredholm_qt_term(v, cfg), out, label);
            });
        }
    }
}

void run_fredholm_measure(const json& c, Outcome& out)
{
    auto cfg = config_ascending(c);
    const auto& p = cfg.params;
    int max_r = static_cast<int>(get_int(c, "max_r", 1, 5));
    Scalar tol = get_scalar(c, "tolerance");
    int L_max = static_cast<int>(get_int(c, "L_max", 2, 80));
    Scalar widest = 0;
    for (int r = 1; r <= max_r; ++r) {
        Scalar value = fredholm_qt_coefficient(r, cfg);
        // g_r on the spectrum is at most g_r(1, ..., 1)
        std::vector<Scalar> bound(static_cast<std::size_t>(r) + 1, Scalar(0));
        bound[0] = 1;
        for (int i = 0; i < cfg.N; ++i) {
            std::vector<Scalar> next(bound.size(), Scalar(0));
            for (int k = 0; k <= r; ++k) {
                for (int m = 0; k + m <= r; ++m) {
                    next[static_cast<std::size_t>(k + m)] +=
                        bound[static_cast<std::size_t>(k)] * q_pochhammer(p.t, p.q, m) / q_pochhammer(p.q, p.q, m);
                }
            }
            bound = next;
        }
        std::optional<TruncatedExpectation> tr;
        for (int L = 2; L <= L_max; L += 2) {
            tr = truncated_measure_expectation([&](const Partition& l) { return noumi_eigenvalue(r, l, cfg.N, p); },
                                               bound.back(), cfg, L);
            if (tr->value.width() < tol) break;
        }
        widest = std::max(widest, tr->value.width());
        std::string label = "r=" + std::to_string(r);
        if (!tr->value.contains(value)) {
            out.exact.ok = false;
            out.exact.details.push_back(label + ": Fredholm coefficient outside the certified interval");
        }
        if (!(tr->value.width() < tol)) {
            out.exact.ok = false;
            out.exact.details.push_back(label + ": interval did not shrink below the tolerance");
        }
        out.exact.details.push_back(label + " coefficient " + to_string(value) + " L=" + std::to_string(tr->tail.L));
    }
    out.width = widest;
}

void run_fredholm_ek(const json& c, Outcome& out)
{
    auto cfg = config_ascending(c);
    int max_r = std::max(static_cast<int>(get_int(c, "max_r", 0, 6)), cfg.N + 1);
    ResiduePlan plan;
    for (int r = 0; r <= max_r; ++r) {
        Scalar ek = fredholm_ek_coefficient(r, cfg, &plan);
        Scalar want = 0;
        if (r == 0) {
            want = 1;
        } else if (r <= cfg.N) {
            want = (r % 2 ? -1 : 1) * operator_chain_expectation({{cfg.N, r}}, cfg, false);
        }
        out.exact.exact(ek, want, "r=" + std::to_string(r));
        if (r > 0 && get_bool(c, "quadrature")) {
            Scalar integral = ek * factorial(r) * (r % 2 ? -1 : 1);
            quadrature_check(fredholm_ek_integrand(r, cfg), integral, out, "r=" + std::to_string(r));
        }
    }
    out.digest = plan.digest({});
}

void run_schur(const json& c, Outcome& out)
{
    Scalar q = get_scalar(c, "q");
    auto p = Params::make(q, q);
    int max_size = static_cast<int>(get_int(c, "max_size", 0, 7));
    for (const auto& l : enumerate_partitions(max_size)) {
        auto P = macdonald_P(l, p, max_size);
        auto s = jacobi_trudi(l, max_size);
        auto diff = P - s;
        Scalar d = 0;
        for (const auto& [k, v] : diff.terms()) d = std::max(d, abs(v));
        out.exact.exact(d, Scalar(0), "lambda=" + l.to_string());
    }
}

void run_pairing(const json& c, Outcome& out)
{
    auto p = config_params(c);
    int D = static_cast<int>(get_int(c, "D", 2, 8));
    int trials = static_cast<int>(get_int(c, "trials", 1, 500));
    std::mt19937 rng(static_cast<unsigned>(get_int(c, "seed", 0, 1L << 31)));
    for (int trial = 0; trial < trials; ++trial) {
        ExpForm a{"Y", {}}, b{"Y", {}};
        for (int k = 1; 2 * k <= D; ++k) {
            a.coeff[k] = random_homogeneous(rng, "X", k, D);
            b.coeff[k] = random_homogeneous(rng, "Z", k, D);
        }
        auto generic = alphabet_pair(a.expand({"X", "Y"}, D), b.expand({"Y", "Z"}, D), "Y", p);
        auto fast = pair_exponentials(a, b, {"X", "Z"}, D, p);
        out.exact.series(fast, generic, "trial " + std::to_string(trial));
    }
}

// ---------------------------------------------------------------- registry

struct Entry {
    IdentityInfo info;
    Executor run;
};

json ascending_defaults()
{
    return json{{"q", "1/2"},
                {"t", "1/3"},
                {"N", 3},
                {"a", {"1/10", "21/200", "19/200"}},
                {"rho", {{"kind", "finite"}, {"b", {"1/5", "1/7"}}}}};
}

json with(json base, const json& extra)
{
    for (const auto& [k, v] : extra.items()) base[k] = v;
    return base;
}

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> list = [] {
        json formal{{"q", "1/3"}, {"t", "1/5"}, {"D", 4}, {"quadrature", false}};
        json asc = ascending_defaults();
        std::vector<Entry> v;
        v.push_back({{"mass-one", "Formal Macdonald process weights sum to one in every positive degree",
                      with(formal, {{"N", 2}})},
                     run_mass_one});
        v.push_back({{"prop-3.4", "Single-level expectation of O_r as an r-fold contour integral",
                      with(formal, {{"r", {1, 2}}})},
                     run_single_level});
        v.push_back({{"thm-3.3", "Multilevel expectation of products of O_r as nested contour integrals",
                      with(formal, {{"N", 2}, {"r", {1, 1}}})},
                     run_multilevel});
        v.push_back({{"cor-3.6", "Repeated observables on one level through grouped contour variables",
                      with(formal, {{"N", 2}, {"r", {1, 0}}, {"multiplicity", 2}})},
                     run_grouped});
        v.push_back({{"cor-3.7", "Multilevel formula with scale constants on each level",
                      with(formal, {{"N", 2}, {"r", {1, 1}}, {"scales", {"2/3", "5/4"}}})},
                     run_scaled});
        v.push_back({{"thm-B.1", "Multilevel formula for the O-hat_1 observable at every level", with(formal, {{"N", 2}})},
                     run_ohat});
        v.push_back({{"prop-4.1-bridge",
                      "Operator chain equals the certified truncated expectation over ascending sequences",
                      with(asc, {{"levels", {3, 2}}, {"r", {2, 1}}, {"hatted", false}, {"tolerance", "1/1000000000000"},
                                 {"L_max", 40}})},
                     run_bridge});
        v.push_back({{"thm-4.2", "Nested contour integral for expectations of products of e_r observables",
                      with(asc, {{"levels", {3, 2}}, {"r", {1, 1}}, {"quadrature", false}})},
                     [](const json& c, Outcome& o) { integral_vs_chain(c, o, false); }});
        v.push_back({{"thm-4.3", "Inverted-parameter version of the nested contour integral",
                      with(asc, {{"levels", {3, 2}}, {"r", {1, 1}}, {"quadrature", false}})},
                     [](const json& c, Outcome& o) { integral_vs_chain(c, o, true); }});
        v.push_back({{"cor-4.7", "q-Whittaker degeneration t = 0: moments of q^{lambda_n} as contour integrals",
                      with(asc, {{"t", "0"}, {"levels", {3, 1}}})},
                     run_qwhittaker});
        v.push_back({{"macdonald-eigen", "Macdonald difference operators act diagonally on P_lambda",
                      {{"q", "1/3"}, {"t", "1/5"}, {"N", 3}, {"max_size", 4}, {"points", 3}, {"seed", 1}}},
                     run_operator_eigen});
        v.push_back({{"prop-4.11", "Noumi q-integral operator eigenrelation, coefficientwise in u",
                      {{"q", "1/3"}, {"t", "1/5"}, {"N", 3}, {"max_size", 3}, {"max_r", 3}, {"points", 3}, {"seed", 1}}},
                     run_noumi_eigen});
        v.push_back({{"prop-4.12", "Noumi operator applied to Pi equals the qt Fredholm expansion",
                      with(asc, {{"N", 2}, {"a", {"1/10", "3/25"}}, {"rho", {{"kind", "finite"}, {"b", {"1/7"}}}},
                                 {"max_r", 2}, {"quadrature", false}})},
                     run_fredholm_noumi});
        v.push_back({{"thm-4.10", "qt Fredholm determinant equals the Macdonald-measure generating function",
                      with(asc, {{"N", 2}, {"a", {"1/10", "3/25"}}, {"rho", {{"kind", "finite"}, {"b", {"1/4"}}}},
                                 {"max_r", 2}, {"tolerance", "1/100000000"}, {"L_max", 30}})},
                     run_fredholm_measure});
        v.push_back({{"thm-4.14", "Fredholm determinant generating the e_r observables at level N",
                      with(asc, {{"max_r", 4}, {"quadrature", false}})},
                     run_fredholm_ek});
        v.push_back({{"schur-degeneration", "At q = t Macdonald P_lambda equals the Jacobi-Trudi Schur function",
                      {{"q", "1/3"}, {"max_size", 5}}},
                     run_schur});
        v.push_back({{"pairing-prop-2.3", "Closed-form pairing of exponentials agrees with the generic pairing",
                      {{"q", "1/3"}, {"t", "1/5"}, {"D", 6}, {"trials", 50}, {"seed", 20240611}}},
                     run_pairing});
        return v;
    }();
    return list;
}

const Entry* find_entry(const std::string& id)
{
    for (const auto& e : entries()) {
        if (e.info.id == id) return &e;
    }
    return nullptr;
}

}  // namespace

std::string to_string(Status s)
{
    switch (s) {
    case Status::Pass:
        return "pass";
    case Status::Fail:
        return "fail";
    case Status::UndecidableContour:
        return "undecidable-contour";
    case Status::DegenerateParams:
        return "degenerate-params";
    }
    return "fail";
}

json CheckReport::to_json() const
{
    json j{{"id", id},           {"parameters", parameters}, {"status", to_string(status)},
           {"max_defect", max_defect}, {"runtime_ms", runtime_ms}, {"digest", digest},
           {"details", details}};
    if (quadrature_defect) j["quadrature_defect"] = *quadrature_defect;
    return j;
}

const std::vector<IdentityInfo>& registry()
{
    static const std::vector<IdentityInfo> list = [] {
        std::vector<IdentityInfo> v;
        for (const auto& e : entries()) v.push_back(e.info);
        return v;
    }();
    return list;
}

const IdentityInfo* find_identity(const std::string& id)
{
    const Entry* e = find_entry(id);
    return e ? &e->info : nullptr;
}

bool has_executor(const std::string& id)
{
    const Entry* e = find_entry(id);
    return e && static_cast<bool>(e->run);
}

json read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json c;
    try {
        in >> c;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!c.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
    return c;
}

Params config_params(const json& c)
{
    try {
        return Params::make(get_scalar(c, "q"), c.contains("t") ? get_scalar(c, "t") : get_scalar(c, "q"));
    } catch (const InvalidArgument& e) {
        throw ConfigError(key_error("q/t", e.what()));
    }
}

AscendingConfig config_ascending(const json& c)
{
    AscendingConfig cfg{static_cast<int>(get_int(c, "N", 1, 6)), get_scalars(c, "a"), parse_rho(c.at("rho")),
                        config_params(c), std::nullopt};
    if (c.contains("contour")) {
        const auto& v = c["contour"];
        if (!v.is_object() || !v.contains("center") || !v.contains("radius")) {
            throw ConfigError(key_error("contour", "expected {\"center\": ..., \"radius\": ...}"));
        }
        Circle circle{scalar_value(v["center"], "contour.center"), scalar_value(v["radius"], "contour.radius")};
        if (!(circle.radius > 0)) throw ConfigError(key_error("contour.radius", "must be positive"));
        cfg.contour = circle;
    }
    return cfg;
}

std::vector<OperatorStep> config_steps(const json& c)
{
    auto ns = get_ints(c, "levels", 1, 6);
    auto rs = get_ints(c, "r", 0, 6);
    if (ns.size() != rs.size()) throw ConfigError(key_error("r", "needs one entry per entry of 'levels'"));
    std::vector<OperatorStep> steps;
    int prev = static_cast<int>(get_int(c, "N", 1, 6));
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] > prev) throw ConfigError(key_error("levels", "must satisfy N >= n_1 >= n_2 >= ... >= 1"));
        if (rs[i] > ns[i]) throw ConfigError(key_error("r", "each r_i must satisfy 0 <= r_i <= n_i"));
        prev = ns[i];
        steps.push_back({ns[i], rs[i]});
    }
    return steps;
}

json effective_config(const std::string& id, const json& user)
{
    const Entry* e = find_entry(id);
    if (!e) throw ConfigError("unknown identity id '" + id + "' (see `maclab list`)");
    if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [k, _] : user.items()) {
        if (!kKnownKeys.count(k)) throw ConfigError(key_error(k, "unknown key"));
    }
    json c = with(e->info.defaults, user);

    // type and range checks up front
    if (c.contains("q")) {
        Params p = config_params(c);
        if (c.contains("t") && p.t == 0 && id != "cor-4.7") {
            throw ConfigError(key_error("t", "t = 0 is only admissible for the q-Whittaker check cor-4.7"));
        }
        if (id == "cor-4.7" && p.t != 0) throw ConfigError(key_error("t", "cor-4.7 needs t = 0"));
    }
    for (const char* k : {"quadrature", "hatted"}) {
        if (c.contains(k)) get_bool(c, k);
    }
    if (c.contains("tolerance") && !(get_scalar(c, "tolerance") > 0)) {
        throw ConfigError(key_error("tolerance", "must be positive"));
    }
    if (c.contains("seed")) get_int(c, "seed", 0, 1L << 31);
    for (const char* k : {"N", "D", "multiplicity", "L_max", "max_r", "max_size", "points", "trials"}) {
        if (c.contains(k)) get_int(c, k, 0, 1000);
    }
    for (const char* k : {"r", "levels"}) {
        if (c.contains(k)) get_ints(c, k, 0, 1000);
    }
    if (kAscendingIds.count(id)) {
        auto cfg = config_ascending(c);
        if (static_cast<int>(cfg.a.size()) != cfg.N) throw ConfigError(key_error("a", "needs exactly N entries"));
        int strength = 0;
        if (c.contains("levels") && c.contains("r")) {
            auto steps = config_steps(c);
            if (id == "thm-4.3" || (c.contains("hatted") && get_bool(c, "hatted"))) {
                strength = static_cast<int>(steps.size());
            }
        }
        if (id == "cor-4.7") get_ints(c, "levels", 1, cfg.N);
        try {
            cfg.validate(strength);
        } catch (const ParameterDegeneracy&) {
            // coinciding or zero a's are reported by the check itself as degenerate-params
        } catch (const InvalidArgument& err) {
            throw ConfigError(key_error("a", std::string(err.what()) +
                                                 " (the ascending process needs |a_i| R < 1, with q^m in place of 1 "
                                                 "for inverted observables)"));
        }
    }
    return c;
}

CheckReport run_check(const std::string& id, const json& user_config)
{
    json c = effective_config(id, user_config);
    const Entry* e = find_entry(id);
    CheckReport report;
    report.id = id;
    report.parameters = c;
    Outcome out;
    auto start = std::chrono::steady_clock::now();
    try {
        e->run(c, out);
        bool ok = out.exact.ok && (!out.numeric || out.numeric->ok);
        report.status = ok ? Status::Pass : Status::Fail;
    } catch (const ConfigError&) {
        throw;
    } catch (const UndecidableContour& err) {
        report.status = Status::UndecidableContour;
        out.exact.details.push_back(std::string("contour: ") + err.what());
    } catch (const ParameterDegeneracy& err) {
        report.status = Status::DegenerateParams;
        out.exact.details.push_back(std::string("degenerate: ") + err.what());
    } catch (const InvalidArgument& err) {
        report.status = Status::DegenerateParams;
        out.exact.details.push_back(std::string("precondition: ") + err.what());
    } catch (const std::runtime_error& err) {
        report.status = Status::Fail;
        out.exact.details.push_back(err.what());
    }
    auto stop = std::chrono::steady_clock::now();
    report.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count();
    if (out.width) {
        report.max_defect = to_string(*out.width);
    } else if (out.numeric && out.exact.defect == 0) {
        report.max_defect = decimal(out.numeric->defect);
    } else {
        report.max_defect = to_string(out.exact.defect);
    }
    report.digest = out.digest;
    if (out.numeric) report.quadrature_defect = out.numeric->defect;
    report.details = out.exact.details;
    return report;
}

void append_report(const std::string& path, const CheckReport& report)
{
    std::ofstream log(path, std::ios::app);
    if (!log) throw ConfigError("cannot open log file '" + path + "'");
    log << report.to_json().dump() << '\n';
}

int exit_code(const std::vector<CheckReport>& reports)
{
    bool undecidable = false;
    for (const auto& r : reports) {
        if (r.status == Status::Pass) continue;
        if (r.status != Status::UndecidableContour) return 1;
        undecidable = true;
    }
    return undecidable ? 3 : 0;
}

}  // namespace maclab
