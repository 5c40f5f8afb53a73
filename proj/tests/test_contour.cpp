#include "maclab/contour.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace maclab;

namespace {

std::vector<Params> grid()
{
    return {Params::make(Scalar(1, 3), Scalar(1, 5)), Params::make(Scalar(2, 7), Scalar(1, 2)),
            Params::make(Scalar(1, 2), Scalar(1, 3))};
}

ContourScheme circles(const std::vector<std::pair<Scalar, Scalar>>& cr)
{
    ContourScheme s;
    for (std::size_t i = 0; i < cr.size(); ++i) {
        s.names.push_back("z" + std::to_string(i + 1));
        s.circles.push_back({cr[i].first, cr[i].second});
        s.order.push_back(static_cast<int>(i));
    }
    return s;
}

// numeric power sums p_k of a finite alphabet
std::vector<double> power_sums(const std::vector<double>& xs, int D)
{
    std::vector<double> p(static_cast<std::size_t>(D) + 1, 0.0);
    for (int k = 1; k <= D; ++k) {
        for (double x : xs) p[static_cast<std::size_t>(k)] += std::pow(x, k);
    }
    return p;
}

}  // namespace

TEST_CASE("elementary contour integrals")
{
    auto s = circles({{Scalar(0), Scalar(1)}});
    CHECK(integrate_scalar(RationalExpr::monomial(1, {-1}), s) == 1);
    CHECK(integrate_scalar(RationalExpr::monomial(1, {-2}), s) == 0);
    CHECK(integrate_scalar(RationalExpr::monomial(1, {3}), s) == 0);
    CHECK(integrate_scalar(RationalExpr::constant(1, 5), s) == 0);
    // dz/(z - 1/2) and dz/(z - 2)
    CHECK(integrate_scalar(RationalExpr::affine(1, 0, Scalar(1), Scalar(-1, 2), -1), s) == 1);
    CHECK(integrate_scalar(RationalExpr::affine(1, 0, Scalar(1), Scalar(-2), -1), s) == 0);
    // dz / (z^2 (z - 1/2)): residues -4 at 0 and 4 at 1/2
    auto e = RationalExpr::monomial(1, {-2}) * RationalExpr::affine(1, 0, Scalar(1), Scalar(-1, 2), -1);
    CHECK(integrate_scalar(e, s) == 0);
    CHECK(residue_at(e, 0, Pole{Pole::Kind::Zero, Scalar(0), -1}).constant_value() == -4);
    // every pole outside
    auto out = RationalExpr::affine(1, 0, Scalar(1), Scalar(-3), -2) * RationalExpr::monomial(1, {2});
    CHECK(integrate_scalar(out, s) == 0);
    CHECK(std::abs(numeric_quadrature([&](const std::vector<std::complex<double>>& v) { return out.evaluate(v); }, s, 1e-12)) < 1e-10);
    // empty integral is the constant itself
    CHECK(integrate_scalar(RationalExpr::constant(0, 7), ContourScheme{}) == 7);
}

TEST_CASE("higher order poles match the derivative formula")
{
    // z^3 / (z - 1/3)^4 has residue 1 at 1/3 (coefficient of eps^3 in (1/3 + eps)^3)
    auto s = circles({{Scalar(0), Scalar(1)}});
    auto e = RationalExpr::monomial(1, {3}) * RationalExpr::affine(1, 0, Scalar(1), Scalar(-1, 3), -4);
    CHECK(integrate_scalar(e, s) == 1);
    // 1 / ((z - 1/2)^2 (z - 1/4)^2): total residue zero since degree <= -2
    auto f = RationalExpr::affine(1, 0, Scalar(1), Scalar(-1, 2), -2) * RationalExpr::affine(1, 0, Scalar(1), Scalar(-1, 4), -2);
    CHECK(integrate_scalar(f, s) == 0);
    auto r = residue_at(f, 0, Pole{Pole::Kind::Constant, Scalar(1, 2), -1}).constant_value();
    // d/dz (z - 1/4)^{-2} at 1/2 = -2 (1/4)^{-3}
    CHECK(r == -128);
}

TEST_CASE("pole classification against circles")
{
    auto s = circles({{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(2)}});
    CHECK(classify_pole(s, 0, Pole{Pole::Kind::Constant, Scalar(1, 2), -1}) == PoleClass::Inside);
    CHECK(classify_pole(s, 0, Pole{Pole::Kind::Constant, Scalar(-1), -1}) == PoleClass::Undecidable);
    CHECK(classify_pole(s, 0, Pole{Pole::Kind::Scaled, Scalar(1, 4), 1}) == PoleClass::Inside);
    CHECK(classify_pole(s, 0, Pole{Pole::Kind::Scaled, Scalar(1), 1}) == PoleClass::Outside);
    CHECK(classify_pole(s, 0, Pole{Pole::Kind::Scaled, Scalar(1, 2), 1}) == PoleClass::Undecidable);
    CHECK(classify_pole(s, 1, Pole{Pole::Kind::Scaled, Scalar(-2), 0}) == PoleClass::Undecidable);
    auto e = RationalExpr::binomial_form(2, 0, Scalar(1), 1, Scalar(-1, 2), -1) * RationalExpr::monomial(2, {0, -1});
    CHECK_THROWS_AS(integrate(e, s), UndecidableContour);
}

TEST_CASE("scheme verification")
{
    auto s = circles({{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(1, 2)}});
    s.constraints.push_back({1, 0, Scalar(1, 3)});
    CHECK_THROWS_AS(s.verify(), UndecidableContour);
    s.constraints.back().factor = Scalar(1);
    CHECK_NOTHROW(s.verify());
    s.points.push_back({0, Scalar(1), true});
    CHECK_THROWS_AS(s.verify(), UndecidableContour);
    s.points.back() = {0, Scalar(1, 10), true};
    CHECK_NOTHROW(s.verify());
    s.order = {0, 0};
    CHECK_THROWS_AS(s.verify(), UndecidableContour);
}

TEST_CASE("exact residues agree with quadrature on random rational functions")
{
    std::mt19937 rng(20240611);
    std::uniform_int_distribution<int> num(-9, 9), den(2, 9), ex(-3, 2);
    auto s = circles({{Scalar(0), Scalar(1)}, {Scalar(0), Scalar(3, 2)}});
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        RationalExpr e = RationalExpr::monomial(2, {ex(rng), ex(rng)}, Scalar(num(rng), den(rng)));
        for (int k = 0; k < 2; ++k) {
            Scalar c(num(rng), den(rng));
            c.canonicalize();
            if (c == 0 || abs(abs(c) - 1) < Scalar(1, 5) || abs(abs(c) - Scalar(3, 2)) < Scalar(1, 5)) continue;
            e = e * RationalExpr::affine(2, k, Scalar(1), Scalar(-c), -1 - (trial % 2));
        }
        Scalar kappa(1, den(rng) + 1);
        e = e * RationalExpr::binomial_form(2, 0, Scalar(1), 1, Scalar(-kappa), -1);
        Scalar exact;
        try {
            exact = integrate_scalar(e, s);
        } catch (const UndecidableContour&) {
            continue;  // a derived pole landed on the second circle
        }
        auto numeric = numeric_quadrature([&](const std::vector<std::complex<double>>& v) { return e.evaluate(v); }, s, 1e-11);
        CHECK(std::abs(numeric - std::complex<double>(to_double(exact))) < 1e-8);
        ++checked;
    }
    CHECK(checked >= 30);
}

TEST_CASE("Cauchy block")
{
    for (const auto& p : grid()) {
        auto k1 = cauchy_block(1, {0}, p);
        CHECK(k1.evaluate_exact({Scalar(3)}) == 1 / ((1 - p.t) * 3));
        // det[1/(v_i - t v_j)] / 2 at v = (1, 7)
        auto k2 = cauchy_block(2, {0, 1}, p);
        Scalar a = 1 / (1 - p.t), b = 1 / (1 - 7 * p.t), c = 1 / (7 - p.t), d = 1 / (7 - 7 * p.t);
        CHECK(k2.evaluate_exact({Scalar(1), Scalar(7)}) == (a * d - b * c) / 2);
    }
}

TEST_CASE("single-level formula at degree zero")
{
    for (const auto& p : grid()) {
        auto in = build_single_level(1, "X", "Y", p, 0);
        CHECK(integrate_formal(in) == AlphabetSeries::constant({"X", "Y"}, 0, 1 / (1 - p.t)));
    }
}

TEST_CASE("single-level formula matches expectations")
{
    for (const auto& p : grid()) {
        for (int r = 1; r <= 3; ++r) {
            const int D = 4;
            auto spec = ProcessSpec::make(1, D, p);
            auto in = build_single_level(r, "A1", "B1", p, D);
            CHECK(integrate_formal(in) == expectation_lhs(ObservablePlan::levels({r}), spec));
        }
    }
}

TEST_CASE("single-level formula is invariant under radius changes")
{
    auto p = grid()[1];
    auto in = build_single_level(2, "X", "Y", p, 4);
    auto base = integrate_formal(in);
    for (auto scale : {Scalar(1, 3), Scalar(7, 2)}) {
        auto moved = in;
        for (auto& c : moved.scheme.circles) c.radius *= scale;
        CHECK(integrate_formal(moved) == base);
    }
}

TEST_CASE("single-level formula with the two alphabets exchanged")
{
    // the expectation depends on X and Y only through the Cauchy kernel, so it is symmetric
    auto p = grid()[2];
    auto a = integrate_formal(build_single_level(2, "X", "Y", p, 4));
    auto b = integrate_formal(build_single_level(2, "Y", "X", p, 4));
    CHECK(a == b.embed({"X", "Y"}));
}

TEST_CASE("string-vanishing residues are zero and filtered")
{
    // r = 2 with a one-point alphabet X = {x}: H(w; x) = (1 - t x w) / (1 - x w).
    // The string w1 = 1/x, w2 = 1/(t x) gives zero residue.
    for (const auto& p : grid()) {
        Scalar x(1, 2);
        auto f = cauchy_block(2, {0, 1}, p);
        for (int i = 0; i < 2; ++i) {
            f = f * RationalExpr::affine(2, i, -p.t * x, Scalar(1), 1) * RationalExpr::affine(2, i, -x, Scalar(1), -1);
        }
        auto first = residue_at(f, 0, Pole{Pole::Kind::Constant, inverse(x), -1});
        auto second = residue_at(first, 1, Pole{Pole::Kind::Constant, inverse(p.t * x), -1});
        CHECK(second.is_zero());

        // small circles around the string: w1 near 1/x, w2 near 1/(t x)
        ContourScheme s;
        s.names = {"w1", "w2"};
        s.circles = {{inverse(x), Scalar(1, 10)}, {inverse(p.t * x), Scalar(1, 10)}};
        s.order = {0, 1};
        ResiduePlan plan;
        Scalar exact = integrate_scalar(f, s, &plan);
        CHECK(plan.cancelled[1].count(inverse(p.t * x).get_str()) == 1);
        auto numeric = numeric_quadrature([&](const std::vector<std::complex<double>>& v) { return f.evaluate(v); }, s, 1e-11);
        CHECK(std::abs(numeric - to_double(exact)) < 1e-8);
    }
}

TEST_CASE("formal integrals agree with numeric quadrature")
{
    auto p = grid()[1];
    const int D = 3;
    auto in = build_single_level(2, "X", "Y", p, D);
    std::map<std::string, std::vector<double>> values{{"X", power_sums({0.2, 0.1}, D)}, {"Y", power_sums({0.15}, D)}};
    auto exact = evaluate_series(integrate_formal(in), values);
    auto numeric = numeric_formal(in, values, 1e-11);
    CHECK(std::abs(numeric - exact) < 1e-8);
}

TEST_CASE("multilevel formula matches expectations")
{
    for (const auto& p : grid()) {
        const int D = 4;
        auto spec = ProcessSpec::make(2, D, p);
        for (auto r : std::vector<std::vector<int>>{{1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}}) {
            auto plan = ObservablePlan::levels(r);
            auto in = build_multilevel(groups_for_plan(plan, 2), spec);
            CHECK(integrate_formal(in) == expectation_lhs(plan, spec));
        }
    }
}

TEST_CASE("multilevel formula without variables is one")
{
    auto spec = ProcessSpec::make(3, 4, grid()[0]);
    auto in = build_multilevel(GroupLayout{}, spec);
    CHECK(integrate_formal(in) == AlphabetSeries::constant(spec.alphabets(), 4, 1));
}

TEST_CASE("three-level formula matches expectations")
{
    auto p = grid()[2];
    auto spec = ProcessSpec::make(3, 4, p);
    for (auto r : std::vector<std::vector<int>>{{1, 1, 1}, {2, 0, 1}}) {
        auto plan = ObservablePlan::levels(r);
        CHECK(integrate_formal(build_multilevel(groups_for_plan(plan, 3), spec)) == expectation_lhs(plan, spec));
    }
}

TEST_CASE("grouped observables at one level")
{
    for (const auto& p : grid()) {
        const int D = 4;
        auto spec = ProcessSpec::make(2, D, p);
        ObservablePlan plan;
        plan.entries = {{1, ObservableKind::O, 1, 2}, {2, ObservableKind::O, 1, 1}};
        auto in = build_multilevel(groups_for_plan(plan, 2), spec);
        CHECK(integrate_formal(in) == expectation_lhs(plan, spec));
    }
}

TEST_CASE("scaled multilevel formula matches expectations")
{
    for (const auto& p : grid()) {
        const int D = 4;
        auto spec = ProcessSpec::make(2, D, p);
        auto plan = ObservablePlan::levels({1, 1});
        plan.scales = {Scalar(2, 3), Scalar(5, 4)};
        auto in = build_multilevel(groups_for_plan(plan, 2), spec, plan.scales);
        CHECK(integrate_formal(in) == expectation_lhs(plan, spec));
    }
}

TEST_CASE("O-hat multilevel formula matches expectations")
{
    for (const auto& p : grid()) {
        const int D = 4;
        for (int N = 1; N <= 2; ++N) {
            auto spec = ProcessSpec::make(N, D, p);
            ObservablePlan plan;
            for (int k = 1; k <= N; ++k) plan.entries.push_back({k, ObservableKind::OHat1, 0, 1});
            CHECK(integrate_formal(build_ohat_multilevel(spec)) == expectation_lhs(plan, spec));
        }
    }
}

TEST_CASE("residue plan digests are stable")
{
    auto p = grid()[0];
    auto in = build_single_level(2, "X", "Y", p, 2);
    ResiduePlan a, b;
    integrate_formal(in, &a);
    integrate_formal(in, &b);
    CHECK(a.digest(in.scheme.names) == b.digest(in.scheme.names));
    CHECK(a.digest(in.scheme.names).size() == 16);
}

TEST_CASE("compiled evaluation and cancelling integrands")
{
    // (v0 - v1)^2 / ((v0 - 1/10)(v1 - 1/10)) - ((v0 - 1/10)^2 + (v1 - 1/10)^2) / ((v0 - 1/10)(v1 - 1/10)) = -2
    Scalar a(1, 10);
    RationalExpr den = RationalExpr::affine(2, 0, Scalar(1), -a, -1) * RationalExpr::affine(2, 1, Scalar(1), -a, -1);
    RationalExpr e = RationalExpr::binomial_form(2, 0, Scalar(1), 1, Scalar(-1), 2) * den;
    e += RationalExpr::affine(2, 0, Scalar(1), -a, 2) * den * Scalar(-1);
    e += RationalExpr::affine(2, 1, Scalar(1), -a, 2) * den * Scalar(-1);
    NumericExpr f(e);
    std::vector<std::complex<double>> z{{0.13, 0.02}, {0.09, -0.01}};
    double magnitude = 0;
    std::complex<double> value = f(z, &magnitude);
    CHECK(std::abs(value - e.evaluate(z)) < 1e-12 * magnitude);
    CHECK(magnitude >= std::abs(value));

    auto s = circles({{a, Scalar(1, 1000)}, {a, Scalar(1, 1000)}});
    // the value vanishes only after cancellation between terms of size 1 / radius^2
    CHECK(std::abs(numeric_quadrature(f, s, 1e-11)) < 1e-8);
    CHECK(integrate_scalar(e, s) == 0);
}
