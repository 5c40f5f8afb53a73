#include "maclab/formal_process.hpp"

#include <catch_amalgamated.hpp>

#include <functional>

using namespace maclab;

namespace {

std::vector<Params> grid()
{
    return {Params::make(Scalar(1, 3), Scalar(1, 5)), Params::make(Scalar(2, 7), Scalar(1, 2)),
            Params::make(Scalar(1, 2), Scalar(1, 3))};
}

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

// <P_lambda(A,Y), Q_mu(Y,B)>_Y through coproducts and the generic pairing.
AlphabetSeries psi_by_pairing(const Partition& lambda, const Partition& mu, const Params& p, int D)
{
    auto left = coproduct(macdonald_P(lambda, p, std::max(D, lambda.size())), "A", "Y").truncated(D);
    auto right = coproduct(macdonald_Q(mu, p, std::max(D, mu.size())), "Y", "B").truncated(D);
    return alphabet_pair(left, right, "Y", p);
}

}  // namespace

TEST_CASE("psi examples")
{
    auto p = grid()[0];
    CHECK(psi(Partition(), Partition(), "A", "B", p, 4) == AlphabetSeries::constant({"A", "B"}, 4, 1));
    CHECK(psi(Partition{1}, Partition(), "A", "B", p, 4) == AlphabetSeries::power_sum({"A", "B"}, 4, "A", 1));
    for (const auto& l : enumerate_partitions(3)) {
        CHECK(psi(l, l, "A", "B", p, 6).constant_term() == 1);
        for (const auto& m : enumerate_partitions(3)) {
            if (m != l) CHECK(psi(l, m, "A", "B", p, 6).constant_term() == 0);
        }
    }
}

TEST_CASE("psi agrees with the pairing form")
{
    for (const auto& p : grid()) {
        for (const auto& l : enumerate_partitions(3)) {
            for (const auto& m : enumerate_partitions(3)) {
                CHECK(psi(l, m, "A", "B", p, 6) == psi_by_pairing(l, m, p, 6));
            }
        }
    }
}

TEST_CASE("inverse normalization is the product of inverse kernels")
{
    auto p = grid()[1];
    auto spec = ProcessSpec::make(2, 4, p);
    auto all = spec.alphabets();
    AlphabetSeries expected = AlphabetSeries::constant(all, 4, 1);
    for (int a = 0; a < 2; ++a)
        for (int b = a; b < 2; ++b)
            expected = expected * kernel_series(KernelKind::PiInverse, spec.A[static_cast<std::size_t>(a)],
                                                spec.B[static_cast<std::size_t>(b)], p, 4);
    CHECK(inverse_normalization(spec) == expected);
}

TEST_CASE("mp_weight single level empty partition")
{
    auto p = grid()[0];
    auto spec = ProcessSpec::make(1, 2, p);
    auto w = mp_weight({Partition()}, spec);
    AlphabetSeries expected = AlphabetSeries::constant({"A1", "B1"}, 2, 1);
    expected.add(expected.key_of({Partition{1}, Partition{1}}), -(1 - p.t) / (1 - p.q));
    CHECK(w == expected);
}

TEST_CASE("mass one by direct enumeration")
{
    for (const auto& p : grid()) {
        for (int N = 1; N <= 3; ++N) {
            for (int D = 0; D <= (N == 3 ? 4 : 6); ++D) {
                auto spec = ProcessSpec::make(N, D, p);
                AlphabetSeries total(spec.alphabets(), D);
                for_each_sequence(N, D / 2, [&](const std::vector<Partition>& ls) { total += mp_weight(ls, spec); });
                CHECK(total == AlphabetSeries::constant(spec.alphabets(), D, 1));
            }
        }
    }
}

TEST_CASE("observable_O examples")
{
    for (const auto& p : grid()) {
        CHECK(observable_O(0, Partition{3, 1}, p) == 1);
        CHECK(observable_O(1, Partition{1}, p) == inverse(p.q) + p.t / (1 - p.t));
        CHECK(observable_O(2, Partition(), p) == p.t / ((1 - p.t) * (1 - p.t * p.t)));
    }
    auto p0 = Params::make(Scalar(1, 2), Scalar(0));
    CHECK(observable_O(0, Partition{1}, p0) == 1);
    CHECK_THROWS_AS(observable_O(1, Partition{1}, p0), InvalidArgument);
    CHECK_THROWS_AS(observable_Ohat1(Partition{1}, p0), InvalidArgument);
}

TEST_CASE("observable_O closed form against finite stabilization")
{
    // e_r over M variables approaches O_r from below; the gap is at most
    // (sum_{i >= M} t^i) * O_{r-1}.
    for (const auto& p : grid()) {
        for (const auto& l : enumerate_partitions(4)) {
            for (int r = 1; r <= 3; ++r) {
                for (int M : {40, 60}) {
                    std::vector<Scalar> xs;
                    for (int i = 0; i < M; ++i) xs.push_back(pow(p.q, -l[i]) * pow(p.t, i));
                    Scalar gap = observable_O(r, l, p) - elementary(r, xs);
                    Scalar bound = pow(p.t, M) / (1 - p.t) * observable_O(r - 1, l, p);
                    CHECK(gap >= 0);
                    CHECK(gap <= bound);
                }
            }
        }
    }
}

TEST_CASE("observable_Ohat1 examples")
{
    for (const auto& p : grid()) {
        CHECK(observable_Ohat1(Partition(), p) == 1);
        CHECK(observable_Ohat1(Partition{1}, p) == 1 + (1 - p.t) * (1 - p.q) / p.t);
        CHECK(observable_Ohat1(Partition{2, 1}, p) ==
              1 + (1 - p.t) * ((1 - p.q * p.q) / p.t + (1 - p.q) / (p.t * p.t)));
    }
}

TEST_CASE("expectation_lhs with the trivial plan is one")
{
    for (const auto& p : grid()) {
        for (int N = 1; N <= 3; ++N) {
            for (int D = 0; D <= 6; ++D) {
                auto spec = ProcessSpec::make(N, D, p);
                CHECK(expectation_lhs(ObservablePlan{}, spec) == AlphabetSeries::constant(spec.alphabets(), D, 1));
            }
        }
    }
}

TEST_CASE("expectation_lhs single level O_1 at degree 2")
{
    for (const auto& p : grid()) {
        auto spec = ProcessSpec::make(1, 2, p);
        auto e = expectation_lhs(ObservablePlan::levels({1}), spec);
        Scalar c = (1 - p.t) / (1 - p.q);
        // lambda = empty gives 1/(1-t); lambda = (1) gives 1/q + t/(1-t)
        CHECK(e.constant_term() == 1 / (1 - p.t));
        CHECK(e.coefficient({Partition{1}, Partition{1}}) == c * (inverse(p.q) - 1));
    }
}

TEST_CASE("expectation_lhs transfer sums match direct enumeration")
{
    for (const auto& p : grid()) {
        auto spec = ProcessSpec::make(2, 4, p);
        ObservablePlan plan;
        plan.entries = {{1, ObservableKind::O, 2, 1}, {2, ObservableKind::OHat1, 0, 1}, {2, ObservableKind::O, 1, 2}};
        plan.scales = {Scalar(2, 3), Scalar(5, 4)};
        AlphabetSeries brute(spec.alphabets(), 4);
        for_each_sequence(2, 2, [&](const std::vector<Partition>& ls) {
            Scalar f = 1;
            f *= observable_O(2, ls[0], p) * pow(Scalar(2, 3), ls[0].size());
            f *= observable_Ohat1(ls[1], p) * pow(observable_O(1, ls[1], p), 2) * pow(Scalar(5, 4), ls[1].size());
            brute += mp_weight(ls, spec) * f;
        });
        CHECK(expectation_lhs(plan, spec) == brute);
    }
}

TEST_CASE("unit scale constants change nothing")
{
    auto p = grid()[2];
    auto spec = ProcessSpec::make(2, 4, p);
    auto plan = ObservablePlan::levels({1, 2});
    auto scaled = plan;
    scaled.scales = {Scalar(1), Scalar(1)};
    CHECK(expectation_lhs(plan, spec) == expectation_lhs(scaled, spec));
}

TEST_CASE("enumeration bound is sound")
{
    for (const auto& p : grid()) {
        for (int N = 1; N <= 2; ++N) {
            for (int D = 1; D <= 5; ++D) {
                auto spec = ProcessSpec::make(N, D, p);
                auto plan = ObservablePlan::levels(std::vector<int>(static_cast<std::size_t>(N), 1));
                CHECK(expectation_lhs(plan, spec) == expectation_lhs(plan, spec, D / 2 + 1));
            }
        }
        auto spec = ProcessSpec::make(2, 4, p);
        CHECK(mp_weight({Partition{3}, Partition{1}}, spec).is_zero());
        CHECK(mp_weight({Partition{1}, Partition{2, 1}}, spec).is_zero());
    }
}

TEST_CASE("constant-term projection collapses a level")
{
    for (const auto& p : grid()) {
        const int D = 4;
        auto spec = ProcessSpec::make(2, D, p);
        ProcessSpec reduced{1, D, p, {"A1"}, {"B2"}};
        std::vector<Scalar> zero(D + 1, Scalar(0));
        for_each_sequence(2, D / 2, [&](const std::vector<Partition>& ls) {
            auto w = specialize(specialize(mp_weight(ls, spec), "A2", zero), "B1", zero);
            if (ls[0] != ls[1]) {
                CHECK(w.is_zero());
            } else {
                CHECK(w == mp_weight({ls[0]}, reduced));
            }
        });
    }
}

TEST_CASE("alphabet-union projection sums out a level")
{
    for (const auto& p : grid()) {
        const int D = 4;
        // N = 2, remove level 1: A1, A2 unite and B1 drops out
        {
            auto spec = ProcessSpec::make(2, D, p);
            ProcessSpec reduced{1, D, p, {"U"}, {"B2"}};
            for (const auto& l2 : enumerate_partitions(D / 2)) {
                AlphabetSeries sum(spec.alphabets(), D);
                for (const auto& l1 : enumerate_partitions(D / 2)) sum += mp_weight({l1, l2}, spec);
                auto expected = split_alphabet(mp_weight({l2}, reduced), "U", "A1", "A2");
                CHECK(sum == expected);
            }
        }
        // N = 3, remove level 2: (A2, A3) and (B1, B2) unite
        {
            auto spec = ProcessSpec::make(3, D, p);
            ProcessSpec reduced{2, D, p, {"A1", "U"}, {"V", "B3"}};
            for (const auto& l1 : enumerate_partitions(D / 2)) {
                for (const auto& l3 : enumerate_partitions(D / 2)) {
                    AlphabetSeries sum(spec.alphabets(), D);
                    for (const auto& l2 : enumerate_partitions(D / 2)) sum += mp_weight({l1, l2, l3}, spec);
                    auto expected =
                        split_alphabet(split_alphabet(mp_weight({l1, l3}, reduced), "U", "A2", "A3"), "V", "B1", "B2");
                    CHECK(sum == expected);
                }
            }
        }
    }
}
