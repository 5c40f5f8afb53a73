#include "maclab/core.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using namespace maclab;

namespace {

// Brute force: every composition of n, sorted and deduplicated.
std::set<std::vector<int>> partitions_by_compositions(int n)
{
    std::set<std::vector<int>> out;
    if (n == 0) {
        out.insert(std::vector<int>{});
        return out;
    }
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
        std::vector<int> parts;
        int cur = 1;
        for (int i = 0; i < n - 1; ++i) {
            if (mask & (1u << i)) {
                parts.push_back(cur);
                cur = 1;
            } else {
                ++cur;
            }
        }
        parts.push_back(cur);
        std::sort(parts.begin(), parts.end(), std::greater<>());
        out.insert(parts);
    }
    return out;
}

}  // namespace

TEST_CASE("scalars are exact and canonical")
{
    Scalar a = parse_scalar("2/4");
    CHECK(a.get_num() == 1);
    CHECK(a.get_den() == 2);
    CHECK(parse_scalar("-3/-6") == Scalar(1, 2));
    CHECK(parse_scalar("1/3") + parse_scalar("1/6") == Scalar(1, 2));
    CHECK_THROWS_AS(parse_scalar("1/0"), InvalidArgument);
    CHECK_THROWS_AS(parse_scalar("abc"), InvalidArgument);
    CHECK_THROWS_AS(parse_scalar(""), InvalidArgument);
    CHECK(pow(Scalar(2, 3), -2) == Scalar(9, 4));
    CHECK(binomial(-1, 3) == -1);
    CHECK(binomial(5, 2) == 10);
}

TEST_CASE("params enforce the admissible range")
{
    CHECK_NOTHROW(Params::make(Scalar(1, 3), Scalar(0)));
    CHECK_THROWS_AS(Params::make(Scalar(1), Scalar(1, 2)), InvalidArgument);
    CHECK_THROWS_AS(Params::make(Scalar(0), Scalar(1, 2)), InvalidArgument);
    CHECK_THROWS_AS(Params::make(Scalar(1, 2), Scalar(1)), InvalidArgument);
    CHECK_THROWS_AS(Params::make(Scalar(1, 2), Scalar(-1, 2)), InvalidArgument);
    auto p = Params::make(Scalar(1, 2), Scalar(0));
    CHECK_THROWS_AS(p.require_positive_t("hatted operator"), InvalidArgument);
}

TEST_CASE("partition basics")
{
    Partition l{4, 2, 2, 1};
    CHECK(l.size() == 9);
    CHECK(l.length() == 4);
    CHECK(l.conjugate() == Partition{4, 3, 1, 1});
    CHECK(l.conjugate().conjugate() == l);
    CHECK(l.contains(Partition{3, 2}));
    CHECK_FALSE(l.contains(Partition{3, 3}));
    CHECK(Partition(std::vector<int>{2, 1, 0, 0}) == Partition{2, 1});
    CHECK_THROWS_AS(Partition({1, 2}), InvalidArgument);
    CHECK(dominates(Partition{3, 1}, Partition{2, 2}));
    CHECK_FALSE(dominates(Partition{2, 2}, Partition{3, 1}));
    CHECK_FALSE(dominates(Partition{3, 1, 1, 1}, Partition{2, 2, 2}));
}

TEST_CASE("enumerate_partitions examples")
{
    CHECK(enumerate_partitions(0) == std::vector<Partition>{Partition()});
    CHECK(enumerate_partitions(2) == std::vector<Partition>{Partition(), Partition{1}, Partition{2}, Partition{1, 1}});
    CHECK(enumerate_partitions(4).size() == 12);
    CHECK_THROWS_AS(enumerate_partitions(-1), InvalidArgument);
}

TEST_CASE("enumerate_partitions matches composition oracle")
{
    for (int n = 0; n <= 10; ++n) {
        auto ps = partitions_of(n);
        std::set<std::vector<int>> got;
        for (const auto& p : ps) got.insert(p.parts());
        CHECK(got.size() == ps.size());
        CHECK(got == partitions_by_compositions(n));
        for (std::size_t i = 1; i < ps.size(); ++i) CHECK(ps[i] < ps[i - 1]);
    }
}

TEST_CASE("q_pochhammer examples")
{
    CHECK(q_pochhammer(Scalar(1, 5), Scalar(1, 3), 0) == 1);
    CHECK(q_pochhammer(Scalar(1, 2), Scalar(1, 2), 2) == Scalar(3, 8));
    CHECK(q_pochhammer(Scalar(0), Scalar(1, 3), 5) == 1);
}

TEST_CASE("z_factor examples and multiplicativity")
{
    auto p = Params::make(Scalar(1, 3), Scalar(1, 5));
    Scalar r = (1 - p.q) / (1 - p.t);
    CHECK(z_factor(Partition(), p) == 1);
    CHECK(z_factor(Partition{1}, p) == r);
    CHECK(z_factor(Partition{1, 1}, p) == 2 * r * r);
    // parts 3,3 and 1 form disjoint multiplicity groups
    CHECK(z_factor(Partition{3, 3, 1}, p) == z_factor(Partition{3, 3}, p) * z_factor(Partition{1}, p));
    CHECK(z_factor(Partition{2, 1, 1}, p) == z_factor(Partition{2}, p) * z_factor(Partition{1, 1}, p));
}

TEST_CASE("elementary symmetric values")
{
    std::vector<Scalar> xs{Scalar(1), Scalar(2), Scalar(3)};
    CHECK(elementary(0, xs) == 1);
    CHECK(elementary(2, xs) == 11);
    CHECK(elementary(3, xs) == 6);
    CHECK(elementary(4, xs) == 0);
}
