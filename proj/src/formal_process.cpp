#include "maclab/formal_process.hpp"

#include <mutex>

namespace maclab {

ProcessSpec ProcessSpec::make(int N, int D, const Params& params)
{
    if (N < 1) throw InvalidArgument("process needs at least one level");
    if (D < 0) throw InvalidArgument("truncation order must be nonnegative");
    ProcessSpec s{N, D, params, {}, {}};
    for (int i = 1; i <= N; ++i) {
        s.A.push_back("A" + std::to_string(i));
        s.B.push_back("B" + std::to_string(i));
    }
    return s;
}

std::vector<std::string> ProcessSpec::alphabets() const
{
    std::vector<std::string> out = A;
    out.insert(out.end(), B.begin(), B.end());
    return out;
}

ObservablePlan ObservablePlan::levels(const std::vector<int>& r)
{
    ObservablePlan plan;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] < 0) throw InvalidArgument("observable index must be nonnegative");
        if (r[i] > 0) plan.entries.push_back({static_cast<int>(i) + 1, ObservableKind::O, r[i], 1});
    }
    return plan;
}

AlphabetSeries psi(const Partition& lambda, const Partition& mu, const std::string& A, const std::string& B,
                   const Params& params, int D)
{
    AlphabetSeries out({A, B}, D);
    for (const auto& nu : enumerate_partitions(std::min(lambda.size(), mu.size()))) {
        if (!lambda.contains(nu) || !mu.contains(nu)) continue;
        if (lambda.size() - nu.size() + mu.size() - nu.size() > D) continue;
        out += AlphabetSeries::from_symfunc(skew_P(lambda, nu, params, std::max(D, lambda.size())), {A, B}, A, D) *
               AlphabetSeries::from_symfunc(skew_Q(mu, nu, params, std::max(D, mu.size())), {A, B}, B, D);
    }
    return out;
}

AlphabetSeries inverse_normalization(const ProcessSpec& spec)
{
    auto all = spec.alphabets();
    AlphabetSeries prod = AlphabetSeries::constant(all, spec.D, 1);
    for (int a = 0; a < spec.N; ++a) {
        for (int b = a; b < spec.N; ++b) {
            prod = prod * kernel_series(KernelKind::Pi, spec.A[static_cast<std::size_t>(a)],
                                        spec.B[static_cast<std::size_t>(b)], spec.params, spec.D)
                              .embed(all);
        }
    }
    return reciprocal(prod);
}

namespace {

const AlphabetSeries& cached_inverse_normalization(const ProcessSpec& spec)
{
    static std::mutex mu;
    static std::map<std::string, AlphabetSeries> cache;
    std::string key = spec.params.key() + "|" + std::to_string(spec.D);
    for (const auto& n : spec.alphabets()) key += "|" + n;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, inverse_normalization(spec)).first;
    return it->second;
}

}  // namespace

AlphabetSeries mp_weight(const std::vector<Partition>& lambdas, const ProcessSpec& spec)
{
    if (static_cast<int>(lambdas.size()) != spec.N) throw InvalidArgument("one partition per level required");
    auto all = spec.alphabets();
    int D = spec.D;
    const auto& p = spec.params;
    auto first = lambdas.front();
    auto last = lambdas.back();
    if (first.size() > D || last.size() > D) return AlphabetSeries(all, D);
    AlphabetSeries w = AlphabetSeries::from_symfunc(macdonald_P(first, p, std::max(D, first.size())), all, spec.A[0], D);
    for (int k = 1; k < spec.N; ++k) {
        const auto& lk = lambdas[static_cast<std::size_t>(k)];
        const auto& lk1 = lambdas[static_cast<std::size_t>(k - 1)];
        if (lk.size() > D || lk1.size() > D) return AlphabetSeries(all, D);
        w = w * psi(lk, lk1, spec.A[static_cast<std::size_t>(k)], spec.B[static_cast<std::size_t>(k - 1)], p, D).embed(all);
        if (w.is_zero()) return w;
    }
    w = w * AlphabetSeries::from_symfunc(macdonald_Q(last, p, std::max(D, last.size())), all, spec.B.back(), D);
    return w * cached_inverse_normalization(spec);
}

Scalar observable_O(int r, const Partition& lambda, const Params& params)
{
    if (r < 0) throw InvalidArgument("observable index must be nonnegative");
    if (r == 0) return 1;
    params.require_positive_t("O_r with r >= 1");
    const Scalar& q = params.q;
    const Scalar& t = params.t;
    int l = lambda.length();
    std::vector<Scalar> head;
    for (int i = 0; i < l; ++i) head.push_back(pow(q, -lambda[i]) * pow(t, i));
    Scalar total = 0;
    for (int j = 0; j <= r; ++j) {
        Scalar tail = pow(t, static_cast<long>(j) * l + static_cast<long>(j) * (j - 1) / 2);
        for (int i = 1; i <= j; ++i) tail /= Scalar(1 - pow(t, i));
        total += elementary(r - j, head) * tail;
    }
    return total;
}

Scalar observable_Ohat1(const Partition& lambda, const Params& params)
{
    params.require_positive_t("O-hat_1");
    Scalar s = 0;
    for (int j = 1; j <= lambda.length(); ++j) s += Scalar(1 - pow(params.q, lambda[j - 1])) * pow(params.t, -j);
    return 1 + (1 - params.t) * s;
}

Scalar level_factor(const ObservablePlan& plan, int level, const Partition& lambda, const Params& params)
{
    Scalar f = 1;
    for (const auto& e : plan.entries) {
        if (e.level != level) continue;
        if (e.multiplicity < 1) throw InvalidArgument("observable multiplicity must be positive");
        Scalar v = e.kind == ObservableKind::O ? observable_O(e.r, lambda, params) : observable_Ohat1(lambda, params);
        f *= pow(v, e.multiplicity);
    }
    if (!plan.scales.empty()) f *= pow(plan.scales[static_cast<std::size_t>(level - 1)], lambda.size());
    return f;
}

AlphabetSeries expectation_lhs(const ObservablePlan& plan, const ProcessSpec& spec, std::optional<int> bound)
{
    for (const auto& e : plan.entries) {
        if (e.level < 1 || e.level > spec.N) throw InvalidArgument("observable level out of range");
    }
    if (!plan.scales.empty() && static_cast<int>(plan.scales.size()) != spec.N) {
        throw InvalidArgument("scale constants must be given for every level");
    }
    auto all = spec.alphabets();
    int D = spec.D;
    const auto& p = spec.params;
    int maxsize = bound.value_or(D / 2);
    auto parts = enumerate_partitions(maxsize);

    // transfer sums: F_k(lambda) = f_k(lambda) sum_mu Psi_{lambda,mu}(A^k;B^{k-1}) F_{k-1}(mu)
    std::map<Partition, AlphabetSeries> F;
    for (const auto& l : parts) {
        Scalar f = level_factor(plan, 1, l, p);
        if (f == 0) continue;
        F.emplace(l, AlphabetSeries::from_symfunc(macdonald_P(l, p, std::max(D, l.size())), all, spec.A[0], D) * f);
    }
    for (int k = 2; k <= spec.N; ++k) {
        std::map<Partition, AlphabetSeries> next;
        for (const auto& l : parts) {
            Scalar f = level_factor(plan, k, l, p);
            if (f == 0) continue;
            AlphabetSeries acc(all, D);
            for (const auto& [mu, Fmu] : F) {
                auto ps = psi(l, mu, spec.A[static_cast<std::size_t>(k - 1)], spec.B[static_cast<std::size_t>(k - 2)], p, D);
                if (ps.is_zero()) continue;
                acc += ps.embed(all) * Fmu;
            }
            if (!acc.is_zero()) next.emplace(l, acc * f);
        }
        F = std::move(next);
    }
    AlphabetSeries total(all, D);
    for (const auto& [l, Fl] : F) {
        total += Fl * AlphabetSeries::from_symfunc(macdonald_Q(l, p, std::max(D, l.size())), all, spec.B.back(), D);
    }
    return total * cached_inverse_normalization(spec);
}

}  // namespace maclab
