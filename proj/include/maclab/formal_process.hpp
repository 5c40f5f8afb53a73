#ifndef MACLAB_FORMAL_PROCESS_HPP
#define MACLAB_FORMAL_PROCESS_HPP

#include "maclab/symfunc.hpp"

#include <optional>

namespace maclab {

/// N-level formal process over alphabets A1..AN, B1..BN.
struct ProcessSpec {
    int N = 1;
    int D = 0;
    Params params;
    std::vector<std::string> A;
    std::vector<std::string> B;

    /// Default alphabet names "A1".."AN", "B1".."BN".
    static ProcessSpec make(int N, int D, const Params& params);
    /// All alphabets in the order A1..AN, B1..BN.
    std::vector<std::string> alphabets() const;
};

enum class ObservableKind { O, OHat1 };

struct ObservableEntry {
    int level = 1;  // 1-based
    ObservableKind kind = ObservableKind::O;
    int r = 0;      // ignored for OHat1
    int multiplicity = 1;
};

struct ObservablePlan {
    std::vector<ObservableEntry> entries;
    /// Empty, or one scale constant c_i per level.
    std::vector<Scalar> scales;

    /// O_{r_1} at level 1, ..., O_{r_N} at level N (entries with r = 0 are skipped).
    static ObservablePlan levels(const std::vector<int>& r);
};

/// sum_nu P_{lambda/nu}(A) Q_{mu/nu}(B), as a series over {A, B}.
AlphabetSeries psi(const Partition& lambda, const Partition& mu, const std::string& A, const std::string& B,
                   const Params& params, int D);

/// prod_{alpha <= beta} Pi(A^alpha; B^beta)^{-1}, by formal reciprocal.
AlphabetSeries inverse_normalization(const ProcessSpec& spec);

/// Weight of (lambda^1, ..., lambda^N), exact in degrees <= D.
AlphabetSeries mp_weight(const std::vector<Partition>& lambdas, const ProcessSpec& spec);

/// lim e_r(q^-lambda_1, q^-lambda_2 t, ...) in closed form.
Scalar observable_O(int r, const Partition& lambda, const Params& params);
Scalar observable_Ohat1(const Partition& lambda, const Params& params);

/// Product of the plan's observables (and scale factor) at one level.
Scalar level_factor(const ObservablePlan& plan, int level, const Partition& lambda, const Params& params);

/// Sum over max|lambda^k| <= floor(D/2) of the observables times the weight.
/// `bound` overrides the enumeration bound (used to test its soundness).
AlphabetSeries expectation_lhs(const ObservablePlan& plan, const ProcessSpec& spec,
                               std::optional<int> bound = std::nullopt);

}  // namespace maclab

#endif
