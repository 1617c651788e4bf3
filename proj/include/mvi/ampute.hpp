#pragma once

#include "mvi/tabular.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

enum class MissingPattern { Univariate, Multivariate, Monotone, General };
enum class MissingMechanism { MCAR, MAR, MNAR };

inline constexpr MissingPattern kAllPatterns[] = {MissingPattern::Univariate, MissingPattern::Multivariate,
                                                 MissingPattern::Monotone, MissingPattern::General};
inline constexpr MissingMechanism kAllMechanisms[] = {MissingMechanism::MCAR, MissingMechanism::MAR,
                                                     MissingMechanism::MNAR};
inline const std::vector<double> kDefaultRates{0.1, 0.3, 0.5, 0.7, 0.9};

std::string_view to_string(MissingPattern p);
std::string_view to_string(MissingMechanism m);
MissingPattern parse_pattern(std::string_view s);
MissingMechanism parse_mechanism(std::string_view s);

/// One group of columns amputed together, with the weights of the selection score.
struct PatternDef {
    std::vector<std::size_t> amputed_columns;
    /// One weight per dataset column.
    std::vector<double> weights;
};

struct AmputationSpec {
    MissingPattern pattern = MissingPattern::Univariate;
    MissingMechanism mechanism = MissingMechanism::MCAR;
    double rate = 0.5;
    /// Derived from the dataset schema by ampute() when left empty.
    std::vector<PatternDef> pattern_defs;
    std::uint64_t seed = 0;
    /// Seeds the column choice of derived pattern defs; `seed` is used when unset.
    std::optional<std::uint64_t> layout_seed;
    /// MAR/MNAR: how much likelier the top score decile is amputed than the bottom one.
    double sharpness_ratio = 5.0;
};

struct AmputedDataset {
    Dataset data;  ///< masked cells hold kMissing
    MissingMask mask;
    AmputationSpec spec;
    std::vector<std::string> warnings;
};

/// Cartesian product patterns x mechanisms x rates, in that nesting order.
std::vector<AmputationSpec> build_study_matrix(const std::vector<double>& rates, std::uint64_t seed,
                                               const std::vector<MissingPattern>& patterns = {std::begin(kAllPatterns), std::end(kAllPatterns)},
                                               const std::vector<MissingMechanism>& mechanisms = {std::begin(kAllMechanisms), std::end(kAllMechanisms)});

/// Column groups per pattern over the non-target columns F:
///   Univariate   one column chosen by seed
///   Multivariate contiguous run of ceil(|F|/2) columns, start chosen by seed
///   Monotone     m = min(3, |F|) nested suffixes of F of sizes 1..m
///   General      one def per column of F
/// Weights are 1 on the columns the mechanism may read (MAR: the features not amputed;
/// MNAR: the amputed columns; MCAR: none).
std::vector<PatternDef> derive_pattern_defs(MissingPattern pattern, MissingMechanism mechanism, const Schema& schema,
                                            std::uint64_t seed);

AmputedDataset ampute(const Dataset& ds, const AmputationSpec& spec);

/// Rows with at least one missing cell over all rows.
double achieved_missing_rate(const MissingMask& mask);
/// Missing cells over all cells.
double cell_missing_rate(const MissingMask& mask);

/// Slope of the rank-percentile logistic such that the top decile is exactly
/// `ratio` times as likely to be amputed as the bottom decile at this rate.
double selection_sharpness(double rate, double ratio = 5.0);

/// Row selection probabilities for scores at the given rate; mean equals `rate`.
std::vector<double> selection_probabilities(const std::vector<double>& scores, double rate,
                                            const std::vector<std::size_t>& tie_order, double ratio = 5.0);

}  // namespace mvi
