#pragma once

#include "mvi/ampute.hpp"
#include "mvi/impute.hpp"
#include "mvi/metrics.hpp"
#include "mvi/mlp.hpp"
#include "mvi/som.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvi {

enum class Strategy { Imputed, Zerofill, Delete, OriginalBaseline };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct ModelSpec {
    enum class Kind { None, Mlp, Som };
    Kind kind = Kind::None;
    MlpTopology mlp;
    SomTopology som;

    /// "none", "mlp:<budget>:6-6-5" or "som:<size>:9x9"
    std::string label() const;
};

struct StudyCase {
    std::size_t index = 0;
    double std_dev = 0.0;
    std::uint64_t study_seed = 0;
    std::optional<AmputationSpec> amputation;  ///< empty for the original baseline
    Strategy strategy = Strategy::Imputed;
    std::optional<ImputationMethod> method;    ///< set only for Strategy::Imputed
    ModelSpec model;

    /// Method column: the imputer name, or the strategy name for implicit strategies.
    std::string method_label() const;
};

struct CaseResult {
    StudyCase study_case;
    std::optional<MetricReport> imputation;
    std::optional<double> f1_macro;
    std::optional<double> achieved_rate;
    std::uint64_t seed = 0;  ///< derived per-case seed
    double wall_seconds = 0.0;
    double fit_seconds = 0.0;
    std::string error;  ///< non-empty when the case failed
    std::vector<std::string> warnings;
};

enum class Factor { Pattern, Rate, Mechanism, Method, Strategy, StdDev, Seed, Model };
inline constexpr Factor kSummaryFactors[] = {Factor::Pattern, Factor::Rate,   Factor::Mechanism, Factor::Method,
                                             Factor::Strategy, Factor::StdDev, Factor::Seed,      Factor::Model};

std::string_view to_string(Factor f);
/// Group value of a result under `f`, e.g. "univariate", "0.5", "knn:5".
std::string factor_value(const CaseResult& r, Factor f);

enum class Metric { Nrmse2, Acc, F1 };
std::string_view to_string(Metric m);
std::optional<double> metric_value(const CaseResult& r, Metric m);

struct FactorSummary {
    Factor key = Factor::Pattern;
    std::string value;
    double mean_metric = 0.0;
    std::size_t n_cases = 0;
};

/// Mean of `metric` per distinct factor value over the results where the metric is
/// defined; groups appear in order of first occurrence.
std::vector<FactorSummary> aggregate_by_factor(const std::vector<CaseResult>& results, Factor key,
                                               Metric metric = Metric::Nrmse2);

}  // namespace mvi
