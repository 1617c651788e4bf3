#pragma once

#include "mvi/results.hpp"
#include "mvi/synth.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mvi {

struct DataSource {
    enum class Kind { Blobs, PersonPseudo, Csv };
    Kind kind = Kind::Blobs;
    std::string path;            ///< Csv
    std::string target = "class";
    /// Blobs / PersonPseudo; the seed is replaced by each study seed and std_dev by each
    /// entry of std_devs.
    BlobSpec blob;
    std::vector<double> std_devs{1.0};
};

struct StudyConfig {
    DataSource data;
    std::vector<double> rates = kDefaultRates;
    std::vector<MissingPattern> patterns{std::begin(kAllPatterns), std::end(kAllPatterns)};
    std::vector<MissingMechanism> mechanisms{std::begin(kAllMechanisms), std::end(kAllMechanisms)};
    double sharpness_ratio = 5.0;

    std::vector<ImputationMethod> methods{ImputationMethod::mean(), ImputationMethod::median(), ImputationMethod::knn(5),
                                          ImputationMethod::mice()};
    std::vector<Strategy> strategies{Strategy::Imputed, Strategy::Zerofill, Strategy::Delete, Strategy::OriginalBaseline};
    bool use_target_in_imputation = false;
    TrainParams imputer_train{};  ///< multiplemlp imputers

    bool mlp_enabled = true;
    std::vector<SizeClass> mlp_budgets{std::begin(kAllSizeClasses), std::end(kAllSizeClasses)};
    LayerCountSemantics layer_count_semantics = LayerCountSemantics::Hidden;
    TrainParams train{};
    bool early_stopping = false;
    std::size_t patience = 10;

    bool som_enabled = true;
    std::vector<SizeClass> som_sizes{std::begin(kAllSizeClasses), std::end(kAllSizeClasses)};
    TrainParams som_train{10, 1, 0.5, 0};

    SplitFractions split{};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::string output_dir = "results";
    std::size_t jobs = 1;

    /// patterns x mechanisms x rates
    std::size_t amputation_case_count() const { return patterns.size() * mechanisms.size() * rates.size(); }
    bool models_enabled() const { return mlp_enabled || som_enabled; }
};

/// Throws InvalidValue on an inconsistent config.
void validate(const StudyConfig& config);

/// YAML text; unknown keys are rejected (UnknownKey), malformed YAML is ParseError.
StudyConfig parse_config(const std::string& yaml_text);
StudyConfig load_config(const std::string& path);

/// Fully defaulted config as YAML; parse_config(canonical_config(c)) reproduces c.
std::string canonical_config(const StudyConfig& config);
/// FNV-1a 64 of canonical_config(config).
std::uint64_t config_hash(const StudyConfig& config);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Every enabled combination of std_dev x seed x amputation case x method/strategy x model,
/// plus one original-data baseline per std_dev x seed x model. Results are ordered by
/// case index regardless of `config.jobs`.
std::vector<CaseResult> run_study(const StudyConfig& config, const ProgressFn& progress = {});

/// Flat result table; columns are fixed (see results_csv_header()).
std::string results_csv_header();
void write_results_csv(std::ostream& out, const std::vector<CaseResult>& results);
void write_timings_csv(std::ostream& out, const std::vector<CaseResult>& results);
void write_summary_csv(std::ostream& out, const std::vector<CaseResult>& results, Factor factor);

/// Writes results.csv, timings.csv, summary_<factor>.csv and manifest.json into `dir`;
/// returns the written file names.
std::vector<std::string> persist_results(const std::vector<CaseResult>& results, const StudyConfig& config,
                                         const std::string& dir);

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

}  // namespace mvi
