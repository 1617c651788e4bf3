#include "mvi/pipeline.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace mvi {

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Imputed: return "imputed";
    case Strategy::Zerofill: return "zerofill";
    case Strategy::Delete: return "delete";
    case Strategy::OriginalBaseline: return "original";
    }
    return "?";
}

Strategy parse_strategy(std::string_view s) {
    for (auto v : {Strategy::Imputed, Strategy::Zerofill, Strategy::Delete, Strategy::OriginalBaseline})
        if (s == to_string(v)) return v;
    throw Error(Errc::InvalidValue, "unknown strategy '" + std::string(s) + "'");
}

std::string ModelSpec::label() const {
    switch (kind) {
    case Kind::None: return "none";
    case Kind::Mlp: return "mlp:" + std::string(to_string(mlp.budget_class)) + ":" + mlp.label();
    case Kind::Som:
        return "som:" + std::string(to_string(som.size_class)) + ":" + std::to_string(som.edge_length) + "x" +
               std::to_string(som.edge_length);
    }
    return "?";
}

std::string StudyCase::method_label() const {
    if (strategy == Strategy::Imputed && method) return method->name();
    return std::string(to_string(strategy));
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string_view to_string(DataSource::Kind k) {
    switch (k) {
    case DataSource::Kind::Blobs: return "blobs";
    case DataSource::Kind::PersonPseudo: return "personpseudo";
    case DataSource::Kind::Csv: return "csv";
    }
    return "?";
}

std::string_view semantics_name(LayerCountSemantics s) { return s == LayerCountSemantics::Hidden ? "hidden" : "total"; }

void check_keys(const YAML::Node& node, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!node.IsMap()) throw Error(Errc::InvalidValue, std::string(where) + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw Error(Errc::UnknownKey, "unknown key '" + key + "' in " + std::string(where));
    }
}

template <class T>
T scalar(const YAML::Node& node, std::string_view key) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw Error(Errc::InvalidValue, "bad value for '" + std::string(key) + "'");
    }
}

template <class T>
std::vector<T> list(const YAML::Node& node, std::string_view key) {
    if (!node.IsSequence()) throw Error(Errc::InvalidValue, "'" + std::string(key) + "' must be a list");
    std::vector<T> out;
    for (const auto& item : node) out.push_back(scalar<T>(item, key));
    return out;
}

template <class T, class F>
std::vector<T> parsed_list(const YAML::Node& node, std::string_view key, F&& parse) {
    std::vector<T> out;
    for (const auto& s : list<std::string>(node, key)) {
        try {
            out.push_back(parse(s));
        } catch (const Error& e) {
            throw Error(Errc::InvalidValue, "'" + std::string(key) + "': " + e.what());
        }
    }
    return out;
}

void read_train(const YAML::Node& node, std::string_view where, TrainParams& p) {
    if (auto v = node["epochs"]) p.epochs = scalar<std::size_t>(v, "epochs");
    if (auto v = node["batch_size"]) p.batch_size = scalar<std::size_t>(v, "batch_size");
    if (auto v = node["learning_rate"]) p.learning_rate = scalar<double>(v, "learning_rate");
    (void)where;
}

void emit_train(YAML::Emitter& e, const TrainParams& p) {
    e << YAML::Key << "epochs" << YAML::Value << p.epochs;
    e << YAML::Key << "batch_size" << YAML::Value << p.batch_size;
    e << YAML::Key << "learning_rate" << YAML::Value << format_double(p.learning_rate);
}

template <class T, class F>
void emit_list(YAML::Emitter& e, std::string_view key, const std::vector<T>& values, F&& name) {
    e << YAML::Key << std::string(key) << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : values) e << std::string(name(v));
    e << YAML::EndSeq;
}

}  // namespace

void validate(const StudyConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(Errc::InvalidValue, msg); };
    if (c.rates.empty()) fail("rates must not be empty");
    for (double r : c.rates)
        if (!(r > 0.0 && r < 1.0)) fail("rate " + format_double(r) + " outside (0, 1)");
    if (c.patterns.empty() || c.mechanisms.empty()) fail("patterns and mechanisms must not be empty");
    if (!(c.sharpness_ratio > 1.0)) fail("sharpness_ratio must exceed 1");
    if (c.seeds.empty()) fail("seeds must not be empty");
    if (c.strategies.empty()) fail("at least one strategy is required");
    const bool imputed = std::find(c.strategies.begin(), c.strategies.end(), Strategy::Imputed) != c.strategies.end();
    if (imputed && c.methods.empty()) fail("strategy 'imputed' needs at least one method");
    for (const auto& m : c.methods) {
        validate(m);
        if (m.kind == ImputationMethod::Kind::Zerofill || m.kind == ImputationMethod::Kind::Delete)
            fail("zerofill and delete are strategies, not methods");
    }
    for (auto s : c.strategies)
        if (s != Strategy::Imputed && !c.models_enabled())
            fail("strategy '" + std::string(to_string(s)) + "' needs mlp or som models");
    if (c.mlp_enabled && c.mlp_budgets.empty()) fail("mlp.budgets must not be empty");
    if (c.som_enabled && c.som_sizes.empty()) fail("som.sizes must not be empty");
    if (c.data.std_devs.empty()) fail("data.std_devs must not be empty");
    for (double s : c.data.std_devs)
        if (!(s > 0.0)) fail("std_dev must be positive");
    if (c.data.kind == DataSource::Kind::Csv && c.data.path.empty()) fail("data.path is required for csv sources");
    if (c.data.kind != DataSource::Kind::Csv) {
        BlobSpec b = c.data.blob;
        b.std_dev = c.data.std_devs.front();
        try {
            validate(b);
        } catch (const Error& e) {
            fail(e.what());
        }
        if (c.data.kind == DataSource::Kind::PersonPseudo && b.n_numeric_features != 6)
            fail("personpseudo uses exactly 6 features");
    }
    if (c.jobs < 1) fail("jobs must be >= 1");
    if (c.patience < 1) fail("mlp.patience must be >= 1");
    const double fsum = c.split.train + c.split.test + c.split.validation;
    if (!(c.split.train > 0 && c.split.test > 0 && c.split.validation > 0) || std::abs(fsum - 1.0) > 1e-9)
        fail("split fractions must be positive and sum to 1");
    try {
        validate(c.train);
        validate(c.som_train);
        validate(c.imputer_train);
    } catch (const Error& e) {
        fail(e.what());
    }
}

StudyConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw Error(Errc::ParseError, e.what());
    }
    StudyConfig c;
    if (root.IsNull()) {
        validate(c);
        return c;
    }
    check_keys(root, "config",
               {"data", "rates", "patterns", "mechanisms", "sharpness_ratio", "methods", "strategies",
                "use_target_in_imputation", "imputer_train", "mlp", "som", "split", "seeds", "output_dir", "jobs"});

    if (auto d = root["data"]) {
        check_keys(d, "data", {"source", "path", "target", "n_rows", "n_features", "n_clusters", "std_devs", "value_range"});
        if (auto v = d["source"]) {
            const auto s = scalar<std::string>(v, "source");
            if (s == "blobs") c.data.kind = DataSource::Kind::Blobs;
            else if (s == "personpseudo") c.data.kind = DataSource::Kind::PersonPseudo;
            else if (s == "csv") c.data.kind = DataSource::Kind::Csv;
            else throw Error(Errc::InvalidValue, "unknown data source '" + s + "'");
        }
        if (auto v = d["path"]) c.data.path = scalar<std::string>(v, "path");
        if (auto v = d["target"]) c.data.target = scalar<std::string>(v, "target");
        if (auto v = d["n_rows"]) c.data.blob.n_rows = scalar<std::size_t>(v, "n_rows");
        if (auto v = d["n_features"]) c.data.blob.n_numeric_features = scalar<std::size_t>(v, "n_features");
        if (auto v = d["n_clusters"]) c.data.blob.n_clusters = scalar<std::size_t>(v, "n_clusters");
        if (auto v = d["std_devs"]) c.data.std_devs = list<double>(v, "std_devs");
        if (auto v = d["value_range"]) {
            auto r = list<double>(v, "value_range");
            if (r.size() != 2 || !(r[0] < r[1])) throw Error(Errc::InvalidValue, "value_range must be [low, high]");
            c.data.blob.value_ranges.assign(c.data.blob.n_numeric_features, {r[0], r[1]});
        }
    }
    if (!c.data.blob.value_ranges.empty())
        c.data.blob.value_ranges.resize(c.data.blob.n_numeric_features, c.data.blob.value_ranges.front());

    if (auto v = root["rates"]) c.rates = list<double>(v, "rates");
    if (auto v = root["patterns"]) c.patterns = parsed_list<MissingPattern>(v, "patterns", parse_pattern);
    if (auto v = root["mechanisms"]) c.mechanisms = parsed_list<MissingMechanism>(v, "mechanisms", parse_mechanism);
    if (auto v = root["sharpness_ratio"]) c.sharpness_ratio = scalar<double>(v, "sharpness_ratio");
    if (auto v = root["methods"]) c.methods = parsed_list<ImputationMethod>(v, "methods", parse_method);
    if (auto v = root["strategies"]) c.strategies = parsed_list<Strategy>(v, "strategies", parse_strategy);
    if (auto v = root["use_target_in_imputation"]) c.use_target_in_imputation = scalar<bool>(v, "use_target_in_imputation");
    if (auto v = root["imputer_train"]) {
        check_keys(v, "imputer_train", {"epochs", "batch_size", "learning_rate"});
        read_train(v, "imputer_train", c.imputer_train);
    }
    if (auto m = root["mlp"]) {
        check_keys(m, "mlp", {"enabled", "budgets", "layer_count_semantics", "epochs", "batch_size", "learning_rate",
                              "early_stopping", "patience"});
        if (auto v = m["enabled"]) c.mlp_enabled = scalar<bool>(v, "mlp.enabled");
        if (auto v = m["budgets"]) c.mlp_budgets = parsed_list<SizeClass>(v, "mlp.budgets", parse_size_class);
        if (auto v = m["layer_count_semantics"]) {
            const auto s = scalar<std::string>(v, "layer_count_semantics");
            if (s == "hidden") c.layer_count_semantics = LayerCountSemantics::Hidden;
            else if (s == "total") c.layer_count_semantics = LayerCountSemantics::Total;
            else throw Error(Errc::InvalidValue, "layer_count_semantics must be hidden or total");
        }
        read_train(m, "mlp", c.train);
        if (auto v = m["early_stopping"]) c.early_stopping = scalar<bool>(v, "mlp.early_stopping");
        if (auto v = m["patience"]) c.patience = scalar<std::size_t>(v, "mlp.patience");
    }
    if (auto s = root["som"]) {
        check_keys(s, "som", {"enabled", "sizes", "epochs", "learning_rate"});
        if (auto v = s["enabled"]) c.som_enabled = scalar<bool>(v, "som.enabled");
        if (auto v = s["sizes"]) c.som_sizes = parsed_list<SizeClass>(v, "som.sizes", parse_size_class);
        read_train(s, "som", c.som_train);
    }
    if (auto s = root["split"]) {
        check_keys(s, "split", {"train", "test", "validation"});
        if (auto v = s["train"]) c.split.train = scalar<double>(v, "split.train");
        if (auto v = s["test"]) c.split.test = scalar<double>(v, "split.test");
        if (auto v = s["validation"]) c.split.validation = scalar<double>(v, "split.validation");
    }
    if (auto v = root["seeds"]) c.seeds = list<std::uint64_t>(v, "seeds");
    if (auto v = root["output_dir"]) c.output_dir = scalar<std::string>(v, "output_dir");
    if (auto v = root["jobs"]) c.jobs = scalar<std::size_t>(v, "jobs");
    validate(c);
    return c;
}

StudyConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_config(const StudyConfig& c) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "source" << YAML::Value << std::string(to_string(c.data.kind));
    if (c.data.kind == DataSource::Kind::Csv) {
        e << YAML::Key << "path" << YAML::Value << c.data.path;
        e << YAML::Key << "target" << YAML::Value << c.data.target;
    } else {
        e << YAML::Key << "n_rows" << YAML::Value << c.data.blob.n_rows;
        e << YAML::Key << "n_features" << YAML::Value << c.data.blob.n_numeric_features;
        e << YAML::Key << "n_clusters" << YAML::Value << c.data.blob.n_clusters;
        if (!c.data.blob.value_ranges.empty())
            e << YAML::Key << "value_range" << YAML::Value << YAML::Flow << YAML::BeginSeq
              << format_double(c.data.blob.value_ranges.front().first)
              << format_double(c.data.blob.value_ranges.front().second) << YAML::EndSeq;
    }
    emit_list(e, "std_devs", c.data.std_devs, format_double);
    e << YAML::EndMap;
    emit_list(e, "rates", c.rates, format_double);
    emit_list(e, "patterns", c.patterns, [](MissingPattern p) { return to_string(p); });
    emit_list(e, "mechanisms", c.mechanisms, [](MissingMechanism m) { return to_string(m); });
    e << YAML::Key << "sharpness_ratio" << YAML::Value << format_double(c.sharpness_ratio);
    emit_list(e, "methods", c.methods, [](const ImputationMethod& m) { return m.name(); });
    emit_list(e, "strategies", c.strategies, [](Strategy s) { return to_string(s); });
    e << YAML::Key << "use_target_in_imputation" << YAML::Value << c.use_target_in_imputation;
    e << YAML::Key << "imputer_train" << YAML::Value << YAML::BeginMap;
    emit_train(e, c.imputer_train);
    e << YAML::EndMap;
    e << YAML::Key << "mlp" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "enabled" << YAML::Value << c.mlp_enabled;
    emit_list(e, "budgets", c.mlp_budgets, [](SizeClass s) { return to_string(s); });
    e << YAML::Key << "layer_count_semantics" << YAML::Value << std::string(semantics_name(c.layer_count_semantics));
    emit_train(e, c.train);
    e << YAML::Key << "early_stopping" << YAML::Value << c.early_stopping;
    e << YAML::Key << "patience" << YAML::Value << c.patience;
    e << YAML::EndMap;
    e << YAML::Key << "som" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "enabled" << YAML::Value << c.som_enabled;
    emit_list(e, "sizes", c.som_sizes, [](SizeClass s) { return to_string(s); });
    e << YAML::Key << "epochs" << YAML::Value << c.som_train.epochs;
    e << YAML::Key << "learning_rate" << YAML::Value << format_double(c.som_train.learning_rate);
    e << YAML::EndMap;
    e << YAML::Key << "split" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "train" << YAML::Value << format_double(c.split.train);
    e << YAML::Key << "test" << YAML::Value << format_double(c.split.test);
    e << YAML::Key << "validation" << YAML::Value << format_double(c.split.validation);
    e << YAML::EndMap;
    emit_list(e, "seeds", c.seeds, [](std::uint64_t s) { return std::to_string(s); });
    e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    e << YAML::Key << "jobs" << YAML::Value << c.jobs;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::uint64_t config_hash(const StudyConfig& config) {
    // output_dir and jobs do not change results
    StudyConfig c = config;
    c.output_dir.clear();
    c.jobs = 1;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Study

namespace {

using Clock = std::chrono::steady_clock;

struct ModelData {
    Matrix x;
    std::vector<std::size_t> y;
};

struct Environment {
    std::size_t std_index = 0;
    double std_dev = 0.0;
    std::uint64_t seed = 0;
    Dataset original;
    SplitIndices split;
    std::vector<AmputationSpec> specs;
    std::vector<AmputedDataset> amputed;
    std::vector<std::string> amputation_errors;
    std::vector<ModelSpec> models;
    std::size_t classes = 0;
};

struct Unit {
    std::size_t env = 0;
    std::optional<std::size_t> amp;  ///< empty for the baseline
    Strategy strategy = Strategy::Imputed;
    std::optional<ImputationMethod> method;
    std::size_t first_case = 0;
};

Dataset load_source(const StudyConfig& c, double std_dev, std::uint64_t seed) {
    switch (c.data.kind) {
    case DataSource::Kind::Blobs: {
        BlobSpec b = c.data.blob;
        b.std_dev = std_dev;
        b.seed = seed;
        return generate_blobs(b);
    }
    case DataSource::Kind::PersonPseudo:
        return generate_person_pseudo(c.data.blob.n_rows, c.data.blob.n_clusters, std_dev, seed).data;
    case DataSource::Kind::Csv:
        if (!std::filesystem::exists(c.data.path))
            throw Error(Errc::DataSourceUnavailable, "data file '" + c.data.path + "' not found");
        try {
            return load_csv(c.data.path, c.data.target).data;
        } catch (const Error& e) {
            throw Error(Errc::DataSourceUnavailable, e.what());
        }
    }
    throw Error(Errc::DataSourceUnavailable, "unknown data source");
}

std::vector<ModelSpec> model_grid(const StudyConfig& c, std::size_t inputs, std::size_t classes, std::size_t train_rows) {
    std::vector<ModelSpec> out;
    if (c.mlp_enabled)
        for (const auto& topo : enumerate_mlp_topologies(inputs, classes, c.layer_count_semantics))
            if (std::find(c.mlp_budgets.begin(), c.mlp_budgets.end(), topo.budget_class) != c.mlp_budgets.end())
                out.push_back({ModelSpec::Kind::Mlp, topo, {}});
    if (c.som_enabled)
        for (auto size : c.som_sizes) {
            ModelSpec m{ModelSpec::Kind::Som, {}, {inputs, som_dimensions(std::max<std::size_t>(1, train_rows), size), size}};
            out.push_back(m);
        }
    return out;
}

// Features in [0, 1]: numeric columns via `params`, categorical ones as code / (levels - 1).
// Missing cells become 0.
ModelData model_data(const Dataset& ds, const NormParams& params, const std::vector<std::size_t>& rows,
                     const std::vector<std::size_t>& levels) {
    const auto features = ds.feature_columns();
    const auto target = ds.target_index();
    ModelData out{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size())),
                  std::vector<std::size_t>(rows.size())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < features.size(); ++j) {
            const std::size_t c = features[j];
            double v = ds.at(rows[i], c);
            if (!is_missing(v)) {
                if (ds.is_categorical(c)) {
                    v = levels[c] > 1 ? v / static_cast<double>(levels[c] - 1) : 0.0;
                } else {
                    const auto& r = params.columns.at(c);
                    v = r.max > r.min ? (v - r.min) / (r.max - r.min) : 0.0;
                }
            }
            out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = is_missing(v) ? 0.0 : v;
        }
        out.y[i] = static_cast<std::size_t>(ds.at(rows[i], target));
    }
    return out;
}

double train_and_score(const ModelSpec& model, const ModelData& train, const ModelData& test, const ModelData& val,
                       std::size_t classes, const StudyConfig& c, std::uint64_t seed) {
    if (train.y.empty()) throw Error(Errc::EmptyInput, "no training rows");
    if (test.y.empty()) throw Error(Errc::EmptyInput, "no test rows");
    std::vector<std::size_t> predicted;
    if (model.kind == ModelSpec::Kind::Mlp) {
        TrainParams p = c.train;
        p.seed = seed;
        std::optional<ValidationSet> vs;
        if (c.early_stopping && !val.y.empty()) vs = ValidationSet{val.x, one_hot(val.y, classes), c.patience};
        const auto m = train_mlp(model.mlp, Task::Classification, train.x, one_hot(train.y, classes), p, vs);
        predicted = predict_classes(m, test.x);
    } else {
        TrainParams p = c.som_train;
        p.seed = seed;
        auto m = train_som(model.som, train.x, p);
        predicted = som_classify(m, train.x, train.y, test.x);
    }
    return f1_macro(test.y, predicted, classes);
}

std::vector<std::size_t> category_levels(const Dataset& ds) {
    std::vector<std::size_t> levels(ds.cols(), 0);
    for (std::size_t c = 0; c < ds.cols(); ++c)
        if (ds.is_categorical(c)) levels[c] = ds.category_count(c);
    return levels;
}

std::vector<std::size_t> keep_complete(const Dataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out;
    for (std::size_t r : rows) {
        auto row = ds.row(r);
        if (std::none_of(row.begin(), row.end(), is_missing)) out.push_back(r);
    }
    return out;
}

std::size_t unit_rows(const Environment& env) { return std::max<std::size_t>(1, env.models.size()); }

std::vector<CaseResult> run_unit(const StudyConfig& c, const Environment& env, const Unit& u) {
    const auto unit_start = Clock::now();
    std::vector<CaseResult> rows(unit_rows(env));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        r.study_case.index = u.first_case + i;
        r.study_case.std_dev = env.std_dev;
        r.study_case.study_seed = env.seed;
        if (u.amp) r.study_case.amputation = env.specs[*u.amp];
        r.study_case.strategy = u.strategy;
        r.study_case.method = u.method;
        if (!env.models.empty()) r.study_case.model = env.models[i];
        r.seed = derive_seed(env.seed, {r.study_case.index});
    }
    auto fail_all = [&](const std::string& what) {
        for (auto& r : rows) r.error = what;
    };

    const auto levels = category_levels(env.original);
    // Data the models see (may hold NaN under zerofill), the rows to use, and the fit rows.
    Dataset model_input;
    SplitIndices split = env.split;
    std::optional<MetricReport> report;
    std::vector<std::string> warnings;
    double fit_seconds = 0.0;
    std::optional<double> achieved;

    try {
        if (!u.amp) {
            model_input = env.original;
        } else {
            if (!env.amputation_errors[*u.amp].empty()) throw Error(Errc::InvalidSpec, env.amputation_errors[*u.amp]);
            const AmputedDataset& amp = env.amputed[*u.amp];
            achieved = achieved_missing_rate(amp.mask);
            warnings = amp.warnings;
            switch (u.strategy) {
            case Strategy::Imputed: {
                ImputeOptions opts;
                opts.use_target_in_imputation = c.use_target_in_imputation;
                opts.mlp_params = c.imputer_train;
                opts.seed = derive_seed(env.seed, {u.first_case, 0x1a7});
                auto outcome = impute(amp, *u.method, opts);
                fit_seconds = outcome.fit_seconds;
                warnings.insert(warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
                report = evaluate_imputation(env.original, outcome.data, amp.mask);
                model_input = std::move(outcome.data);
                break;
            }
            case Strategy::Zerofill:
            case Strategy::Delete:
                model_input = amp.data;
                break;
            case Strategy::OriginalBaseline:
                model_input = env.original;
                break;
            }
            if (u.strategy == Strategy::Delete) {
                split.train = keep_complete(model_input, split.train);
                split.test = keep_complete(model_input, split.test);
                split.validation = keep_complete(model_input, split.validation);
                if (split.train.empty()) throw Error(Errc::NoCompleteRows, "no complete training rows remain");
            }
        }
    } catch (const std::exception& e) {
        fail_all(e.what());
    }

    if (rows.front().error.empty() && !env.models.empty()) {
        try {
            const auto params = normalize(model_input.select_rows(split.train)).params;
            if (u.strategy == Strategy::Zerofill) {
                // Zero in normalized space, i.e. the training minimum in raw units.
                Dataset filled = model_input;
                for (std::size_t r = 0; r < filled.rows(); ++r)
                    for (std::size_t col = 0; col < filled.cols(); ++col)
                        if (is_missing(filled.at(r, col)))
                            filled.at(r, col) = filled.is_categorical(col) ? 0.0 : params.columns.at(col).min;
                report = evaluate_imputation(env.original, filled, env.amputed[*u.amp].mask);
            }
            const auto train = model_data(model_input, params, split.train, levels);
            const auto test = model_data(model_input, params, split.test, levels);
            const auto val = model_data(model_input, params, split.validation, levels);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto t0 = Clock::now();
                try {
                    // Same initial weights for a model across all strategies and cases of this seed.
                    const std::uint64_t model_seed = derive_seed(env.seed, {0x30de1, i});
                    rows[i].f1_macro = train_and_score(env.models[i], train, test, val, env.classes, c, model_seed);
                } catch (const std::exception& e) {
                    rows[i].error = e.what();
                }
                rows[i].wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            }
        } catch (const std::exception& e) {
            fail_all(e.what());
        }
    }

    const double unit_seconds = std::chrono::duration<double>(Clock::now() - unit_start).count();
    for (auto& r : rows) {
        r.imputation = report;
        r.achieved_rate = achieved;
        r.fit_seconds = fit_seconds;
        r.warnings = warnings;
        if (env.models.empty()) r.wall_seconds = unit_seconds;
        if (report) r.warnings.insert(r.warnings.end(), report->warnings.begin(), report->warnings.end());
    }
    return rows;
}

}  // namespace

std::vector<CaseResult> run_study(const StudyConfig& config, const ProgressFn& progress) {
    validate(config);
    const std::vector<double> std_devs =
        config.data.kind == DataSource::Kind::Csv ? std::vector<double>{0.0} : config.data.std_devs;

    std::vector<Environment> envs;
    for (std::size_t si = 0; si < std_devs.size(); ++si)
        for (std::uint64_t seed : config.seeds) {
            Environment env;
            env.std_index = si;
            env.std_dev = std_devs[si];
            env.seed = seed;
            env.original = load_source(config, std_devs[si], seed);
            if (env.original.has_missing())
                throw Error(Errc::DataSourceUnavailable, "the input data must be complete");
            env.split = split_dataset(env.original, config.split, derive_seed(seed, {si, 0x5b1}));
            env.specs = build_study_matrix(config.rates, derive_seed(seed, {si, 0xa11}), config.patterns, config.mechanisms);
            for (auto& spec : env.specs) {
                spec.sharpness_ratio = config.sharpness_ratio;
                try {
                    env.amputed.push_back(ampute(env.original, spec));
                    env.specs[env.amputed.size() - 1] = env.amputed.back().spec;
                    env.amputation_errors.emplace_back();
                } catch (const Error& e) {
                    env.amputed.emplace_back();
                    env.amputation_errors.emplace_back(e.what());
                }
            }
            env.classes = std::max<std::size_t>(2, env.original.category_count(env.original.target_index()));
            if (config.models_enabled())
                env.models = model_grid(config, env.original.feature_columns().size(), env.classes, env.split.train.size());
            envs.push_back(std::move(env));
        }

    std::vector<Unit> units;
    std::size_t next_case = 0;
    auto add_unit = [&](Unit u) {
        u.first_case = next_case;
        next_case += unit_rows(envs[u.env]);
        units.push_back(std::move(u));
    };
    for (std::size_t e = 0; e < envs.size(); ++e) {
        for (auto s : config.strategies)
            if (s == Strategy::OriginalBaseline) add_unit({e, std::nullopt, s, std::nullopt, 0});
        for (std::size_t a = 0; a < envs[e].specs.size(); ++a)
            for (auto s : config.strategies) {
                if (s == Strategy::OriginalBaseline) continue;
                if (s == Strategy::Imputed) {
                    for (const auto& m : config.methods) add_unit({e, a, s, m, 0});
                } else {
                    add_unit({e, a, s, std::nullopt, 0});
                }
            }
    }

    std::vector<std::vector<CaseResult>> slots(units.size());
    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < units.size(); i = next++) {
            slots[i] = run_unit(config, envs[units[i].env], units[i]);
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(++done, units.size());
            }
        }
    };
    const std::size_t jobs = std::min<std::size_t>(config.jobs, std::max<std::size_t>(1, units.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<CaseResult> results;
    results.reserve(next_case);
    for (auto& s : slots)
        for (auto& r : s) results.push_back(std::move(r));
    return results;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? std::string(sep) : std::string()) + parts[i];
    return out;
}

}  // namespace

std::string results_csv_header() {
    return "case_index,std_dev,study_seed,case_seed,pattern,mechanism,rate,strategy,method,model,achieved_rate,"
           "cell_missing,mean_nrmse2,mean_acc,f1_macro,column_metrics,warnings,error";
}

void write_results_csv(std::ostream& out, const std::vector<CaseResult>& results) {
    out << results_csv_header() << '\n';
    for (const auto& r : results) {
        const auto& sc = r.study_case;
        std::vector<std::string> f;
        f.push_back(std::to_string(sc.index));
        f.push_back(format_double(sc.std_dev));
        f.push_back(std::to_string(sc.study_seed));
        f.push_back(std::to_string(r.seed));
        f.push_back(sc.amputation ? std::string(to_string(sc.amputation->pattern)) : "");
        f.push_back(sc.amputation ? std::string(to_string(sc.amputation->mechanism)) : "");
        f.push_back(sc.amputation ? format_double(sc.amputation->rate) : "");
        f.push_back(std::string(to_string(sc.strategy)));
        f.push_back(sc.method_label());
        f.push_back(sc.model.label());
        f.push_back(opt(r.achieved_rate));
        std::size_t cells = 0;
        std::vector<std::string> per_column;
        if (r.imputation)
            for (const auto& m : r.imputation->columns) {
                cells += m.cells;
                if (m.nrmse2) per_column.push_back(m.name + "=" + format_double(*m.nrmse2));
                if (m.acc) per_column.push_back(m.name + "=" + format_double(*m.acc));
            }
        f.push_back(r.imputation ? std::to_string(cells) : "");
        f.push_back(r.imputation ? opt(r.imputation->mean_nrmse2) : "");
        f.push_back(r.imputation ? opt(r.imputation->mean_acc) : "");
        f.push_back(opt(r.f1_macro));
        f.push_back(join(per_column, ";"));
        f.push_back(join(r.warnings, "|"));
        f.push_back(r.error);
        for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << csv_field(f[i]);
        out << '\n';
    }
}

void write_timings_csv(std::ostream& out, const std::vector<CaseResult>& results) {
    out << "case_index,wall_seconds,fit_seconds\n";
    for (const auto& r : results)
        out << r.study_case.index << ',' << format_double(r.wall_seconds) << ',' << format_double(r.fit_seconds) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<CaseResult>& results, Factor factor) {
    out << "factor,value,metric,mean,n_cases\n";
    if (results.empty()) return;
    for (auto metric : {Metric::Nrmse2, Metric::Acc, Metric::F1})
        for (const auto& s : aggregate_by_factor(results, factor, metric))
            out << to_string(factor) << ',' << csv_field(s.value) << ',' << to_string(metric) << ','
                << format_double(s.mean_metric) << ',' << s.n_cases << '\n';
}

std::vector<std::string> persist_results(const std::vector<CaseResult>& results, const StudyConfig& config,
                                         const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir + ": " + ec.message());

    std::vector<std::string> files;
    auto write = [&](const std::string& name, auto&& body) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) throw Error(Errc::IoError, "cannot write " + (fs::path(dir) / name).string());
        body(out);
        if (!out) throw Error(Errc::IoError, "write failed for " + name);
        files.push_back(name);
    };
    write("results.csv", [&](std::ostream& o) { write_results_csv(o, results); });
    write("timings.csv", [&](std::ostream& o) { write_timings_csv(o, results); });
    for (auto f : kSummaryFactors)
        write("summary_" + std::string(to_string(f)) + ".csv", [&](std::ostream& o) { write_summary_csv(o, results, f); });

    std::size_t errors = 0;
    for (const auto& r : results) errors += r.error.empty() ? 0 : 1;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));

    nlohmann::ordered_json m;
    m["tool"] = "mvi";
    m["version"] = kVersion;
    m["results_schema_version"] = kResultsSchemaVersion;
    m["config_hash"] = hash;
    m["seeds"] = config.seeds;
    m["case_count"] = results.size();
    m["error_count"] = errors;
    m["config"] = canonical_config(config);
    m["notes"] = {
        "missing rate is row-wise: share of records with at least one missing cell",
        "amputation is applied to the full dataset before the train/test/validation split",
        "imputers are fit on all rows; imputation metrics cover every imputed cell",
        "model normalization is fit on the training split",
        "zerofill writes 0 in normalized model space (training minimum in raw units)",
        "multivariate pattern amputes ceil(|F|/2) contiguous non-target columns; monotone uses min(3, |F|) nested suffixes of sizes 1..m",
        std::string("target column ") + (config.use_target_in_imputation ? "is" : "is not") + " used as an imputer input",
    };
    files.push_back("manifest.json");
    m["files"] = files;
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write manifest.json");
    out << m.dump(2) << '\n';
    return files;
}

}  // namespace mvi
