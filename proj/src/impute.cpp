#include "mvi/impute.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

namespace mvi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t parse_count(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(Errc::InvalidValue, "bad " + std::string(what) + " '" + std::string(text) + "'");
    return v;
}

// Per-column affine map into [0, 1]: min-max for numeric columns, code / (levels - 1)
// for categorical ones. Fit on the observed cells of `rows`.
struct Scaler {
    std::vector<double> offset, scale, levels;

    static Scaler fit(const Dataset& ds, const std::vector<std::size_t>& rows) {
        Scaler s;
        s.offset.assign(ds.cols(), 0.0);
        s.scale.assign(ds.cols(), 1.0);
        s.levels.assign(ds.cols(), 0.0);
        for (std::size_t c = 0; c < ds.cols(); ++c) {
            if (ds.is_categorical(c)) {
                const double l = static_cast<double>(ds.category_count(c));
                s.levels[c] = l;
                s.scale[c] = l > 1.0 ? 1.0 / (l - 1.0) : 1.0;
                continue;
            }
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t r : rows) {
                double v = ds.at(r, c);
                if (is_missing(v)) continue;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo > hi) continue;
            s.offset[c] = lo;
            s.scale[c] = hi > lo ? 1.0 / (hi - lo) : 1.0;
        }
        return s;
    }

    double forward(std::size_t c, double v) const { return (v - offset[c]) * scale[c]; }

    double inverse(std::size_t c, double v) const {
        double raw = v / scale[c] + offset[c];
        if (levels[c] > 0.0) raw = std::clamp(std::round(raw), 0.0, std::max(0.0, levels[c] - 1.0));
        return raw;
    }
};

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
}

std::vector<std::size_t> complete_rows(const Dataset& ds) {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        auto row = ds.row(r);
        if (std::none_of(row.begin(), row.end(), is_missing)) out.push_back(r);
    }
    return out;
}

void require_observed(const Dataset& ds, std::size_t c) {
    for (std::size_t r = 0; r < ds.rows(); ++r)
        if (!is_missing(ds.at(r, c))) return;
    throw Error(Errc::AllMissingColumn, "column '" + ds.column(c).name + "' has no observed value");
}

// Mean (numeric) or mode (categorical) over the observed cells of `rows`.
double center_value(const Dataset& ds, std::size_t c, const std::vector<std::size_t>& rows) {
    std::vector<double> v;
    for (std::size_t r : rows)
        if (!is_missing(ds.at(r, c))) v.push_back(ds.at(r, c));
    if (v.empty()) throw Error(Errc::AllMissingColumn, "column '" + ds.column(c).name + "' has no observed value");
    if (ds.is_categorical(c)) return mode_code(v);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ImputationOutcome start_outcome(const AmputedDataset& amp, ImputationMethod method) {
    ImputationOutcome out;
    out.data = amp.data;
    out.kept_rows = all_rows(amp.data.rows());
    out.method = std::move(method);
    return out;
}

bool usable_input(const Dataset& ds, std::size_t c, const ImputeOptions& options) {
    return !ds.column(c).is_target || options.use_target_in_imputation;
}

}  // namespace

std::string ImputationMethod::name() const {
    switch (kind) {
    case Kind::Mean: return "mean";
    case Kind::Median: return "median";
    case Kind::Knn: return "knn:" + std::to_string(k);
    case Kind::Mice: return max_iter == 10 ? std::string("mice") : "mice:" + std::to_string(max_iter);
    case Kind::MultipleMlp: {
        std::string s = "multiplemlp:";
        for (std::size_t i = 0; i < hidden_layers.size(); ++i) s += (i ? "-" : "") + std::to_string(hidden_layers[i]);
        return s;
    }
    case Kind::Zerofill: return "zerofill";
    case Kind::Delete: return "delete";
    }
    return "?";
}

ImputationMethod parse_method(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::string head = s, arg;
    if (auto pos = s.find_first_of(":_"); pos != std::string::npos) {
        head = s.substr(0, pos);
        arg = s.substr(pos + 1);
    }
    ImputationMethod m;
    if (head == "mean" && arg.empty()) m = ImputationMethod::mean();
    else if (head == "median" && arg.empty()) m = ImputationMethod::median();
    else if (head == "zerofill" && arg.empty()) m = ImputationMethod::zerofill();
    else if (head == "delete" && arg.empty()) m = ImputationMethod::remove();
    else if (head == "knn" || head == "knni") m = ImputationMethod::knn(arg.empty() ? 5 : parse_count(arg, "k"));
    else if (head == "mice") m = ImputationMethod::mice(arg.empty() ? 10 : parse_count(arg, "iteration count"));
    else if (head == "multiplemlp") {
        std::vector<std::size_t> hidden;
        std::size_t start = 0;
        while (start <= arg.size() && !arg.empty()) {
            auto end = arg.find_first_of("-_", start);
            if (end == std::string::npos) end = arg.size();
            hidden.push_back(parse_count(std::string_view(arg).substr(start, end - start), "layer width"));
            start = end + 1;
        }
        m = ImputationMethod::multiple_mlp(std::move(hidden));
    } else {
        throw Error(Errc::InvalidValue, "unknown imputation method '" + std::string(text) + "'");
    }
    validate(m);
    return m;
}

void validate(const ImputationMethod& m) {
    using K = ImputationMethod::Kind;
    if (m.kind == K::Knn && m.k < 1) throw Error(Errc::InvalidValue, "knn needs k >= 1");
    if (m.kind == K::Mice && m.max_iter < 1) throw Error(Errc::InvalidValue, "mice needs max_iter >= 1");
    if (m.kind == K::Mice && !(m.tol >= 0.0)) throw Error(Errc::InvalidValue, "mice needs tol >= 0");
    if (m.kind == K::MultipleMlp) {
        if (m.hidden_layers.empty()) throw Error(Errc::InvalidValue, "multiplemlp needs at least one hidden layer");
        for (auto w : m.hidden_layers)
            if (w == 0) throw Error(Errc::InvalidValue, "hidden layer width must be >= 1");
    }
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw Error(Errc::EmptyInput, "median of an empty list");
    const auto mid = static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    return values[static_cast<std::size_t>(mid)];
}

double mode_code(const std::vector<double>& codes) {
    if (codes.empty()) throw Error(Errc::EmptyInput, "mode of an empty list");
    std::map<double, std::size_t> counts;
    for (double c : codes) ++counts[c];
    double best = counts.begin()->first;
    std::size_t best_n = 0;
    for (const auto& [code, n] : counts)
        if (n > best_n) {
            best = code;
            best_n = n;
        }
    return best;
}

AmputedDataset as_amputed(const Dataset& data_with_missing) {
    AmputedDataset amp;
    amp.data = data_with_missing;
    amp.mask = MissingMask::from_dataset(data_with_missing);
    return amp;
}

ImputationOutcome impute_simple(const AmputedDataset& amp, SimpleStrategy strategy) {
    const auto t0 = Clock::now();
    ImputationMethod method = strategy == SimpleStrategy::Mean     ? ImputationMethod::mean()
                              : strategy == SimpleStrategy::Median ? ImputationMethod::median()
                                                                   : ImputationMethod::zerofill();
    auto out = start_outcome(amp, method);
    Dataset& ds = out.data;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        std::vector<double> observed;
        bool any_missing = false;
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            if (is_missing(ds.at(r, c))) any_missing = true;
            else observed.push_back(ds.at(r, c));
        }
        if (!any_missing) continue;
        double fill = 0.0;
        if (strategy != SimpleStrategy::Zerofill) {
            if (observed.empty()) throw Error(Errc::AllMissingColumn, "column '" + ds.column(c).name + "' has no observed value");
            if (ds.is_categorical(c)) fill = mode_code(observed);
            else if (strategy == SimpleStrategy::Mean)
                fill = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
            else fill = lower_median(std::move(observed));
        }
        for (std::size_t r = 0; r < ds.rows(); ++r)
            if (is_missing(ds.at(r, c))) ds.at(r, c) = fill;
    }
    out.fit_seconds = seconds_since(t0);
    return out;
}

ImputationOutcome delete_incomplete(const AmputedDataset& amp) {
    const auto t0 = Clock::now();
    auto keep = complete_rows(amp.data);
    if (keep.empty()) throw Error(Errc::NoCompleteRows, "every row has a missing cell");
    ImputationOutcome out;
    out.data = amp.data.select_rows(keep);
    out.kept_rows = std::move(keep);
    out.method = ImputationMethod::remove();
    out.fit_seconds = seconds_since(t0);
    return out;
}

ImputationOutcome impute_knn(const AmputedDataset& amp, std::size_t k, const ImputeOptions& options) {
    const auto t0 = Clock::now();
    validate(ImputationMethod::knn(k));
    auto out = start_outcome(amp, ImputationMethod::knn(k));
    const Dataset& src = amp.data;
    const auto donors = complete_rows(src);
    if (donors.size() == src.rows()) {
        out.fit_seconds = seconds_since(t0);
        return out;
    }
    if (donors.empty()) throw Error(Errc::NoDonors, "no complete row available as a donor");
    std::size_t kk = k;
    if (donors.size() < k) {
        kk = donors.size();
        out.warnings.push_back("knn: k shrunk from " + std::to_string(k) + " to " + std::to_string(kk) +
                               " (only " + std::to_string(donors.size()) + " complete rows)");
    }

    const Scaler scaler = Scaler::fit(src, all_rows(src.rows()));
    std::vector<std::size_t> distance_cols;
    for (std::size_t c = 0; c < src.cols(); ++c)
        if (!src.is_categorical(c) && usable_input(src, c, options)) distance_cols.push_back(c);

    std::vector<std::pair<double, std::size_t>> dist(donors.size());
    std::vector<std::size_t> observed;
    for (std::size_t r = 0; r < src.rows(); ++r) {
        auto row = src.row(r);
        if (std::none_of(row.begin(), row.end(), is_missing)) continue;
        observed.clear();
        for (std::size_t c : distance_cols)
            if (!is_missing(row[c])) observed.push_back(c);
        for (std::size_t i = 0; i < donors.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t c : observed) {
                double diff = scaler.forward(c, row[c]) - scaler.forward(c, src.at(donors[i], c));
                d2 += diff * diff;
            }
            dist[i] = {d2, donors[i]};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        for (std::size_t c = 0; c < src.cols(); ++c) {
            if (!is_missing(row[c])) continue;
            std::vector<double> values(kk);
            for (std::size_t i = 0; i < kk; ++i) values[i] = src.at(dist[i].second, c);
            out.data.at(r, c) = src.is_categorical(c)
                                    ? mode_code(values)
                                    : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(kk);
        }
    }
    out.fit_seconds = seconds_since(t0);
    return out;
}

ImputationOutcome impute_mice(const AmputedDataset& amp, std::size_t max_iter, double tol, const ImputeOptions& options) {
    const auto t0 = Clock::now();
    validate(ImputationMethod::mice(max_iter, tol));
    auto out = start_outcome(amp, ImputationMethod::mice(max_iter, tol));
    out.method.tol = tol;
    const Dataset& src = amp.data;
    const std::size_t n = src.rows(), kcols = src.cols();

    std::vector<std::size_t> order, missing(kcols, 0);
    for (std::size_t c = 0; c < kcols; ++c) {
        for (std::size_t r = 0; r < n; ++r) missing[c] += is_missing(src.at(r, c)) ? 1 : 0;
        if (missing[c] == 0) continue;
        require_observed(src, c);
        order.push_back(c);
    }
    out.iterations = 1;
    if (order.empty()) {
        out.fit_seconds = seconds_since(t0);
        return out;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return missing[a] < missing[b]; });

    const auto rows = all_rows(n);
    const Scaler scaler = Scaler::fit(src, rows);
    Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kcols));
    for (std::size_t c = 0; c < kcols; ++c) {
        const double init = scaler.forward(c, center_value(src, c, rows));
        for (std::size_t r = 0; r < n; ++r) {
            double v = src.at(r, c);
            w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = is_missing(v) ? init : scaler.forward(c, v);
        }
    }

    auto solve = [](const Matrix& x, const Vector& y, double lambda) -> std::optional<Vector> {
        Matrix a = x.transpose() * x;
        for (Eigen::Index j = 1; j < a.cols(); ++j) a(j, j) += lambda;  // intercept is column 0, unpenalized
        Eigen::LDLT<Matrix> ldlt(a);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
        const Vector rhs = x.transpose() * y;
        Vector beta = ldlt.solve(rhs);
        if (!beta.allFinite() || (a * beta - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) return std::nullopt;
        // Refinement against the undamped system removes the ridge bias along well-determined
        // directions; near-null directions keep the damping.
        const Matrix gram = x.transpose() * x;
        for (int step = 0; step < 3; ++step) beta += ldlt.solve(rhs - gram * beta);
        if (!beta.allFinite()) return std::nullopt;
        return beta;
    };

    for (std::size_t sweep = 1; sweep <= max_iter; ++sweep) {
        out.iterations = sweep;
        double max_change = 0.0;
        for (std::size_t target : order) {
            std::vector<std::size_t> preds;
            for (std::size_t c = 0; c < kcols; ++c)
                if (c != target && usable_input(src, c, options)) preds.push_back(c);
            std::vector<std::size_t> fit_rows, fill_rows;
            for (std::size_t r = 0; r < n; ++r) (is_missing(src.at(r, target)) ? fill_rows : fit_rows).push_back(r);

            auto design = [&](const std::vector<std::size_t>& rs) {
                Matrix x(static_cast<Eigen::Index>(rs.size()), static_cast<Eigen::Index>(preds.size() + 1));
                for (std::size_t i = 0; i < rs.size(); ++i) {
                    x(static_cast<Eigen::Index>(i), 0) = 1.0;
                    for (std::size_t j = 0; j < preds.size(); ++j)
                        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) =
                            w(static_cast<Eigen::Index>(rs[i]), static_cast<Eigen::Index>(preds[j]));
                }
                return x;
            };
            const Matrix x = design(fit_rows);
            Vector y(static_cast<Eigen::Index>(fit_rows.size()));
            for (std::size_t i = 0; i < fit_rows.size(); ++i)
                y(static_cast<Eigen::Index>(i)) = w(static_cast<Eigen::Index>(fit_rows[i]), static_cast<Eigen::Index>(target));
            auto beta = solve(x, y, 1e-6);
            if (!beta) beta = solve(x, y, 1e-3);
            if (!beta) throw Error(Errc::SingularSystem, "regression for column '" + src.column(target).name + "' is singular");

            const Vector pred = design(fill_rows) * *beta;
            for (std::size_t i = 0; i < fill_rows.size(); ++i) {
                double v = pred(static_cast<Eigen::Index>(i));
                if (src.is_categorical(target)) v = scaler.forward(target, scaler.inverse(target, v));
                auto& cell = w(static_cast<Eigen::Index>(fill_rows[i]), static_cast<Eigen::Index>(target));
                max_change = std::max(max_change, std::abs(v - cell));
                cell = v;
            }
        }
        if (max_change < tol) break;
    }

    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < kcols; ++c)
            if (is_missing(src.at(r, c)))
                out.data.at(r, c) = scaler.inverse(c, w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    out.fit_seconds = seconds_since(t0);
    return out;
}

ImputationOutcome impute_mlp(const AmputedDataset& amp, const std::vector<std::size_t>& hidden_layers,
                             const TrainParams& params, const ImputeOptions& options) {
    const auto t0 = Clock::now();
    auto out = start_outcome(amp, ImputationMethod::multiple_mlp(hidden_layers));
    validate(out.method);
    validate(params);
    const Dataset& src = amp.data;

    std::map<std::vector<std::size_t>, std::vector<std::size_t>> signatures;
    for (std::size_t r = 0; r < src.rows(); ++r) {
        std::vector<std::size_t> missing;
        for (std::size_t c = 0; c < src.cols(); ++c)
            if (is_missing(src.at(r, c))) missing.push_back(c);
        if (!missing.empty()) signatures[missing].push_back(r);
    }
    if (signatures.empty()) {
        out.fit_seconds = seconds_since(t0);
        return out;
    }
    const auto xo = complete_rows(src);
    if (xo.empty()) throw Error(Errc::EmptyCompleteSet, "no complete rows to train the imputation models");
    const Scaler scaler = Scaler::fit(src, xo);

    std::size_t sig_index = 0;
    for (const auto& [missing, rows] : signatures) {
        const std::uint64_t seed = derive_seed(params.seed, {sig_index++});
        std::vector<std::size_t> inputs;
        for (std::size_t c = 0; c < src.cols(); ++c)
            if (!std::binary_search(missing.begin(), missing.end(), c) && usable_input(src, c, options)) inputs.push_back(c);

        if (inputs.empty()) {
            out.warnings.push_back("multiplemlp: signature without inputs filled with complete-row mean/mode");
            for (std::size_t c : missing) {
                const double fill = center_value(src, c, xo);
                for (std::size_t r : rows) out.data.at(r, c) = fill;
            }
            continue;
        }

        auto gather = [&](const std::vector<std::size_t>& rs, const std::vector<std::size_t>& cols) {
            Matrix m(static_cast<Eigen::Index>(rs.size()), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t i = 0; i < rs.size(); ++i)
                for (std::size_t j = 0; j < cols.size(); ++j)
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scaler.forward(cols[j], src.at(rs[i], cols[j]));
            return m;
        };
        const Matrix x = gather(xo, inputs);
        const Matrix xq = gather(rows, inputs);
        TrainParams p = params;
        p.seed = seed;

        const bool classify = missing.size() == 1 && src.is_categorical(missing[0]);
        if (classify) {
            const std::size_t col = missing[0];
            const std::size_t levels = std::max<std::size_t>(2, src.category_count(col));
            std::vector<std::size_t> labels(xo.size());
            for (std::size_t i = 0; i < xo.size(); ++i) labels[i] = static_cast<std::size_t>(src.at(xo[i], col));
            MlpTopology topo{inputs.size(), hidden_layers, levels, SizeClass::Medium};
            const auto model = train_mlp(topo, Task::Classification, x, one_hot(labels, levels), p);
            const auto classes = predict_classes(model, xq);
            for (std::size_t i = 0; i < rows.size(); ++i) out.data.at(rows[i], col) = static_cast<double>(classes[i]);
        } else {
            const Matrix y = gather(xo, missing);
            MlpTopology topo{inputs.size(), hidden_layers, missing.size(), SizeClass::Medium};
            const auto model = train_mlp(topo, Task::Regression, x, y, p);
            const Matrix pred = predict_mlp(model, xq);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < missing.size(); ++j)
                    out.data.at(rows[i], missing[j]) =
                        scaler.inverse(missing[j], pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }
    out.fit_seconds = seconds_since(t0);
    return out;
}

ImputationOutcome impute(const AmputedDataset& amp, const ImputationMethod& method, const ImputeOptions& options) {
    validate(method);
    using K = ImputationMethod::Kind;
    switch (method.kind) {
    case K::Mean: return impute_simple(amp, SimpleStrategy::Mean);
    case K::Median: return impute_simple(amp, SimpleStrategy::Median);
    case K::Zerofill: return impute_simple(amp, SimpleStrategy::Zerofill);
    case K::Delete: return delete_incomplete(amp);
    case K::Knn: return impute_knn(amp, method.k, options);
    case K::Mice: return impute_mice(amp, method.max_iter, method.tol, options);
    case K::MultipleMlp: {
        TrainParams p = options.mlp_params;
        p.seed = derive_seed(options.seed, {0x313});
        return impute_mlp(amp, method.hidden_layers, p, options);
    }
    }
    throw Error(Errc::InvalidValue, "unknown imputation method");
}

}  // namespace mvi
