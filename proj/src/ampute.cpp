#include "mvi/ampute.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mvi {

std::string_view to_string(MissingPattern p) {
    switch (p) {
    case MissingPattern::Univariate: return "univariate";
    case MissingPattern::Multivariate: return "multivariate";
    case MissingPattern::Monotone: return "monotone";
    case MissingPattern::General: return "general";
    }
    return "?";
}

std::string_view to_string(MissingMechanism m) {
    switch (m) {
    case MissingMechanism::MCAR: return "MCAR";
    case MissingMechanism::MAR: return "MAR";
    case MissingMechanism::MNAR: return "MNAR";
    }
    return "?";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Mean of logistic(a (u - c)) for u uniform on [u0, u1].
double band_mean(double a, double c, double u0, double u1) {
    return (softplus(a * (u1 - c)) - softplus(a * (u0 - c))) / (a * (u1 - u0));
}

template <class F>
double bisect(F&& increasing, double lo, double hi, double target, int iterations = 200) {
    for (int i = 0; i < iterations; ++i) {
        double mid = 0.5 * (lo + hi);
        if (increasing(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// The center c decreases the mean, so solve on -c.
double continuous_center(double a, double rate) {
    return -bisect([&](double neg_c) { return band_mean(a, -neg_c, 0.0, 1.0); }, -1.0 - 60.0 / a, 1.0 + 60.0 / a, rate);
}

void check_rate(double rate) {
    if (!(rate > 0.0 && rate < 1.0)) throw Error(Errc::InvalidRate, "rate must lie in (0, 1), got " + std::to_string(rate));
}

}  // namespace

MissingPattern parse_pattern(std::string_view s) {
    auto v = lower(s);
    for (auto p : kAllPatterns)
        if (v == to_string(p)) return p;
    throw Error(Errc::InvalidValue, "unknown missing pattern '" + std::string(s) + "'");
}

MissingMechanism parse_mechanism(std::string_view s) {
    auto v = lower(s);
    for (auto m : kAllMechanisms)
        if (v == lower(to_string(m))) return m;
    throw Error(Errc::InvalidValue, "unknown missing mechanism '" + std::string(s) + "'");
}

std::vector<AmputationSpec> build_study_matrix(const std::vector<double>& rates, std::uint64_t seed,
                                               const std::vector<MissingPattern>& patterns,
                                               const std::vector<MissingMechanism>& mechanisms) {
    if (rates.empty()) throw Error(Errc::InvalidRate, "rate list is empty");
    for (double r : rates) check_rate(r);
    std::vector<AmputationSpec> out;
    out.reserve(patterns.size() * mechanisms.size() * rates.size());
    for (auto p : patterns)
        for (auto m : mechanisms)
            for (double r : rates) {
                AmputationSpec spec;
                spec.pattern = p;
                spec.mechanism = m;
                spec.rate = r;
                spec.seed = derive_seed(seed, {out.size()});
                // Same columns for every rate and mechanism of a pattern, so rates compare like for like.
                spec.layout_seed = derive_seed(seed, {0x1a7, static_cast<std::uint64_t>(p)});
                out.push_back(std::move(spec));
            }
    return out;
}

std::vector<PatternDef> derive_pattern_defs(MissingPattern pattern, MissingMechanism mechanism, const Schema& schema,
                                            std::uint64_t seed) {
    std::vector<std::size_t> features;
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (!schema[c].is_target) features.push_back(c);
    if (features.size() < 2) throw Error(Errc::TooFewColumns, "amputation needs at least 2 non-target columns");

    Rng rng(derive_seed(seed, {0x9a77e2}));
    const std::size_t f = features.size();
    std::vector<std::vector<std::size_t>> groups;
    switch (pattern) {
    case MissingPattern::Univariate:
        groups.push_back({features[std::uniform_int_distribution<std::size_t>(0, f - 1)(rng)]});
        break;
    case MissingPattern::Multivariate: {
        const std::size_t size = (f + 1) / 2;
        const std::size_t start = std::uniform_int_distribution<std::size_t>(0, f - size)(rng);
        groups.emplace_back(features.begin() + static_cast<std::ptrdiff_t>(start),
                            features.begin() + static_cast<std::ptrdiff_t>(start + size));
        break;
    }
    case MissingPattern::Monotone: {
        const std::size_t m = std::min<std::size_t>(3, f);
        for (std::size_t i = 1; i <= m; ++i) groups.emplace_back(features.end() - static_cast<std::ptrdiff_t>(i), features.end());
        break;
    }
    case MissingPattern::General:
        for (std::size_t c : features) groups.push_back({c});
        break;
    }

    std::vector<PatternDef> defs;
    for (auto& cols : groups) {
        PatternDef def{cols, std::vector<double>(schema.size(), 0.0)};
        for (std::size_t c = 0; c < schema.size(); ++c) {
            bool amputed = std::find(cols.begin(), cols.end(), c) != cols.end();
            // The class code is nominal and would leak the label into the mask; class-driven MAR
            // needs explicit pattern defs.
            if (mechanism == MissingMechanism::MAR && !amputed && !schema[c].is_target) def.weights[c] = 1.0;
            if (mechanism == MissingMechanism::MNAR && amputed) def.weights[c] = 1.0;
        }
        defs.push_back(std::move(def));
    }
    return defs;
}

double selection_sharpness(double rate, double ratio) {
    check_rate(rate);
    if (!(ratio > 1.0)) throw Error(Errc::InvalidSpec, "sharpness ratio must exceed 1");
    auto decile_ratio = [&](double a) {
        double c = continuous_center(a, rate);
        return band_mean(a, c, 0.9, 1.0) / band_mean(a, c, 0.0, 0.1);
    };
    // log-space bisection; the ratio grows monotonically with the slope.
    double log_a = bisect([&](double la) { return decile_ratio(std::exp(la)); }, std::log(1e-3), std::log(1e4), ratio, 120);
    return std::exp(log_a);
}

std::vector<double> selection_probabilities(const std::vector<double>& scores, double rate,
                                            const std::vector<std::size_t>& tie_order, double ratio) {
    const std::size_t n = scores.size();
    if (n == 0) return {};
    std::vector<std::size_t> tie_rank(n);
    for (std::size_t i = 0; i < n; ++i) tie_rank[tie_order[i]] = i;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : tie_rank[a] < tie_rank[b];
    });
    std::vector<double> u(n);
    for (std::size_t rank = 0; rank < n; ++rank) u[order[rank]] = (static_cast<double>(rank) + 0.5) / static_cast<double>(n);

    const double a = selection_sharpness(rate, ratio);
    auto mean_p = [&](double neg_c) {
        double sum = 0.0;
        for (double x : u) sum += logistic(a * (x + neg_c));
        return sum / static_cast<double>(n);
    };
    const double neg_c = bisect(mean_p, -1.0 - 60.0 / a, 1.0 + 60.0 / a, rate, 100);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = logistic(a * (u[i] + neg_c));
    return p;
}

AmputedDataset ampute(const Dataset& ds, const AmputationSpec& spec) {
    if (ds.has_missing()) throw Error(Errc::IncompleteInput, "amputation input must be complete");
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw Error(Errc::InvalidRate, "rate must lie in [0, 1)");

    AmputedDataset out{ds, MissingMask(ds.rows(), ds.cols()), spec, {}};
    if (out.spec.pattern_defs.empty())
        out.spec.pattern_defs = derive_pattern_defs(spec.pattern, spec.mechanism, ds.schema(), spec.layout_seed.value_or(spec.seed));
    const auto& defs = out.spec.pattern_defs;
    for (const auto& def : defs) {
        if (def.weights.size() != ds.cols()) throw Error(Errc::InvalidSpec, "pattern weights must cover every column");
        for (std::size_t c : def.amputed_columns)
            if (c >= ds.cols() || ds.column(c).is_target) throw Error(Errc::InvalidSpec, "pattern amputes the target or an unknown column");
    }
    if (spec.rate == 0.0 || ds.rows() == 0) return out;

    // Standardized cells for the weighted-sum score.
    std::vector<double> mean(ds.cols(), 0.0), scale(ds.cols(), 0.0);
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t r = 0; r < ds.rows(); ++r) s += ds.at(r, c);
        mean[c] = s / static_cast<double>(ds.rows());
        for (std::size_t r = 0; r < ds.rows(); ++r) s2 += (ds.at(r, c) - mean[c]) * (ds.at(r, c) - mean[c]);
        double sd = std::sqrt(s2 / static_cast<double>(ds.rows()));
        scale[c] = sd > 0.0 ? 1.0 / sd : 0.0;
    }

    Rng rng(derive_seed(spec.seed, {0xa3b1}));
    std::vector<std::vector<std::size_t>> members(defs.size());
    std::uniform_int_distribution<std::size_t> pick_def(0, defs.size() - 1);
    for (std::size_t r = 0; r < ds.rows(); ++r) members[pick_def(rng)].push_back(r);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t d = 0; d < defs.size(); ++d) {
        const auto& rows = members[d];
        if (rows.empty()) continue;
        std::vector<double> p(rows.size(), spec.rate);
        if (spec.mechanism != MissingMechanism::MCAR) {
            std::vector<double> score(rows.size(), 0.0);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t c = 0; c < ds.cols(); ++c)
                    if (defs[d].weights[c] != 0.0) score[i] += defs[d].weights[c] * (ds.at(rows[i], c) - mean[c]) * scale[c];
            std::vector<std::size_t> tie_order(rows.size());
            std::iota(tie_order.begin(), tie_order.end(), std::size_t{0});
            std::shuffle(tie_order.begin(), tie_order.end(), rng);
            p = selection_probabilities(score, spec.rate, tie_order, spec.sharpness_ratio);
        }
        std::vector<char> chosen(rows.size(), 0);
        std::size_t n_chosen = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            chosen[i] = unit(rng) < p[i] ? 1 : 0;
            n_chosen += chosen[i];
        }
        if (n_chosen == rows.size() && rows.size() > 1) {
            std::size_t keep = static_cast<std::size_t>(std::min_element(p.begin(), p.end()) - p.begin());
            chosen[keep] = 0;
            out.warnings.push_back("pattern group " + std::to_string(d) + " capped to keep one complete row");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!chosen[i]) continue;
            for (std::size_t c : defs[d].amputed_columns) {
                out.mask.set(rows[i], c);
                out.data.at(rows[i], c) = kMissing;
            }
        }
    }
    return out;
}

double achieved_missing_rate(const MissingMask& mask) {
    if (mask.rows() == 0) throw Error(Errc::EmptyInput, "empty mask");
    return static_cast<double>(mask.incomplete_rows()) / static_cast<double>(mask.rows());
}

double cell_missing_rate(const MissingMask& mask) {
    if (mask.empty()) throw Error(Errc::EmptyInput, "empty mask");
    return static_cast<double>(mask.count()) / static_cast<double>(mask.rows() * mask.cols());
}

}  // namespace mvi
