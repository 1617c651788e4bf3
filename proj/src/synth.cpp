#include "mvi/synth.hpp"

#include "mvi/error.hpp"
#include "mvi/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mvi {

void validate(const BlobSpec& spec) {
    if (spec.n_rows == 0) throw Error(Errc::InvalidSpec, "n_rows must be positive");
    if (spec.n_numeric_features == 0) throw Error(Errc::InvalidSpec, "need at least one feature");
    if (spec.n_clusters == 0) throw Error(Errc::InvalidSpec, "n_clusters must be >= 1");
    if (!(spec.std_dev > 0.0) || !std::isfinite(spec.std_dev)) throw Error(Errc::InvalidSpec, "std_dev must be > 0");
    if (!spec.value_ranges.empty() && spec.value_ranges.size() != spec.n_numeric_features)
        throw Error(Errc::InvalidSpec, "value_ranges must have one entry per feature");
    for (const auto& [lo, hi] : spec.value_ranges)
        if (!(lo < hi)) throw Error(Errc::InvalidSpec, "value range needs lo < hi");
}

GeneratedData generate_blobs_with_centers(const BlobSpec& spec) {
    validate(spec);
    const std::size_t d = spec.n_numeric_features;
    const std::size_t k = spec.n_clusters;
    auto range = [&](std::size_t j) {
        return spec.value_ranges.empty() ? std::pair<double, double>{-10.0, 10.0} : spec.value_ranges[j];
    };

    // Centers and samples use separate streams so that rejection draws do not shift the samples.
    Rng center_rng(derive_seed(spec.seed, {1}));
    Rng sample_rng(derive_seed(spec.seed, {2}));

    std::vector<double> centers(k * d);
    const double min_gap = 2.0 * spec.std_dev;
    const std::size_t max_attempts = 4 * k;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
            for (std::size_t j = 0; j < d; ++j) {
                auto [lo, hi] = range(j);
                centers[c * d + j] = std::uniform_real_distribution<double>(lo, hi)(center_rng);
            }
            bool far_enough = true;
            for (std::size_t other = 0; other < c && far_enough; ++other) {
                double dist2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    double diff = centers[c * d + j] - centers[other * d + j];
                    dist2 += diff * diff;
                }
                far_enough = dist2 >= min_gap * min_gap;
            }
            if (far_enough) break;
        }
    }

    Schema schema;
    for (std::size_t j = 0; j < d; ++j) schema.push_back({"x" + std::to_string(j + 1), ColumnKind::Numeric, false});
    schema.push_back({"class", ColumnKind::Categorical, true});

    GeneratedData out{Dataset(schema, spec.n_rows), {}, centers};
    std::normal_distribution<double> noise(0.0, spec.std_dev);
    for (std::size_t r = 0; r < spec.n_rows; ++r) {
        const std::size_t cluster = r % k;
        for (std::size_t j = 0; j < d; ++j) out.data.at(r, j) = centers[cluster * d + j] + noise(sample_rng);
        out.data.at(r, d) = static_cast<double>(cluster);
    }
    auto& labels = out.encoding.labels[d];
    for (std::size_t c = 0; c < k; ++c) labels.push_back(std::to_string(c));
    return out;
}

GeneratedData generate_person_pseudo(std::size_t n_rows, std::size_t n_clusters, double std_dev, std::uint64_t seed) {
    BlobSpec spec;
    spec.n_rows = n_rows;
    spec.n_numeric_features = 6;
    spec.n_clusters = n_clusters;
    spec.std_dev = std_dev;
    spec.seed = seed;
    GeneratedData blobs = generate_blobs_with_centers(spec);

    Schema schema{
        {"id", ColumnKind::Numeric, false},
        {"age", ColumnKind::Numeric, false},
        {"weight", ColumnKind::Numeric, false},
        {"salary", ColumnKind::Numeric, false},
        {"shoesize", ColumnKind::Numeric, false},
        {"gender", ColumnKind::Categorical, false},
        {"class", ColumnKind::Categorical, true},
    };
    GeneratedData out{Dataset(schema, n_rows), {}, blobs.centers};
    auto round_to = [](double v, double step) { return std::round(v / step) / (1.0 / step); };
    for (std::size_t r = 0; r < n_rows; ++r) {
        auto f = blobs.data.row(r);
        out.data.at(r, 0) = std::round(1000.0 + 40.0 * (f[0] + 10.0));
        out.data.at(r, 1) = std::round(18.0 + 2.5 * (f[1] + 10.0));
        out.data.at(r, 2) = round_to(50.0 + 2.0 * (f[2] + 10.0), 0.1);
        out.data.at(r, 3) = std::round(25000.0 + 3000.0 * (f[3] + 10.0));
        out.data.at(r, 4) = round_to(36.0 + 0.5 * (f[4] + 10.0), 0.1);
        out.data.at(r, 5) = f[5] > 0.0 ? 1.0 : 0.0;
        out.data.at(r, 6) = f[6];
    }
    out.encoding.labels[5] = {"female", "male"};
    out.encoding.labels[6] = blobs.encoding.labels.at(6);
    return out;
}

}  // namespace mvi
