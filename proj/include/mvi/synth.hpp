#pragma once

#include "mvi/tabular.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mvi {

/// Clustered isotropic Gaussian data with a categorical "class" column holding the cluster index.
struct BlobSpec {
    std::size_t n_rows = 1000;
    std::size_t n_numeric_features = 6;
    std::size_t n_clusters = 5;
    double std_dev = 1.0;
    /// Per-feature center box; empty means (-10, 10) for every feature.
    std::vector<std::pair<double, double>> value_ranges;
    std::uint64_t seed = 0;
};

void validate(const BlobSpec& spec);

struct GeneratedData {
    Dataset data;
    EncodingMap encoding;
    /// n_clusters x n_numeric_features, row-major.
    std::vector<double> centers;
};

GeneratedData generate_blobs_with_centers(const BlobSpec& spec);

inline Dataset generate_blobs(const BlobSpec& spec) { return generate_blobs_with_centers(spec).data; }

/// Person-like preset over six blob features: id, age, weight, salary, shoesize (numeric),
/// gender (categorical, sign of the sixth feature) and the class target. Ranges are invented.
GeneratedData generate_person_pseudo(std::size_t n_rows, std::size_t n_clusters, double std_dev, std::uint64_t seed);

}  // namespace mvi
