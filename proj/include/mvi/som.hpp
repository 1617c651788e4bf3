#pragma once

#include "mvi/mlp.hpp"

#include <cstdint>
#include <vector>

namespace mvi {

/// Square edge_length x edge_length map over input_dim features.
struct SomTopology {
    std::size_t input_dim = 0;
    std::size_t edge_length = 1;
    SizeClass size_class = SizeClass::Medium;
};

/// floor(sqrt(5 * sqrt(n))), computed exactly.
std::size_t som_base_edge(std::size_t n);

/// Medium = base edge, Minimum = max(1, floor(base / 4)), Maximum = 4 * base.
std::size_t som_dimensions(std::size_t n, SizeClass size_class);

struct SomModel {
    SomTopology topology;
    Matrix codebook;  ///< edge_length^2 x input_dim, node index = row * edge + col
    std::vector<double> quantization_errors;  ///< mean BMU distance after each epoch
    std::vector<int> node_labels;  ///< empty until labeled
    bool trained = false;
};

/// Online training: Gaussian neighbourhood whose radius decays linearly from edge/2 to 1 and
/// learning rate decaying linearly from params.learning_rate to 0.01. The neighbourhood is
/// evaluated within 3 radii of the BMU.
SomModel train_som(const SomTopology& topology, const Matrix& x, const TrainParams& params);

std::size_t best_matching_unit(const SomModel& model, const Eigen::Ref<const Vector>& sample);
double quantization_error(const SomModel& model, const Matrix& x);

/// Majority class per node (lowest code on ties); unvisited nodes take the label of the
/// nearest labeled node on the grid.
void label_som(SomModel& model, const Matrix& x, const std::vector<std::size_t>& labels);

std::vector<std::size_t> som_predict(const SomModel& model, const Matrix& x);

/// Labels the map with the labeled rows, then returns the BMU label of every query row.
std::vector<std::size_t> som_classify(SomModel& model, const Matrix& x_labeled, const std::vector<std::size_t>& labels,
                                      const Matrix& x_query);

}  // namespace mvi
