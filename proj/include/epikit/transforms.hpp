#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epikit/types.hpp"

namespace epikit {

enum class NormalizationMode { ZScore, MinMax };

/// Per (node, feature) channel scaling with statistics from the first
/// `train_steps` steps only. Z-score uses the population std; channels with
/// std (or range, for min-max) below 1e-12 are only mean-centered (shifted to
/// 0 for min-max).
FeaturePanel normalize_features(const FeaturePanel& panel, std::size_t train_steps,
                                NormalizationMode mode = NormalizationMode::ZScore);

/// D^(-1/2) (A + I) D^(-1/2) with D the degree matrix of A + I.
Eigen::MatrixXd normalize_adjacency(const StaticGraph& g);

/// The same matrix as a graph with self-loops (the form graph transforms emit).
StaticGraph normalize_adjacency_graph(const StaticGraph& g);

/// Magnitudes of the real-input DFT along time, per node and feature:
/// output has ⌊T/2⌋+1 steps. In debug builds every channel is checked
/// against Parseval's identity.
FeaturePanel to_frequency(const FeaturePanel& panel);

/// Σ_k |X_k|² over the full spectrum reconstructed from a half spectrum of a
/// length-T real signal.
double spectrum_energy(std::span<const double> magnitudes, std::size_t signal_length);

/// Appends `dims` channels: for k < dims/2 the pair sin(t/base^(2k/dims)),
/// cos(t/base^(2k/dims)), identical for every node.
FeaturePanel add_time_embedding(const FeaturePanel& panel, std::size_t dims, double period_base = 10000.0);

/// Classical additive decomposition. Trend and residual are NaN where the
/// centered moving average is undefined (see `defined`).
struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
    std::vector<bool> defined;
    std::size_t period = 0;
};

Decomposition seasonal_decompose(std::span<const double> series, std::size_t period);

struct FeatureTransform {
    std::string name;
    /// (panel, train_steps) -> transformed panel
    std::function<FeaturePanel(const FeaturePanel&, std::size_t)> apply;
};

struct GraphTransform {
    std::string name;
    std::function<StaticGraph(const StaticGraph&)> apply;
};

FeatureTransform normalize_features_transform(NormalizationMode mode = NormalizationMode::ZScore);
FeatureTransform to_frequency_transform();
FeatureTransform time_embedding_transform(std::size_t dims, double period_base = 10000.0);
GraphTransform normalize_adjacency_transform();

/// Ordered feature and graph transforms applied as one unit.
struct TransformPipeline {
    std::vector<FeatureTransform> feature_transforms;
    std::vector<GraphTransform> graph_transforms;
};

/// Applies feature transforms in order to the panel (training statistics from
/// the dataset's own split) and graph transforms to the static graph and to
/// every dynamic snapshot. A failing transform is reported as
/// "features[i]"/"graph[i]" in the error field.
EpiDataset apply_pipeline(const TransformPipeline& pipeline, const EpiDataset& ds);

}  // namespace epikit
