#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "swed/matrix.hpp"

namespace swed {

enum class Projection { gate, up };
enum class Label { harmful, harmless };

std::string to_string(Projection p);
Projection projection_from_string(const std::string& s);

/// Per-sample, per-neuron scalar activations for one labeled corpus at one
/// layer/projection. `values` is samples x neurons.
struct ActivationSet {
    std::size_t layer = 0;
    Projection projection = Projection::gate;
    Label label = Label::harmful;
    Matrix values;

    std::size_t samples() const { return values.rows(); }
    std::size_t neurons() const { return values.cols(); }
};

struct NeuronStats {
    std::size_t neuron = 0;
    double mean_harm = 0.0;
    double mean_safe = 0.0;
    double delta = 0.0;    // mean_harm - mean_safe
    double z_score = 0.0;  // delta standardized across the layer
    double cohens_d = 0.0; // delta over pooled sample std
};

/// compute_stats output: per-neuron statistics plus the layer aggregates the
/// z-scores were standardized with.
struct LayerStats {
    std::size_t layer = 0;
    Projection projection = Projection::gate;
    std::vector<NeuronStats> neurons;
    double delta_mean = 0.0;
    double delta_std = 0.0; // population (1/n) std over neurons
};

struct IdentificationConfig {
    double tau_mag = 2.0;
    double tau_stat = 1.0;
    double variance_floor = 1e-12;
};

enum class SelectionCriteria { mag_only, stat_only, both };

std::string to_string(SelectionCriteria c);

/// Sparse set of selected safety neurons with the statistics and the
/// criterion that fired for each one. `indices` is strictly increasing.
struct NeuronSet {
    std::size_t layer = 0;
    Projection projection = Projection::gate;
    std::vector<std::size_t> indices;
    std::vector<NeuronStats> stats;       // parallel to indices (may be empty)
    std::vector<SelectionCriteria> criteria; // parallel to indices (may be empty)

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
};

/// Per-neuron delta, layer-standardized z-score, and Cohen's d with pooled
/// (n-1) sample variances. Throws DegenerateLayer when the deltas carry no
/// spread (z undefined). Requires at least two samples per set and matching
/// neuron counts.
LayerStats compute_stats(const ActivationSet& harm, const ActivationSet& safe,
                         const IdentificationConfig& cfg = {});

/// Union of the magnitude (z > tau_mag) and effect-size (d > tau_stat)
/// candidate sets. An empty selection is a valid result.
NeuronSet select_neurons(const LayerStats& stats, const IdentificationConfig& cfg = {});

/// Intersection over union of the two index sets; 1.0 when both are empty.
double jaccard(const NeuronSet& a, const NeuronSet& b);

/// Symmetric pairwise Jaccard matrix with unit diagonal.
Matrix jaccard_table(std::span<const NeuronSet> sets);

std::string neuron_set_to_json(const NeuronSet& set, const IdentificationConfig& cfg);
NeuronSet neuron_set_from_json(const std::string& text, IdentificationConfig* cfg_out = nullptr);

/// CSV mirror of a Jaccard table: one header row of labels, then the rows.
std::string jaccard_table_csv(const Matrix& table, std::span<const std::string> labels);

} // namespace swed
