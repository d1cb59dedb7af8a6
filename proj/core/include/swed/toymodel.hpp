#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swed/matrix.hpp"
#include "swed/neurons.hpp"

namespace swed::toy {

/// Gated MLP layer: out = (silu(x * w_gate) ⊙ (x * w_up)) * w_down.
struct ToyLayer {
    Matrix w_gate; // d_in x d_neurons
    Matrix w_up;   // d_in x d_neurons
    Matrix w_down; // d_neurons x d_in
};

double silu(double x);

/// Recipe for a planted-structure corpus. Harmless features live in a
/// `benign_dim`-dimensional subspace; harmful high-resource features add a
/// fixed anchor direction that only the planted gate neurons read (mean
/// shift `signal` over per-neuron noise `noise`). Low-resource harmful
/// features are the same rows rotated by `rotation_angle` into a direction
/// no weight reads, plus an optional benign offset.
struct SyntheticSpec {
    std::size_t d_in = 128;
    std::size_t d_neurons = 384;
    std::vector<std::size_t> planted;
    double signal = 1.0;
    double noise = 0.25;
    std::size_t n_harm_low = 128;
    std::size_t n_harm_high = 128;
    std::size_t n_safe = 128;
    std::size_t benign_dim = 64;
    double rotation_angle = 1.5707963267948966; // pi/2
    double lrl_offset = 0.0;
    std::uint64_t seed = 42;

    static SyntheticSpec defaults();

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const std::string& text);

struct SteeringConfig {
    double alpha = 1.0;
    NeuronSet target;
};

struct ToyActivations {
    Matrix gate_pre;  // x * w_gate
    Matrix gate_post; // silu(gate_pre), steering included
    Matrix up;        // x * w_up
};

struct ForwardResult {
    Matrix output;
    std::optional<ToyActivations> activations;
};

struct GeneratedData {
    Matrix x_low;  // rotated harmful features, row-paired with x_high
    Matrix x_high; // harmful features aligned with the planted anchor
    Matrix x_safe; // harmless features
    NeuronSet ground_truth;
    ToyLayer model;
};

/// Deterministic per spec.seed; identical specs produce identical bits.
GeneratedData generate(const SyntheticSpec& spec);

ForwardResult forward(const ToyLayer& layer, const Matrix& x, bool record = false);

/// Forward pass with post-nonlinearity gate activations of the target
/// neurons scaled by alpha. alpha = 1 reproduces forward bit for bit.
ForwardResult steer(const ToyLayer& layer, const Matrix& x, const SteeringConfig& cfg,
                    bool record = false);

enum class TargetKind { pre_activation, post_activation };

struct EvalReport {
    double residual_before = 0.0;
    double residual_after = 0.0;
    double residual_ratio = 0.0; // after / before (0 when before is 0)
    double drift = 0.0;          // harmless output change
    double harmless_norm = 0.0;  // baseline harmless output norm
    double drift_ratio = 0.0;    // drift / harmless_norm (0 when norm is 0)
    TargetKind target_kind = TargetKind::pre_activation;
    Projection projection = Projection::gate;
};

/// Alignment residual against the target (pre-activation compares the
/// projection directly; post-activation applies the gate nonlinearity) plus
/// harmless-output drift between the two models.
EvalReport evaluate_edit(const ToyLayer& model, const ToyLayer& edited, const Matrix& x_low,
                         const Matrix& x_safe, const Matrix& y_target, const NeuronSet& set,
                         TargetKind kind = TargetKind::pre_activation,
                         Projection projection = Projection::gate);

std::string eval_report_to_json(const EvalReport& report);

} // namespace swed::toy
