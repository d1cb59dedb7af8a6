#include "swed/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <json.hpp>

#include "swed/editor.hpp"
#include "swed/errors.hpp"
#include "swed/rng.hpp"

namespace swed::toy {

namespace {

using nlohmann::json;

// Orthonormal columns spanning a random k-dimensional subspace, via
// two-pass modified Gram-Schmidt on gaussian draws.
Matrix random_orthonormal(Rng& rng, std::size_t dim, std::size_t k) {
    Matrix f = rng.gaussian_matrix(dim, k);
    for (std::size_t c = 0; c < k; ++c) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i) dot += f(i, c) * f(i, p);
                for (std::size_t i = 0; i < dim; ++i) f(i, c) -= dot * f(i, p);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) norm += f(i, c) * f(i, c);
        norm = std::sqrt(norm);
        if (norm == 0.0) throw InvalidArgument("random_orthonormal: degenerate draw");
        for (std::size_t i = 0; i < dim; ++i) f(i, c) /= norm;
    }
    return f;
}

// Unit vector in the span of the first `k` columns of `frame`.
std::vector<double> random_unit_in_span(Rng& rng, const Matrix& frame, std::size_t k) {
    std::vector<double> coeff(k);
    double norm = 0.0;
    for (auto& c : coeff) {
        c = rng.gaussian();
        norm += c * c;
    }
    norm = std::sqrt(norm);
    std::vector<double> out(frame.rows(), 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double w = coeff[c] / norm;
        for (std::size_t i = 0; i < frame.rows(); ++i) out[i] += w * frame(i, c);
    }
    return out;
}

Matrix elementwise_silu(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = silu(out.data()[i]);
    return out;
}

const Matrix& projection_weights(const ToyLayer& layer, Projection proj) {
    return proj == Projection::gate ? layer.w_gate : layer.w_up;
}

} // namespace

double silu(double x) {
    return x / (1.0 + std::exp(-x));
}

SyntheticSpec SyntheticSpec::defaults() {
    SyntheticSpec spec;
    spec.planted.reserve(80);
    for (std::size_t j = 0; j < 80; ++j) spec.planted.push_back(1 + 4 * j);
    return spec;
}

void SyntheticSpec::validate() const {
    if (d_in == 0) throw InvalidArgument("spec field d_in: must be positive");
    if (d_neurons == 0) throw InvalidArgument("spec field d_neurons: must be positive");
    if (benign_dim == 0) throw InvalidArgument("spec field benign_dim: must be positive");
    if (benign_dim + 2 > d_in)
        throw InvalidArgument("spec field benign_dim: needs benign_dim + 2 <= d_in to leave "
                              "room for the harm directions");
    for (std::size_t j : planted)
        if (j >= d_neurons)
            throw InvalidArgument("spec field planted: index " + std::to_string(j) +
                                  " out of range for d_neurons = " + std::to_string(d_neurons));
    std::set<std::size_t> unique(planted.begin(), planted.end());
    if (unique.size() != planted.size())
        throw InvalidArgument("spec field planted: duplicate indices");
    if (!(signal >= 0.0)) throw InvalidArgument("spec field signal: must be non-negative");
    if (!(noise >= 0.0)) throw InvalidArgument("spec field noise: must be non-negative");
    if (!std::isfinite(rotation_angle))
        throw InvalidArgument("spec field rotation_angle: must be finite");
    if (!std::isfinite(lrl_offset)) throw InvalidArgument("spec field lrl_offset: must be finite");
    if (n_harm_low > n_harm_high)
        throw InvalidArgument("spec field n_harm_low: cannot exceed n_harm_high (rows are "
                              "paired with the high-resource corpus)");
    if (n_harm_high == 0 || n_safe == 0)
        throw InvalidArgument("spec field n_harm_high/n_safe: sample counts must be positive");
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
    json doc;
    doc["d_in"] = spec.d_in;
    doc["d_neurons"] = spec.d_neurons;
    doc["planted"] = spec.planted;
    doc["signal"] = spec.signal;
    doc["noise"] = spec.noise;
    doc["n_harm_low"] = spec.n_harm_low;
    doc["n_harm_high"] = spec.n_harm_high;
    doc["n_safe"] = spec.n_safe;
    doc["benign_dim"] = spec.benign_dim;
    doc["rotation_angle"] = spec.rotation_angle;
    doc["lrl_offset"] = spec.lrl_offset;
    doc["seed"] = spec.seed;
    return doc.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("synthetic spec JSON: ") + e.what());
    }
    SyntheticSpec spec = SyntheticSpec::defaults();
    try {
        spec.d_in = doc.value("d_in", spec.d_in);
        spec.d_neurons = doc.value("d_neurons", spec.d_neurons);
        if (doc.contains("planted")) spec.planted = doc["planted"].get<std::vector<std::size_t>>();
        spec.signal = doc.value("signal", spec.signal);
        spec.noise = doc.value("noise", spec.noise);
        spec.n_harm_low = doc.value("n_harm_low", spec.n_harm_low);
        spec.n_harm_high = doc.value("n_harm_high", spec.n_harm_high);
        spec.n_safe = doc.value("n_safe", spec.n_safe);
        spec.benign_dim = doc.value("benign_dim", spec.benign_dim);
        spec.rotation_angle = doc.value("rotation_angle", spec.rotation_angle);
        spec.lrl_offset = doc.value("lrl_offset", spec.lrl_offset);
        spec.seed = doc.value("seed", spec.seed);
    } catch (const json::exception& e) {
        throw IoError(std::string("synthetic spec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

GeneratedData generate(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const std::size_t db = spec.benign_dim;
    // Columns 0..db-1 span the benign subspace; db is the harm anchor the
    // planted neurons read; db+1 is the hidden direction the rotation moves
    // the anchor into.
    const Matrix frame = random_orthonormal(rng, spec.d_in, db + 2);
    std::vector<double> anchor(spec.d_in), hidden(spec.d_in);
    for (std::size_t i = 0; i < spec.d_in; ++i) {
        anchor[i] = frame(i, db);
        hidden[i] = frame(i, db + 1);
    }

    std::vector<bool> is_planted(spec.d_neurons, false);
    for (std::size_t j : spec.planted) is_planted[j] = true;

    ToyLayer model;
    model.w_gate = Matrix(spec.d_in, spec.d_neurons);
    for (std::size_t j = 0; j < spec.d_neurons; ++j) {
        const auto dir = random_unit_in_span(rng, frame, db);
        for (std::size_t i = 0; i < spec.d_in; ++i) {
            double w = spec.noise * dir[i];
            if (is_planted[j]) w += spec.signal * anchor[i];
            model.w_gate(i, j) = w;
        }
    }
    model.w_up = Matrix(spec.d_in, spec.d_neurons);
    for (std::size_t j = 0; j < spec.d_neurons; ++j) {
        const auto dir = random_unit_in_span(rng, frame, db);
        for (std::size_t i = 0; i < spec.d_in; ++i) model.w_up(i, j) = dir[i];
    }
    model.w_down =
        rng.gaussian_matrix(spec.d_neurons, spec.d_in, 1.0 / std::sqrt(double(spec.d_neurons)));

    // Benign coefficients expand through the frame: x = coeffs * benignᵀ.
    const auto expand_benign = [&](std::size_t n_rows) {
        Matrix x(n_rows, spec.d_in);
        for (std::size_t r = 0; r < n_rows; ++r) {
            for (std::size_t c = 0; c < db; ++c) {
                const double coeff = rng.gaussian();
                if (coeff == 0.0) continue;
                double* row = x.row_ptr(r);
                for (std::size_t i = 0; i < spec.d_in; ++i) row[i] += coeff * frame(i, c);
            }
        }
        return x;
    };

    GeneratedData out;
    out.x_safe = expand_benign(spec.n_safe);
    out.x_high = expand_benign(spec.n_harm_high);
    for (std::size_t r = 0; r < spec.n_harm_high; ++r)
        for (std::size_t i = 0; i < spec.d_in; ++i) out.x_high(r, i) += anchor[i];

    // Plane rotation that moves the anchor toward the hidden direction,
    // leaving the benign subspace fixed; rows are paired with x_high.
    const double c = std::cos(spec.rotation_angle);
    const double s = std::sin(spec.rotation_angle);
    out.x_low = Matrix(spec.n_harm_low, spec.d_in);
    for (std::size_t r = 0; r < spec.n_harm_low; ++r) {
        const double* src = out.x_high.row_ptr(r);
        double* dst = out.x_low.row_ptr(r);
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < spec.d_in; ++i) {
            a += src[i] * anchor[i];
            b += src[i] * hidden[i];
        }
        for (std::size_t i = 0; i < spec.d_in; ++i) {
            dst[i] = src[i] + (c - 1.0) * (a * anchor[i] + b * hidden[i]) +
                     s * (a * hidden[i] - b * anchor[i]);
            if (spec.lrl_offset != 0.0) dst[i] += spec.lrl_offset * frame(i, 0);
        }
    }

    out.ground_truth.layer = 0;
    out.ground_truth.projection = Projection::gate;
    out.ground_truth.indices = spec.planted;
    std::sort(out.ground_truth.indices.begin(), out.ground_truth.indices.end());
    out.model = std::move(model);
    return out;
}

ForwardResult forward(const ToyLayer& layer, const Matrix& x, bool record) {
    if (x.cols() != layer.w_gate.rows())
        throw DimensionMismatch("forward: input has " + std::to_string(x.cols()) +
                                " features, layer expects " +
                                std::to_string(layer.w_gate.rows()));
    Matrix gate_pre = matmul(x, layer.w_gate);
    Matrix gate_post = elementwise_silu(gate_pre);
    Matrix up = matmul(x, layer.w_up);
    Matrix hidden = gate_post;
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden.data()[i] *= up.data()[i];

    ForwardResult result;
    result.output = matmul(hidden, layer.w_down);
    if (record)
        result.activations =
            ToyActivations{std::move(gate_pre), std::move(gate_post), std::move(up)};
    return result;
}

ForwardResult steer(const ToyLayer& layer, const Matrix& x, const SteeringConfig& cfg,
                    bool record) {
    if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
        throw InvalidArgument("steer: alpha must be finite and positive");
    for (std::size_t j : cfg.target.indices)
        if (j >= layer.w_gate.cols())
            throw IndexOutOfRange("steer: neuron index " + std::to_string(j) +
                                  " out of range for " + std::to_string(layer.w_gate.cols()) +
                                  " neurons");

    Matrix gate_pre = matmul(x, layer.w_gate);
    Matrix gate_post = elementwise_silu(gate_pre);
    for (std::size_t j : cfg.target.indices)
        for (std::size_t i = 0; i < gate_post.rows(); ++i) gate_post(i, j) *= cfg.alpha;
    Matrix up = matmul(x, layer.w_up);
    Matrix hidden = gate_post;
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden.data()[i] *= up.data()[i];

    ForwardResult result;
    result.output = matmul(hidden, layer.w_down);
    if (record)
        result.activations =
            ToyActivations{std::move(gate_pre), std::move(gate_post), std::move(up)};
    return result;
}

EvalReport evaluate_edit(const ToyLayer& model, const ToyLayer& edited, const Matrix& x_low,
                         const Matrix& x_safe, const Matrix& y_target, const NeuronSet& set,
                         TargetKind kind, Projection projection) {
    const Matrix before = extract_submatrix(projection_weights(model, projection), set);
    const Matrix after = extract_submatrix(projection_weights(edited, projection), set);
    if (y_target.rows() != x_low.rows() || y_target.cols() != set.size())
        throw DimensionMismatch("evaluate_edit: target must be n_harm x |set|");

    const bool through_activation =
        kind == TargetKind::post_activation && projection == Projection::gate;
    const auto residual = [&](const Matrix& w) {
        Matrix pre = matmul(x_low, w);
        if (through_activation) pre = elementwise_silu(pre);
        return frobenius_norm(subtract(pre, y_target));
    };

    EvalReport report;
    report.target_kind = kind;
    report.projection = projection;
    report.residual_before = residual(before);
    report.residual_after = residual(after);
    report.residual_ratio =
        report.residual_before > 0.0 ? report.residual_after / report.residual_before : 0.0;

    const Matrix base_out = forward(model, x_safe).output;
    const Matrix edited_out = forward(edited, x_safe).output;
    report.drift = frobenius_norm(subtract(edited_out, base_out));
    report.harmless_norm = frobenius_norm(base_out);
    report.drift_ratio = report.harmless_norm > 0.0 ? report.drift / report.harmless_norm : 0.0;
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    json doc;
    doc["residual_before"] = report.residual_before;
    doc["residual_after"] = report.residual_after;
    doc["residual_ratio"] = report.residual_ratio;
    doc["drift"] = report.drift;
    doc["harmless_norm"] = report.harmless_norm;
    doc["drift_ratio"] = report.drift_ratio;
    doc["target_kind"] =
        report.target_kind == TargetKind::pre_activation ? "pre_activation" : "post_activation";
    doc["projection"] = to_string(report.projection);
    return doc.dump(2) + "\n";
}

} // namespace swed::toy
