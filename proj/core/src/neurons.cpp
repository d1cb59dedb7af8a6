#include "swed/neurons.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "swed/errors.hpp"
#include "swed/io.hpp"

namespace swed {

namespace {

using nlohmann::json;

// JSON has no infinity; map the perfectly-separated-neuron sentinel onto the
// largest finite double and back.
double clamp_for_json(double v) {
    if (std::isinf(v)) return v > 0 ? std::numeric_limits<double>::max()
                                    : std::numeric_limits<double>::lowest();
    return v;
}

SelectionCriteria criteria_from_string(const std::string& s) {
    if (s == "mag") return SelectionCriteria::mag_only;
    if (s == "stat") return SelectionCriteria::stat_only;
    if (s == "both") return SelectionCriteria::both;
    throw InvalidArgument("unknown criteria tag: " + s);
}

} // namespace

std::string to_string(Projection p) {
    return p == Projection::gate ? "gate" : "up";
}

Projection projection_from_string(const std::string& s) {
    if (s == "gate") return Projection::gate;
    if (s == "up") return Projection::up;
    throw InvalidArgument("unknown projection: " + s);
}

std::string to_string(SelectionCriteria c) {
    switch (c) {
        case SelectionCriteria::mag_only: return "mag";
        case SelectionCriteria::stat_only: return "stat";
        default: return "both";
    }
}

LayerStats compute_stats(const ActivationSet& harm, const ActivationSet& safe,
                         const IdentificationConfig& cfg) {
    if (harm.neurons() != safe.neurons())
        throw DimensionMismatch("compute_stats: neuron counts differ (" +
                                std::to_string(harm.neurons()) + " vs " +
                                std::to_string(safe.neurons()) + ")");
    if (harm.samples() < 2 || safe.samples() < 2)
        throw InvalidArgument("compute_stats: each activation set needs at least 2 samples");

    const std::size_t d = harm.neurons();
    const double n1 = static_cast<double>(harm.samples());
    const double n2 = static_cast<double>(safe.samples());

    LayerStats out;
    out.layer = harm.layer;
    out.projection = harm.projection;
    out.neurons.resize(d);

    for (std::size_t j = 0; j < d; ++j) {
        double sum_h = 0.0, sum_s = 0.0;
        for (std::size_t i = 0; i < harm.samples(); ++i) sum_h += harm.values(i, j);
        for (std::size_t i = 0; i < safe.samples(); ++i) sum_s += safe.values(i, j);
        const double mean_h = sum_h / n1;
        const double mean_s = sum_s / n2;

        double ss_h = 0.0, ss_s = 0.0;
        for (std::size_t i = 0; i < harm.samples(); ++i) {
            const double c = harm.values(i, j) - mean_h;
            ss_h += c * c;
        }
        for (std::size_t i = 0; i < safe.samples(); ++i) {
            const double c = safe.values(i, j) - mean_s;
            ss_s += c * c;
        }
        const double pooled = std::sqrt((ss_h + ss_s) / (n1 + n2 - 2.0));

        NeuronStats& ns = out.neurons[j];
        ns.neuron = j;
        ns.mean_harm = mean_h;
        ns.mean_safe = mean_s;
        ns.delta = mean_h - mean_s;
        if (pooled <= cfg.variance_floor) {
            // Constant neuron: perfectly separated if the means differ.
            if (ns.delta > 0.0)
                ns.cohens_d = std::numeric_limits<double>::infinity();
            else if (ns.delta < 0.0)
                ns.cohens_d = -std::numeric_limits<double>::infinity();
            else
                ns.cohens_d = 0.0;
        } else {
            ns.cohens_d = ns.delta / pooled;
        }
    }

    double mu = 0.0;
    for (const auto& ns : out.neurons) mu += ns.delta;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (const auto& ns : out.neurons) {
        const double c = ns.delta - mu;
        var += c * c;
    }
    const double sigma = std::sqrt(var / static_cast<double>(d));
    out.delta_mean = mu;
    out.delta_std = sigma;
    if (sigma <= cfg.variance_floor)
        throw DegenerateLayer("compute_stats: layer delta spread " + std::to_string(sigma) +
                              " is below the variance floor; z-scores undefined");
    for (auto& ns : out.neurons) ns.z_score = (ns.delta - mu) / sigma;
    return out;
}

NeuronSet select_neurons(const LayerStats& stats, const IdentificationConfig& cfg) {
    if (stats.neurons.empty()) throw InvalidArgument("select_neurons: empty stats");
    if (!(cfg.tau_mag > 0.0) || !(cfg.tau_stat > 0.0))
        throw InvalidArgument("select_neurons: thresholds must be positive");
    NeuronSet set;
    set.layer = stats.layer;
    set.projection = stats.projection;
    for (const auto& ns : stats.neurons) {
        const bool mag = ns.z_score > cfg.tau_mag;
        const bool stat = ns.cohens_d > cfg.tau_stat;
        if (!mag && !stat) continue;
        set.indices.push_back(ns.neuron);
        set.stats.push_back(ns);
        set.criteria.push_back(mag && stat ? SelectionCriteria::both
                               : mag       ? SelectionCriteria::mag_only
                                           : SelectionCriteria::stat_only);
    }
    return set;
}

double jaccard(const NeuronSet& a, const NeuronSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] == b.indices[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a.indices[i] < b.indices[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.indices.size() + b.indices.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Matrix jaccard_table(std::span<const NeuronSet> sets) {
    if (sets.size() < 2) throw InvalidArgument("jaccard_table: need at least 2 sets");
    Matrix t(sets.size(), sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        t(i, i) = 1.0;
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            const double v = jaccard(sets[i], sets[j]);
            t(i, j) = v;
            t(j, i) = v;
        }
    }
    return t;
}

std::string neuron_set_to_json(const NeuronSet& set, const IdentificationConfig& cfg) {
    json doc;
    doc["layer"] = set.layer;
    doc["projection"] = to_string(set.projection);
    doc["indices"] = set.indices;
    json stats = json::array();
    for (std::size_t k = 0; k < set.stats.size(); ++k) {
        const auto& ns = set.stats[k];
        json entry;
        entry["neuron"] = ns.neuron;
        entry["delta"] = clamp_for_json(ns.delta);
        entry["z"] = clamp_for_json(ns.z_score);
        entry["d"] = clamp_for_json(ns.cohens_d);
        entry["criteria"] = k < set.criteria.size() ? to_string(set.criteria[k]) : "both";
        stats.push_back(std::move(entry));
    }
    doc["stats"] = std::move(stats);
    doc["config"] = {{"tau_mag", cfg.tau_mag}, {"tau_stat", cfg.tau_stat}};
    return doc.dump(2) + "\n";
}

NeuronSet neuron_set_from_json(const std::string& text, IdentificationConfig* cfg_out) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("neuron set JSON: ") + e.what());
    }
    try {
        NeuronSet set;
        set.layer = doc.at("layer").get<std::size_t>();
        set.projection = projection_from_string(doc.at("projection").get<std::string>());
        set.indices = doc.at("indices").get<std::vector<std::size_t>>();
        for (std::size_t k = 1; k < set.indices.size(); ++k)
            if (set.indices[k] <= set.indices[k - 1])
                throw InvalidArgument("neuron set JSON: indices not strictly increasing");
        if (doc.contains("stats")) {
            for (const auto& entry : doc.at("stats")) {
                NeuronStats ns;
                ns.neuron = entry.at("neuron").get<std::size_t>();
                ns.delta = entry.at("delta").get<double>();
                ns.z_score = entry.at("z").get<double>();
                ns.cohens_d = entry.at("d").get<double>();
                set.stats.push_back(ns);
                set.criteria.push_back(criteria_from_string(entry.at("criteria").get<std::string>()));
            }
        }
        if (cfg_out && doc.contains("config")) {
            cfg_out->tau_mag = doc["config"].value("tau_mag", cfg_out->tau_mag);
            cfg_out->tau_stat = doc["config"].value("tau_stat", cfg_out->tau_stat);
        }
        return set;
    } catch (const json::exception& e) {
        throw IoError(std::string("neuron set JSON: ") + e.what());
    }
}

std::string jaccard_table_csv(const Matrix& table, std::span<const std::string> labels) {
    if (labels.size() != table.rows())
        throw DimensionMismatch("jaccard_table_csv: label count does not match table");
    std::ostringstream out;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j) out << ',';
        out << labels[j];
    }
    out << '\n';
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < table.cols(); ++j) {
            if (j) out << ',';
            out << format_double(table(i, j));
        }
        out << '\n';
    }
    return out.str();
}

} // namespace swed
