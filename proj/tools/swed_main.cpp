// swed: sparse weight editing pipeline driver.
//
// Subcommands: gen, identify, jaccard, steer, solve, apply, eval.
// Exit codes: 0 ok, 2 bad input, 3 degenerate data, 4 numerical failure,
// 5 optimality violation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swed/editor.hpp"
#include "swed/errors.hpp"
#include "swed/io.hpp"
#include "swed/linalg.hpp"
#include "swed/neurons.hpp"
#include "swed/oracle.hpp"
#include "swed/toymodel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitOptimality = 5;

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw swed::IoError(path.string() + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw swed::IoError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw swed::IoError(path.string() + ": write failed");
}

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool seed_set = false;
    swed::MatrixFormat format = swed::MatrixFormat::binary;
};

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const GlobalOpts& global, const std::string& spec_path,
            const std::string& out_dir_str) {
    swed::toy::SyntheticSpec spec = swed::toy::SyntheticSpec::defaults();
    if (!spec_path.empty())
        spec = swed::toy::synthetic_spec_from_json(read_file(spec_path));
    if (global.seed_set) spec.seed = global.seed;

    const fs::path out_dir(out_dir_str);
    fs::create_directories(out_dir);

    const swed::toy::GeneratedData data = swed::toy::generate(spec);
    const auto harm_fwd = swed::toy::forward(data.model, data.x_high, true);
    const auto safe_fwd = swed::toy::forward(data.model, data.x_safe, true);

    const std::string ext = global.format == swed::MatrixFormat::binary ? ".swed" : ".txt";
    const auto put = [&](const std::string& name, const swed::Matrix& m) {
        const std::string file = name + ext;
        swed::write_matrix(out_dir / file, m, global.format);
        return file;
    };

    json files;
    files["x_low"] = put("x_low", data.x_low);
    files["x_high"] = put("x_high", data.x_high);
    files["x_safe"] = put("x_safe", data.x_safe);
    files["w_gate"] = put("w_gate", data.model.w_gate);
    files["w_up"] = put("w_up", data.model.w_up);
    files["w_down"] = put("w_down", data.model.w_down);
    files["act_harm"] = put("act_harm", harm_fwd.activations->gate_pre);
    files["act_safe"] = put("act_safe", safe_fwd.activations->gate_pre);

    write_file(out_dir / "ground_truth.json",
               swed::neuron_set_to_json(data.ground_truth, swed::IdentificationConfig{}));
    files["ground_truth"] = "ground_truth.json";

    json manifest;
    manifest["seed"] = spec.seed;
    manifest["format"] = global.format == swed::MatrixFormat::binary ? "binary" : "text";
    manifest["spec"] = json::parse(swed::toy::synthetic_spec_to_json(spec));
    manifest["files"] = files;
    const std::string text = manifest.dump(2) + "\n";
    write_file(out_dir / "manifest.json", text);
    std::cout << text;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// identify

int cmd_identify(const std::string& harm_path, const std::string& safe_path, double tau_mag,
                 double tau_stat, std::size_t layer, const std::string& projection,
                 const std::string& out_path) {
    swed::ActivationSet harm;
    harm.layer = layer;
    harm.projection = swed::projection_from_string(projection);
    harm.label = swed::Label::harmful;
    harm.values = swed::read_matrix(harm_path);

    swed::ActivationSet safe = harm;
    safe.label = swed::Label::harmless;
    safe.values = swed::read_matrix(safe_path);

    swed::IdentificationConfig cfg;
    cfg.tau_mag = tau_mag;
    cfg.tau_stat = tau_stat;

    const swed::LayerStats stats = swed::compute_stats(harm, safe, cfg);
    const swed::NeuronSet set = swed::select_neurons(stats, cfg);
    write_file(out_path, swed::neuron_set_to_json(set, cfg));

    std::size_t mag_only = 0, stat_only = 0, both = 0;
    for (auto c : set.criteria) {
        if (c == swed::SelectionCriteria::mag_only) ++mag_only;
        if (c == swed::SelectionCriteria::stat_only) ++stat_only;
        if (c == swed::SelectionCriteria::both) ++both;
    }
    json summary;
    summary["selected"] = set.size();
    summary["mag_only"] = mag_only;
    summary["stat_only"] = stat_only;
    summary["both"] = both;
    summary["neurons"] = harm.values.cols();
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// jaccard

int cmd_jaccard(const GlobalOpts& global, const std::vector<std::string>& set_paths,
                const std::string& out_path, std::string csv_path) {
    std::vector<swed::NeuronSet> sets;
    std::vector<std::string> labels;
    for (const auto& path : set_paths) {
        sets.push_back(swed::neuron_set_from_json(read_file(path)));
        labels.push_back(fs::path(path).stem().string());
    }
    const swed::Matrix table = swed::jaccard_table(sets);
    swed::write_matrix(out_path, table, global.format);
    if (csv_path.empty()) csv_path = fs::path(out_path).replace_extension(".csv").string();
    write_file(csv_path, swed::jaccard_table_csv(table, labels));

    json doc;
    doc["labels"] = labels;
    json rows = json::array();
    for (std::size_t i = 0; i < table.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < table.cols(); ++j) row.push_back(table(i, j));
        rows.push_back(std::move(row));
    }
    doc["table"] = std::move(rows);
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// model manifests (gen output) and problem manifests (eval input)

swed::toy::ToyLayer load_model(const fs::path& manifest_path) {
    json doc;
    try {
        doc = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw swed::IoError(manifest_path.string() + ": " + e.what());
    }
    if (!doc.contains("files"))
        throw swed::IoError(manifest_path.string() + ": missing \"files\" table");
    const fs::path base = manifest_path.parent_path();
    const auto file = [&](const char* key) {
        if (!doc["files"].contains(key))
            throw swed::IoError(manifest_path.string() + ": missing files entry \"" +
                                std::string(key) + "\"");
        return base / doc["files"][key].get<std::string>();
    };
    swed::toy::ToyLayer model;
    model.w_gate = swed::read_matrix(file("w_gate"));
    model.w_up = swed::read_matrix(file("w_up"));
    model.w_down = swed::read_matrix(file("w_down"));
    return model;
}

// Gather columns when the matrix is a full stack; accept it unchanged when
// it is already |set| wide.
swed::Matrix align_columns(const swed::Matrix& m, const swed::NeuronSet& set,
                           const std::string& what) {
    if (set.empty())
        throw swed::InvalidArgument(what + ": neuron set is empty, nothing to edit");
    const std::size_t max_index = set.indices.back();
    if (max_index < m.cols()) return swed::extract_submatrix(m, set);
    if (m.cols() == set.size()) return m;
    throw swed::DimensionMismatch(what + ": " + std::to_string(m.cols()) +
                                  " columns fit neither the full stack nor the selected " +
                                  std::to_string(set.size()) + " neurons");
}

struct ProblemInputs {
    swed::EditProblem problem;
    swed::NeuronSet set;
};

ProblemInputs build_problem(const swed::Matrix& x_low, const swed::Matrix& x_safe,
                            const swed::Matrix& w, const swed::NeuronSet& set,
                            const swed::Matrix& y_target, double gamma, double lambda,
                            std::size_t rank) {
    const swed::Matrix w_s = align_columns(w, set, "weights");
    const swed::Matrix y_s = align_columns(y_target, set, "target");
    return ProblemInputs{swed::EditProblem(x_low, x_safe, w_s, y_s, gamma, lambda, rank), set};
}

ProblemInputs load_problem_manifest(const fs::path& manifest_path) {
    json doc;
    try {
        doc = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw swed::IoError(manifest_path.string() + ": " + e.what());
    }
    const fs::path base = manifest_path.parent_path();
    const auto path_of = [&](const char* key) {
        if (!doc.contains(key))
            throw swed::IoError(manifest_path.string() + ": missing entry \"" +
                                std::string(key) + "\"");
        return base / doc[key].get<std::string>();
    };
    const swed::Matrix x_low = swed::read_matrix(path_of("x_low"));
    const swed::Matrix x_safe = swed::read_matrix(path_of("x_safe"));
    const swed::Matrix w = swed::read_matrix(path_of("w"));
    const swed::NeuronSet set = swed::neuron_set_from_json(read_file(path_of("neurons")));
    const swed::Matrix y = swed::read_matrix(path_of("y_target"));
    const double gamma = doc.value("gamma", 1.0);
    const double lambda = doc.value("lambda", 1e-3);
    const std::size_t rank = doc.value("rank", std::size_t{32});
    if (!(lambda > 0.0))
        throw swed::InvalidArgument(manifest_path.string() + ": lambda must be positive");
    return build_problem(x_low, x_safe, w, set, y, gamma, lambda, rank);
}

// ---------------------------------------------------------------------------
// solve / apply / steer

int cmd_solve(const GlobalOpts& global, const std::string& x_low_path,
              const std::string& x_safe_path, const std::string& w_path,
              const std::string& neurons_path, const std::string& y_path, double gamma,
              double lambda, std::size_t rank, const std::string& out_path,
              const std::string& report_path) {
    const swed::Matrix x_low = swed::read_matrix(x_low_path);
    const swed::Matrix x_safe =
        x_safe_path.empty() ? swed::Matrix(0, x_low.cols()) : swed::read_matrix(x_safe_path);
    const swed::Matrix w = swed::read_matrix(w_path);
    const swed::NeuronSet set = swed::neuron_set_from_json(read_file(neurons_path));
    const swed::Matrix y = swed::read_matrix(y_path);

    const ProblemInputs inputs = build_problem(x_low, x_safe, w, set, y, gamma, lambda, rank);
    const swed::EditSolution sol = swed::solve(inputs.problem);

    swed::write_matrix(out_path, sol.delta_w, global.format);
    const std::string report = swed::edit_report_json(sol, inputs.problem);
    if (!report_path.empty()) write_file(report_path, report);
    std::cout << report;
    return kExitOk;
}

int cmd_apply(const GlobalOpts& global, const std::string& w_path,
              const std::string& neurons_path, const std::string& delta_path,
              const std::string& out_path) {
    const swed::Matrix w = swed::read_matrix(w_path);
    const swed::NeuronSet set = swed::neuron_set_from_json(read_file(neurons_path));
    const swed::Matrix delta = swed::read_matrix(delta_path);
    swed::write_matrix(out_path, swed::apply_edit(w, set, delta), global.format);
    return kExitOk;
}

int cmd_steer(const GlobalOpts& global, const std::string& model_path,
              const std::string& neurons_path, double alpha, const std::string& input_path,
              const std::string& out_path) {
    const swed::toy::ToyLayer model = load_model(model_path);
    swed::toy::SteeringConfig cfg;
    cfg.alpha = alpha;
    cfg.target = swed::neuron_set_from_json(read_file(neurons_path));
    const swed::Matrix x = swed::read_matrix(input_path);
    const swed::toy::ForwardResult out = swed::toy::steer(model, x, cfg);
    swed::write_matrix(out_path, out.output, global.format);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

// Optional oracle configuration file: any subset of the DescentConfig
// fields plus "candidates".
void apply_oracle_config(const fs::path& path, swed::oracle::DescentConfig& cfg,
                         std::size_t& candidates) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw swed::IoError(path.string() + ": " + e.what());
    }
    cfg.step_size = doc.value("step_size", cfg.step_size);
    cfg.max_iters = doc.value("max_iters", cfg.max_iters);
    cfg.grad_tol = doc.value("grad_tol", cfg.grad_tol);
    cfg.restarts = doc.value("restarts", cfg.restarts);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.stall_tol = doc.value("stall_tol", cfg.stall_tol);
    cfg.stall_patience = doc.value("stall_patience", cfg.stall_patience);
    candidates = doc.value("candidates", candidates);
}

int cmd_eval(const GlobalOpts& global, const std::string& manifest_path,
             const std::string& oracle_config_path, std::size_t restarts,
             std::size_t candidates, std::size_t max_iters, const std::string& out_path,
             const std::string& model_path, const std::string& edited_w_path,
             const std::string& edit_report_path) {
    const ProblemInputs inputs = load_problem_manifest(manifest_path);
    const swed::EditSolution sol = swed::solve(inputs.problem);

    swed::oracle::DescentConfig cfg;
    cfg.restarts = restarts;
    cfg.max_iters = max_iters;
    cfg.seed = global.seed;
    if (!oracle_config_path.empty()) apply_oracle_config(oracle_config_path, cfg, candidates);
    const swed::oracle::DescentResult descent = swed::oracle::descend(inputs.problem, cfg);

    double random_best = std::numeric_limits<double>::infinity();
    for (const auto& c :
         swed::oracle::random_candidates(inputs.problem, candidates, global.seed + 1))
        random_best = std::min(random_best, c.objective);

    const double best_other = std::min(descent.objective, random_best);
    const double margin = best_other - sol.objective;

    json doc;
    doc["closed_form"] = sol.objective;
    doc["oracle_best"] = descent.objective;
    doc["random_best"] = random_best;
    doc["margin"] = margin;
    const std::string text = doc.dump(2) + "\n";
    if (!out_path.empty()) write_file(out_path, text);
    std::cout << text;

    if (!model_path.empty() && !edited_w_path.empty()) {
        const swed::toy::ToyLayer model = load_model(model_path);
        swed::toy::ToyLayer edited = model;
        const swed::Matrix edited_w = swed::read_matrix(edited_w_path);
        if (inputs.set.projection == swed::Projection::gate)
            edited.w_gate = edited_w;
        else
            edited.w_up = edited_w;
        const swed::toy::EvalReport report = swed::toy::evaluate_edit(
            model, edited, inputs.problem.harmful, inputs.problem.harmless,
            inputs.problem.target, inputs.set, swed::toy::TargetKind::pre_activation,
            inputs.set.projection);
        const std::string report_text = swed::toy::eval_report_to_json(report);
        if (!edit_report_path.empty()) write_file(edit_report_path, report_text);
        std::cout << report_text;
    }

    if (margin < -1e-6 * (1.0 + std::fabs(sol.objective))) {
        std::cerr << "optimality violation: oracle " << best_other << " beats closed form "
                  << sol.objective << "\n";
        return kExitOptimality;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse weight editing: identify safety neurons, solve the rank-constrained "
                 "alignment update in closed form, and evaluate it on synthetic gated MLPs"};
    app.require_subcommand(1);

    GlobalOpts global;
    std::string format_name = "binary";
    app.add_option("--seed", global.seed, "Seed for every random draw (xoshiro256++ stream)")
        ->each([&](const std::string&) { global.seed_set = true; });
    app.add_option("--format", format_name, "Matrix file format for outputs")
        ->check(CLI::IsMember({"binary", "text"}))
        ->capture_default_str();

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a planted synthetic corpus and model");
    std::string gen_spec, gen_out_dir = "corpus";
    gen->add_option("spec-file", gen_spec, "Synthetic spec JSON (defaults used when omitted)");
    gen->add_option("--spec", gen_spec, "Synthetic spec JSON (same as the positional)");
    gen->add_option("--out-dir", gen_out_dir, "Output directory")->capture_default_str();

    // identify
    auto* identify = app.add_subcommand("identify", "Select safety neurons from activations");
    std::string id_harm, id_safe, id_out = "neurons.json", id_projection = "gate";
    double tau_mag = 2.0, tau_stat = 1.0;
    std::size_t id_layer = 0;
    identify->add_option("--harm", id_harm, "Harmful activation matrix")->required();
    identify->add_option("--safe", id_safe, "Harmless activation matrix")->required();
    identify->add_option("--tau-mag", tau_mag, "z-score threshold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    identify->add_option("--tau-stat", tau_stat, "Cohen's d threshold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    identify->add_option("--layer", id_layer, "Layer tag for the output document")
        ->capture_default_str();
    identify->add_option("--projection", id_projection, "Projection tag (gate|up)")
        ->check(CLI::IsMember({"gate", "up"}))
        ->capture_default_str();
    identify->add_option("--out", id_out, "Neuron set JSON path")->capture_default_str();

    // jaccard
    auto* jac = app.add_subcommand("jaccard", "Pairwise overlap of neuron set files");
    std::vector<std::string> jac_sets;
    std::string jac_out = "jaccard.swed", jac_csv;
    jac->add_option("sets", jac_sets, "Neuron set JSON files")->required()->expected(-2);
    jac->add_option("--out", jac_out, "Output matrix path")->capture_default_str();
    jac->add_option("--csv", jac_csv, "CSV mirror path (default: --out with .csv)");

    // steer
    auto* steer = app.add_subcommand("steer", "Scale safety-neuron activations at inference");
    std::string steer_model, steer_neurons, steer_input, steer_out = "steered.swed";
    double steer_alpha = 1.0;
    steer->add_option("--model", steer_model, "Model manifest JSON (from gen)")->required();
    steer->add_option("--neurons", steer_neurons, "Neuron set JSON")->required();
    steer->add_option("--alpha", steer_alpha, "Post-activation scale factor")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    steer->add_option("--input", steer_input, "Input feature matrix")->required();
    steer->add_option("--out", steer_out, "Output matrix path")->capture_default_str();

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "Closed-form rank-constrained edit");
    std::string so_x_low, so_x_safe, so_w, so_neurons, so_y, so_out = "delta.swed", so_report;
    double so_gamma = 1.0, so_lambda = 1e-3;
    std::size_t so_rank = 32;
    solve_cmd->add_option("--x-low", so_x_low, "Features to re-align (rows pair with target)")
        ->required();
    solve_cmd->add_option("--x-safe", so_x_safe, "Features to leave undisturbed (optional)");
    solve_cmd->add_option("--w", so_w, "Weight matrix (full stack or pre-gathered columns)")
        ->required();
    solve_cmd->add_option("--neurons", so_neurons, "Neuron set JSON")->required();
    solve_cmd->add_option("--y-target", so_y, "Target activations (full stack or gathered)")
        ->required();
    solve_cmd->add_option("--gamma", so_gamma, "Utility penalty weight")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    solve_cmd->add_option("--lambda", so_lambda, "Ridge weight (must be positive)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve_cmd->add_option("--rank", so_rank, "Rank budget")->capture_default_str();
    solve_cmd->add_option("--out", so_out, "Delta matrix path")->capture_default_str();
    solve_cmd->add_option("--report", so_report, "Report JSON path (also printed)");

    // apply
    auto* apply_cmd = app.add_subcommand("apply", "Scatter a delta onto the indexed columns");
    std::string ap_w, ap_neurons, ap_delta, ap_out = "w_edited.swed";
    apply_cmd->add_option("--w", ap_w, "Weight matrix")->required();
    apply_cmd->add_option("--neurons", ap_neurons, "Neuron set JSON")->required();
    apply_cmd->add_option("--delta", ap_delta, "Delta matrix (one column per neuron)")
        ->required();
    apply_cmd->add_option("--out", ap_out, "Edited weight path")->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Closed form vs oracle margin report");
    std::string ev_manifest, ev_oracle, ev_out = "margin.json", ev_model, ev_edited_w,
                             ev_edit_report;
    std::size_t ev_restarts = 5, ev_candidates = 200, ev_max_iters = 500;
    eval_cmd->add_option("--problem-manifest", ev_manifest, "Problem manifest JSON")
        ->required();
    eval_cmd->add_option("--oracle", ev_oracle,
                         "Oracle config JSON (restarts, max_iters, candidates, seed, ...)");
    eval_cmd->add_option("--restarts", ev_restarts, "Oracle descent restarts")
        ->capture_default_str();
    eval_cmd->add_option("--candidates", ev_candidates, "Random rank-r probes")
        ->capture_default_str();
    eval_cmd->add_option("--max-iters", ev_max_iters, "Descent iteration budget")
        ->capture_default_str();
    eval_cmd->add_option("--out", ev_out, "Margin report path")->capture_default_str();
    eval_cmd->add_option("--model", ev_model, "Model manifest for an edit-quality report");
    eval_cmd->add_option("--edited-w", ev_edited_w, "Edited weight matrix (from apply)");
    eval_cmd->add_option("--edit-report", ev_edit_report, "Edit-quality report path");

    // Let --seed/--format appear after the subcommand name as well.
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }
    global.format =
        format_name == "binary" ? swed::MatrixFormat::binary : swed::MatrixFormat::text;

    try {
        if (gen->parsed()) return cmd_gen(global, gen_spec, gen_out_dir);
        if (identify->parsed())
            return cmd_identify(id_harm, id_safe, tau_mag, tau_stat, id_layer, id_projection,
                                id_out);
        if (jac->parsed()) return cmd_jaccard(global, jac_sets, jac_out, jac_csv);
        if (steer->parsed())
            return cmd_steer(global, steer_model, steer_neurons, steer_alpha, steer_input,
                             steer_out);
        if (solve_cmd->parsed())
            return cmd_solve(global, so_x_low, so_x_safe, so_w, so_neurons, so_y, so_gamma,
                             so_lambda, so_rank, so_out, so_report);
        if (apply_cmd->parsed()) return cmd_apply(global, ap_w, ap_neurons, ap_delta, ap_out);
        if (eval_cmd->parsed())
            return cmd_eval(global, ev_manifest, ev_oracle, ev_restarts, ev_candidates,
                            ev_max_iters, ev_out, ev_model, ev_edited_w, ev_edit_report);
    } catch (const swed::DegenerateLayer& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const swed::NotPositiveDefinite& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const swed::ConvergenceFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const swed::Error& e) {
        // DimensionMismatch, IndexOutOfRange, InvalidArgument, IoError.
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitInput;
}
