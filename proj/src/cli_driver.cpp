#include "solrcmf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "solrcmf/io.hpp"
#include "solrcmf/metrics.hpp"
#include "solrcmf/parallel.hpp"

namespace solrcmf {

namespace {

using nlohmann::json;

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ =
        std::chrono::steady_clock::now();
};

Scenario scenario_from_file(const fs::path& path, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open scenario file " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidScenario("cannot parse scenario file: " +
                              std::string(e.what()));
    }
    Scenario sc;
    sc.view_dims = j.at("view_dims").get<std::vector<Index>>();
    for (const auto& entry : j.at("keys")) {
        MatrixKey key;
        key.row_view = entry.at("row_view").get<int>();
        key.col_view = entry.at("col_view").get<int>();
        key.layer = entry.value("layer", 1);
        sc.keys.push_back(key);
        const auto d = entry.at("scales").get<std::vector<Real>>();
        Vector scales(static_cast<Index>(d.size()));
        for (size_t l = 0; l < d.size(); ++l) scales(static_cast<Index>(l)) = d[l];
        sc.scales_truth.push_back(std::move(scales));
    }
    sc.sparsity = j.value("sparsity", 0.0);
    sc.snr = j.value("snr", 0.5);
    sc.seed = seed;
    return sc;
}

struct CommonFitOptions {
    std::string data_path;
    std::string out_dir;
    Real lambda1 = 0.0;
    Real lambda2 = 0.0;
    Real rho = 0.0;
    Real mu = 1.0;
    Real alpha = 1e-3;
    Index k = 10;
    int n_init = 5;
    std::uint64_t seed = 0;
    bool no_preprocess = false;
    int threads = 0;
};

void add_fit_options(CLI::App* cmd, CommonFitOptions& opt) {
    cmd->add_option("--data", opt.data_path, "collection manifest")->required();
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_option("--rho", opt.rho, "ADMM step size (default: auto)");
    cmd->add_option("--mu", opt.mu, "slack penalty");
    cmd->add_option("--alpha", opt.alpha, "proximal weight");
    cmd->add_option("--k", opt.k, "target rank");
    cmd->add_option("--n-init", opt.n_init, "random restarts");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_flag("--no-preprocess", opt.no_preprocess,
                  "skip bicentering and normalization");
    cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
}

struct PreparedData {
    DataCollection data;
    Hyperparams hyperparams;
    BestInit init;
};

PreparedData prepare(const CommonFitOptions& opt) {
    thread_count() = opt.threads;
    PreparedData prep;
    prep.data = read_manifest(opt.data_path);
    if (!opt.no_preprocess) {
        preprocess_collection(prep.data);
    }
    prep.hyperparams.lambda1 = opt.lambda1;
    prep.hyperparams.lambda2 = opt.lambda2;
    prep.hyperparams.rho = opt.rho;
    prep.hyperparams.mu = opt.mu;
    prep.hyperparams.alpha = opt.alpha;

    InitConfig cfg;
    cfg.k = opt.k;
    cfg.n_init = opt.n_init;
    cfg.seed = opt.seed;
    prep.init = best_of_restarts(prep.data, cfg, prep.hyperparams);
    return prep;
}

FitReport to_report(const FitResult& fit, const CommonFitOptions& opt,
                    const Hyperparams& h) {
    FitReport report;
    report.state = fit.state;
    report.lagrangian_trace = fit.lagrangian_trace;
    report.split_residuals = fit.split_residuals;
    report.signal_residuals = fit.signal_residuals;
    report.iterations = fit.iterations;
    report.converged = fit.converged;
    report.objective = fit.objective;
    report.warnings = fit.warnings;
    report.data_manifest = fs::absolute(opt.data_path);
    report.preprocessed_bicenter = !opt.no_preprocess;
    report.preprocessed_normalize = !opt.no_preprocess;
    report.hyperparams = h;
    report.seed = opt.seed;
    report.n_init = opt.n_init;
    return report;
}

int cmd_simulate(const std::string& scenario_name, std::uint64_t seed,
                 const std::string& out_dir, double sparsity_override,
                 double snr_override) {
    Stopwatch watch;
    Scenario sc = fs::exists(scenario_name) && !fs::is_directory(scenario_name)
                      ? scenario_from_file(scenario_name, seed)
                      : builtin_scenario(scenario_name, seed);
    if (sparsity_override >= 0.0) sc.sparsity = sparsity_override;
    if (snr_override > 0.0) sc.snr = snr_override;

    const GroundTruth truth = build_scenario(sc);
    const fs::path out(out_dir);
    write_collection(out, truth.data);
    write_truth(out, truth);
    write_provenance(out, "simulate",
                     {scenario_name, "seed=" + std::to_string(seed)});
    write_run_info(out, watch.seconds());
    std::cout << "simulate: wrote " << truth.data.n_matrices()
              << " matrices to " << out.string() << "\n";
    return 0;
}

int cmd_fit(const CommonFitOptions& opt) {
    Stopwatch watch;
    PreparedData prep = prepare(opt);
    // Penalized fits start from the converged unpenalized estimate; cold
    // starts under active penalties tend to shrink factors away before the
    // signal builds up.
    const FitResult fitted = fit(prep.data, prep.hyperparams, prep.init.warm);

    const fs::path out(opt.out_dir);
    FitReport report = to_report(fitted, opt, prep.hyperparams);
    write_fit_report(out, report, prep.data);
    write_provenance(out, "fit",
                     {"data=" + opt.data_path,
                      "lambda1=" + format_real(opt.lambda1),
                      "lambda2=" + format_real(opt.lambda2),
                      "k=" + std::to_string(opt.k),
                      "seed=" + std::to_string(opt.seed)});
    write_run_info(out, watch.seconds());
    for (const auto& w : fitted.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "fit: converged=" << (fitted.converged ? "yes" : "no")
              << " iterations=" << fitted.iterations
              << " objective=" << format_real(fitted.objective)
              << " wall_seconds=" << watch.seconds() << "\n";
    return 0;
}

int cmd_select(const CommonFitOptions& opt, int grid_n, Real grid_lo,
               Real grid_hi, int folds_k) {
    Stopwatch watch;
    if (folds_k < 2) {
        throw BadRange("--folds must be at least 2");
    }
    PreparedData prep = prepare(opt);
    const auto grid = sample_hyperparams(grid_n, grid_lo, grid_hi, opt.seed);
    const FoldAssignment folds = make_folds(prep.data, folds_k, opt.seed);
    const SelectionResult result =
        select_model(prep.data, grid, folds, prep.init.warm, prep.hyperparams);

    const fs::path out(opt.out_dir);
    CommonFitOptions refit_opt = opt;
    refit_opt.lambda1 = 0.0;
    refit_opt.lambda2 = 0.0;
    const FitReport refit_report =
        to_report(result.refit, refit_opt, prep.hyperparams);
    write_selection_report(out, result, prep.data, grid, refit_report, folds_k,
                           opt.seed);
    write_provenance(out, "select",
                     {"data=" + opt.data_path, "grid_n=" + std::to_string(grid_n),
                      "folds=" + std::to_string(folds_k),
                      "seed=" + std::to_string(opt.seed)});
    write_run_info(out, watch.seconds());
    std::cout << "select: scored " << result.records.size()
              << " patterns, chosen lambda1=" << format_real(result.pattern.lambda1)
              << " lambda2=" << format_real(result.pattern.lambda2) << "\n";
    return 0;
}

json matching_to_json(const FactorMatching& matching) {
    json pairs = json::array();
    for (const auto& pair : matching.pairs) {
        pairs.push_back(json{{"est", pair.est},
                             {"truth", pair.truth},
                             {"dot", pair.dot}});
    }
    return pairs;
}

int cmd_evaluate(const std::string& fit_dir, const std::string& truth_path,
                 const std::string& out_dir) {
    Stopwatch watch;
    FitReport report = read_fit_report(fit_dir);
    DataCollection data = read_manifest(report.data_manifest);
    if (report.preprocessed_bicenter || report.preprocessed_normalize) {
        preprocess_collection(data, report.preprocessed_bicenter,
                              report.preprocessed_normalize);
    }

    FitResult fit;
    fit.state = report.state;
    fit.converged = report.converged;
    fit.iterations = report.iterations;
    fit.objective = report.objective;
    canonicalize_signs(fit, data);

    const fs::path out(out_dir);
    fs::create_directories(out);

    const VariationReport variation = make_variation_report(fit, data);
    json variation_json = json::array();
    for (size_t i = 0; i < variation.keys.size(); ++i) {
        variation_json.push_back(
            json{{"row_view", variation.keys[i].row_view},
                 {"col_view", variation.keys[i].col_view},
                 {"layer", variation.keys[i].layer},
                 {"variation", variation.variation[i]},
                 {"sigma2_hat", variation.noise[i].sigma2_hat},
                 {"snr_hat", variation.noise[i].snr_hat}});
    }
    json directed_json = json::array();
    for (const auto& entry : variation.directed) {
        directed_json.push_back(json{{"dep", entry.dep.str()},
                                     {"pred", entry.pred.str()},
                                     {"value", entry.value}});
    }
    json out_json{{"per_matrix", variation_json},
                  {"directed_r2", directed_json},
                  {"version", kVersion}};

    // Edge list: dep pred weight, one edge per positive directed R^2.
    const StructureGraph graph = structure_graph(fit, data);
    std::string edges;
    for (const auto& edge : graph.edges) {
        edges += edge.dep.str() + " " + edge.pred.str() + " " +
                 format_real(edge.weight) + "\n";
    }
    {
        std::ofstream f(out / "graph.txt", std::ios::binary);
        if (!f) throw IoError("cannot write graph.txt");
        f << edges;
    }

    if (!truth_path.empty()) {
        const TruthSidecar truth = read_truth(truth_path);
        if (truth.factors.size() != fit.state.factors.size()) {
            throw SchemaMismatch("truth sidecar lists a different view count");
        }
        for (size_t v = 0; v < truth.factors.size(); ++v) {
            if (truth.factors[v].rows() != fit.state.factors[v].rows()) {
                throw SchemaMismatch("truth factor dimensions do not match fit");
            }
        }
        if (truth.k > fit.state.k) {
            throw SchemaMismatch(
                "truth rank " + std::to_string(truth.k) +
                " exceeds fitted rank " + std::to_string(fit.state.k));
        }

        json ranks = json::array();
        for (size_t i = 0; i < truth.keys.size(); ++i) {
            if (!data.contains(truth.keys[i])) {
                throw SchemaMismatch("truth key " + truth.keys[i].str() +
                                     " not present in the fitted collection");
            }
            const int truth_rank =
                static_cast<int>((truth.scales[i].array().abs() > 1e-12).count());
            ranks.push_back(json{{"key", truth.keys[i].str()},
                                 {"estimated", estimated_rank(fit, data, truth.keys[i])},
                                 {"truth", truth_rank}});
        }
        json shared = json::array();
        for (size_t a = 0; a < truth.keys.size(); ++a) {
            for (size_t b = a + 1; b < truth.keys.size(); ++b) {
                const int truth_shared = static_cast<int>(
                    ((truth.scales[a].array().abs() > 1e-12) &&
                     (truth.scales[b].array().abs() > 1e-12))
                        .count());
                shared.push_back(
                    json{{"key_a", truth.keys[a].str()},
                         {"key_b", truth.keys[b].str()},
                         {"estimated", shared_rank(fit, data, truth.keys[a], truth.keys[b])},
                         {"truth", truth_shared}});
            }
        }
        out_json["ranks"] = ranks;
        out_json["shared_ranks"] = shared;

        json matchings = json::array();
        json confusion = json::array();
        for (size_t v = 0; v < truth.factors.size(); ++v) {
            const FactorMatching matching =
                match_factors(fit.state.sparse_factors[v], truth.factors[v]);
            matchings.push_back(json{{"view", static_cast<int>(v + 1)},
                                     {"pairs", matching_to_json(matching)}});
            const Mask est_support = fit.state.sparse_factors[v].array().abs() > 1e-9;
            const Mask truth_support = truth.factors[v].array().abs() > 1e-12;
            json view_rates = json::array();
            for (const auto& rates :
                 sparsity_confusion(est_support, truth_support, matching)) {
                view_rates.push_back(json{{"est", rates.est_column},
                                          {"truth", rates.truth_column},
                                          {"tpr", rates.tpr},
                                          {"fpr", rates.fpr}});
            }
            confusion.push_back(
                json{{"view", static_cast<int>(v + 1)}, {"rates", view_rates}});
        }
        out_json["factor_matching"] = matchings;
        out_json["sparsity_confusion"] = confusion;
    }

    {
        std::ofstream f(out / "variation.json", std::ios::binary);
        if (!f) throw IoError("cannot write variation.json");
        f << out_json.dump(2) << "\n";
    }
    write_provenance(out, "evaluate", {"fit=" + fit_dir, "truth=" + truth_path});
    write_run_info(out, watch.seconds());
    std::cout << "evaluate: wrote metrics for " << data.n_matrices()
              << " matrices to " << out.string() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"sparse and orthogonal low-rank collective matrix factorization"};
    app.require_subcommand(1);

    // simulate
    std::string scenario = "sim1";
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    double sim_sparsity = -1.0;
    double sim_snr = -1.0;
    auto* simulate = app.add_subcommand("simulate", "generate synthetic data");
    simulate->add_option("--scenario", scenario, "built-in name or scenario file");
    simulate->add_option("--seed", sim_seed, "random seed");
    simulate->add_option("--out", sim_out, "output directory")->required();
    simulate->add_option("--sparsity", sim_sparsity, "override factor sparsity");
    simulate->add_option("--snr", sim_snr, "override signal-to-noise ratio");

    // fit
    CommonFitOptions fit_opt;
    auto* fit_cmd = app.add_subcommand("fit", "fit a penalized model");
    fit_cmd->add_option("--lambda1", fit_opt.lambda1, "scale penalty")->required();
    fit_cmd->add_option("--lambda2", fit_opt.lambda2, "factor penalty")->required();
    add_fit_options(fit_cmd, fit_opt);

    // select
    CommonFitOptions sel_opt;
    std::string grid_spec = "100,0.05,1";
    int folds_k = 10;
    auto* select = app.add_subcommand("select", "two-step structure selection");
    select->add_option("--grid", grid_spec, "N,LO,HI hyperparameter grid");
    select->add_option("--folds", folds_k, "cross-validation folds");
    add_fit_options(select, sel_opt);

    // evaluate
    std::string eval_fit;
    std::string eval_truth;
    std::string eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "metrics for a fit");
    evaluate->add_option("--fit", eval_fit, "fit or selection directory")
        ->required();
    evaluate->add_option("--truth", eval_truth, "ground-truth sidecar");
    evaluate->add_option("--out", eval_out, "output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(scenario, sim_seed, sim_out, sim_sparsity, sim_snr);
        }
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_opt);
        }
        if (select->parsed()) {
            int n = 0;
            Real lo = 0.0, hi = 0.0;
            if (std::sscanf(grid_spec.c_str(), "%d,%lf,%lf", &n, &lo, &hi) != 3) {
                throw BadRange("--grid expects N,LO,HI");
            }
            return cmd_select(sel_opt, n, lo, hi, folds_k);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(eval_fit, eval_truth, eval_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

}  // namespace solrcmf
