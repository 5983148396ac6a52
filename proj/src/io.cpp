#include "solrcmf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace solrcmf {

using nlohmann::json;

std::string format_real(Real x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

json parse_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw SchemaMismatch("cannot parse " + path.string() + ": " + e.what());
    }
}

void dump_json(const fs::path& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

bool is_missing_token(const std::string& token) {
    if (token.empty()) return true;
    std::string lower;
    for (char c : token) lower.push_back(static_cast<char>(std::tolower(c)));
    return lower == "nan" || lower == "na";
}

std::string matrix_filename(const MatrixKey& key) {
    return "x_" + std::to_string(key.row_view) + "_" +
           std::to_string(key.col_view) + "_" + std::to_string(key.layer) +
           ".csv";
}

MatrixKey key_from_json(const json& j) {
    MatrixKey key;
    key.row_view = j.at("row_view").get<int>();
    key.col_view = j.at("col_view").get<int>();
    key.layer = j.value("layer", 1);
    return key;
}

json key_to_json(const MatrixKey& key) {
    return json{{"row_view", key.row_view},
                {"col_view", key.col_view},
                {"layer", key.layer}};
}

json hyperparams_to_json(const Hyperparams& h) {
    return json{{"lambda1", h.lambda1}, {"lambda2", h.lambda2},
                {"mu", h.mu},           {"rho", h.rho},
                {"alpha", h.alpha},     {"eps_abs", h.eps_abs},
                {"eps_rel", h.eps_rel}, {"max_iter", h.max_iter}};
}

Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams h;
    h.lambda1 = j.value("lambda1", 0.0);
    h.lambda2 = j.value("lambda2", 0.0);
    h.mu = j.value("mu", 1.0);
    h.rho = j.value("rho", 0.0);
    h.alpha = j.value("alpha", 1e-3);
    h.eps_abs = j.value("eps_abs", 1e-10);
    h.eps_rel = j.value("eps_rel", 1e-8);
    h.max_iter = j.value("max_iter", 10000);
    return h;
}

}  // namespace

CsvMatrix read_csv_matrix(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::vector<std::pair<Real, bool>>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::vector<std::pair<Real, bool>> row;
        std::stringstream ss(line);
        std::string token;
        while (std::getline(ss, token, ',')) {
            // trim
            size_t a = token.find_first_not_of(" \t");
            size_t b = token.find_last_not_of(" \t");
            token = a == std::string::npos ? "" : token.substr(a, b - a + 1);
            if (is_missing_token(token)) {
                row.emplace_back(0.0, false);
            } else {
                try {
                    const Real value = std::stod(token);
                    if (std::isnan(value)) {
                        row.emplace_back(0.0, false);
                    } else {
                        row.emplace_back(value, true);
                    }
                } catch (const std::exception&) {
                    throw SchemaMismatch("bad numeric token '" + token + "' in " +
                                         path.string());
                }
            }
        }
        if (!line.empty() && line.back() == ',') row.emplace_back(0.0, false);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw SchemaMismatch("empty CSV file " + path.string());
    }
    const size_t cols = rows.front().size();
    for (const auto& row : rows) {
        if (row.size() != cols) {
            throw SchemaMismatch("ragged CSV rows in " + path.string());
        }
    }
    CsvMatrix out;
    out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    out.mask.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < cols; ++c) {
            out.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].first;
            out.mask(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].second;
        }
    }
    return out;
}

void write_csv_matrix(const fs::path& path, const Matrix& values,
                      const Mask* mask) {
    std::string out;
    out.reserve(static_cast<size_t>(values.size()) * 12);
    for (Index r = 0; r < values.rows(); ++r) {
        for (Index c = 0; c < values.cols(); ++c) {
            if (c > 0) out.push_back(',');
            if (mask == nullptr || (*mask)(r, c)) {
                out += format_real(values(r, c));
            }
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

DataCollection read_manifest(const fs::path& manifest_path) {
    const json j = parse_json(manifest_path);
    const fs::path base = manifest_path.parent_path();

    std::vector<std::pair<ViewId, Index>> views;
    for (const auto& v : j.at("views")) {
        views.emplace_back(v.at("id").get<int>(), v.at("dim").get<Index>());
    }
    std::vector<ObservedMatrix> entries;
    for (const auto& m : j.at("matrices")) {
        const MatrixKey key = key_from_json(m);
        const fs::path payload = base / m.at("path").get<std::string>();
        CsvMatrix csv = read_csv_matrix(payload);
        entries.push_back(
            make_observed(key, std::move(csv.values), std::move(csv.mask)));
    }
    return build_collection(views, std::move(entries));
}

void write_collection(const fs::path& dir, const DataCollection& data) {
    fs::create_directories(dir);
    json views = json::array();
    for (Index v = 0; v < data.n_views(); ++v) {
        views.push_back({{"id", static_cast<int>(v + 1)},
                         {"dim", data.view_dims[static_cast<size_t>(v)]}});
    }
    json matrices = json::array();
    for (const auto& m : data.matrices) {
        const std::string filename = matrix_filename(m.key);
        json entry = key_to_json(m.key);
        entry["path"] = filename;
        matrices.push_back(entry);
        write_csv_matrix(dir / filename, m.values, &m.mask);
    }
    dump_json(dir / "manifest.json", json{{"views", views}, {"matrices", matrices}});
}

fs::path write_truth(const fs::path& dir, const GroundTruth& truth) {
    fs::create_directories(dir);
    json factors = json::array();
    for (size_t v = 0; v < truth.factors.size(); ++v) {
        const std::string filename = "truth_v" + std::to_string(v + 1) + ".csv";
        write_csv_matrix(dir / filename, truth.factors[v]);
        factors.push_back({{"view", static_cast<int>(v + 1)}, {"path", filename}});
    }
    json keys = json::array();
    for (Index kk = 0; kk < truth.data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        json entry = key_to_json(truth.data.matrices[sk].key);
        // GroundTruth stores signals, not scales; the diagonal of
        // V_i^T Z V_j recovers them exactly for orthonormal factors.
        std::vector<Real> d;
        const MatrixKey& key = truth.data.matrices[sk].key;
        const Matrix& vi = truth.factors[static_cast<size_t>(key.row_view - 1)];
        const Matrix& vj = truth.factors[static_cast<size_t>(key.col_view - 1)];
        const Vector diag = (vi.transpose() * truth.signals[sk] * vj).diagonal();
        for (Index l = 0; l < diag.size(); ++l) d.push_back(diag(l));
        entry["scales"] = d;
        entry["sigma2"] = truth.sigma2[sk];
        keys.push_back(entry);
    }
    const Index k = truth.factors.empty() ? 0 : truth.factors.front().cols();
    dump_json(dir / "truth.json",
              json{{"k", k}, {"factors", factors}, {"keys", keys}});
    return dir / "truth.json";
}

TruthSidecar read_truth(const fs::path& sidecar_path) {
    const json j = parse_json(sidecar_path);
    const fs::path base = sidecar_path.parent_path();
    TruthSidecar truth;
    truth.k = j.at("k").get<Index>();
    std::vector<std::pair<int, fs::path>> factor_paths;
    for (const auto& f : j.at("factors")) {
        factor_paths.emplace_back(f.at("view").get<int>(),
                                  base / f.at("path").get<std::string>());
    }
    std::sort(factor_paths.begin(), factor_paths.end());
    for (const auto& [view, path] : factor_paths) {
        CsvMatrix csv = read_csv_matrix(path);
        truth.factors.push_back(std::move(csv.values));
    }
    for (const auto& entry : j.at("keys")) {
        truth.keys.push_back(key_from_json(entry));
        const auto d = entry.at("scales").get<std::vector<Real>>();
        Vector scales(static_cast<Index>(d.size()));
        for (size_t l = 0; l < d.size(); ++l) scales(static_cast<Index>(l)) = d[l];
        truth.scales.push_back(std::move(scales));
        truth.sigma2.push_back(entry.value("sigma2", 0.0));
    }
    return truth;
}

void write_fit_report(const fs::path& dir, const FitReport& report,
                      const DataCollection& data) {
    fs::create_directories(dir);
    json factors = json::array();
    json sparse = json::array();
    for (size_t v = 0; v < report.state.factors.size(); ++v) {
        const std::string vf = "V_" + std::to_string(v + 1) + ".csv";
        const std::string uf = "U_" + std::to_string(v + 1) + ".csv";
        write_csv_matrix(dir / vf, report.state.factors[v]);
        write_csv_matrix(dir / uf, report.state.sparse_factors[v]);
        factors.push_back({{"view", static_cast<int>(v + 1)}, {"path", vf}});
        sparse.push_back({{"view", static_cast<int>(v + 1)}, {"path", uf}});
    }

    std::string scales_csv;
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const MatrixKey& key = data.matrices[static_cast<size_t>(kk)].key;
        scales_csv += std::to_string(key.row_view) + "," +
                      std::to_string(key.col_view) + "," +
                      std::to_string(key.layer);
        const Vector& d = report.state.scales[static_cast<size_t>(kk)];
        for (Index l = 0; l < d.size(); ++l) {
            scales_csv += "," + format_real(d(l));
        }
        scales_csv += "\n";
    }
    write_file(dir / "scales.csv", scales_csv);

    std::string trace;
    for (const Real value : report.lagrangian_trace) {
        trace += format_real(value) + "\n";
    }
    write_file(dir / "lagrangian_trace.csv", trace);

    json j;
    j["k"] = report.state.k;
    j["iterations"] = report.iterations;
    j["converged"] = report.converged;
    j["objective"] = report.objective;
    j["split_residuals"] = report.split_residuals;
    j["signal_residuals"] = report.signal_residuals;
    j["warnings"] = report.warnings;
    j["data_manifest"] = report.data_manifest.string();
    j["preprocess"] = json{{"bicenter", report.preprocessed_bicenter},
                           {"normalize", report.preprocessed_normalize}};
    j["hyperparams"] = hyperparams_to_json(report.hyperparams);
    j["seed"] = report.seed;
    j["n_init"] = report.n_init;
    j["factors"] = factors;
    j["sparse_factors"] = sparse;
    j["scales_path"] = "scales.csv";
    j["trace_path"] = "lagrangian_trace.csv";
    j["version"] = kVersion;
    dump_json(dir / "fit.json", j);
}

FitReport read_fit_report(const fs::path& dir) {
    fs::path fit_dir = dir;
    if (!fs::exists(fit_dir / "fit.json") && fs::exists(fit_dir / "refit" / "fit.json")) {
        fit_dir = fit_dir / "refit";  // selection reports hold their refit here
    }
    const json j = parse_json(fit_dir / "fit.json");

    FitReport report;
    report.state.k = j.at("k").get<Index>();
    report.iterations = j.value("iterations", 0);
    report.converged = j.value("converged", false);
    report.objective = j.value("objective", 0.0);
    report.split_residuals = j.value("split_residuals", std::vector<Real>());
    report.signal_residuals = j.value("signal_residuals", std::vector<Real>());
    report.warnings = j.value("warnings", std::vector<std::string>());
    report.data_manifest = j.at("data_manifest").get<std::string>();
    report.preprocessed_bicenter = j.at("preprocess").value("bicenter", false);
    report.preprocessed_normalize = j.at("preprocess").value("normalize", false);
    report.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    report.seed = j.value("seed", std::uint64_t{0});
    report.n_init = j.value("n_init", 0);

    auto load_per_view = [&](const json& list) {
        std::vector<std::pair<int, Matrix>> blocks;
        for (const auto& f : list) {
            CsvMatrix csv = read_csv_matrix(fit_dir / f.at("path").get<std::string>());
            blocks.emplace_back(f.at("view").get<int>(), std::move(csv.values));
        }
        std::sort(blocks.begin(), blocks.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Matrix> out;
        for (auto& [view, m] : blocks) out.push_back(std::move(m));
        return out;
    };
    report.state.factors = load_per_view(j.at("factors"));
    report.state.sparse_factors = load_per_view(j.at("sparse_factors"));

    std::ifstream scales(fit_dir / j.at("scales_path").get<std::string>());
    if (!scales) {
        throw IoError("cannot open scales file in " + fit_dir.string());
    }
    std::string line;
    while (std::getline(scales, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string token;
        std::vector<std::string> tokens;
        while (std::getline(ss, token, ',')) tokens.push_back(token);
        if (tokens.size() < 4) {
            throw SchemaMismatch("bad scales row '" + line + "'");
        }
        Vector d(static_cast<Index>(tokens.size() - 3));
        for (size_t l = 3; l < tokens.size(); ++l) {
            d(static_cast<Index>(l - 3)) = std::stod(tokens[l]);
        }
        report.state.scales.push_back(std::move(d));
    }

    // Rebuild the auxiliary blocks so the loaded state is usable by the
    // metric computations (they only touch factors and scales).
    const size_t n_views = report.state.factors.size();
    report.state.slack.resize(n_views);
    report.state.dual_split.resize(n_views);
    for (size_t v = 0; v < n_views; ++v) {
        report.state.slack[v] = Matrix::Zero(report.state.factors[v].rows(),
                                             report.state.factors[v].cols());
        report.state.dual_split[v] = report.state.slack[v];
    }
    return report;
}

void write_selection_report(const fs::path& dir, const SelectionResult& result,
                            const DataCollection& data,
                            const std::vector<std::pair<Real, Real>>& grid,
                            const FitReport& refit_report, int n_folds,
                            std::uint64_t fold_seed) {
    fs::create_directories(dir);

    auto pattern_to_json = [&](const StructurePattern& pattern) {
        json scale = json::array();
        for (Index kk = 0; kk < data.n_matrices(); ++kk) {
            json entry = key_to_json(data.matrices[static_cast<size_t>(kk)].key);
            std::vector<int> active;
            const auto& sup = pattern.scale_support[static_cast<size_t>(kk)];
            for (Index l = 0; l < sup.size(); ++l) active.push_back(sup(l) ? 1 : 0);
            entry["active"] = active;
            scale.push_back(entry);
        }
        json factor = json::array();
        for (size_t v = 0; v < pattern.factor_support.size(); ++v) {
            const Mask& sup = pattern.factor_support[v];
            std::vector<std::vector<int>> rows;
            for (Index r = 0; r < sup.rows(); ++r) {
                std::vector<int> row;
                for (Index c = 0; c < sup.cols(); ++c) row.push_back(sup(r, c) ? 1 : 0);
                rows.push_back(std::move(row));
            }
            factor.push_back({{"view", static_cast<int>(v + 1)}, {"active", rows}});
        }
        return json{{"lambda1", pattern.lambda1},
                    {"lambda2", pattern.lambda2},
                    {"scale_support", scale},
                    {"factor_support", factor}};
    };

    json records = json::array();
    for (const auto& record : result.records) {
        records.push_back(json{{"lambda1", record.pattern.lambda1},
                               {"lambda2", record.pattern.lambda2},
                               {"fold_mses", record.fold_mses},
                               {"mean_mse", record.mean_mse},
                               {"se", record.se},
                               {"sparsity_score", record.sparsity_score}});
    }
    json grid_json = json::array();
    for (const auto& [l1, l2] : grid) grid_json.push_back({l1, l2});

    dump_json(dir / "selection.json",
              json{{"grid", grid_json},
                   {"records", records},
                   {"chosen", pattern_to_json(result.pattern)},
                   {"folds", n_folds},
                   {"fold_seed", fold_seed},
                   {"version", kVersion}});
    dump_json(dir / "pattern.json", pattern_to_json(result.pattern));
    write_fit_report(dir / "refit", refit_report, data);
}

void write_provenance(const fs::path& dir, const std::string& command,
                      const std::vector<std::string>& args) {
    fs::create_directories(dir);
    dump_json(dir / "provenance.json",
              json{{"command", command}, {"args", args}, {"version", kVersion}});
}

void write_run_info(const fs::path& dir, double wall_seconds) {
    fs::create_directories(dir);
    write_file(dir / "run_info.txt",
               "wall_seconds: " + std::to_string(wall_seconds) + "\n");
}

}  // namespace solrcmf
