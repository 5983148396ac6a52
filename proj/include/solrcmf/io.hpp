#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "solrcmf/admm.hpp"
#include "solrcmf/datamodel.hpp"
#include "solrcmf/modelselect.hpp"
#include "solrcmf/simgen.hpp"

// File formats. A collection is described by a JSON manifest listing views
// (id, dimension, optional name) and matrices (key triple, CSV path
// relative to the manifest). Matrix payloads are comma-separated rows of
// reals; an empty cell or a NaN literal marks a missing entry. Ground truth
// travels in a JSON sidecar referencing factor CSVs. Fit and selection
// reports are directories of JSON plus CSVs; all numeric output is written
// with round-trip precision so identical runs produce identical bytes.

namespace solrcmf {

namespace fs = std::filesystem;

struct CsvMatrix {
    Matrix values;
    Mask mask;
};

CsvMatrix read_csv_matrix(const fs::path& path);
void write_csv_matrix(const fs::path& path, const Matrix& values,
                      const Mask* mask = nullptr);

std::string format_real(Real x);

DataCollection read_manifest(const fs::path& manifest_path);

/// Writes manifest.json plus one CSV per matrix into `dir`.
void write_collection(const fs::path& dir, const DataCollection& data);

struct TruthSidecar {
    Index k = 0;
    std::vector<Matrix> factors;      // per view
    std::vector<MatrixKey> keys;
    std::vector<Vector> scales;       // per key
    std::vector<Real> sigma2;         // per key
};

/// Writes truth.json plus factor CSVs into `dir`; returns the sidecar path.
fs::path write_truth(const fs::path& dir, const GroundTruth& truth);
TruthSidecar read_truth(const fs::path& sidecar_path);

struct FitReport {
    SolverState state;
    std::vector<Real> lagrangian_trace;
    std::vector<Real> split_residuals;
    std::vector<Real> signal_residuals;
    int iterations = 0;
    bool converged = false;
    Real objective = 0.0;
    std::vector<std::string> warnings;

    fs::path data_manifest;
    bool preprocessed_bicenter = false;
    bool preprocessed_normalize = false;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;
    int n_init = 0;
};

void write_fit_report(const fs::path& dir, const FitReport& report,
                      const DataCollection& data);
FitReport read_fit_report(const fs::path& dir);

void write_selection_report(const fs::path& dir, const SelectionResult& result,
                            const DataCollection& data,
                            const std::vector<std::pair<Real, Real>>& grid,
                            const FitReport& refit_report, int n_folds,
                            std::uint64_t fold_seed);

/// Machine-readable record of how an output directory was produced.
void write_provenance(const fs::path& dir, const std::string& command,
                      const std::vector<std::string>& args);

/// Timing and other non-reproducible run information; kept out of the
/// deterministic report set.
void write_run_info(const fs::path& dir, double wall_seconds);

}  // namespace solrcmf
