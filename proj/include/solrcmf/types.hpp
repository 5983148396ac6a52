#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace solrcmf {

inline constexpr const char* kVersion = "0.1.0";

using Real = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// 1-based view identifier. Views are the row/column entity groups of the
/// data matrices; ids are dense in 1..m.
using ViewId = int;

/// Identifies one observed data matrix: row view, column view and a layer
/// index for replicates. Row and column view must differ.
struct MatrixKey {
    ViewId row_view = 0;
    ViewId col_view = 0;
    int layer = 1;

    friend bool operator==(const MatrixKey&, const MatrixKey&) = default;
    friend auto operator<=>(const MatrixKey&, const MatrixKey&) = default;

    std::string str() const {
        return std::to_string(row_view) + ":" + std::to_string(col_view) +
               ":" + std::to_string(layer);
    }
};

// Error hierarchy. ConfigError covers invalid inputs and configuration,
// NumericError covers failures arising during computation.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

struct DimensionMismatch : ConfigError { using ConfigError::ConfigError; };
struct DuplicateKey : ConfigError { using ConfigError::ConfigError; };
struct SelfRelation : ConfigError { using ConfigError::ConfigError; };
struct EmptyRowOrColumn : ConfigError { using ConfigError::ConfigError; };
struct NoConvergence : NumericError { using NumericError::NumericError; };
struct ZeroMatrix : ConfigError { using ConfigError::ConfigError; };
struct TooFewEntries : ConfigError { using ConfigError::ConfigError; };
struct RankTooLarge : ConfigError { using ConfigError::ConfigError; };
struct LayoutNotMultiview : ConfigError { using ConfigError::ConfigError; };
struct MissingEntriesUnsupported : ConfigError { using ConfigError::ConfigError; };
struct InvalidRho : ConfigError { using ConfigError::ConfigError; };
struct NonFiniteValue : NumericError { using NumericError::NumericError; };
struct DegenerateSupport : NumericError { using NumericError::NumericError; };
struct BadRange : ConfigError { using ConfigError::ConfigError; };
struct EmptyInput : ConfigError { using ConfigError::ConfigError; };
struct EmptyFold : NumericError { using NumericError::NumericError; };
struct NoSharedView : ConfigError { using ConfigError::ConfigError; };
struct ZeroDataNorm : NumericError { using NumericError::NumericError; };
struct IoError : ConfigError { using ConfigError::ConfigError; };
struct SchemaMismatch : ConfigError { using ConfigError::ConfigError; };
struct InvalidScenario : ConfigError { using ConfigError::ConfigError; };

}  // namespace solrcmf
