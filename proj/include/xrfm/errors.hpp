#pragma once

#include <stdexcept>
#include <string>

namespace xrfm {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- numerical errors -------------------------------------------------

/// A Cholesky pivot was <= 0; the matrix is not positive definite
/// (often a sign of a too-small ridge or duplicate rows).
struct NotPositiveDefinite : Error { using Error::Error; };

/// Eigensolver did not converge within the sweep cap.
struct NoConvergence : Error { using Error::Error; };

/// Ridge system could not be solved while fitting a model.
struct SolveFailed : Error { using Error::Error; };

// ---- argument / contract errors ---------------------------------------

struct InvalidNorm : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct BlockMismatch : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EmptyValidation : Error { using Error::Error; };
struct LeafTooSmall : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };
struct FractionOverflow : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// ---- data loading errors ----------------------------------------------

struct MissingTarget : Error { using Error::Error; };
struct EmptyFile : Error { using Error::Error; };
struct RaggedRow : Error { using Error::Error; };

/// Config / model-file format problems.
struct FormatError : Error { using Error::Error; };

} // namespace xrfm
