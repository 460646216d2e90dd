#pragma once

#include <stdexcept>
#include <string>

namespace gat {

// Base class for every error this library raises on purpose.
struct GatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/axis mismatches between tensors.
struct DimensionError : GatError { using GatError::GatError; };
// Structural shape violations (e.g. backward on a non-scalar).
struct ShapeError : GatError { using GatError::GatError; };
// Out-of-range numeric arguments (eps, step bounds, ...).
struct ParameterError : GatError { using GatError::GatError; };
// Token id outside the vocabulary.
struct VocabularyError : GatError { using GatError::GatError; };
// Empty or all-padded batches / corpora.
struct DegenerateBatchError : GatError { using GatError::GatError; };
// Optimizer invoked with missing gradients.
struct OptimizerError : GatError { using GatError::GatError; };
// A function expected to be deterministic produced differing values.
struct DeterminismError : GatError { using GatError::GatError; };
// Attention query row with every key masked out.
struct MaskingError : GatError { using GatError::GatError; };
// Sequence length outside configured bounds, or empty where forbidden.
struct LengthError : GatError { using GatError::GatError; };
// Sequence-protocol violations (e.g. decoder prefix without BOS).
struct ProtocolError : GatError { using GatError::GatError; };
// Probability rows that do not normalize.
struct DistributionError : GatError { using GatError::GatError; };
// Invalid run/model configuration.
struct ConfigurationError : GatError { using GatError::GatError; };
// Malformed corpus/KB records.
struct IngestionError : GatError { using GatError::GatError; };
// Unanswerable KB query construction (no resolvable slots).
struct QueryError : GatError { using GatError::GatError; };
// KB query with no satisfying entry.
struct ResolutionError : GatError { using GatError::GatError; };
// Checkpoint/data incompatibilities.
struct CompatibilityError : GatError { using GatError::GatError; };
// Misaligned parallel corpora.
struct AlignmentError : GatError { using GatError::GatError; };

}  // namespace gat
