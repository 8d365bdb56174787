#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mqud {

/// Every failure the toolchain can report. Names are stable: they appear in
/// logs, HTTP error bodies and run manifests.
enum class ErrorKind {
  // paperstore
  MissingAbstract,
  NoMainFile,
  UnreadableSource,
  UnknownFigure,
  // corpus
  DuplicateKey,
  InvariantViolation,
  EmptyExport,
  // backends
  BackendUnavailable,
  UnparseableResponse,
  TypeOutOfVocabulary,
  VariantRejected,
  UnknownLabel,
  // statistics
  NoOverlap,
  DegenerateTrace,
  MissingSwap,
  NoSwapCandidate,
  EmptyInput,
  EmptyCorpus,
  ConstantInput,
  // annotation service
  UnknownAnnotator,
  UnknownTask,
  Unauthorized,
  IncompletePayload,
  TaskNotPending,
  VocabularyViolation,
  // cli
  UnknownCommand,
  ConfigError,
};

enum class ErrorCategory { config, backend, data };

std::string_view to_string(ErrorKind kind);
ErrorCategory category(ErrorKind kind);

/// Process exit code for the category: 2 config, 3 backend, 4 data invariant.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mqud
