#include "mqud/util/error.hpp"

namespace mqud {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingAbstract: return "MissingAbstract";
    case ErrorKind::NoMainFile: return "NoMainFile";
    case ErrorKind::UnreadableSource: return "UnreadableSource";
    case ErrorKind::UnknownFigure: return "UnknownFigure";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::EmptyExport: return "EmptyExport";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::UnparseableResponse: return "UnparseableResponse";
    case ErrorKind::TypeOutOfVocabulary: return "TypeOutOfVocabulary";
    case ErrorKind::VariantRejected: return "VariantRejected";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::DegenerateTrace: return "DegenerateTrace";
    case ErrorKind::MissingSwap: return "MissingSwap";
    case ErrorKind::NoSwapCandidate: return "NoSwapCandidate";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::UnknownAnnotator: return "UnknownAnnotator";
    case ErrorKind::UnknownTask: return "UnknownTask";
    case ErrorKind::Unauthorized: return "Unauthorized";
    case ErrorKind::IncompletePayload: return "IncompletePayload";
    case ErrorKind::TaskNotPending: return "TaskNotPending";
    case ErrorKind::VocabularyViolation: return "VocabularyViolation";
    case ErrorKind::UnknownCommand: return "UnknownCommand";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorCategory category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownCommand:
    case ErrorKind::ConfigError:
      return ErrorCategory::config;
    case ErrorKind::BackendUnavailable:
    case ErrorKind::UnparseableResponse:
      return ErrorCategory::backend;
    default:
      return ErrorCategory::data;
  }
}

int exit_code(ErrorKind kind) {
  switch (category(kind)) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::backend: return 3;
    case ErrorCategory::data: return 4;
  }
  return 4;
}

}  // namespace mqud
