#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lmgc {

enum class ErrorKind {
  MalformedLine,
  DanglingOffset,
  DuplicateSenseKey,
  XmlSyntaxError,
  MissingAttribute,
  DuplicateInstanceId,
  EmptyKeySet,
  MissingGold,
  IdOutOfRange,
  TargetTruncated,
  NoCandidates,
  GoldNotInInventory,
  IoError,
  SchemaError,
  InvalidConfig,
  SequenceTooLong,
  PositionOutOfRange,
  DimensionMismatch,
  VersionMismatch,
  ShapeMismatch,
  IndexOutOfRange,
  NonFiniteGradient,
  EmptyDataset,
  CheckpointIncompatible,
  LabelOutOfRange,
  UnknownInstanceId,
  VocabMismatch,
  InvalidSpec,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DanglingOffset: return "DanglingOffset";
    case ErrorKind::DuplicateSenseKey: return "DuplicateSenseKey";
    case ErrorKind::XmlSyntaxError: return "XmlSyntaxError";
    case ErrorKind::MissingAttribute: return "MissingAttribute";
    case ErrorKind::DuplicateInstanceId: return "DuplicateInstanceId";
    case ErrorKind::EmptyKeySet: return "EmptyKeySet";
    case ErrorKind::MissingGold: return "MissingGold";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::TargetTruncated: return "TargetTruncated";
    case ErrorKind::NoCandidates: return "NoCandidates";
    case ErrorKind::GoldNotInInventory: return "GoldNotInInventory";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::CheckpointIncompatible: return "CheckpointIncompatible";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::UnknownInstanceId: return "UnknownInstanceId";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and meant for
/// programmatic checks; `what()` carries the human-readable context (file,
/// line number, offending value).
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace lmgc
