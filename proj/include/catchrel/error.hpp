#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace catchrel {

enum class ErrorCode {
  invalid_argument,
  empty_list,
  duplicate,
  unsupported_container,
  unreadable_file,
  zero_duration,
  decode_failure,
  precondition,
  empty_window,
  empty_span,
  provider_unreachable,
  credential_invalid,
  provider_error,
  empty_term,
  unregistered_label,
  unknown_frame,
  unknown_tag,
  rejected_predictions,
  coverage_mismatch,
  empty_dataset,
  empty_train_split,
  unwritable_directory,
  invalid_manifest,
  not_found,
  io_error,
  parse_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::empty_list: return "empty-list";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::unsupported_container: return "unsupported-container";
    case ErrorCode::unreadable_file: return "unreadable-file";
    case ErrorCode::zero_duration: return "zero-duration";
    case ErrorCode::decode_failure: return "decode-failure";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::empty_window: return "empty-window";
    case ErrorCode::empty_span: return "empty-span";
    case ErrorCode::provider_unreachable: return "provider-unreachable";
    case ErrorCode::credential_invalid: return "credential-invalid";
    case ErrorCode::provider_error: return "provider-error";
    case ErrorCode::empty_term: return "empty-term";
    case ErrorCode::unregistered_label: return "unregistered-label";
    case ErrorCode::unknown_frame: return "unknown-frame";
    case ErrorCode::unknown_tag: return "unknown-tag";
    case ErrorCode::rejected_predictions: return "rejected-predictions";
    case ErrorCode::coverage_mismatch: return "coverage-mismatch";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::empty_train_split: return "empty-train-split";
    case ErrorCode::unwritable_directory: return "unwritable-directory";
    case ErrorCode::invalid_manifest: return "invalid-manifest";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::parse_error: return "parse-error";
  }
  return "unknown";
}

/// Every failure in the library surfaces as this exception. `details` lists
/// offending items (frame ids, violations) when an operation rejects a batch.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace catchrel
