#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memlayer {

enum class ErrorCode {
    // validation
    EmptyField,
    BadEmbeddingNorm,
    DimensionMismatch,
    InvalidArgument,
    EmptyInput,
    // gateway
    TransportError,
    ProtocolError,
    RemoteError,
    FixtureMissing,
    // augmentation
    EmptyTranscript,
    ExtractionFormatError,
    // retrieval
    UnknownDocument,
    DuplicateId,
    // context
    BudgetTooSmall,
    EmptyQuestion,
    // store
    MissingSummaryLink,
    StoreClosed,
    StoreLocked,
    ReadOnly,
    CorruptStore,
    VersionMismatch,
    NotFound,
    IoError,
    // evaluation
    SchemaError,
    JudgeFormatError,
    KeyMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI) can branch on kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Non-2xx response from a model endpoint.
class RemoteError : public Error {
public:
    RemoteError(int status, std::string body)
        : Error(ErrorCode::RemoteError, "HTTP " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

} // namespace memlayer
