#include "memlayer/error.hpp"

namespace memlayer {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyField:            return "EmptyField";
        case ErrorCode::BadEmbeddingNorm:      return "BadEmbeddingNorm";
        case ErrorCode::DimensionMismatch:     return "DimensionMismatch";
        case ErrorCode::InvalidArgument:       return "InvalidArgument";
        case ErrorCode::EmptyInput:            return "EmptyInput";
        case ErrorCode::TransportError:        return "TransportError";
        case ErrorCode::ProtocolError:         return "ProtocolError";
        case ErrorCode::RemoteError:           return "RemoteError";
        case ErrorCode::FixtureMissing:        return "FixtureMissing";
        case ErrorCode::EmptyTranscript:       return "EmptyTranscript";
        case ErrorCode::ExtractionFormatError: return "ExtractionFormatError";
        case ErrorCode::UnknownDocument:       return "UnknownDocument";
        case ErrorCode::DuplicateId:           return "DuplicateId";
        case ErrorCode::BudgetTooSmall:        return "BudgetTooSmall";
        case ErrorCode::EmptyQuestion:         return "EmptyQuestion";
        case ErrorCode::MissingSummaryLink:    return "MissingSummaryLink";
        case ErrorCode::StoreClosed:           return "StoreClosed";
        case ErrorCode::StoreLocked:           return "StoreLocked";
        case ErrorCode::ReadOnly:              return "ReadOnly";
        case ErrorCode::CorruptStore:          return "CorruptStore";
        case ErrorCode::VersionMismatch:       return "VersionMismatch";
        case ErrorCode::NotFound:              return "NotFound";
        case ErrorCode::IoError:               return "IoError";
        case ErrorCode::SchemaError:           return "SchemaError";
        case ErrorCode::JudgeFormatError:      return "JudgeFormatError";
        case ErrorCode::KeyMismatch:           return "KeyMismatch";
    }
    return "Unknown";
}

} // namespace memlayer
