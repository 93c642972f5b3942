#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rulescreen {

enum class Errc {
    // validation errors: bad configuration or arguments
    InvalidConfig,
    InvalidArgument,
    NonPositiveModalities,
    BadSplitPoint,
    UnknownLearningYear,
    InconsistentSpec,
    // data errors: inputs that cannot be processed
    EmptyPanel,
    SpecMismatch,
    DimensionMismatch,
    EmptyLearningSet,
    NoActivations,
    NonFiniteLoss,
    NoActiveRule,
    EmptyAfterFilter,
    NoPopulatedSector,
    MissingPriceData,
    GridMismatch,
    InsufficientHistory,
    ParseError,
    IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonPositiveModalities: return "NonPositiveModalities";
    case Errc::BadSplitPoint: return "BadSplitPoint";
    case Errc::UnknownLearningYear: return "UnknownLearningYear";
    case Errc::InconsistentSpec: return "InconsistentSpec";
    case Errc::EmptyPanel: return "EmptyPanel";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyLearningSet: return "EmptyLearningSet";
    case Errc::NoActivations: return "NoActivations";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::NoActiveRule: return "NoActiveRule";
    case Errc::EmptyAfterFilter: return "EmptyAfterFilter";
    case Errc::NoPopulatedSector: return "NoPopulatedSector";
    case Errc::MissingPriceData: return "MissingPriceData";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

/// True for errors caused by configuration or arguments rather than data.
constexpr bool is_validation_error(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidArgument:
    case Errc::NonPositiveModalities:
    case Errc::BadSplitPoint:
    case Errc::UnknownLearningYear:
    case Errc::InconsistentSpec:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace rulescreen
