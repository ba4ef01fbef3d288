#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace incentive_forge {

enum class ErrorKind {
    DimensionMismatch,
    NotPositiveDefinite,
    NotPSD,
    BadHorizon,
    InvalidArgument,
    NonFinite,
    Unstable,
    DegenerateReference,
    DegenerateGamma,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::BadHorizon: return "BadHorizon";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Unstable: return "Unstable";
    case ErrorKind::DegenerateReference: return "DegenerateReference";
    case ErrorKind::DegenerateGamma: return "DegenerateGamma";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::optional<std::size_t> stage = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), stage_(stage) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    // Stage index at which a roll-out left the finite range, when known.
    [[nodiscard]] std::optional<std::size_t> stage() const noexcept { return stage_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> stage_;
};

} // namespace incentive_forge
