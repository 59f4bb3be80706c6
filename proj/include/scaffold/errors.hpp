#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace scaffold {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- documents -------------------------------------------------------------

class SyntaxError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what, std::optional<std::size_t> rule_index = std::nullopt)
        : Error(what), rule_index_(rule_index) {}

    std::optional<std::size_t> rule_index() const noexcept { return rule_index_; }

private:
    std::optional<std::size_t> rule_index_;
};

// ---- engine / memory -------------------------------------------------------

class UnknownMetric : public Error {
public:
    explicit UnknownMetric(std::string metric)
        : Error("unknown metric '" + metric + "'"), metric_(std::move(metric)) {}

    const std::string& metric() const noexcept { return metric_; }

private:
    std::string metric_;
};

class StaleDelta : public Error {
public:
    StaleDelta(std::uint64_t expected, std::uint64_t got)
        : Error("delta was built for turn " + std::to_string(got) + " but memory is at turn " +
                std::to_string(expected)) {}
};

// ---- lore ------------------------------------------------------------------

class MissingStage : public Error {
public:
    using Error::Error;
};

class EmptyDocument : public Error {
public:
    using Error::Error;
};

// ---- gateway ---------------------------------------------------------------

class GatewayError : public Error {
public:
    using Error::Error;
};

class GatewayTimeout : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class GatewayRejected : public GatewayError {
public:
    explicit GatewayRejected(const std::string& what, int status = 0) : GatewayError(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

// Retryable failure raised by a backend (connection refused, 429, 5xx). The
// gateway converts it to GatewayTimeout once retries are exhausted.
class TransientFailure : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class FixtureMissing : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

// ---- evaluation ------------------------------------------------------------

class JudgeParseError : public Error {
public:
    using Error::Error;
};

class EmptySample : public Error {
public:
    using Error::Error;
};

class AllZeroDifferences : public Error {
public:
    AllZeroDifferences() : Error("all paired differences are zero") {}
};

class ZeroVariance : public Error {
public:
    ZeroVariance() : Error("paired differences have zero variance") {}
};

class InsufficientSample : public Error {
public:
    using Error::Error;
};

// ---- sessions --------------------------------------------------------------

class ScenarioInvalid : public Error {
public:
    using Error::Error;
};

class TurnInFlight : public Error {
public:
    TurnInFlight() : Error("a turn is already in flight for this session") {}
};

class UnknownSession : public Error {
public:
    explicit UnknownSession(const std::string& id) : Error("unknown session '" + id + "'") {}
};

class UnknownEvidence : public Error {
public:
    explicit UnknownEvidence(const std::string& id) : Error("unknown evidence '" + id + "'") {}
};

class UnknownRole : public Error {
public:
    explicit UnknownRole(const std::string& id) : Error("unknown role '" + id + "'") {}
};

class PhaseError : public Error {
public:
    using Error::Error;
};

}  // namespace scaffold
