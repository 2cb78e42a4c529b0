#pragma once

#include <stdexcept>
#include <string>

namespace ensemblekit {

/// Base of every error raised by the library. `kind()` is the stable name
/// printed by the CLI (e.g. "PolicyViolation").
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define ENSEMBLEKIT_DEFINE_ERROR(Name, Base)                              \
    class Name : public Base {                                            \
    public:                                                               \
        explicit Name(const std::string& message) : Base(#Name, message) {} \
                                                                          \
    protected:                                                            \
        Name(std::string kind, const std::string& message)                \
            : Base(std::move(kind), message) {}                           \
    };

// Configuration / input problems. The CLI maps these to exit code 2.
ENSEMBLEKIT_DEFINE_ERROR(ConfigError, Error)
ENSEMBLEKIT_DEFINE_ERROR(ParseError, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(ValidationError, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(InvalidNodeSpec, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(PolicyGap, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(PolicyViolation, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(Unplaceable, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(UnknownShape, ConfigError)
ENSEMBLEKIT_DEFINE_ERROR(UnknownProfile, ConfigError)

// Runtime misuse of the state machines and slot tables.
ENSEMBLEKIT_DEFINE_ERROR(IllegalTransition, Error)
ENSEMBLEKIT_DEFINE_ERROR(DoubleRelease, Error)
ENSEMBLEKIT_DEFINE_ERROR(UnknownNode, Error)
ENSEMBLEKIT_DEFINE_ERROR(SpawnError, Error)
ENSEMBLEKIT_DEFINE_ERROR(IoError, Error)

// Log-consumption errors.
ENSEMBLEKIT_DEFINE_ERROR(IncompleteLog, Error)
ENSEMBLEKIT_DEFINE_ERROR(MalformedLog, Error)
ENSEMBLEKIT_DEFINE_ERROR(InsufficientData, Error)
ENSEMBLEKIT_DEFINE_ERROR(EmptyPlan, Error)

#undef ENSEMBLEKIT_DEFINE_ERROR

} // namespace ensemblekit
