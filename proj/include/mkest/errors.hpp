#pragma once

#include <stdexcept>
#include <string>

namespace mkest {

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorCategory { Usage, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define MKEST_DEFINE_ERROR(Name, Category)                                     \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what)                                 \
            : Error(ErrorCategory::Category, what) {}                          \
    };

MKEST_DEFINE_ERROR(ParameterError, Usage)
MKEST_DEFINE_ERROR(ConfigError, Usage)
MKEST_DEFINE_ERROR(DegenerateDistributionError, Numerical)
MKEST_DEFINE_ERROR(DecompositionError, Numerical)
MKEST_DEFINE_ERROR(NonAbsorbingError, Numerical)
MKEST_DEFINE_ERROR(InvalidStateError, Numerical)
MKEST_DEFINE_ERROR(IncompleteDataError, Data)
MKEST_DEFINE_ERROR(InconsistentDataError, Data)
MKEST_DEFINE_ERROR(DomainError, Data)
MKEST_DEFINE_ERROR(StructureError, Data)
MKEST_DEFINE_ERROR(ImputationError, Data)
MKEST_DEFINE_ERROR(UnsupportedCombinationError, Data)

#undef MKEST_DEFINE_ERROR

/// Malformed input file; carries the 1-based line number of the offending row.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorCategory::Data, "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace mkest
