#pragma once

#include <stdexcept>
#include <string>

namespace mobsense {

/// Base of every error the library throws. `category()` drives CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { argument, numerical, infeasible, format, config };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(Category::argument, what) {}
};

/// Raised when a structural invariant (e.g. conjugate pairing) does not hold.
class StructuralError : public Error {
public:
    explicit StructuralError(const std::string& what) : Error(Category::argument, what) {}
};

class DegenerateRankError : public Error {
public:
    DegenerateRankError(const std::string& what, long achievable_rank)
        : Error(Category::numerical, what), achievable_rank_(achievable_rank) {}

    long achievable_rank() const noexcept { return achievable_rank_; }

private:
    long achievable_rank_;
};

class DiagnosticError : public Error {
public:
    explicit DiagnosticError(const std::string& what) : Error(Category::numerical, what) {}
};

class ConditioningError : public Error {
public:
    explicit ConditioningError(const std::string& what) : Error(Category::numerical, what) {}
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double last_residual)
        : Error(Category::numerical, what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double time) : Error(Category::numerical, what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(Category::format, what), offset_(-1) {}
    FormatError(const std::string& what, long long offset)
        : Error(Category::format, what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    /// Byte offset for binary input, 1-based line number for text input, -1 when unknown.
    long long offset() const noexcept { return offset_; }

private:
    long long offset_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

}  // namespace mobsense
