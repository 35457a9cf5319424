#pragma once

#include <stdexcept>
#include <string>

namespace proxgen {

/// Base class for all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Reachable state count (or enumeration size) exceeded the configured cap.
class CapExceeded : public Error {
public:
    explicit CapExceeded(const std::string& what) : Error(what) {}
};

/// A charge would push the ledger past its budget. The ledger is left
/// unchanged, so callers may record the outcome and continue.
class BudgetExhausted : public Error {
public:
    explicit BudgetExhausted(const std::string& what) : Error(what) {}
};

class EpisodeFinished : public Error {
public:
    explicit EpisodeFinished(const std::string& what) : Error(what) {}
};

class InvalidState : public Error {
public:
    explicit InvalidState(const std::string& what) : Error(what) {}
};

class InvalidParams : public Error {
public:
    explicit InvalidParams(const std::string& what) : Error(what) {}
};

class NotSharedSpace : public Error {
public:
    explicit NotSharedSpace(const std::string& what) : Error(what) {}
};

class NotDeterministicFamily : public Error {
public:
    explicit NotDeterministicFamily(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace proxgen
