#pragma once

#include <stdexcept>
#include <string>

namespace isloss {

/// Input outside the mathematical domain of an operation (empty batch,
/// non-positive temperature, non-positive loss in strict log mode, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Problem size outside what an algorithm supports (e.g. grid oracle with N > 4).
class UnsupportedSize : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The input makes the requested quantity ill-defined (e.g. constant losses
/// cannot reach a positive KL budget at any finite temperature).
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller asked for more data than exists (pairs, hard-pair lists).
class InsufficientData : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace isloss
