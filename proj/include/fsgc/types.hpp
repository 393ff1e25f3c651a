#pragma once

#include <stdexcept>
#include <string>

namespace fsgc {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateMargin : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct NotEnoughPairs : Error { using Error::Error; };
struct EmptySupport : Error { using Error::Error; };
struct OutOfDomain : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };
struct NotPSD : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NoHeldOutPoints : Error { using Error::Error; };

enum class Kind { binary, ordinal, truncated, continuous };

// Observed measurement scale of one functional variable.
// Binary values live in {0,1}, ordinal in {0,...,levels-1} with levels >= 3,
// truncated values are >= 0 with positive mass at 0, continuous is unrestricted.
struct VariableKind {
    Kind tag = Kind::continuous;
    int levels = 0;  // category count for ordinal (>= 3); 2 for binary

    static VariableKind binary() { return {Kind::binary, 2}; }
    static VariableKind ordinal(int levels);
    static VariableKind truncated() { return {Kind::truncated, 0}; }
    static VariableKind continuous() { return {Kind::continuous, 0}; }

    bool is_discrete() const { return tag == Kind::binary || tag == Kind::ordinal; }
    // Number of latent thresholds per time point (0 for continuous).
    int cutoff_count() const;
    // Validates one observed value against this kind; throws Error if invalid.
    void validate_value(double x) const;
    std::string name() const;
};

VariableKind kind_from_name(const std::string& name, int levels);

}  // namespace fsgc
