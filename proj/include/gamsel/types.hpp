#pragma once
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace gamsel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/**
 * Base class for every error the library raises.
 * The CLI maps subclasses onto exit codes (validation vs numerical).
 */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (shapes, parameters, data).
class InvalidInput : public Error
{
public:
    using Error::Error;
};

/// A parameter outside its admissible interval.
class OutOfRange : public InvalidInput
{
public:
    using InvalidInput::InvalidInput;
};

/// A caller broke a documented precondition of a numerical kernel.
class ContractViolation : public Error
{
public:
    using Error::Error;
};

/// Non-positive eigenvalue, singular system, or similar breakdown.
class NumericalDegeneracy : public Error
{
public:
    using Error::Error;
};

class ConvergenceFailure : public Error
{
public:
    ConvergenceFailure(const std::string& what, Index lambda_index)
        : Error(what), lambda_index_(lambda_index)
    {}
    Index lambda_index() const { return lambda_index_; }

private:
    Index lambda_index_;
};

/// Corrupt or version-mismatched serialized payload.
class FormatError : public Error
{
public:
    using Error::Error;
};

enum class Family { kGaussian, kBinomial };

enum class BasisVariant { kPoly, kQ };

enum class TermClass { kZero, kLinear, kNonlinear };

inline const char* to_string(Family f)
{
    return f == Family::kGaussian ? "gaussian" : "binomial";
}

inline const char* to_string(BasisVariant v)
{
    return v == BasisVariant::kPoly ? "poly" : "q";
}

inline const char* to_string(TermClass c)
{
    switch (c) {
        case TermClass::kZero: return "zero";
        case TermClass::kLinear: return "linear";
        case TermClass::kNonlinear: return "nonlinear";
    }
    return "zero";
}

inline Family family_from_string(const std::string& s)
{
    if (s == "gaussian") return Family::kGaussian;
    if (s == "binomial") return Family::kBinomial;
    throw InvalidInput("unknown family '" + s + "' (expected gaussian|binomial)");
}

inline BasisVariant variant_from_string(const std::string& s)
{
    if (s == "poly") return BasisVariant::kPoly;
    if (s == "q" || s == "Q") return BasisVariant::kQ;
    throw InvalidInput("unknown basis variant '" + s + "' (expected poly|q)");
}

inline TermClass term_class_from_string(const std::string& s)
{
    if (s == "zero") return TermClass::kZero;
    if (s == "linear") return TermClass::kLinear;
    if (s == "nonlinear") return TermClass::kNonlinear;
    throw InvalidInput("unknown term class '" + s + "'");
}

} // namespace gamsel
