#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace wbary {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input. `field()` is a dotted path into the offending input.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd best, double residual, int iterations)
        : Error(what), best_(std::move(best)), residual_(residual), iterations_(iterations) {}
    const Eigen::VectorXd& best_iterate() const { return best_; }
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    Eigen::VectorXd best_;
    double residual_;
    int iterations_;
};

// Evaluation at a point where a map or density is not defined.
class DomainError : public Error {
public:
    using Error::Error;
};

// Configuration for which a derived quantity does not exist.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Not enough usable samples to fit or decide.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Input lacks the algebraic structure an operation requires.
class StructureError : public Error {
public:
    using Error::Error;
};

// Problem exceeds a configured size cap.
class SizeError : public Error {
public:
    using Error::Error;
};

}  // namespace wbary
