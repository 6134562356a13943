#pragma once

#include <stdexcept>
#include <string>

namespace rgl {

struct OutOfChart : std::runtime_error {
    explicit OutOfChart(const std::string& m) : std::runtime_error("OutOfChart: " + m) {}
};
struct TimeOutOfRange : std::runtime_error {
    explicit TimeOutOfRange(const std::string& m) : std::runtime_error("TimeOutOfRange: " + m) {}
};
struct NonpositiveScale : std::runtime_error {
    explicit NonpositiveScale(const std::string& m) : std::runtime_error("NonpositiveScale: " + m) {}
};
struct BlowUp : std::runtime_error {
    explicit BlowUp(const std::string& m) : std::runtime_error("BlowUp: " + m) {}
};
struct BvpNoConvergence : std::runtime_error {
    explicit BvpNoConvergence(const std::string& m) : std::runtime_error("BVPNoConvergence: " + m) {}
};
struct CutLocusSuspected : std::runtime_error {
    explicit CutLocusSuspected(const std::string& m) : std::runtime_error("CutLocusSuspected: " + m) {}
};
struct ToleranceViolation : std::runtime_error {
    explicit ToleranceViolation(const std::string& m) : std::runtime_error("ToleranceViolation: " + m) {}
};
struct LineSearchFailure : std::runtime_error {
    explicit LineSearchFailure(const std::string& m) : std::runtime_error("LineSearchFailure: " + m) {}
};
struct InsufficientSamples : std::runtime_error {
    explicit InsufficientSamples(const std::string& m) : std::runtime_error("InsufficientSamples: " + m) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error("ConfigError: " + m) {}
};
struct IoFailure : std::runtime_error {
    explicit IoFailure(const std::string& m) : std::runtime_error("IOFailure: " + m) {}
};

}  // namespace rgl
