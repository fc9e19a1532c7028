#pragma once

#include <stdexcept>
#include <string>

namespace dqhe {

/// Failure categories surfaced by the library. Each maps 1:1 onto the
/// error conditions named in the operation contracts, so callers can branch
/// on code() instead of parsing messages.
enum class errc {
    invalid_params,
    domain_error,
    degenerate_dominant,
    complex_dominant,
    gauge_discontinuity,
    no_convergence,
    stencil_inconsistency,
    zero_flux,
    not_static,
    shape_mismatch,
    singular_system,
    empty_split,
    damping_abort,
    zero_variance,
    empty_dataset,
    io_error,
    bad_config,
};

inline const char* errc_name(errc c) noexcept {
    switch (c) {
        case errc::invalid_params:        return "invalid-params";
        case errc::domain_error:          return "domain-error";
        case errc::degenerate_dominant:   return "degenerate-dominant";
        case errc::complex_dominant:      return "complex-dominant";
        case errc::gauge_discontinuity:   return "gauge-discontinuity";
        case errc::no_convergence:        return "no-convergence";
        case errc::stencil_inconsistency: return "stencil-inconsistency";
        case errc::zero_flux:             return "zero-flux";
        case errc::not_static:            return "not-static";
        case errc::shape_mismatch:        return "shape-mismatch";
        case errc::singular_system:       return "singular-system";
        case errc::empty_split:           return "empty-split";
        case errc::damping_abort:         return "damping-abort";
        case errc::zero_variance:         return "zero-variance";
        case errc::empty_dataset:         return "empty-dataset";
        case errc::io_error:              return "io-error";
        case errc::bad_config:            return "bad-config";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) {
    throw error(code, what);
}

}  // namespace dqhe
