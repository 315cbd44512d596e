#pragma once

#include <stdexcept>
#include <string>

namespace shf {

// Error categories shared between the C++ exceptions and the C API status codes.
enum class ErrorCode {
    invalid_argument = 1,
    parse_error,
    degenerate_chart,
    derivative_unavailable,
    degenerate_immersion,
    not_isometric,
    out_of_thickness,
    not_coercive,
    bad_gamma,
    shape_mismatch,
    frame_mismatch,
    singular_block,
    no_convergence,
    not_spd,
    not_convex,
    too_large,
    io_error,
    internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Named constructors mirroring the failure modes in module contracts.
inline Error degenerate_chart(const std::string& m) { return {ErrorCode::degenerate_chart, m}; }
inline Error derivative_unavailable(const std::string& m) { return {ErrorCode::derivative_unavailable, m}; }
inline Error degenerate_immersion(const std::string& m) { return {ErrorCode::degenerate_immersion, m}; }
inline Error not_isometric(const std::string& m) { return {ErrorCode::not_isometric, m}; }
inline Error out_of_thickness(const std::string& m) { return {ErrorCode::out_of_thickness, m}; }
inline Error not_coercive(const std::string& m) { return {ErrorCode::not_coercive, m}; }
inline Error bad_gamma(const std::string& m) { return {ErrorCode::bad_gamma, m}; }
inline Error shape_mismatch(const std::string& m) { return {ErrorCode::shape_mismatch, m}; }
inline Error frame_mismatch(const std::string& m) { return {ErrorCode::frame_mismatch, m}; }
inline Error singular_block(const std::string& m) { return {ErrorCode::singular_block, m}; }
inline Error no_convergence(const std::string& m) { return {ErrorCode::no_convergence, m}; }
inline Error not_spd(const std::string& m) { return {ErrorCode::not_spd, m}; }
inline Error not_convex(const std::string& m) { return {ErrorCode::not_convex, m}; }
inline Error too_large(const std::string& m) { return {ErrorCode::too_large, m}; }
inline Error parse_error(const std::string& m) { return {ErrorCode::parse_error, m}; }
inline Error invalid_argument(const std::string& m) { return {ErrorCode::invalid_argument, m}; }
inline Error io_error(const std::string& m) { return {ErrorCode::io_error, m}; }

}  // namespace shf
