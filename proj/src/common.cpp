#include "shellforms/errors.hpp"
#include "shellforms/types.hpp"

namespace shf {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "InvalidArgument";
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::degenerate_chart: return "DegenerateChart";
        case ErrorCode::derivative_unavailable: return "DerivativeUnavailable";
        case ErrorCode::degenerate_immersion: return "DegenerateImmersion";
        case ErrorCode::not_isometric: return "NotIsometric";
        case ErrorCode::out_of_thickness: return "OutOfThickness";
        case ErrorCode::not_coercive: return "NotCoercive";
        case ErrorCode::bad_gamma: return "BadGamma";
        case ErrorCode::shape_mismatch: return "ShapeMismatch";
        case ErrorCode::frame_mismatch: return "FrameMismatch";
        case ErrorCode::singular_block: return "SingularBlock";
        case ErrorCode::no_convergence: return "NoConvergence";
        case ErrorCode::not_spd: return "NotSPD";
        case ErrorCode::not_convex: return "NotConvex";
        case ErrorCode::too_large: return "TooLarge";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::internal: return "InternalError";
    }
    return "UnknownError";
}

Mat6 voigt6_rotation(const Mat3& basis) {
    // Columns are voigt6(B E_i B^T) for the Voigt basis matrices E_i, so the
    // result T satisfies voigt6(B G B^T) = T voigt6(G).
    Mat6 out;
    for (int i = 0; i < 6; ++i) {
        Vec6 e = Vec6::Zero();
        e[i] = 1.0;
        Mat3 m = from_voigt6(e);
        out.col(i) = voigt6(basis * m * basis.transpose());
    }
    return out;
}

}  // namespace shf
