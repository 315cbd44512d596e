#pragma once

#include "shellforms/material.hpp"
#include "shellforms/types.hpp"

namespace shf {

// Local frame of one surface point packaged for the algebra of the cell and
// relaxation modules: covariant/dual tangent pairs, normal, the orthonormal
// basis obtained by Gram-Schmidt on (tau1, tau2), and the Voigt-2 coefficient
// conversion between dual-frame and orthonormal components.
struct PointFrame {
    Vec3 tau[2];
    Vec3 tau_dual[2];
    Vec3 n;
    Mat3 basis;          // columns (e1, e2, n), proper rotation
    Mat3 dual_to_ortho;  // Voigt-2 map: q_ortho = C q_dual

    static PointFrame orthonormal();
    static PointFrame make(const Vec3& tau1, const Vec3& tau2);

    bool same_as(const PointFrame& other, double tol = 0.0) const;
};

// Quadratic form of the pointwise relaxation over the non-tangential strain
// components. Stored in both Voigt-2 coordinate systems (see ledger note on the
// dual-frame/orthonormal bookkeeping).
struct TangentQuadraticForm {
    Mat3 m_dual = Mat3::Zero();   // acts on dual-frame Voigt-2 vectors
    Mat3 m_ortho = Mat3::Zero();  // acts on orthonormal-frame Voigt-2 vectors
    Mat3 dual_to_ortho = Mat3::Identity();
    PointFrame frame;
};

// Relaxes the 3D density over strains vanishing on the tangent plane: rotates
// the Voigt matrix into the orthonormal frame, pins the tangential block and
// returns the Schur complement. Throws SingularBlock on corrupt input.
TangentQuadraticForm q2_form(const Mat6& voigt, const PointFrame& frame);

// q^T m q for a dual-frame TangentForm2. Throws FrameMismatch when the form was
// built for a different frame.
double q2_value(const TangentQuadraticForm& form, const PointFrame& frame, const TangentForm2& q);

// Independent oracle: minimizes Q over the three free entries (M13, M23, M33)
// of the orthonormal-frame strain by solving the 3x3 stationarity system.
double brute_force_q2(const Mat6& voigt, const PointFrame& frame, const TangentForm2& q);

}  // namespace shf
