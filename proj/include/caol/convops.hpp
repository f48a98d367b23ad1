#pragma once

#include "caol/image.hpp"

namespace caol {

// Padded 2D convolution and its adjoint. All "same"-size outputs follow one
// alignment convention, used consistently by conv_same, psi_adjoint and the
// majorizer constructions:
//
//   * the image is padded by pt = floor((rh-1)/2) rows on top,
//     pb = rh-1-pt rows below (and likewise pl/pr columns), so the padded
//     size is (H+rh-1) x (W+rw-1);
//   * output pixel (i,j) is the full convolution of the padded image
//     evaluated at (i+rh-1, j+rw-1):
//       y(i,j) = sum_{a,b} d(a,b) * xhat(i+rh-1-a, j+rw-1-b).
//
// For odd filter sizes this is the centered "same" convolution; for even
// sizes the extra pad row/column goes to the bottom/right.

/// Replicates the border circularly or mirror-reflects it (edge repeated),
/// adding dh rows on each side and dw columns on each side.
Image pad(const Image& x, Eigen::Index dh, Eigen::Index dw,
          BoundaryCondition bc);

/// Asymmetric padding used internally for even filter sizes.
Image pad_asym(const Image& x, Eigen::Index pt, Eigen::Index pb,
               Eigen::Index pl, Eigen::Index pr, BoundaryCondition bc);

/// Pads x exactly as conv_same/psi_adjoint expect for an rh x rw filter.
Image pad_for_filter(const Image& x, Eigen::Index rh, Eigen::Index rw,
                     BoundaryCondition bc);

/// "Same"-size convolution of filter d with image x under boundary
/// condition bc. Linear in both arguments.
Image conv_same(const Filter& d, const Image& x, BoundaryCondition bc);

/// conv_same when the caller already holds the padded image; (h, w) is the
/// unpadded output size.
Image conv_same_padded(const Filter& d, const Image& xhat, Eigen::Index h,
                       Eigen::Index w);

/// Adjoint of conv_same as an operator on the filter taps: returns
/// Psi^T z where Psi maps taps to conv_same(d, x) for the image whose
/// padding is xhat. Satisfies <conv_same(d,x), z> = <d, psi_adjoint(xhat,z)>
/// exactly for both boundary conditions.
Filter psi_adjoint(const Image& xhat, const Image& z, Eigen::Index rh,
                   Eigen::Index rw);

/// 180-degree rotation of the taps. flip(flip(d)) == d.
Filter flip(const Filter& d);

/// Relative tight-frame residual |sum_k ||d_k (*) x||^2 - ||x||^2| / ||x||^2.
/// Zero (to roundoff) when D D^T = (1/R) I, for either boundary condition.
double tf_residual(const FilterBank& bank, const Image& x,
                   BoundaryCondition bc);

}  // namespace caol
