#include "caol/convops.hpp"

#include <cmath>

namespace caol {

namespace {

// Maps a possibly out-of-range index into [0, n) for the given boundary
// condition. Symmetric reflection repeats the edge sample: -1 -> 0, n -> n-1.
inline Eigen::Index wrap_index(Eigen::Index i, Eigen::Index n,
                               BoundaryCondition bc) {
  if (i >= 0 && i < n) return i;
  if (bc == BoundaryCondition::circular) {
    i %= n;
    return i < 0 ? i + n : i;
  }
  if (i < 0) return -i - 1;
  return 2 * n - 1 - i;
}

}  // namespace

Image pad_asym(const Image& x, Eigen::Index pt, Eigen::Index pb,
               Eigen::Index pl, Eigen::Index pr, BoundaryCondition bc) {
  require(pt >= 0 && pb >= 0 && pl >= 0 && pr >= 0,
          "pad: negative padding");
  if (bc == BoundaryCondition::symmetric) {
    // One reflection only; larger pads would need repeated folding.
    require(pt < x.h && pb < x.h && pl < x.w && pr < x.w,
            "pad: symmetric padding must be smaller than the image");
  }
  Image out(x.h + pt + pb, x.w + pl + pr);
  for (Eigen::Index i = 0; i < out.h; ++i) {
    const Eigen::Index si = wrap_index(i - pt, x.h, bc);
    for (Eigen::Index j = 0; j < out.w; ++j) {
      const Eigen::Index sj = wrap_index(j - pl, x.w, bc);
      out.at(i, j) = x.at(si, sj);
    }
  }
  return out;
}

Image pad(const Image& x, Eigen::Index dh, Eigen::Index dw,
          BoundaryCondition bc) {
  if (bc == BoundaryCondition::symmetric) {
    require(dh < x.h && dw < x.w,
            "pad: symmetric padding requires dh < H and dw < W");
  }
  return pad_asym(x, dh, dh, dw, dw, bc);
}

Image pad_for_filter(const Image& x, Eigen::Index rh, Eigen::Index rw,
                     BoundaryCondition bc) {
  const Eigen::Index pt = (rh - 1) / 2;
  const Eigen::Index pl = (rw - 1) / 2;
  return pad_asym(x, pt, rh - 1 - pt, pl, rw - 1 - pl, bc);
}

Image conv_same_padded(const Filter& d, const Image& xhat, Eigen::Index h,
                       Eigen::Index w) {
  require(xhat.h == h + d.rh - 1 && xhat.w == w + d.rw - 1,
          "conv_same_padded: padded image has wrong size");
  Image y(h, w);
  const Eigen::Index wp = xhat.w;
  // y(i,j) = sum_{a,b} d(a,b) xhat(i+rh-1-a, j+rw-1-b); iterating over the
  // flipped taps keeps the inner loop contiguous in xhat.
  for (Eigen::Index a = 0; a < d.rh; ++a) {
    for (Eigen::Index b = 0; b < d.rw; ++b) {
      const double c = d.at(d.rh - 1 - a, d.rw - 1 - b);
      if (c == 0.0) continue;
      const double* src = xhat.v.data() + a * wp + b;
      double* dst = y.v.data();
      for (Eigen::Index i = 0; i < h; ++i) {
        const double* row = src + i * wp;
        double* out = dst + i * w;
        for (Eigen::Index j = 0; j < w; ++j) out[j] += c * row[j];
      }
    }
  }
  return y;
}

Image conv_same(const Filter& d, const Image& x, BoundaryCondition bc) {
  require(d.rh <= x.h && d.rw <= x.w,
          "conv_same: filter larger than image");
  return conv_same_padded(d, pad_for_filter(x, d.rh, d.rw, bc), x.h, x.w);
}

Filter psi_adjoint(const Image& xhat, const Image& z, Eigen::Index rh,
                   Eigen::Index rw) {
  require(xhat.h == z.h + rh - 1 && xhat.w == z.w + rw - 1,
          "psi_adjoint: padded image does not match code size");
  Filter g(rh, rw);
  const Eigen::Index wp = xhat.w;
  for (Eigen::Index a = 0; a < rh; ++a) {
    for (Eigen::Index b = 0; b < rw; ++b) {
      // Tap (a,b) multiplies xhat shifted by (rh-1-a, rw-1-b) in conv_same.
      // Four fixed-order partial sums keep the reduction vectorizable and
      // the result independent of the build flags.
      const double* src = xhat.v.data() + (rh - 1 - a) * wp + (rw - 1 - b);
      const double* zp = z.v.data();
      double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
      for (Eigen::Index i = 0; i < z.h; ++i) {
        const double* row = src + i * wp;
        const double* zr = zp + i * z.w;
        Eigen::Index j = 0;
        for (; j + 4 <= z.w; j += 4) {
          acc0 += row[j] * zr[j];
          acc1 += row[j + 1] * zr[j + 1];
          acc2 += row[j + 2] * zr[j + 2];
          acc3 += row[j + 3] * zr[j + 3];
        }
        for (; j < z.w; ++j) acc0 += row[j] * zr[j];
      }
      g.at(a, b) = ((acc0 + acc1) + (acc2 + acc3));
    }
  }
  return g;
}

Filter flip(const Filter& d) {
  Filter out(d.rh, d.rw);
  for (Eigen::Index a = 0; a < d.rh; ++a)
    for (Eigen::Index b = 0; b < d.rw; ++b)
      out.at(a, b) = d.at(d.rh - 1 - a, d.rw - 1 - b);
  return out;
}

double tf_residual(const FilterBank& bank, const Image& x,
                   BoundaryCondition bc) {
  const double xx = x.v.squaredNorm();
  if (xx == 0.0) throw NumericalError("tf_residual: undefined ratio, x = 0");
  const Image xhat = pad_for_filter(x, bank.rh, bank.rw, bc);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < bank.count(); ++k) {
    acc += conv_same_padded(bank.filter(k), xhat, x.h, x.w).v.squaredNorm();
  }
  return std::abs(acc - xx) / xx;
}

}  // namespace caol
