#include "caol/cnn2.hpp"

#include "caol/io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace caol {
namespace cnn2 {

Image avg_pool(const Image& z, Eigen::Index wh, Eigen::Index ww) {
  require(wh >= 1 && ww >= 1, "avg_pool: bad window");
  require(z.h % wh == 0 && z.w % ww == 0,
          "avg_pool: image dimensions must be divisible by the window "
          "(padding required)");
  const double inv = 1.0 / static_cast<double>(wh * ww);
  Image out(z.h / wh, z.w / ww);
  for (Eigen::Index i = 0; i < out.h; ++i)
    for (Eigen::Index j = 0; j < out.w; ++j) {
      double acc = 0.0;
      for (Eigen::Index a = 0; a < wh; ++a)
        for (Eigen::Index b = 0; b < ww; ++b)
          acc += z.at(i * wh + a, j * ww + b);
      out.at(i, j) = acc * inv;
    }
  return out;
}

Image avg_pool_adjoint(const Image& pooled, Eigen::Index wh, Eigen::Index ww,
                       Eigen::Index h, Eigen::Index w) {
  require(pooled.h * wh == h && pooled.w * ww == w,
          "avg_pool_adjoint: size mismatch");
  const double inv = 1.0 / static_cast<double>(wh * ww);
  Image out(h, w);
  for (Eigen::Index i = 0; i < pooled.h; ++i)
    for (Eigen::Index j = 0; j < pooled.w; ++j) {
      const double v = pooled.at(i, j) * inv;
      for (Eigen::Index a = 0; a < wh; ++a)
        for (Eigen::Index b = 0; b < ww; ++b)
          out.at(i * wh + a, j * ww + b) = v;
    }
  return out;
}

Image conv_adjoint_image(const Filter& d, const Image& z,
                         BoundaryCondition bc) {
  // Gradient with respect to the padded image, then fold the pad
  // contributions back onto their source pixels.
  const Eigen::Index rh = d.rh, rw = d.rw;
  Image gpad(z.h + rh - 1, z.w + rw - 1);
  for (Eigen::Index a = 0; a < rh; ++a)
    for (Eigen::Index b = 0; b < rw; ++b) {
      const double c = d.at(rh - 1 - a, rw - 1 - b);
      if (c == 0.0) continue;
      for (Eigen::Index i = 0; i < z.h; ++i)
        for (Eigen::Index j = 0; j < z.w; ++j)
          gpad.at(i + a, j + b) += c * z.at(i, j);
    }
  const Eigen::Index pt = (rh - 1) / 2, pl = (rw - 1) / 2;
  Image out(z.h, z.w);
  for (Eigen::Index i = 0; i < gpad.h; ++i) {
    Eigen::Index si = i - pt;
    if (si < 0 || si >= z.h)
      si = (bc == BoundaryCondition::circular)
               ? ((si % z.h) + z.h) % z.h
               : (si < 0 ? -si - 1 : 2 * z.h - 1 - si);
    for (Eigen::Index j = 0; j < gpad.w; ++j) {
      Eigen::Index sj = j - pl;
      if (sj < 0 || sj >= z.w)
        sj = (bc == BoundaryCondition::circular)
                 ? ((sj % z.w) + z.w) % z.w
                 : (sj < 0 ? -sj - 1 : 2 * z.w - 1 - sj);
      out.at(si, sj) += gpad.at(i, j);
    }
  }
  return out;
}

Image layer1_feature_core(const Image& c, const Image& zeta, double alpha1,
                          double omega_prime) {
  require(c.same_shape(zeta), "layer1_feature_core: shape mismatch");
  require(alpha1 >= 0.0 && omega_prime > 0.0,
          "layer1_feature_core: bad parameters");
  Image m(c.h, c.w);
  m.v = (omega_prime * c.v + zeta.v) / (omega_prime + 1.0);
  const double thr =
      std::sqrt(2.0 * alpha1 * omega_prime / (omega_prime + 1.0));
  return hard_threshold(m, thr);
}

void Cnn2Config::validate() const {
  require(rh1 >= 1 && rw1 >= 1 && num_filters1 >= 1, "Cnn2Config: layer 1 shape");
  require(rh1 * rw1 <= num_filters1,
          "Cnn2Config: orthogonality prox requires R1 <= K1");
  require(num_filters2 >= 0, "Cnn2Config: bad K2");
  if (num_filters2 > 0)
    require(rh2 >= 1 && rw2 >= 1 && rh2 * rw2 <= num_filters2,
            "Cnn2Config: orthogonality prox requires R2 <= K2");
  require(pool_h >= 1 && pool_w >= 1, "Cnn2Config: bad pooling window");
  require(alpha1 > 0.0 && alpha2 >= 0.0, "Cnn2Config: bad thresholds");
  require(lambda_d > 1.0 && lambda_z > 1.0, "Cnn2Config: lambdas must exceed 1");
}

namespace {

struct Cnn2Problem {
  std::vector<Image> corpus;
  std::vector<Image> padded1;  // corpus padded for layer-1 filters
  BoundaryCondition bc;
  Eigen::Index L, h, w, n;          // image geometry
  Eigen::Index hp, wp, np;          // pooled geometry
  Eigen::Index r1, k1, r2, k2;
  Eigen::Index rh1, rw1, rh2, rw2;
  Eigen::Index ph, pw;
  double alpha1, alpha2, lambda_z;
  Eigen::MatrixXd hess1;  // layer-1 filter Hessian (constant)
  Majorizer m_d1 = Majorizer::scaled_identity(1.0, 1);

  // Block indices: 0 = D1; 1..K1 = z1_k (stacked over l); then K1 banks
  // D2_k; last = all z2 (stacked over l, k').
  Eigen::Index z1_block(Eigen::Index k) const { return 1 + k; }
  Eigen::Index d2_block(Eigen::Index k) const { return 1 + k1 + k; }
  Eigen::Index z2_block() const { return 1 + 2 * k1; }
  Eigen::Index num_blocks() const {
    return k2 > 0 ? 2 + 2 * k1 : 1 + k1;
  }

  // Layer-1 responses c_{l,k} = d1_k (*) x_l, cached on the D1 vector.
  std::vector<Image> c1;
  Eigen::VectorXd c1_key;
  void ensure_c1(const std::vector<Eigen::VectorXd>& xs) {
    if (c1_key.size() == xs[0].size() && c1_key == xs[0]) return;
    c1.assign(L * k1, Image(h, w));
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index k = 0; k < k1; ++k) {
        const Filter d(rh1, rw1, xs[0].segment(k * r1, r1));
        c1[l * k1 + k] = conv_same_padded(d, padded1[l], h, w);
      }
    c1_key = xs[0];
  }

  Image z1_image(const std::vector<Eigen::VectorXd>& xs, Eigen::Index l,
                 Eigen::Index k) const {
    return Image(h, w, xs[z1_block(k)].segment(l * n, n));
  }
  Filter d2_filter(const std::vector<Eigen::VectorXd>& xs, Eigen::Index k,
                   Eigen::Index kp) const {
    return Filter(rh2, rw2, xs[d2_block(k)].segment(kp * r2, r2));
  }

  // Second-layer input sum u_{l,k'} = sum_k d2_{k,k'} (*) P z1_{l,k}.
  Image layer2_sum(const std::vector<Eigen::VectorXd>& xs, Eigen::Index l,
                   Eigen::Index kp) const {
    Image acc(hp, wp);
    for (Eigen::Index k = 0; k < k1; ++k) {
      const Image pooled = avg_pool(z1_image(xs, l, k), ph, pw);
      acc.v += conv_same(d2_filter(xs, k, kp), pooled, bc).v;
    }
    return acc;
  }

  // Orthogonality-constraint indicator; the random initial banks start
  // infeasible until their first update.
  double feasibility_penalty(const std::vector<Eigen::VectorXd>& xs) const {
    auto residual = [](const Eigen::Map<const Eigen::MatrixXd>& d,
                       Eigen::Index r) {
      Eigen::MatrixXd gram = d * d.transpose();
      gram.diagonal().array() -= 1.0 / static_cast<double>(r);
      return gram.norm();
    };
    if (residual(Eigen::Map<const Eigen::MatrixXd>(xs[0].data(), r1, k1),
                 r1) > 1e-9)
      return std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < (k2 > 0 ? k1 : 0); ++k)
      if (residual(Eigen::Map<const Eigen::MatrixXd>(
                       xs[d2_block(k)].data(), r2, k2),
                   r2) > 1e-9)
        return std::numeric_limits<double>::infinity();
    return 0.0;
  }

  double objective(const std::vector<Eigen::VectorXd>& xs) {
    if (feasibility_penalty(xs) > 0.0)
      return std::numeric_limits<double>::infinity();
    ensure_c1(xs);
    double acc = 0.0;
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index k = 0; k < k1; ++k) {
        const auto z = xs[z1_block(k)].segment(l * n, n);
        acc += 0.5 * (c1[l * k1 + k].v - z).squaredNorm();
        acc += alpha1 * static_cast<double>((z.array() != 0.0).count());
      }
    if (k2 == 0) return acc;
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index kp = 0; kp < k2; ++kp) {
        const auto z2 = xs[z2_block()].segment((l * k2 + kp) * np, np);
        acc += 0.5 * (layer2_sum(xs, l, kp).v - z2).squaredNorm();
        acc += alpha2 * static_cast<double>((z2.array() != 0.0).count());
      }
    return acc;
  }
};

Majorizer pooled_hessian_majorizer(const std::vector<Image>& pooled_padded,
                                   Eigen::Index hp, Eigen::Index wp,
                                   Eigen::Index rh2, Eigen::Index rw2) {
  const Eigen::MatrixXd hess =
      filter_hessian(pooled_padded, hp, wp, rh2, rw2);
  try {
    return Majorizer::dense(hess);
  } catch (const NumericalError&) {
    // Degenerate or ill-conditioned pooled features: fall back to the
    // trace bound, which always dominates a PSD matrix.
    return Majorizer::scaled_identity(std::max(hess.trace(), 1e-12),
                                      hess.rows());
  }
}

}  // namespace

double objective_two_layer(const TwoLayerModel& model,
                           const std::vector<Image>& corpus,
                           BoundaryCondition bc, double alpha1,
                           double alpha2) {
  const Eigen::Index L = static_cast<Eigen::Index>(corpus.size());
  const Eigen::Index k1 = model.d1.count();
  double acc = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index k = 0; k < k1; ++k) {
      const Image c = conv_same(model.d1.filter(k), corpus[l], bc);
      const Image& z = model.z1[l * k1 + k];
      acc += 0.5 * (c.v - z.v).squaredNorm();
      acc += alpha1 * static_cast<double>((z.v.array() != 0.0).count());
    }
  if (model.d2.empty()) return acc;
  const Eigen::Index k2 = model.d2[0].count();
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index kp = 0; kp < k2; ++kp) {
      Image sum(model.z2[l * k2 + kp].h, model.z2[l * k2 + kp].w);
      for (Eigen::Index k = 0; k < k1; ++k) {
        const Image pooled =
            avg_pool(model.z1[l * k1 + k], model.pool_h, model.pool_w);
        sum.v += conv_same(model.d2[k].filter(kp), pooled, bc).v;
      }
      const Image& z2 = model.z2[l * k2 + kp];
      acc += 0.5 * (sum.v - z2.v).squaredNorm();
      acc += alpha2 * static_cast<double>((z2.v.array() != 0.0).count());
    }
  return acc;
}

std::vector<Image> layer2_features(const TwoLayerModel& model, double alpha2,
                                   BoundaryCondition bc) {
  require(!model.d2.empty(), "layer2_features: no second layer");
  const Eigen::Index k1 = model.d1.count();
  const Eigen::Index k2 = model.d2[0].count();
  const double thr = std::sqrt(2.0 * alpha2);
  std::vector<Image> out;
  out.reserve(model.num_images * k2);
  for (Eigen::Index l = 0; l < model.num_images; ++l)
    for (Eigen::Index kp = 0; kp < k2; ++kp) {
      Image sum;
      for (Eigen::Index k = 0; k < k1; ++k) {
        const Image pooled =
            avg_pool(model.z1[l * k1 + k], model.pool_h, model.pool_w);
        const Image c = conv_same(model.d2[k].filter(kp), pooled, bc);
        if (k == 0)
          sum = c;
        else
          sum.v += c.v;
      }
      out.push_back(hard_threshold(sum, thr));
    }
  return out;
}

TrainResult train_two_layer(const std::vector<Image>& corpus,
                            const Cnn2Config& config) {
  config.validate();
  require(!corpus.empty(), "train_two_layer: empty corpus");

  Cnn2Problem p;
  p.corpus = corpus;
  p.bc = config.bc;
  p.L = static_cast<Eigen::Index>(corpus.size());
  p.h = corpus[0].h;
  p.w = corpus[0].w;
  p.n = p.h * p.w;
  for (const auto& x : corpus)
    require(x.h == p.h && x.w == p.w,
            "train_two_layer: images must share one size");
  p.rh1 = config.rh1;
  p.rw1 = config.rw1;
  p.r1 = config.rh1 * config.rw1;
  p.k1 = config.num_filters1;
  p.rh2 = config.rh2;
  p.rw2 = config.rw2;
  p.r2 = config.rh2 * config.rw2;
  p.k2 = config.num_filters2;
  p.ph = config.pool_h;
  p.pw = config.pool_w;
  p.alpha1 = config.alpha1;
  p.alpha2 = config.alpha2;
  p.lambda_z = config.lambda_z;
  if (p.k2 > 0) {
    require(p.h % p.ph == 0 && p.w % p.pw == 0,
            "train_two_layer: image size not divisible by pooling window "
            "(padding required)");
    p.hp = p.h / p.ph;
    p.wp = p.w / p.pw;
    require(p.hp >= p.rh2 && p.wp >= p.rw2,
            "train_two_layer: pooled features smaller than layer-2 filters");
  } else {
    p.hp = p.wp = 1;
  }
  p.np = p.hp * p.wp;

  p.padded1.reserve(p.L);
  for (const auto& x : corpus)
    p.padded1.push_back(pad_for_filter(x, p.rh1, p.rw1, p.bc));
  p.hess1 = filter_hessian(p.padded1, p.h, p.w, p.rh1, p.rw1);
  p.m_d1 = Majorizer::dense(p.hess1);

  const FilterBank d1_0 =
      init_filters(p.rh1, p.rw1, p.k1, config.init, config.seed);
  std::vector<FilterBank> d2_0;
  for (Eigen::Index k = 0; k < (p.k2 > 0 ? p.k1 : 0); ++k)
    d2_0.push_back(
        init_filters(p.rh2, p.rw2, p.k2, config.init, config.seed + 1 + k));

  // Initial features: exact thresholding through the initial filters.
  std::vector<Eigen::VectorXd> x0(p.num_blocks());
  x0[0] = Eigen::Map<const Eigen::VectorXd>(d1_0.d.data(), p.r1 * p.k1);
  for (Eigen::Index k = 0; k < p.k1; ++k) {
    Eigen::VectorXd zk(p.L * p.n);
    for (Eigen::Index l = 0; l < p.L; ++l) {
      const Image c =
          conv_same_padded(d1_0.filter(k), p.padded1[l], p.h, p.w);
      zk.segment(l * p.n, p.n) =
          hard_threshold(c, std::sqrt(2.0 * p.alpha1)).v;
    }
    x0[p.z1_block(k)] = std::move(zk);
  }
  if (p.k2 > 0) {
    for (Eigen::Index k = 0; k < p.k1; ++k)
      x0[p.d2_block(k)] = Eigen::Map<const Eigen::VectorXd>(
          d2_0[k].d.data(), p.r2 * p.k2);
    Eigen::VectorXd z2(p.L * p.k2 * p.np);
    std::vector<Eigen::VectorXd> tmp = x0;
    tmp[p.z2_block()] = Eigen::VectorXd::Zero(p.L * p.k2 * p.np);
    for (Eigen::Index l = 0; l < p.L; ++l)
      for (Eigen::Index kp = 0; kp < p.k2; ++kp)
        z2.segment((l * p.k2 + kp) * p.np, p.np) =
            hard_threshold(p.layer2_sum(tmp, l, kp),
                           std::sqrt(2.0 * p.alpha2))
                .v;
    x0[p.z2_block()] = std::move(z2);
  }

  std::vector<bpegm::BlockSpec> blocks;

  // D1 block: constant Hessian majorizer, orthogonality prox.
  {
    bpegm::BlockSpec b;
    b.name = "D1";
    b.dim = p.r1 * p.k1;
    b.columns = p.k1;
    b.lambda = config.lambda_d;
    b.majorizer = [&p](const std::vector<Eigen::VectorXd>&, int) {
      return p.m_d1;
    };
    b.grad = [&p](const std::vector<Eigen::VectorXd>& xs,
                  const Eigen::VectorXd& point) {
      Eigen::VectorXd g(point.size());
      for (Eigen::Index k = 0; k < p.k1; ++k) {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(p.r1);
        Image zi(p.h, p.w);
        for (Eigen::Index l = 0; l < p.L; ++l) {
          zi.v = xs[p.z1_block(k)].segment(l * p.n, p.n);
          u += psi_adjoint(p.padded1[l], zi, p.rh1, p.rw1).taps;
        }
        g.segment(k * p.r1, p.r1) =
            p.hess1 * point.segment(k * p.r1, p.r1) - u;
      }
      return g;
    };
    b.prox = [&p](const std::vector<Eigen::VectorXd>&,
                  const Eigen::VectorXd& point, const Majorizer& mt) {
      const Eigen::Map<const Eigen::MatrixXd> v(point.data(), p.r1, p.k1);
      const FilterBank bank = prox_orthogonal(v, mt, p.rh1, p.rw1);
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
          bank.d.data(), p.r1 * p.k1));
    };
    blocks.push_back(std::move(b));
  }

  // z1_k blocks. Without a second layer these are exact hard-threshold
  // solves; with one, the layer-2 coupling is majorized through
  // P^T P <= (1/omega) I and the remaining separable problem is solved in
  // closed form.
  for (Eigen::Index k = 0; k < p.k1; ++k) {
    bpegm::BlockSpec b;
    b.name = "z1_" + std::to_string(k);
    b.dim = p.L * p.n;
    if (p.k2 == 0) {
      b.exact_solve = [&p, k](const std::vector<Eigen::VectorXd>& xs) {
        p.ensure_c1(xs);
        Eigen::VectorXd out(p.L * p.n);
        const double thr = std::sqrt(2.0 * p.alpha1);
        for (Eigen::Index l = 0; l < p.L; ++l)
          out.segment(l * p.n, p.n) =
              hard_threshold(p.c1[l * p.k1 + k], thr).v;
        return out;
      };
      blocks.push_back(std::move(b));
      continue;
    }
    b.lambda = p.lambda_z;
    b.extrapolate = false;  // memory-free feature updates
    const double omega = static_cast<double>(p.ph * p.pw);
    b.majorizer = [omega, &p](const std::vector<Eigen::VectorXd>&, int) {
      return Majorizer::scaled_identity(1.0 / omega, p.L * p.n);
    };
    b.grad = [&p, k](const std::vector<Eigen::VectorXd>& xs,
                     const Eigen::VectorXd& point) {
      // d/dz1_k of 1/2 sum_{l,k'} || sum_j d2_{j,k'} (*) P z1_{l,j} -
      // z2_{l,k'} ||^2 with z1_k taken from `point`.
      Eigen::VectorXd g(p.L * p.n);
      for (Eigen::Index l = 0; l < p.L; ++l) {
        Image acc(p.h, p.w);
        for (Eigen::Index kp = 0; kp < p.k2; ++kp) {
          Image res(p.hp, p.wp);
          for (Eigen::Index j = 0; j < p.k1; ++j) {
            Image zj(p.h, p.w);
            if (j == k)
              zj.v = point.segment(l * p.n, p.n);
            else
              zj.v = xs[p.z1_block(j)].segment(l * p.n, p.n);
            res.v += conv_same(p.d2_filter(xs, j, kp),
                               avg_pool(zj, p.ph, p.pw), p.bc)
                         .v;
          }
          res.v -= xs[p.z2_block()].segment((l * p.k2 + kp) * p.np, p.np);
          const Image back =
              conv_adjoint_image(p.d2_filter(xs, k, kp), res, p.bc);
          acc.v += avg_pool_adjoint(back, p.ph, p.pw, p.h, p.w).v;
        }
        g.segment(l * p.n, p.n) = acc.v;
      }
      return g;
    };
    b.prox = [&p, k](const std::vector<Eigen::VectorXd>& xs,
                     const Eigen::VectorXd& point, const Majorizer& mt) {
      p.ensure_c1(xs);
      const double omega_prime = 1.0 / mt.scale();
      Eigen::VectorXd out(p.L * p.n);
      Image zeta(p.h, p.w);
      for (Eigen::Index l = 0; l < p.L; ++l) {
        zeta.v = point.segment(l * p.n, p.n);
        out.segment(l * p.n, p.n) =
            layer1_feature_core(p.c1[l * p.k1 + k], zeta, p.alpha1,
                                omega_prime)
                .v;
      }
      return out;
    };
    blocks.push_back(std::move(b));
  }

  if (p.k2 > 0) {
    // D2 banks, updated sequentially over k. The majorizer is the exact
    // Hessian of the pooled features, which change every iteration, so
    // extrapolation stays off for these blocks.
    for (Eigen::Index k = 0; k < p.k1; ++k) {
      bpegm::BlockSpec b;
      b.name = "D2_" + std::to_string(k);
      b.dim = p.r2 * p.k2;
      b.columns = p.k2;
      b.lambda = config.lambda_d;
      b.extrapolate = false;
      b.majorizer = [&p, k](const std::vector<Eigen::VectorXd>& xs, int) {
        std::vector<Image> pooled_padded;
        pooled_padded.reserve(p.L);
        for (Eigen::Index l = 0; l < p.L; ++l)
          pooled_padded.push_back(pad_for_filter(
              avg_pool(p.z1_image(xs, l, k), p.ph, p.pw), p.rh2, p.rw2,
              p.bc));
        return pooled_hessian_majorizer(pooled_padded, p.hp, p.wp, p.rh2,
                                        p.rw2);
      };
      b.grad = [&p, k](const std::vector<Eigen::VectorXd>& xs,
                       const Eigen::VectorXd& point) {
        Eigen::VectorXd g(p.r2 * p.k2);
        for (Eigen::Index l = 0; l < p.L; ++l) {
          const Image pooled_k =
              avg_pool(p.z1_image(xs, l, k), p.ph, p.pw);
          const Image pooled_pad =
              pad_for_filter(pooled_k, p.rh2, p.rw2, p.bc);
          for (Eigen::Index kp = 0; kp < p.k2; ++kp) {
            // Residual with bank k's column taken from `point`.
            Image res(p.hp, p.wp);
            for (Eigen::Index j = 0; j < p.k1; ++j) {
              const Image pooled_j =
                  j == k ? pooled_k
                         : avg_pool(p.z1_image(xs, l, j), p.ph, p.pw);
              const Filter dj =
                  j == k ? Filter(p.rh2, p.rw2,
                                  point.segment(kp * p.r2, p.r2))
                         : p.d2_filter(xs, j, kp);
              res.v += conv_same(dj, pooled_j, p.bc).v;
            }
            res.v -= xs[p.z2_block()].segment((l * p.k2 + kp) * p.np, p.np);
            if (l == 0)
              g.segment(kp * p.r2, p.r2) =
                  psi_adjoint(pooled_pad, res, p.rh2, p.rw2).taps;
            else
              g.segment(kp * p.r2, p.r2) +=
                  psi_adjoint(pooled_pad, res, p.rh2, p.rw2).taps;
          }
        }
        return g;
      };
      b.prox = [&p](const std::vector<Eigen::VectorXd>&,
                    const Eigen::VectorXd& point, const Majorizer& mt) {
        const Eigen::Map<const Eigen::MatrixXd> v(point.data(), p.r2, p.k2);
        const FilterBank bank = prox_orthogonal(v, mt, p.rh2, p.rw2);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
            bank.d.data(), p.r2 * p.k2));
      };
      blocks.push_back(std::move(b));
    }

    bpegm::BlockSpec b;
    b.name = "Z2";
    b.dim = p.L * p.k2 * p.np;
    b.exact_solve = [&p](const std::vector<Eigen::VectorXd>& xs) {
      Eigen::VectorXd out(p.L * p.k2 * p.np);
      const double thr = std::sqrt(2.0 * p.alpha2);
      for (Eigen::Index l = 0; l < p.L; ++l)
        for (Eigen::Index kp = 0; kp < p.k2; ++kp)
          out.segment((l * p.k2 + kp) * p.np, p.np) =
              hard_threshold(p.layer2_sum(xs, l, kp), thr).v;
      return out;
    };
    blocks.push_back(std::move(b));
  }

  bpegm::SolverConfig solver = config.solver;
  solver.tol = config.tol;
  solver.max_iter = config.max_iter;

  auto objective = [&p](const std::vector<Eigen::VectorXd>& xs) {
    return p.objective(xs);
  };
  bpegm::SolveResult sr =
      bpegm::solve(blocks, objective, std::move(x0), solver);

  TrainResult out;
  out.model.d1 = FilterBank(
      p.rh1, p.rw1,
      Eigen::Map<const Eigen::MatrixXd>(sr.x[0].data(), p.r1, p.k1));
  out.model.pool_h = p.ph;
  out.model.pool_w = p.pw;
  out.model.num_images = p.L;
  for (Eigen::Index l = 0; l < p.L; ++l)
    for (Eigen::Index k = 0; k < p.k1; ++k)
      out.model.z1.push_back(
          Image(p.h, p.w, sr.x[p.z1_block(k)].segment(l * p.n, p.n)));
  if (p.k2 > 0) {
    for (Eigen::Index k = 0; k < p.k1; ++k)
      out.model.d2.push_back(FilterBank(
          p.rh2, p.rw2,
          Eigen::Map<const Eigen::MatrixXd>(sr.x[p.d2_block(k)].data(),
                                            p.r2, p.k2)));
    for (Eigen::Index l = 0; l < p.L; ++l)
      for (Eigen::Index kp = 0; kp < p.k2; ++kp)
        out.model.z2.push_back(Image(
            p.hp, p.wp,
            sr.x[p.z2_block()].segment((l * p.k2 + kp) * p.np, p.np)));
  }
  out.log = std::move(sr.log);
  out.converged = sr.converged;
  out.iterations = sr.iterations;
  out.final_objective =
      out.log.empty() ? p.objective(sr.x) : out.log.back().objective;
  return out;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_bank(std::ostream& os, const FilterBank& bank) {
  os.write("CAOLFB00", 8);
  put_u32(os, static_cast<uint32_t>(bank.rh));
  put_u32(os, static_cast<uint32_t>(bank.rw));
  put_u32(os, static_cast<uint32_t>(bank.count()));
  os.write(reinterpret_cast<const char*>(bank.d.data()),
           static_cast<std::streamsize>(sizeof(double)) * bank.taps() *
               bank.count());
}

}  // namespace

void save_model(const TwoLayerModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::invalid_argument(path + ": cannot open for writing");
  os.write("CAOLCNN0", 8);
  put_u32(os, static_cast<uint32_t>(model.d1.count()));
  put_u32(os, static_cast<uint32_t>(
                  model.d2.empty() ? 0 : model.d2[0].count()));
  put_u32(os, static_cast<uint32_t>(model.d1.taps()));
  put_u32(os,
          static_cast<uint32_t>(model.d2.empty() ? 0 : model.d2[0].taps()));
  put_u32(os, static_cast<uint32_t>(model.pool_h));
  put_u32(os, static_cast<uint32_t>(model.pool_w));
  put_bank(os, model.d1);
  for (const auto& bank : model.d2) put_bank(os, bank);
}

TwoLayerModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument(path + ": cannot open");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "CAOLCNN0", 8) != 0)
    throw std::invalid_argument(path + ": bad model magic");
  auto get = [&is]() {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  };
  const uint32_t k1 = get();
  const uint32_t k2 = get();
  get();  // r1, carried by the bank records
  get();  // r2
  TwoLayerModel model;
  model.pool_h = get();
  model.pool_w = get();
  auto read_bank = [&is, &path]() {
    char bmagic[8];
    is.read(bmagic, 8);
    if (!is || std::memcmp(bmagic, "CAOLFB00", 8) != 0)
      throw std::invalid_argument(path + ": bad embedded bank record");
    unsigned char b[4];
    auto rd = [&is, &b]() {
      is.read(reinterpret_cast<char*>(b), 4);
      return static_cast<uint32_t>(b[0]) |
             (static_cast<uint32_t>(b[1]) << 8) |
             (static_cast<uint32_t>(b[2]) << 16) |
             (static_cast<uint32_t>(b[3]) << 24);
    };
    const uint32_t rh = rd(), rw = rd(), k = rd();
    FilterBank bank(rh, rw, k);
    is.read(reinterpret_cast<char*>(bank.d.data()),
            static_cast<std::streamsize>(sizeof(double)) * rh * rw * k);
    if (!is) throw std::invalid_argument(path + ": truncated bank record");
    return bank;
  };
  model.d1 = read_bank();
  if (k2 > 0)
    for (uint32_t k = 0; k < k1; ++k) model.d2.push_back(read_bank());
  return model;
}

}  // namespace cnn2
}  // namespace caol
