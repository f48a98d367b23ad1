#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "caol/mbir.hpp"
#include "caol/synthetic.hpp"

#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace caol;
using namespace caol::mbir;

namespace {

void check_adjointness(const ForwardModel& a, Rng& rng, double tol = 1e-10) {
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd x(a.cols()), r(a.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = rng.gaussian();
    const double lhs = a.apply(x).dot(r);
    const double rhs = x.dot(a.adjoint(r));
    CHECK(std::abs(lhs - rhs) <=
          tol * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
  }
}

Image disk_image(Eigen::Index n, double radius_frac) {
  Image img(n, n);
  const double c = 0.5 * (n - 1);
  const double rad = radius_frac * n;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = std::hypot(i - c, j - c);
      img.at(i, j) = std::clamp(rad + 0.5 - d, 0.0, 1.0);
    }
  return img;
}

}  // namespace

TEST_CASE("forward models: adjoint identities on random probes") {
  Rng rng(61);
  const IdentityModel ident(36);
  check_adjointness(ident, rng);

  Image mask(6, 6);
  for (Eigen::Index i = 0; i < 36; ++i) mask.v[i] = (i % 3 != 0) ? 1.0 : 0.0;
  const MaskModel masked(mask);
  CHECK(masked.rows() == 24);
  check_adjointness(masked, rng);

  const RadonModel radon = radon_small({0.0, 30.0, 77.5, 120.0}, 16);
  check_adjointness(radon, rng);
}

TEST_CASE("radon: constant image gives equal interior ray sums at 0 degrees") {
  const Eigen::Index n = 12;
  const RadonModel radon({0.0}, n);
  Image flat(n, n);
  flat.v.setConstant(0.7);
  const Eigen::VectorXd sino = radon.apply(flat.v);
  // At 0 degrees every pixel column projects onto the same detector t;
  // collect the bins that received mass and compare them.
  std::vector<double> hit;
  for (Eigen::Index b = 0; b < radon.num_bins(); ++b)
    if (sino[b] > 1e-12) hit.push_back(sino[b]);
  // Column sums: n pixels of 0.7 each, possibly split between two bins;
  // total mass per column is n * 0.7 and the image has n columns.
  CHECK(sino.sum() == doctest::Approx(0.7 * n * n).epsilon(1e-12));
  // Interior bins (fully covered) are equal.
  const double peak = *std::max_element(hit.begin(), hit.end());
  int full_bins = 0;
  for (double v : hit)
    if (std::abs(v - peak) < 1e-9) ++full_bins;
  CHECK(full_bins >= n - 1);
}

TEST_CASE("radon: per-angle mass is conserved and a disk is angle-invariant") {
  const Eigen::Index n = 48;
  const std::vector<double> angles = {0, 14, 45, 60, 111, 150};
  const RadonModel radon(angles, n);
  const Image disk = disk_image(n, 0.3);
  const Eigen::VectorXd sino = radon.apply(disk.v);
  const Eigen::Index nb = radon.num_bins();
  // Interpolation weights per pixel sum to one, so each angle's projection
  // sums to the image mass exactly.
  for (Eigen::Index a = 0; a < radon.num_angles(); ++a)
    CHECK(sino.segment(a * nb, nb).sum() ==
          doctest::Approx(disk.v.sum()).epsilon(1e-12));
  // Profiles of a centered disk agree across angles. Pixel-driven
  // interpolation leaves high-frequency ripple at diagonal angles, so
  // compare after a 3-bin box smoothing.
  auto box3 = [](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = v;
    for (Eigen::Index i = 1; i + 1 < v.size(); ++i)
      out[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
    return out;
  };
  const Eigen::VectorXd ref = box3(sino.segment(0, nb));
  for (Eigen::Index a = 1; a < radon.num_angles(); ++a) {
    const double rel =
        (box3(sino.segment(a * nb, nb)) - ref).norm() / ref.norm();
    CHECK(rel < 0.03);
  }
}

TEST_CASE("radon: empty angle list rejected") {
  CHECK_THROWS_AS(RadonModel({}, 16), std::invalid_argument);
}

TEST_CASE("spatial_strength: identity weights give all-ones") {
  const IdentityModel a(16);
  const SpatialStrength s =
      spatial_strength(a, Eigen::VectorXd::Ones(16), 4, 4);
  CHECK((s.psi.v.array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(s.zero_columns == 0);
}

TEST_CASE("spatial_strength: A = I with diagonal weights gives sqrt(w)") {
  const IdentityModel a(9);
  Eigen::VectorXd w(9);
  Rng rng(62);
  for (int i = 0; i < 9; ++i) w[i] = rng.uniform(0.1, 4.0);
  const SpatialStrength s = spatial_strength(a, w, 3, 3);
  for (int i = 0; i < 9; ++i)
    CHECK(s.psi.v[i] == doctest::Approx(std::sqrt(w[i])).epsilon(1e-12));
}

TEST_CASE("spatial_strength: masked pixels get zero with a warning count") {
  Image mask(3, 3);
  mask.v << 1, 1, 0, 1, 0, 1, 1, 1, 1;
  const MaskModel a(mask);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(a.rows(), 2.25);
  const SpatialStrength s = spatial_strength(a, w, 3, 3);
  CHECK(s.zero_columns == 2);
  for (Eigen::Index i = 0; i < 9; ++i) {
    if (mask.v[i] == 0.0)
      CHECK(s.psi.v[i] == 0.0);
    else
      CHECK(s.psi.v[i] == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("autoencode: zero thresholds with a tight bank is the identity") {
  Rng rng(63);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  const Image x = oracle::random_image(12, 12, rng);
  const Image back = autoencode(x, dct, 0.0);
  CHECK((back.v - x.v).norm() / x.v.norm() <= 1e-10);

  // Random tight banks too.
  const FilterBank rand_tf(3, 3, oracle::random_feasible_bank(9, 14, rng));
  const Image back2 = autoencode(x, rand_tf, 0.0);
  CHECK((back2.v - x.v).norm() / x.v.norm() <= 1e-10);
}

TEST_CASE("autoencode: infinite threshold zeroes, zero input stays zero") {
  Rng rng(64);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  const Image x = oracle::random_image(8, 8, rng);
  CHECK(autoencode(x, dct, std::numeric_limits<double>::infinity()).v.norm() ==
        0.0);
  Image zero(8, 8);
  CHECK(autoencode(zero, dct, 0.1).v.norm() == 0.0);
}

TEST_CASE("autoencode: per-filter thresholds validated") {
  const FilterBank dct = init_filters(2, 2, 4, FilterInit::deterministic);
  Image x(4, 4);
  x.v.setOnes();
  CHECK_THROWS_AS(autoencode(x, dct, Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
  CHECK_NOTHROW(autoencode(x, dct, Eigen::VectorXd::Ones(4)));
}

TEST_CASE("x_update: pure data fit with identity model clamps y") {
  Rng rng(65);
  const Eigen::Index n = 6;
  const IdentityModel a(n * n);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n * n);
  Eigen::VectorXd y(n * n);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.gaussian();
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  const Majorizer m_tilde =
      diag_weighted_normal(a, w).scaled(1.0 + 1e-12);
  Image x0(n, n);
  Image psi(n, n);
  psi.v.setOnes();
  const Image x1 =
      x_update(x0, x0, y, a, w, dct, psi, m_tilde, 0.0, 1e-4);
  CHECK((x1.v - y.cwiseMax(0.0)).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("x_update: consistent data at a fixed point stays put") {
  const Eigen::Index n = 8;
  const std::vector<Image> imgs = synthetic_corpus(1, n, n, 66);
  const Image x_true = imgs[0];
  const IdentityModel a(n * n);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n * n);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  const Majorizer m_tilde =
      diag_weighted_normal(a, w).scaled(1.0 + 1e-12);
  Image psi(n, n);
  psi.v.setOnes();
  // Zero thresholds: the autoencoder is the identity, y = A x_true, so the
  // blend returns x_true (nonnegative already).
  const Image x1 = x_update(x_true, x_true, x_true.v, a, w, dct, psi,
                            m_tilde, 3.0, 0.0);
  CHECK((x1.v - x_true.v).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("x_update: output is nonnegative") {
  Rng rng(67);
  const Eigen::Index n = 6;
  const IdentityModel a(n * n);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n * n);
  Eigen::VectorXd y(n * n);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.gaussian() - 1.0;
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  const Majorizer m_tilde = diag_weighted_normal(a, w).scaled(2.0);
  Image x0(n, n);
  for (Eigen::Index i = 0; i < x0.size(); ++i)
    x0.v[i] = std::abs(rng.gaussian());
  Image psi(n, n);
  psi.v.setOnes();
  const Image x1 =
      x_update(x0, x0, y, a, w, dct, psi, m_tilde, 0.7, 1e-3);
  CHECK(x1.v.minCoeff() >= 0.0);
}

TEST_CASE("metrics: exact zero, constant offset, psnr consistency") {
  Image a(4, 4), b(4, 4);
  a.v.setConstant(0.25);
  b.v.setConstant(0.25);
  CHECK(metrics(a, b).rmse == 0.0);

  b.v.array() += 0.125;
  const ReconMetrics m = metrics(a, b);
  CHECK(m.rmse == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(m.psnr == doctest::Approx(20.0 * std::log10(1.0 / 0.125))
                      .epsilon(1e-12));

  Image roi(4, 4);
  CHECK_THROWS_AS(metrics(a, b, &roi), std::invalid_argument);  // empty roi
  roi.v[5] = 1.0;
  CHECK(metrics(a, b, &roi).rmse == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("poisson_gaussian_weights: formula and validation") {
  Eigen::VectorXd rho(3);
  rho << 100.0, 25.0, 0.0;
  const Eigen::VectorXd w = poisson_gaussian_weights(rho, 25.0);
  CHECK(w[0] == doctest::Approx(10000.0 / 125.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(625.0 / 50.0).epsilon(1e-12));
  CHECK(w[2] == 0.0);
  rho[0] = -1.0;
  CHECK_THROWS_AS(poisson_gaussian_weights(rho, 25.0),
                  std::invalid_argument);
}

TEST_CASE("M_A dominance for every forward model") {
  Rng rng(68);
  Image mask(5, 5);
  for (Eigen::Index i = 0; i < 25; ++i) mask.v[i] = (i % 4 != 0) ? 1.0 : 0.0;
  const RadonModel radon({0.0, 45.0, 90.0, 135.0}, 5);
  std::vector<const ForwardModel*> models;
  const IdentityModel ident(25);
  const MaskModel masked(mask);
  models = {&ident, &masked, &radon};
  // Strict construction rejects the zero columns of the mask model.
  CHECK_THROWS_AS(
      diag_weighted_normal(masked, Eigen::VectorXd::Ones(masked.rows())),
      NumericalError);
  for (const ForwardModel* a : models) {
    Eigen::VectorXd w(a->rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.0, 2.0);
    const Majorizer m = diag_weighted_normal(*a, w, 1e-9);
    for (int probe = 0; probe < 200; ++probe) {
      Eigen::VectorXd v(25);
      for (int i = 0; i < 25; ++i) v[i] = rng.gaussian();
      const Eigen::VectorXd av = a->apply(v);
      const double quad_normal = av.dot(w.cwiseProduct(av));
      CHECK(v.dot(m.apply(v)) - quad_normal >= -1e-9 * v.squaredNorm());
    }
  }
}

TEST_CASE("reconstruct: denoising improves PSNR and keeps descent") {
  const Eigen::Index n = 32;
  const Image x_true = synthetic_phantom(n, 69);
  Rng rng(70);
  Eigen::VectorXd y = x_true.v;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.05 * rng.gaussian();

  const IdentityModel a(n * n);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n * n);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);

  ReconConfig config;
  config.gamma = 8.0;
  config.alpha_prime = 6e-4;
  config.tol = 1e-8;
  config.max_iter = 300;
  config.solver.extrapolation_enabled = false;
  const ReconResult res = reconstruct(y, a, w, dct, n, n, config);

  Image noisy(n, n, y);
  const double psnr_in = metrics(noisy, x_true).psnr;
  const double psnr_out = metrics(res.x, x_true).psnr;
  CHECK(psnr_out > psnr_in);
  CHECK(res.x.v.minCoeff() >= 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : res.log) {
    CHECK(rec.objective <= prev + 1e-12 * std::abs(prev));
    prev = rec.objective;
  }
}

TEST_CASE("reconstruct: gamma = 0 is the clamped data fit") {
  const Eigen::Index n = 8;
  Rng rng(71);
  Eigen::VectorXd y(n * n);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.gaussian();
  const IdentityModel a(n * n);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  ReconConfig config;
  config.gamma = 0.0;
  config.alpha_prime = 1e-4;
  config.tol = 1e-10;
  config.max_iter = 50;
  const ReconResult res =
      reconstruct(y, a, Eigen::VectorXd::Ones(n * n), dct, n, n, config);
  CHECK((res.x.v - y.cwiseMax(0.0)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("reconstruct: very large gamma approaches an autoencoder fixed "
          "point") {
  const Eigen::Index n = 16;
  const Image x_true = synthetic_phantom(n, 72);
  const IdentityModel a(n * n);
  const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
  ReconConfig config;
  config.gamma = 1e6;
  config.alpha_prime = 1e-5;
  config.tol = 1e-10;
  config.max_iter = 400;
  const ReconResult res = reconstruct(x_true.v, a,
                                      Eigen::VectorXd::Ones(n * n), dct, n,
                                      n, config, &x_true);
  Image thr(n, n);
  thr.v.setConstant(std::sqrt(2.0 * config.alpha_prime));
  const Image ae = autoencode(res.x, dct, thr);
  CHECK((ae.v - res.x.v).norm() / (res.x.v.norm() + 1e-30) < 1e-3);
}
