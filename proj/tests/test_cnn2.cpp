#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "caol/cnn2.hpp"
#include "caol/synthetic.hpp"

#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

using namespace caol;
using namespace caol::cnn2;

TEST_CASE("avg_pool: constants, block means, divisibility") {
  Image flat(4, 4);
  flat.v.setConstant(0.3);
  const Image pooled = avg_pool(flat, 2, 2);
  CHECK(pooled.h == 2);
  CHECK((pooled.v.array() - 0.3).abs().maxCoeff() < 1e-15);

  Image row(1, 4);
  row.v << 1, 3, 5, 7;
  const Image p = avg_pool(row, 1, 2);
  CHECK(p.v == Eigen::Vector2d(2, 6));

  Image odd(3, 4);
  CHECK_THROWS_AS(avg_pool(odd, 2, 2), std::invalid_argument);
}

TEST_CASE("avg_pool: adjoint identity") {
  Rng rng(81);
  const Image z = oracle::random_image(6, 8, rng);
  const Image y = oracle::random_image(3, 4, rng);
  const Image pz = avg_pool(z, 2, 2);
  const Image pty = avg_pool_adjoint(y, 2, 2, 6, 8);
  CHECK(std::abs(pz.v.dot(y.v) - z.v.dot(pty.v)) < 1e-12);
}

TEST_CASE("pooling majorizer: (1/omega) I - P^T P is PSD") {
  // Exact structure: P^T P is block diagonal with blocks (1/omega^2) 1 1^T,
  // whose largest eigenvalue is exactly 1/omega.
  for (Eigen::Index omega : {2, 4, 16}) {
    const Eigen::Index blocks = 3;
    const Eigen::Index nn = blocks * omega;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(blocks, nn);
    for (Eigen::Index b = 0; b < blocks; ++b)
      p.block(b, b * omega, 1, omega).setConstant(1.0 / omega);
    const Eigen::MatrixXd gap =
        Eigen::MatrixXd::Identity(nn, nn) / omega - p.transpose() * p;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gap,
                                                      Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("conv_adjoint_image: adjoint identity for both boundaries") {
  Rng rng(82);
  for (auto bc : {BoundaryCondition::circular, BoundaryCondition::symmetric}) {
    const Image x = oracle::random_image(6, 7, rng);
    const Image z = oracle::random_image(6, 7, rng);
    const Filter d = oracle::random_filter(3, 3, rng);
    const double lhs = conv_same(d, x, bc).v.dot(z.v);
    const double rhs = x.v.dot(conv_adjoint_image(d, z, bc).v);
    CHECK(std::abs(lhs - rhs) <=
          1e-12 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
  }
}

TEST_CASE("layer1_feature_core: alpha = 0 returns the blended quadratic "
          "minimizer") {
  Rng rng(83);
  const Image c = oracle::random_image(4, 4, rng);
  const Image zeta = oracle::random_image(4, 4, rng);
  const double op = 3.7;
  const Image z = layer1_feature_core(c, zeta, 0.0, op);
  const Image expect(4, 4,
                     ((op * c.v + zeta.v) / (op + 1.0)).eval());
  CHECK((z.v - expect.v).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("layer1_feature_core: zeta at the response point") {
  Rng rng(84);
  const Image c = oracle::random_image(4, 4, rng);
  const double op = 2.0, alpha1 = 0.05;
  // zeta = c -> m = (op c + c)/(op + 1) = c up to roundoff; threshold
  // sqrt(2 alpha1 op / (op + 1)).
  const Image z = layer1_feature_core(c, c, alpha1, op);
  const double thr = std::sqrt(2.0 * alpha1 * op / (op + 1.0));
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double m = (op * c.v[i] + c.v[i]) / (op + 1.0);
    CHECK(z.v[i] == (std::abs(m) >= thr ? m : 0.0));
    CHECK(std::abs(z.v[i] == 0.0 ? 0.0 : z.v[i] - c.v[i]) < 1e-15);
  }
}

TEST_CASE("layer1_feature_core: exact two-branch oracle equivalence") {
  // Entrywise: cost(0) = c^2/2 + zeta^2/(2 op) versus cost(m) = quadratics
  // at m plus alpha1; the core must return the cheaper branch (ties keep).
  Rng rng(85);
  for (int rep = 0; rep < 200; ++rep) {
    const double c = rng.gaussian();
    const double zeta = rng.gaussian();
    const double op = rng.uniform(0.5, 8.0);
    const double alpha1 = rng.uniform(0.0, 0.3);
    Image ci(1, 1), zi(1, 1);
    ci.v[0] = c;
    zi.v[0] = zeta;
    const double z = layer1_feature_core(ci, zi, alpha1, op).v[0];
    const double m = (op * c + zeta) / (op + 1.0);
    const double cost_zero = 0.5 * c * c + zeta * zeta / (2.0 * op);
    const double cost_keep = 0.5 * (c - m) * (c - m) +
                             (m - zeta) * (m - zeta) / (2.0 * op) + alpha1;
    if (cost_keep <= cost_zero)
      CHECK(z == m);
    else
      CHECK(z == 0.0);
  }
}

TEST_CASE("layer2 features: passthrough at alpha2 = 0, zero features stay "
          "zero, brute force on a tiny instance") {
  const std::vector<Image> corpus = synthetic_corpus(1, 8, 8, 86);
  Cnn2Config config;
  config.rh1 = config.rw1 = 2;
  config.num_filters1 = 4;
  config.rh2 = config.rw2 = 2;
  config.num_filters2 = 4;
  config.pool_h = config.pool_w = 2;
  config.alpha1 = 1e-3;
  config.alpha2 = 1e-3;
  config.max_iter = 3;
  config.init = FilterInit::deterministic;
  const TrainResult tr = train_two_layer(corpus, config);

  // alpha2 = 0: thresholding passes the summed convolution through.
  const std::vector<Image> pass = layer2_features(tr.model, 0.0, config.bc);
  TwoLayerModel probe = tr.model;
  probe.z2 = pass;
  for (size_t i = 0; i < pass.size(); ++i) {
    // Recompute the sum independently.
    Image sum(pass[i].h, pass[i].w);
    const Eigen::Index kp = static_cast<Eigen::Index>(i) % 4;
    for (Eigen::Index k = 0; k < 4; ++k) {
      const Image pooled = avg_pool(tr.model.z1[k], 2, 2);
      sum.v += conv_same(tr.model.d2[k].filter(kp), pooled, config.bc).v;
    }
    CHECK((pass[i].v - sum.v).lpNorm<Eigen::Infinity>() < 1e-13);
  }

  // All-zero first-layer features give all-zero second-layer features.
  TwoLayerModel zeroed = tr.model;
  for (auto& z : zeroed.z1) z.v.setZero();
  for (const Image& z2 : layer2_features(zeroed, config.alpha2, config.bc))
    CHECK(z2.v.norm() == 0.0);

  // The thresholded features minimize the separable l0 problem (brute
  // force per entry: keep iff |sum| >= sqrt(2 alpha2)).
  const std::vector<Image> feats =
      layer2_features(tr.model, config.alpha2, config.bc);
  const double thr = std::sqrt(2.0 * config.alpha2);
  for (size_t i = 0; i < feats.size(); ++i)
    for (Eigen::Index e = 0; e < feats[i].size(); ++e) {
      const double s = pass[i].v[e];
      CHECK(feats[i].v[e] == (std::abs(s) >= thr ? s : 0.0));
    }
}

TEST_CASE("train_two_layer: orthogonality invariants for both layers") {
  const std::vector<Image> corpus = synthetic_corpus(1, 16, 16, 87);
  Cnn2Config config;
  config.rh1 = config.rw1 = 2;
  config.num_filters1 = 4;
  config.rh2 = config.rw2 = 2;
  config.num_filters2 = 4;
  config.pool_h = config.pool_w = 2;
  config.alpha1 = 5e-4;
  config.alpha2 = 5e-4;
  config.max_iter = 15;
  config.seed = 87;
  const TrainResult tr = train_two_layer(corpus, config);

  Eigen::MatrixXd g1 = tr.model.d1.d * tr.model.d1.d.transpose();
  g1.diagonal().array() -= 0.25;
  CHECK(g1.norm() <= 1e-10);
  for (const auto& bank : tr.model.d2) {
    Eigen::MatrixXd g2 = bank.d * bank.d.transpose();
    g2.diagonal().array() -= 0.25;
    CHECK(g2.norm() <= 1e-10);
  }
}

TEST_CASE("train_two_layer: objective nonincreasing with extrapolation off") {
  const std::vector<Image> corpus = synthetic_corpus(1, 32, 32, 88);
  Cnn2Config config;
  config.rh1 = config.rw1 = 3;
  config.num_filters1 = 9;
  config.rh2 = config.rw2 = 2;
  config.num_filters2 = 4;
  config.pool_h = config.pool_w = 2;
  config.alpha1 = 1e-4;
  config.alpha2 = 1e-4;
  config.max_iter = 25;
  config.seed = 88;
  config.solver.extrapolation_enabled = false;
  config.solver.track_block_objectives = true;
  const TrainResult tr = train_two_layer(corpus, config);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : tr.log)
    for (double f : rec.block_objectives) {
      CHECK(f <= prev + 1e-12 * std::abs(prev));
      prev = f;
    }
}

TEST_CASE("train_two_layer: K2 = 0 reduces to single-layer CAOL") {
  const std::vector<Image> corpus = synthetic_corpus(2, 16, 16, 89);

  Cnn2Config config;
  config.rh1 = config.rw1 = 3;
  config.num_filters1 = 9;
  config.num_filters2 = 0;
  config.alpha1 = 2.5e-4;
  config.max_iter = 20;
  config.seed = 89;
  config.tol = 1e-30;
  const TrainResult tr = train_two_layer(corpus, config);

  TrainingSet ts;
  ts.images = corpus;
  ts.rh = ts.rw = 3;
  ts.bc = config.bc;
  CaolConfig cc;
  cc.alpha = config.alpha1;
  cc.model = CaolModel::orthogonal;
  cc.rh = cc.rw = 3;
  cc.num_filters = 9;
  cc.seed = 89;
  cc.max_iter = 20;
  cc.tol = 1e-30;
  const CaolResult cr = learn(ts, cc);

  CHECK((tr.model.d1.d - cr.filters.d).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(tr.model.d2.empty());
}

TEST_CASE("model serialization round trip") {
  const std::vector<Image> corpus = synthetic_corpus(1, 8, 8, 90);
  Cnn2Config config;
  config.rh1 = config.rw1 = 2;
  config.num_filters1 = 4;
  config.rh2 = config.rw2 = 2;
  config.num_filters2 = 4;
  config.pool_h = config.pool_w = 2;
  config.max_iter = 2;
  const TrainResult tr = train_two_layer(corpus, config);
  save_model(tr.model, "cnn2_model.bin");
  const TwoLayerModel back = load_model("cnn2_model.bin");
  CHECK(back.d1.d == tr.model.d1.d);
  REQUIRE(back.d2.size() == tr.model.d2.size());
  for (size_t k = 0; k < back.d2.size(); ++k)
    CHECK(back.d2[k].d == tr.model.d2[k].d);
  CHECK(back.pool_h == 2);
  std::remove("cnn2_model.bin");
}
