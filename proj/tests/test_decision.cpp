#include <cmath>
#include <random>
#include <sstream>

#include "cgrkit/decision/model.hpp"
#include "doctest.h"
#include "model_oracle.hpp"

using namespace cgrkit;
using test::Mlpd;

namespace {

ModelShape tiny(int input = 12, int width = 8) {
  ModelShape s;
  s.input = input;
  s.width = width;
  return s;
}

Mlpd random_double_model(const ModelShape& shape, std::uint64_t seed) {
  Mlpd m = init_model(shape, seed).cast<double>();
  // move normalization away from identity so every parameter matters
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& l : m.layers) {
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = u(rng);
    for (Eigen::Index i = 0; i < l.gamma.size(); ++i) {
      l.gamma[i] = 1.0 + u(rng);
      l.beta[i] = u(rng);
      l.mean[i] = u(rng);
      l.var[i] = 1.0 + u(rng);
    }
  }
  return m;
}

std::vector<std::vector<double>> random_batch(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> x(n, std::vector<double>(dim));
  for (auto& row : x)
    for (auto& v : row) v = g(rng);
  return x;
}

Mlpd::Matrix to_matrix(const std::vector<std::vector<double>>& x) {
  Mlpd::Matrix m(static_cast<Eigen::Index>(x[0].size()), static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    for (std::size_t f = 0; f < x[k].size(); ++f) m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = x[k][f];
  return m;
}

Mlp constant_model(const ModelShape& shape, double p) {
  Mlp m = init_model(shape, 0);
  for (auto& l : m.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  m.layers.back().b[0] = static_cast<float>(std::log(p / (1.0 - p)));
  return m;
}

Cgr random_cgr(std::mt19937_64& rng) {
  CgrGridParams params;
  std::uniform_real_distribution<double> d(0.0, 0.05), th(0.0, kPi);
  std::vector<CgrCell> grid(params.cell_count());
  for (auto& c : grid) c = {d(rng), th(rng)};
  return Cgr(RigidTransform(), params, grid);
}

}  // namespace

TEST_CASE("default shape: 480 inputs, seven layers, skip from layer 2 to layer 5") {
  const Mlp m = init_model(ModelShape{}, 1);
  REQUIRE(m.layers.size() == 7u);
  CHECK(m.layers[0].w.rows() == 1024);
  CHECK(m.layers[0].w.cols() == 480);
  for (int l = 1; l < 6; ++l) CHECK(m.layers[l].w.rows() == 1024);
  CHECK(m.layers[6].w.rows() == 1);
  CHECK(m.layers[6].gamma.size() == 0);
}

TEST_CASE("init is deterministic, finite and fan-in scaled") {
  const auto a = init_model(tiny(), 7), b = init_model(tiny(), 7), c = init_model(tiny(), 8);
  bool differ = false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    CHECK(a.layers[l].w.allFinite());
    CHECK(a.layers[l].b.isZero());
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layers[l].w.cols()));
    CHECK(a.layers[l].w.cwiseAbs().maxCoeff() <= bound);
    differ = differ || a.layers[l].w != c.layers[l].w;
    if (l + 1 < a.layers.size()) {
      CHECK(a.layers[l].gamma.isOnes());
      CHECK(a.layers[l].beta.isZero());
    }
  }
  CHECK(differ);
  const std::vector<float> zero(12, 0.0f);
  const double p = forward(a, zero);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("zero weights and identity normalization give one half") {
  Mlp m = constant_model(tiny(), 0.5);
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0f, 3.0f);
  Mlp::Matrix x(12, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
  for (auto mode : {NormMode::batch, NormMode::running}) {
    const auto p = forward(m, x, mode);
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] == 0.5f);
  }
}

TEST_CASE("forward matches the scalar reference in both normalization modes") {
  const auto m = random_double_model(tiny(), 11);
  const auto x = random_batch(9, 12, 4);
  const std::vector<std::uint8_t> y(9, 1);
  for (bool batch : {true, false}) {
    const auto ref = test::oracle_forward(m, x, y, batch);
    const auto p = forward(m, to_matrix(x), batch ? NormMode::batch : NormMode::running);
    for (std::size_t k = 0; k < x.size(); ++k) {
      CHECK(p[static_cast<Eigen::Index>(k)] == doctest::Approx(ref.p[k]).epsilon(1e-12));
      CHECK(p[static_cast<Eigen::Index>(k)] > 0.0);
      CHECK(p[static_cast<Eigen::Index>(k)] < 1.0);
    }
  }
}

TEST_CASE("inference outputs do not depend on the rest of the batch") {
  const auto m = random_double_model(tiny(), 5);
  auto x = random_batch(6, 12, 9);
  x.push_back(x[2]);
  x.push_back(x[2]);
  const auto p = forward(m, to_matrix(x), NormMode::running);
  CHECK(p[6] == p[2]);
  CHECK(p[7] == p[2]);
  const auto alone = forward(m, to_matrix({x[2]}), NormMode::running);
  CHECK(alone[0] == doctest::Approx(p[2]).epsilon(1e-14));
}

TEST_CASE("non-finite input is rejected") {
  const Mlp m = init_model(tiny(), 1);
  std::vector<float> x(12, 0.0f);
  x[3] = std::nanf("");
  CHECK_THROWS_WITH_AS(forward(m, x), "forward: non-finite input", Error);
}

TEST_CASE("binary cross-entropy") {
  CHECK(bce_loss(std::vector<double>{0.5}, std::vector<std::uint8_t>{1}) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(std::vector<double>{1.0, 0.0}, std::vector<std::uint8_t>{1, 0}) < 1e-6);
  CHECK(std::isfinite(bce_loss(std::vector<double>{0.0}, std::vector<std::uint8_t>{1})));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  std::vector<double> p(64);
  std::vector<std::uint8_t> y(64);
  double ref = 0.0;
  for (int i = 0; i < 64; ++i) {
    p[i] = u(rng);
    y[i] = static_cast<std::uint8_t>(rng() & 1);
    ref += y[i] == 1 ? -std::log(p[i]) : -std::log(1.0 - p[i]);
  }
  CHECK(std::abs(bce_loss(p, y) - ref / 64.0) < 1e-12);
}

TEST_CASE("analytic gradients match central differences of the reference loss") {
  const auto m = random_double_model(tiny(), 21);
  const auto x = random_batch(8, 12, 22);
  const std::vector<std::uint8_t> y = {1, 0, 0, 1, 1, 0, 1, 0};
  for (bool batch : {true, false}) {
    CAPTURE(batch);
    const auto r = test::gradient_check(m, x, y, batch);
    CHECK(r.max_rel < 1e-4);
    int total = 0;
    for (int c : r.checked_per_layer) total += c;
    CHECK(r.kinks * 20 < total);
    CHECK(r.checked_per_layer[0] >= 100);
    for (int l = 1; l < 6; ++l) CHECK(r.checked_per_layer[l] >= 80);  // 88 parameters each at width 8
  }
}

TEST_CASE("gradients vanish on a saturated, correctly labelled batch") {
  Mlpd m = random_double_model(tiny(), 2);
  m.layers.back().b[0] = 60.0;
  const auto x = random_batch(8, 12, 3);
  const std::vector<std::uint8_t> y(8, 1);
  const auto g = gradients(m, to_matrix(x), y, NormMode::batch);
  double worst = 0.0;
  auto grad = g.grad;
  for_each_trainable<double>(grad, [&](int, double& v) { worst = std::max(worst, std::abs(v)); });
  CHECK(worst < 1e-5);
}

TEST_CASE("duplicating the batch leaves inference-mode gradients unchanged") {
  const auto m = random_double_model(tiny(), 31);
  auto x = random_batch(7, 12, 32);
  std::vector<std::uint8_t> y = {1, 0, 1, 1, 0, 0, 1};
  const auto g1 = gradients(m, to_matrix(x), y, NormMode::running);
  const auto n = x.size();
  for (std::size_t k = 0; k < n; ++k) {
    x.push_back(x[k]);
    y.push_back(y[k]);
  }
  const auto g2 = gradients(m, to_matrix(x), y, NormMode::running);
  std::vector<double> a, b;
  auto ga = g1.grad, gb = g2.grad;
  for_each_trainable<double>(ga, [&](int, double& v) { a.push_back(v); });
  for_each_trainable<double>(gb, [&](int, double& v) { b.push_back(v); });
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst < 1e-10);
  CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-12));
}

TEST_CASE("training separates Gaussian blobs, lowers the loss and is deterministic") {
  TrainConfig cfg;
  cfg.shape.width = 256;
  cfg.seed = 4;
  const auto data = test::gaussian_blobs(1000, 480, 3.0, 0.5, 1);
  const auto held = test::gaussian_blobs(500, 480, 3.0, 0.5, 2);
  const auto r = train(data, cfg, &held);
  REQUIRE(r.log.size() == 20u);
  CHECK(r.log.back().heldout_accuracy > 0.95);
  CHECK(accuracy(r.model, held) == r.log.back().heldout_accuracy);
  CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
  CHECK(r.warnings.empty());
  const auto again = train(data, cfg, &held);
  for (std::size_t l = 0; l < r.model.layers.size(); ++l) {
    CHECK(again.model.layers[l].w == r.model.layers[l].w);
    CHECK(again.model.layers[l].var == r.model.layers[l].var);
  }
}

TEST_CASE("loss falls over training for several seeds") {
  TrainConfig cfg;
  cfg.shape.width = 32;
  cfg.epochs = 20;
  const auto data = test::gaussian_blobs(300, 480, 1.0, 1.0, 8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto r = train(data, cfg);
    CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
  }
}

TEST_CASE("single-class data warns but still trains") {
  TrainConfig cfg;
  cfg.shape = tiny();
  cfg.epochs = 2;
  LabeledSet data;
  data.dim = 12;
  for (int i = 0; i < 10; ++i) data.append(std::vector<float>(12, static_cast<float>(i)), true);
  const auto r = train(data, cfg);
  REQUIRE(r.warnings.size() == 1u);
  CHECK(r.warnings[0] == "training set has a single class");
  CHECK(r.log.size() == 2u);
}

TEST_CASE("train log csv") {
  std::ostringstream os;
  write_train_log_csv(os, {{1, 0.5, 0.75}, {2, 0.25, std::nan("")}});
  CHECK(os.str() == "epoch,mean_loss,heldout_accuracy\n1,0.5,0.75\n2,0.25,n/a\n");
}

TEST_CASE("model and bank files round trip bitwise") {
  TrainConfig cfg;
  cfg.shape = tiny();
  cfg.epochs = 1;
  const auto data = test::gaussian_blobs(40, 12, 2.0, 0.5, 3);
  const Mlp m = train(data, cfg).model;  // running statistics are no longer defaults
  std::stringstream ss;
  write_model(ss, m);
  const std::string bytes = ss.str();
  const std::size_t expect = 8 + 5 * 4 + 4 * ((12 * 8 + 8 + 4 * 8) + 5 * (8 * 8 + 8 + 4 * 8) + (8 + 1));
  CHECK(bytes.size() == expect);
  const Mlp back = read_model(ss);
  std::stringstream again;
  write_model(again, back);
  CHECK(again.str() == bytes);
  CHECK(back.shape == m.shape);

  DecisionBank bank{"dh3", {{0, m}, {3, constant_model(tiny(), 0.25)}}};
  std::stringstream bs;
  write_bank(bs, bank);
  const auto bank_back = read_bank(bs);
  CHECK(bank_back.hand == "dh3");
  REQUIRE(bank_back.models.size() == 2u);
  std::stringstream bs2;
  write_bank(bs2, bank_back);
  CHECK(bs2.str() == bs.str());

  std::stringstream bad(std::string("CGRKNN2\0", 8) + bytes.substr(8));
  CHECK_THROWS_WITH_AS(read_model(bad), "version mismatch", Error);
  std::stringstream wrong(std::string("NOTAMODL") + bytes.substr(8));
  CHECK_THROWS_WITH_AS(read_model(wrong), "bad magic", Error);
  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_WITH_AS(read_model(cut), "truncated file", Error);
}

TEST_CASE("decide evaluates the candidate type's sub-model on the flattened grid") {
  std::mt19937_64 rng(5);
  const Mlp net = init_model(ModelShape{480, 16}, 3);
  DecisionBank bank{"h", {{0, constant_model(ModelShape{480, 16}, 0.2)},
                          {1, constant_model(ModelShape{480, 16}, 0.7)},
                          {2, net}}};
  const Cgr cgr = random_cgr(rng);
  GraspCandidate c;
  c.grasp_type = 0;
  CHECK(decide(bank, c, cgr) == doctest::Approx(0.2).epsilon(1e-6));
  c.grasp_type = 1;
  CHECK(decide(bank, c, cgr) == doctest::Approx(0.7).epsilon(1e-6));
  c.grasp_type = 2;
  CHECK(decide(bank, c, cgr) == forward(net, cgr.flatten()));
  c.grasp_type = 9;
  CHECK_THROWS_WITH_AS(decide(bank, c, cgr), "decision bank has no sub-model for grasp type 9", Error);

  std::vector<Cgr> many;
  for (int i = 0; i < 5; ++i) many.push_back(random_cgr(rng));
  std::vector<const Cgr*> ptrs;
  for (const auto& g : many) ptrs.push_back(&g);
  const auto batch = decide_batch(bank, 2, ptrs);
  for (int i = 0; i < 5; ++i) CHECK(batch[i] == doctest::Approx(forward(net, many[i].flatten())).epsilon(1e-6));
}

TEST_CASE("flatten then unflatten is the identity on float grids") {
  std::mt19937_64 rng(6);
  const Cgr a = random_cgr(rng);
  const auto flat = a.flatten();
  CHECK(flat.size() == 480u);
  const Cgr b(a.frame(), a.params(), unflatten_grid(flat, a.params()));
  CHECK(b.flatten() == flat);
  CHECK_THROWS_AS(unflatten_grid(std::vector<float>(10), a.params()), Error);
}

TEST_CASE("bank training gives one sub-model per type with per-type seeds") {
  TrainConfig cfg;
  cfg.shape = tiny();
  cfg.epochs = 2;
  std::map<int, LabeledSet> per_type = {{0, test::gaussian_blobs(30, 12, 2.0, 0.5, 1)},
                                        {2, test::gaussian_blobs(30, 12, 2.0, 0.5, 1)}};
  std::map<int, TrainResult> results;
  const auto bank = train_bank("h", per_type, cfg, &results);
  REQUIRE(bank.models.size() == 2u);
  CHECK(results.size() == 2u);
  // same data, different seeds
  CHECK(bank.models.at(0).layers[0].w != bank.models.at(2).layers[0].w);
  TrainConfig c2 = cfg;
  c2.seed = 2;
  CHECK(train(per_type.at(0), c2).model.layers[0].w == bank.models.at(2).layers[0].w);
}
