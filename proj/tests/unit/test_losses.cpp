#include <doctest.h>

#include <cmath>
#include <random>

#include "relamix/errors.hpp"
#include "relamix/losses.hpp"

using namespace relamix;
using Eigen::MatrixXd;

namespace {

MatrixXd row(std::initializer_list<double> v) {
  MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

PrototypeBank bank_of(const MatrixXd& protos) { return {protos, 0}; }

MatrixXd random_matrix(int r, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(3, 0)) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 2)) == doctest::Approx(0.0));
  CHECK(cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)) == 0.0);
}

TEST_CASE("alignment loss analytic values") {
  MatrixXd protos(2, 2);
  protos << 1, 0,   // class 0
      0, 1;         // class 1
  const auto bank = bank_of(protos);

  // cos(pos) = 1, one orthogonal negative: -log(e^1 / e^0) = -1.
  CHECK(cdia_loss(row({2, 0}), {0}, bank, {row({0, 5})}, {{1}}) == doctest::Approx(-1.0).epsilon(1e-9));
  // cos(pos) = cos(neg): 0.
  CHECK(cdia_loss(row({1, 1}), {0}, bank, {row({0, 1})}, {{1}}) == doctest::Approx(0.0));
  // cos(pos) = 0 with two negatives at cos 0: ln 2.
  const MatrixXd two_negatives = (MatrixXd(2, 2) << 1, 0, 2, 0).finished();
  CHECK(cdia_loss(row({0, 1}), {0}, bank, {two_negatives}, {{1, 1}}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("alignment loss error cases") {
  const auto bank = bank_of(MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(cdia_loss(row({1, 0}), {2}, bank, {row({0, 1})}, {{1}}), InvalidArgument);
  CHECK_THROWS_AS(cdia_loss(row({1, 0}), {0}, bank, {MatrixXd(0, 2)}, {{}}), InvalidArgument);
  CHECK_THROWS_AS(cdia_loss(row({1, 0}), {0}, bank, {row({0, 1})}, {{0}}), InvalidArgument);
}

TEST_CASE("prototypes") {
  MatrixXd e(2, 2);
  e << 1, 0, 0, 1;
  const auto b = compute_prototypes(e, {0, 0}, 1);
  CHECK(b.prototypes(0, 0) == doctest::Approx(0.5));
  CHECK(b.prototypes(0, 1) == doctest::Approx(0.5));
  CHECK(compute_prototypes(e, {1, 0}, 2).prototypes == (MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  CHECK_THROWS_AS(compute_prototypes(e, {0, 0}, 2), InvalidArgument);

  const MatrixXd r = random_matrix(30, 5, 1);
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back((i * 7) % 4);
  const auto bank = compute_prototypes(r, labels, 4, 3);
  CHECK(bank.refresh_epoch == 3);
  for (int c = 0; c < 4; ++c) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(5);
    int n = 0;
    for (int i = 0; i < 30; ++i)
      if (labels[static_cast<std::size_t>(i)] == c) {
        sum += r.row(i);
        ++n;
      }
    CHECK((bank.prototypes.row(c) - sum / n).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("auxiliary loss") {
  // Identity permutation: the positive equals the anchor.
  CHECK(aux_loss(row({1, 2}), {0}, row({1, 2}), {row({-2, 1})}, {{1}}) ==
        doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(aux_loss(row({1, 1}), {0}, row({2, 2}), {row({3, 3})}, {{1}}) == doctest::Approx(0.0));
  // Monotone in cos(pos) with the negative fixed.
  const double at0 = aux_loss(row({1, 0}), {0}, row({0, 1}), {row({0, -1})}, {{1}});
  const double at_half = aux_loss(row({1, 0}), {0}, row({0.5, std::sqrt(0.75)}), {row({0, -1})}, {{1}});
  const double at1 = aux_loss(row({1, 0}), {0}, row({1, 0}), {row({0, -1})}, {{1}});
  CHECK(at0 > at_half);
  CHECK(at_half > at1);
  CHECK_THROWS_AS(aux_loss(row({1, 0}), {0}, row({1, 0}), {MatrixXd(0, 2)}, {{}}), InvalidArgument);
}

TEST_CASE("positive rescaling leaves both alignment losses unchanged") {
  const MatrixXd src = random_matrix(4, 3, 11), protos = random_matrix(2, 3, 12);
  const std::vector<int> labels = {0, 1, 0, 1};
  std::vector<MatrixXd> neg;
  std::vector<std::vector<int>> neg_labels;
  for (int i = 0; i < 4; ++i) {
    neg.push_back(random_matrix(3, 3, 20u + static_cast<unsigned>(i)));
    neg_labels.push_back(std::vector<int>(3, 1 - labels[static_cast<std::size_t>(i)]));
  }
  const double base = cdia_loss(src, labels, bank_of(protos), neg, neg_labels);
  std::vector<MatrixXd> scaled_neg;
  for (const auto& n : neg) scaled_neg.push_back(0.01 * n);
  CHECK(cdia_loss(7.5 * src, labels, bank_of(3.0 * protos), scaled_neg, neg_labels) ==
        doctest::Approx(base).epsilon(1e-9));

  const MatrixXd pos = random_matrix(4, 3, 13);
  const double aux = aux_loss(src, labels, pos, neg, neg_labels);
  CHECK(aux_loss(0.2 * src, labels, 40.0 * pos, scaled_neg, neg_labels) == doctest::Approx(aux).epsilon(1e-9));
}

TEST_CASE("adding negatives never lowers the loss") {
  std::mt19937 rng(5);
  std::normal_distribution<double> n;
  const auto bank = bank_of(MatrixXd::Identity(2, 3));
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd a = random_matrix(1, 3, 100u + static_cast<unsigned>(trial));
    MatrixXd neg = random_matrix(2, 3, 200u + static_cast<unsigned>(trial));
    const double before = cdia_loss(a, {0}, bank, {neg}, {{1, 1}});
    // Any extra term adds exp(cos) > 0 inside the log of the denominator.
    neg.conservativeResize(3, 3);
    for (int j = 0; j < 3; ++j) neg(2, j) = n(rng);
    CHECK(cdia_loss(a, {0}, bank, {neg}, {{1, 1, 1}}) >= before);
  }
}

TEST_CASE("contrastive gradient matches finite differences") {
  const MatrixXd a = random_matrix(3, 4, 1), p = random_matrix(3, 4, 2), pool = random_matrix(5, 4, 3);
  ContrastiveBatch batch{&a, &p, &pool, {{0, 1}, {2}, {3, 4, 0}}};
  const auto res = contrastive_loss(batch);
  auto eval = [&](const MatrixXd& aa, const MatrixXd& pp, const MatrixXd& qq) {
    return contrastive_loss({&aa, &pp, &qq, batch.negatives}).loss;
  };
  const double h = 1e-6;
  for (int which = 0; which < 3; ++which) {
    const MatrixXd& base = which == 0 ? a : which == 1 ? p : pool;
    const MatrixXd& grad = which == 0 ? res.d_anchors : which == 1 ? res.d_positives : res.d_pool;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      MatrixXd up = base, down = base;
      up.data()[i] += h;
      down.data()[i] -= h;
      const double fd = which == 0   ? (eval(up, p, pool) - eval(down, p, pool)) / (2 * h)
                        : which == 1 ? (eval(a, up, pool) - eval(a, down, pool)) / (2 * h)
                                     : (eval(a, p, up) - eval(a, p, down)) / (2 * h);
      CHECK(grad.data()[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("cross-entropy") {
  CHECK(cross_entropy(MatrixXd::Zero(1, 4), {2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  MatrixXd dominant = MatrixXd::Zero(1, 3);
  dominant(0, 1) = 20;
  CHECK(cross_entropy(dominant, {1}) < 1e-8);

  const MatrixXd logits = 5.0 * random_matrix(6, 4, 9);
  const std::vector<int> labels = {0, 3, 1, 1, 2, 0};
  double brute = 0;
  for (int i = 0; i < 6; ++i) {
    double z = 0;
    for (int c = 0; c < 4; ++c) z += std::exp(logits(i, c));
    brute += -std::log(std::exp(logits(i, labels[static_cast<std::size_t>(i)])) / z);
  }
  CHECK(cross_entropy(logits, labels) == doctest::Approx(brute / 6).epsilon(1e-12));
  const auto g = cross_entropy_with_grad(logits, labels);
  CHECK((g.d_logits.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(cross_entropy(logits, {0, 0, 0, 0, 0, 4}), InvalidArgument);
}

TEST_CASE("weighted total") {
  LossWeights w;
  CHECK(total_loss({.ce_source = 2.0}, w) == doctest::Approx(2.0));
  CHECK(total_loss({.cdia = 10.0}, w) == doctest::Approx(0.001));
  CHECK(total_loss({}, w) == 0.0);
  CHECK_THROWS_WITH_AS(total_loss({.ce_synth = std::nan("")}, w), doctest::Contains("L_CEA"),
                       NonFiniteLoss);
  try {
    total_loss({.aux = std::numeric_limits<double>::infinity()}, w);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.term() == "L_aux");
  }
}

}  // TEST_SUITE
