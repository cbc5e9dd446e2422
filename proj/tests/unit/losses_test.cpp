#include <gtest/gtest.h>

#include <cmath>

#include "lupiet/diffcore/ops.hpp"
#include "lupiet/error.hpp"
#include "lupiet/rng.hpp"
#include "lupiet/training/losses.hpp"

namespace lupiet {
namespace {

std::vector<double> softmax_ref(const std::vector<double>& z, double tau) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> p;
  double s = 0.0;
  for (double v : z) s += std::exp((v - m) / tau);
  for (double v : z) p.push_back(std::exp((v - m) / tau) / s);
  return p;
}

double kl_ref(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

std::vector<double> random_logits(Rng& rng, std::size_t k) {
  std::vector<double> z(k);
  for (double& v : z) v = rng.uniform(-3.0, 3.0);
  return z;
}

TEST(DistillLoss, WorkedExample) {
  DistillConfig c;
  c.tau = 2.0;
  const std::vector<double> s{0.0, 0.0}, t{2.0, 0.0};
  // KL([.5,.5] || softmax([1,0])) = 0.5 ln(0.5/0.7311) + 0.5 ln(0.5/0.2689)
  EXPECT_NEAR(distill_loss(s, t, c), 0.1201, 5e-5);
  c.tau_squared = true;
  EXPECT_NEAR(distill_loss(s, t, c), 4 * 0.1201, 2e-4);
}

TEST(DistillLoss, MatchesReferenceInBothDirections) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 2 + rng.below(4);
    const auto s = random_logits(rng, k), t = random_logits(rng, k);
    DistillConfig c;
    c.tau = rng.uniform(0.5, 5.0);
    const auto ps = softmax_ref(s, c.tau), pt = softmax_ref(t, c.tau);
    c.direction = KlDirection::kStudentTeacher;
    EXPECT_NEAR(distill_loss(s, t, c), kl_ref(ps, pt), 1e-12);
    c.direction = KlDirection::kTeacherStudent;
    EXPECT_NEAR(distill_loss(s, t, c), kl_ref(pt, ps), 1e-12);
  }
}

TEST(DistillLoss, ZeroWhenLogitsAgree) {
  const std::vector<double> z{0.3, -1.0, 2.0};
  EXPECT_NEAR(distill_loss(z, z, DistillConfig{}), 0.0, 1e-15);
}

TEST(CombinedLoss, EndpointsAndLinearityInAlpha) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 2 + rng.below(3);
    const auto s = random_logits(rng, k), t = random_logits(rng, k);
    const std::size_t y = rng.below(k);
    DistillConfig c;
    c.tau = rng.uniform(1.0, 4.0);
    c.alpha = 0.0;
    const double ce = combined_loss(s, t, y, c);
    EXPECT_NEAR(ce, pure::cross_entropy(s, y), 1e-12);
    c.alpha = 1.0;
    const double kd = combined_loss(s, t, y, c);
    EXPECT_NEAR(kd, distill_loss(s, t, c), 1e-12);
    c.alpha = rng.uniform();
    EXPECT_NEAR(combined_loss(s, t, y, c), (1 - c.alpha) * ce + c.alpha * kd, 1e-12);
  }
}

TEST(CombinedLoss, GraphValueMatchesPlainValue) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_logits(rng, 3), t = random_logits(rng, 3);
    DistillConfig c;
    c.alpha = rng.uniform();
    c.tau = rng.uniform(0.5, 3.0);
    c.direction = i % 2 ? KlDirection::kTeacherStudent : KlDirection::kStudentTeacher;
    c.tau_squared = i % 3 == 0;
    Graph g;
    const Var v = combined_loss(g.input(Tensor::row(s)), g.constant(Tensor::row(t)), 1, c);
    EXPECT_NEAR(v.value()[0], combined_loss(s, t, 1, c), 1e-12);
  }
}

TEST(CombinedLoss, NoGradientReachesTeacher) {
  Graph g;
  Var s = g.input(Tensor::row({0.1, 0.4}));
  Var t = g.input(Tensor::row({1.0, -1.0}));
  DistillConfig c;
  c.alpha = 0.7;
  // A detached teacher is a constant; feeding it as a constant must leave no grad.
  Var loss = combined_loss(s, g.constant(t.value()), 0, c);
  g.backward(loss);
  for (double v : t.grad().values()) EXPECT_EQ(v, 0.0);
  double norm = 0.0;
  for (double v : s.grad().values()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
}

TEST(DistillConfig, Validation) {
  const std::vector<double> z{0.0, 1.0};
  DistillConfig c;
  c.tau = 0.0;
  EXPECT_THROW(distill_loss(z, z, c), ParameterError);
  c.tau = std::nan("");
  EXPECT_THROW(validate(c), ParameterError);
  c = {};
  c.alpha = 1.5;
  EXPECT_THROW(validate(c), ParameterError);
  c.alpha = -0.1;
  EXPECT_THROW(validate(c), ParameterError);
  EXPECT_THROW(distill_loss(z, std::vector<double>{0.0, 1.0, 2.0}, DistillConfig{}), DimensionError);
  EXPECT_EQ(parse_kl_direction("teacher_student"), KlDirection::kTeacherStudent);
  EXPECT_FALSE(parse_kl_direction("forward").has_value());
}

TEST(KlDivergence, ZeroMassInQRaises) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  EXPECT_THROW(pure::kl_divergence(p, q), DivergenceUndefinedError);
  EXPECT_NO_THROW(pure::kl_divergence(q, p));
}

}  // namespace
}  // namespace lupiet
