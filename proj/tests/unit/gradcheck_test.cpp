#include <gtest/gtest.h>

#include <cmath>

#include "gradient_cases.hpp"
#include "lupiet/error.hpp"

namespace lupiet {
namespace {

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(gradient_relative_error(0.5, 0.25), 0.25);
  EXPECT_DOUBLE_EQ(gradient_relative_error(10.0, 9.0), 0.1);
  EXPECT_DOUBLE_EQ(gradient_relative_error(-4.0, 4.0), 2.0);
}

TEST(GradCheck, QuadraticMatchesTwoX) {
  Rng rng(1);
  InputFunction f = [](Graph&, std::span<const Var> in) { return sum_squares(in[0]); };
  const auto report = check_gradients(f, {testing::random_tensor(rng, {3, 4}, -3, 3)});
  EXPECT_LT(report.max_relative_error, 1e-6) << report.summary();
  EXPECT_EQ(report.coordinates_checked, 12u);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  InputFunction f = [](Graph& g, std::span<const Var> in) {
    Tensor out = in[0].value();
    for (double& v : out.values()) v = v * v;
    const std::size_t id = in[0].id();
    Var y = g.emit(std::move(out), {in[0]}, [id](Graph& gg, const Tensor& dout) {
      Tensor& d = gg.grad_of(id);
      for (std::size_t i = 0; i < d.numel(); ++i) d[i] += 3.0 * gg.value(id)[i] * dout[i];
    });
    return sum(y);
  };
  const auto report = check_gradients(f, {Tensor::row({1.0, 2.0})});
  EXPECT_FALSE(report.passed());
  // |3x - 2x| / |3x| for |3x| >= 1.
  EXPECT_NEAR(report.max_relative_error, 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(report.worst_analytic / report.worst_numeric, 1.5, 1e-6);
}

TEST(GradCheck, NonFiniteLossRaises) {
  InputFunction f = [](Graph& g, std::span<const Var> in) {
    (void)g;
    return scale(sum(in[0]), std::nan(""));
  };
  EXPECT_THROW(check_gradients(f, {Tensor::row({1.0})}), GradientCheckError);
}

TEST(GradCheck, SubsetSamplingIsDeterministic) {
  Rng rng(2);
  InputFunction f = [](Graph&, std::span<const Var> in) { return sum_squares(tanh(in[0])); };
  const Tensor x = testing::random_tensor(rng, {10, 10});
  GradCheckOptions opts;
  opts.max_coordinates_per_tensor = 7;
  opts.seed = 5;
  const auto a = check_gradients(f, {x}, opts);
  const auto b = check_gradients(f, {x}, opts);
  EXPECT_EQ(a.coordinates_checked, 7u);
  EXPECT_EQ(a.max_relative_error, b.max_relative_error);
  EXPECT_EQ(a.worst_index, b.worst_index);
}

class PrimitiveGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradients, MatchFiniteDifferences) {
  const auto cases = testing::primitive_op_cases();
  const auto& c = cases[GetParam()];
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(derive_seed(trial, c.name));
    auto [f, inputs] = c.make(rng);
    const auto report = check_gradients(f, inputs);
    EXPECT_TRUE(report.passed()) << c.name << ": " << report.summary();
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, PrimitiveGradients,
                         ::testing::Range<std::size_t>(0, testing::primitive_op_cases().size()),
                         [](const auto& info) {
                           return testing::primitive_op_cases()[info.param].name;
                         });

TEST(ModelGradients, WordModelCrossEntropy) {
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    Rng rng(100 + trial);
    auto t = testing::tiny_model(Architecture::kWord, rng, trial);
    const auto report = testing::check_model_ce(t);
    EXPECT_TRUE(report.passed()) << report.summary();
  }
}

TEST(ModelGradients, DocModelCrossEntropy) {
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    Rng rng(200 + trial);
    auto t = testing::tiny_model(Architecture::kDoc, rng, trial);
    const auto report = testing::check_model_ce(t);
    EXPECT_TRUE(report.passed()) << report.summary();
  }
}

TEST(ModelGradients, CombinedLossBothDirections) {
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    Rng rng(300 + trial);
    auto t = testing::tiny_model(Architecture::kWord, rng, trial);
    for (KlDirection dir : {KlDirection::kStudentTeacher, KlDirection::kTeacherStudent}) {
      const DistillConfig d{rng.uniform(0.5, 4.0), rng.uniform(), trial % 2 == 1, dir};
      const auto report = testing::check_model_combined(t, d, rng);
      EXPECT_TRUE(report.passed()) << report.summary();
    }
  }
}

TEST(ModelGradients, ParameterValuesRestoredAfterCheck) {
  Rng rng(400);
  auto t = testing::tiny_model(Architecture::kWord, rng, 1);
  const ModelParams before = t.model.params();
  testing::check_model_ce(t);
  EXPECT_TRUE(t.model.params().same_values(before));
}

}  // namespace
}  // namespace lupiet
