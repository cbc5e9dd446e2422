#include "lupiet/training/losses.hpp"

#include <cmath>
#include <string>

#include "lupiet/diffcore/ops.hpp"
#include "lupiet/error.hpp"

namespace lupiet {

std::string_view kl_direction_name(KlDirection d) {
  return d == KlDirection::kStudentTeacher ? "student_teacher" : "teacher_student";
}

std::optional<KlDirection> parse_kl_direction(std::string_view s) {
  if (s == "student_teacher") return KlDirection::kStudentTeacher;
  if (s == "teacher_student") return KlDirection::kTeacherStudent;
  return std::nullopt;
}

void validate(const DistillConfig& c) {
  if (!(c.tau > 0.0) || !std::isfinite(c.tau)) {
    throw ParameterError("tau must be positive, got " + std::to_string(c.tau));
  }
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    throw ParameterError("alpha must be in [0, 1], got " + std::to_string(c.alpha));
  }
}

Var distill_loss(Var student_logits, Var teacher_logits, const DistillConfig& c) {
  validate(c);
  if (student_logits.value().numel() != teacher_logits.value().numel()) {
    throw DimensionError("student and teacher logits differ in class count");
  }
  Var ps = softmax_with_temperature(student_logits, c.tau);
  Var pt = softmax_with_temperature(teacher_logits, c.tau);
  Var kl = c.direction == KlDirection::kStudentTeacher ? kl_divergence(ps, pt)
                                                       : kl_divergence(pt, ps);
  return c.tau_squared ? scale(kl, c.tau * c.tau) : kl;
}

Var combined_loss(Var student_logits, Var teacher_logits, std::size_t label,
                  const DistillConfig& c) {
  Var kd = distill_loss(student_logits, teacher_logits, c);
  Var ce = cross_entropy(student_logits, label);
  return add(scale(ce, 1.0 - c.alpha), scale(kd, c.alpha));
}

double distill_loss(std::span<const double> s, std::span<const double> t,
                    const DistillConfig& c) {
  validate(c);
  if (s.size() != t.size()) throw DimensionError("student and teacher logits differ in class count");
  const auto ps = pure::softmax_with_temperature(s, c.tau);
  const auto pt = pure::softmax_with_temperature(t, c.tau);
  const double kl = c.direction == KlDirection::kStudentTeacher ? pure::kl_divergence(ps, pt)
                                                                : pure::kl_divergence(pt, ps);
  return c.tau_squared ? kl * c.tau * c.tau : kl;
}

double combined_loss(std::span<const double> s, std::span<const double> t, std::size_t label,
                     const DistillConfig& c) {
  const double kd = distill_loss(s, t, c);
  return (1.0 - c.alpha) * pure::cross_entropy(s, label) + c.alpha * kd;
}

}  // namespace lupiet
