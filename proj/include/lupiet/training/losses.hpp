#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "lupiet/diffcore/graph.hpp"

namespace lupiet {

// Which distribution sits first in the KL term.
enum class KlDirection {
  kStudentTeacher,  // KL(p_student^tau || p_teacher^tau), the default
  kTeacherStudent,  // KL(p_teacher^tau || p_student^tau), classical distillation
};

std::string_view kl_direction_name(KlDirection d);
std::optional<KlDirection> parse_kl_direction(std::string_view s);

struct DistillConfig {
  double tau = 2.0;
  double alpha = 0.5;
  bool tau_squared = false;  // multiply the KL term by tau^2
  KlDirection direction = KlDirection::kStudentTeacher;

  friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

// tau > 0 and finite, 0 <= alpha <= 1. Throws ParameterError.
void validate(const DistillConfig& config);

// KL between temperature-softened student and teacher distributions. The
// teacher logits should be a constant node; nothing is propagated to it.
Var distill_loss(Var student_logits, Var teacher_logits, const DistillConfig& config);

// (1 - alpha) * CE(student, label) + alpha * distill_loss.
Var combined_loss(Var student_logits, Var teacher_logits, std::size_t label,
                  const DistillConfig& config);

double distill_loss(std::span<const double> student_logits,
                    std::span<const double> teacher_logits, const DistillConfig& config);
double combined_loss(std::span<const double> student_logits,
                     std::span<const double> teacher_logits, std::size_t label,
                     const DistillConfig& config);

}  // namespace lupiet
