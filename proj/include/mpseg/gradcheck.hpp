#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpseg/tensor.hpp"

namespace mpseg {

inline constexpr double kGradCheckEps = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

struct GradCheckResult {
  std::string name;
  double rel_err = 0.0;
  std::size_t entries = 0;
  bool pass = false;
};

/// Compares reverse-mode gradients of `loss` with central differences for
/// every entry of every input. The error is
/// ‖g_analytic − g_numeric‖ / max(‖g_analytic‖, ‖g_numeric‖, 1e-12) with the
/// norms taken over all inputs together.
GradCheckResult gradient_check(const std::string& name, std::vector<Tensor> inputs,
                               const std::function<Tensor()>& loss, double eps = kGradCheckEps,
                               double tol = kGradCheckTol);

/// Every differentiable op, one decoder layer, and an end-to-end two-layer
/// decoder loss on an 8×8 scene.
std::vector<GradCheckResult> run_grad_suite(std::uint64_t seed = 1);

}  // namespace mpseg
