#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rnl/autodiff.hpp"

namespace rnl::autodiff {

struct NamedTensor {
  std::string name;
  Tensor<double> value;
};

// Builds a scalar-valued program on `tape` from leaves holding the inputs, in
// the order they were given to finite_diff_check. Returns the root node.
using TapeProgram = std::function<NodeId(Tape& tape, std::span<const NodeId> inputs)>;

struct ParameterGradient {
  std::string name;
  Tensor<double> analytic;
  Tensor<double> numeric;
  // Coordinates whose central-difference stencil crosses a non-smooth point.
  std::vector<std::size_t> skipped;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
};

struct GradientReport {
  std::vector<ParameterGradient> parameters;
  double h = 0.0;
  double max_abs_err = 0.0;
  // |a - n| / max(|a|, |n|, 1e-8), maximised over checked coordinates.
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;

  bool passed(double tolerance) const { return max_rel_err <= tolerance; }
};

inline constexpr double kRelativeErrorFloor = 1e-8;

double relative_error(double analytic, double numeric);

// Central differences (f(x + h e) - f(x - h e)) / 2h for every coordinate of
// every input, compared against the tape's reverse-mode gradient.
GradientReport finite_diff_check(const TapeProgram& f, const std::vector<NamedTensor>& point, double h = 1e-5);

}  // namespace rnl::autodiff
