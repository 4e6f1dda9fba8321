#include "rnl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rnl::autodiff {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

struct Evaluation {
  double value;
  std::vector<std::int64_t> signature;
};

Evaluation evaluate(const TapeProgram& f, const std::vector<NamedTensor>& point) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const auto& p : point) ids.push_back(tape.leaf(p.value, p.name));
  const NodeId root = f(tape, ids);
  if (tape.value(root).shape() != Shape{1}) {
    throw ContractError("gradient check program must return a scalar, got " + rnl::to_string(tape.value(root).shape()));
  }
  return {tape.value(root)[0], tape.kink_signature()};
}

}  // namespace

GradientReport finite_diff_check(const TapeProgram& f, const std::vector<NamedTensor>& point, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite difference step must be positive");
  for (const auto& p : point) {
    if (!all_finite(p.value)) throw ArgumentError("gradient check point '" + p.name + "' is not finite");
  }

  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& p : point) ids.push_back(tape.leaf(p.value, p.name));
  const NodeId root = f(tape, ids);
  const Gradients grads = tape.backward(root);
  const std::vector<std::int64_t> base_signature = tape.kink_signature();

  GradientReport report;
  report.h = h;
  std::vector<NamedTensor> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    ParameterGradient pg;
    pg.name = point[k].name;
    pg.analytic = grads.at(ids[k]);
    pg.numeric = Tensor<double>(point[k].value.shape(), 0.0);
    for (std::size_t i = 0; i < point[k].value.size(); ++i) {
      const double x0 = point[k].value[i];
      probe[k].value[i] = x0 + h;
      const Evaluation plus = evaluate(f, probe);
      probe[k].value[i] = x0 - h;
      const Evaluation minus = evaluate(f, probe);
      probe[k].value[i] = x0;
      pg.numeric[i] = (plus.value - minus.value) / (2.0 * h);
      if (plus.signature != base_signature || minus.signature != base_signature) {
        pg.skipped.push_back(i);
        continue;
      }
      const double abs_err = std::abs(pg.analytic[i] - pg.numeric[i]);
      pg.max_abs_err = std::max(pg.max_abs_err, abs_err);
      pg.max_rel_err = std::max(pg.max_rel_err, relative_error(pg.analytic[i], pg.numeric[i]));
      ++report.checked;
    }
    report.skipped += pg.skipped.size();
    report.max_abs_err = std::max(report.max_abs_err, pg.max_abs_err);
    report.max_rel_err = std::max(report.max_rel_err, pg.max_rel_err);
    report.parameters.push_back(std::move(pg));
  }
  return report;
}

}  // namespace rnl::autodiff
