#pragma once

#include "vqknn/ops.hpp"
#include "vqknn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace vqknn {

struct GradCheckReport {
  struct PerParam {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<PerParam> params;
  double worst = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Builds a scalar loss on the given tape from leaf tensors aligned with the
// checked parameters. The builder must be deterministic: any randomness
// (noise draws, neighbor selections) has to be captured before the check.
using LossBuilder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Compares tape gradients against central finite differences.
//
// The analytic pass runs with a FrozenReplay in record mode; every
// perturbed evaluation replays it, so detached branches and estimator
// selections stay fixed and the comparison targets the declared Jacobian.
// Relative error per entry: |a - n| / max(1, |a|, |n|).
inline GradCheckReport finite_diff_check(const LossBuilder& f,
                                         const std::vector<std::pair<std::string, Mat>>& params,
                                         double eps = 1e-5, double tol = 1e-4) {
  check(eps >= 1e-7 && eps <= 1e-4, "finite_diff_check: eps must lie in [1e-7, 1e-4]");
  check(!params.empty(), "finite_diff_check: no parameters to check");

  FrozenReplay replay;
  std::vector<Mat> values;
  values.reserve(params.size());
  for (const auto& [name, v] : params) values.push_back(v);

  const auto eval = [&](bool record_pass, std::vector<Mat>* analytic) -> double {
    if (record_pass) {
      replay.begin_record();
    } else {
      replay.begin_replay();
    }
    Tape tape;
    tape.set_replay(&replay);
    std::vector<Tensor> leaves;
    leaves.reserve(values.size());
    for (const Mat& v : values) leaves.push_back(tape.leaf(v, true));
    Tensor loss = f(tape, leaves);
    check(loss.size() == 1, "finite_diff_check: loss builder must return a scalar");
    if (analytic != nullptr) {
      tape.backward(loss);
      analytic->clear();
      for (const Tensor& leaf : leaves) analytic->push_back(leaf.grad());
    }
    return loss.value()(0, 0);
  };

  std::vector<Mat> analytic;
  eval(true, &analytic);

  GradCheckReport report;
  report.tol = tol;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double max_err = 0.0;
    Mat& v = values[pi];
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const Real original = v(i, j);
        v(i, j) = original + eps;
        const double up = eval(false, nullptr);
        v(i, j) = original - eps;
        const double down = eval(false, nullptr);
        v(i, j) = original;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[pi](i, j);
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
      }
    }
    report.params.push_back({params[pi].first, max_err});
    report.worst = std::max(report.worst, max_err);
  }
  report.pass = report.worst <= tol;
  return report;
}

}  // namespace vqknn
