#pragma once

#include "vqknn/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace vqknn {

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.99;
  Real eps = 1e-8;
  Real weight_decay = 0.0;
};

// AdamW with bias-corrected moments and decoupled weight decay. Parameters
// register once (fixing their shapes); step() updates them in registration
// order. A non-finite gradient rejects the update for that parameter only
// and appends an incident message instead of corrupting the moments.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  int register_param(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    slots_.push_back(Slot{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
    return static_cast<int>(slots_.size()) - 1;
  }

  // params[i] / grads[i] must align with registration order and shapes.
  void step(std::vector<Mat*>& params, const std::vector<Mat>& grads) {
    check(params.size() == slots_.size() && grads.size() == slots_.size(),
          "AdamW::step: parameter/gradient count does not match registered slots");
    ++step_count_;
    const Real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(step_count_));
    const Real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(step_count_));
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      Slot& s = slots_[i];
      Mat& p = *params[i];
      const Mat& g = grads[i];
      check(p.rows() == s.m.rows() && p.cols() == s.m.cols(),
            "AdamW::step: parameter shape changed since registration");
      check(g.rows() == p.rows() && g.cols() == p.cols(),
            "AdamW::step: gradient shape does not match parameter " + s.name);
      if (!g.allFinite()) {
        incidents_.push_back("step " + std::to_string(step_count_) + ": non-finite gradient for " +
                             s.name + ", update rejected");
        continue;
      }
      s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
      s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      const Mat m_hat = s.m / bc1;
      const Mat v_hat = s.v / bc2;
      p -= cfg_.lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                          Mat::Constant(p.rows(), p.cols(), cfg_.eps));
      if (cfg_.weight_decay > 0.0) p -= cfg_.lr * cfg_.weight_decay * p;
    }
  }

  void set_lr(Real lr) { cfg_.lr = lr; }
  Real lr() const { return cfg_.lr; }
  long step_count() const { return step_count_; }
  const std::vector<std::string>& incidents() const { return incidents_; }

 private:
  struct Slot {
    std::string name;
    Mat m;
    Mat v;
  };

  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<Slot> slots_;
  std::vector<std::string> incidents_;
};

}  // namespace vqknn
