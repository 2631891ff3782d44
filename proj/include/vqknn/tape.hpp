#pragma once

#include "vqknn/types.hpp"

#include <any>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace vqknn {

// Reverse-mode differentiation over dense Eigen matrices, templated on the
// scalar type. A TapeT owns every node created through it and records one
// backward rule per operation; backward() replays the rules in reverse
// recording order, which is a reverse topological order by construction.
//
// Gradient estimators (straight-through, rotation) declare Jacobians that
// differ from the true derivative of their piecewise-constant forward maps.
// To let a finite-difference checker validate the *declared* Jacobians, the
// tape supports a frozen-replay protocol: quantities produced through
// TapeT::frozen() (detached values, selected indices, rotation maps) are
// logged on a recording pass and replayed verbatim on subsequent evaluation
// passes, so perturbing an input moves only the differentiable terms.
class FrozenReplay {
 public:
  enum class Mode { Record, Replay };

  void begin_record() {
    log_.clear();
    cursor_ = 0;
    mode_ = Mode::Record;
  }
  void begin_replay() {
    cursor_ = 0;
    mode_ = Mode::Replay;
  }
  Mode mode() const { return mode_; }

  template <class T>
  T capture(const std::function<T()>& compute) {
    if (mode_ == Mode::Record) {
      T value = compute();
      log_.emplace_back(value);
      return value;
    }
    check(cursor_ < log_.size(), "FrozenReplay: replay ran past the recorded log");
    const std::any& entry = log_[cursor_++];
    const T* value = std::any_cast<T>(&entry);
    check(value != nullptr, "FrozenReplay: replayed entry has a different type");
    return *value;
  }

 private:
  Mode mode_ = Mode::Record;
  std::vector<std::any> log_;
  std::size_t cursor_ = 0;
};

template <class Scalar>
class TapeT;

template <class Scalar>
class TensorT {
 public:
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  TensorT() = default;

  const MatS& value() const { return node_->value; }
  // Gradient accumulated by the last backward(); zero matrix if the tensor
  // was not reached.
  const MatS& grad() const {
    if (node_->grad.size() == 0) node_->grad = MatS::Zero(rows(), cols());
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  TapeT<Scalar>& tape() const { return *tape_; }
  bool valid() const { return node_ != nullptr; }

 private:
  friend class TapeT<Scalar>;
  struct Node {
    MatS value;
    mutable MatS grad;  // lazily sized
    bool requires_grad = false;
  };

  TensorT(TapeT<Scalar>* tape, Node* node) : tape_(tape), node_(node) {}

  TapeT<Scalar>* tape_ = nullptr;
  Node* node_ = nullptr;
};

template <class Scalar>
class TapeT {
 public:
  using Tensor = TensorT<Scalar>;
  using MatS = typename Tensor::MatS;
  // Maps the output cotangent to one cotangent per input, in input order.
  using Vjp = std::function<std::vector<MatS>(const MatS&)>;

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  // Leaf holding a (possibly trainable) value; records no operation.
  Tensor leaf(MatS value, bool requires_grad = true) {
    return make_node(std::move(value), requires_grad);
  }
  Tensor constant(MatS value) { return make_node(std::move(value), false); }

  // Registers an operation: `value` is the forward result, `vjp` its backward
  // rule. The rule runs exactly once per backward() call. Cotangents returned
  // for inputs that do not require gradients are discarded.
  Tensor record(const char* op_kind, std::initializer_list<Tensor> inputs, MatS value, Vjp vjp) {
    return record(op_kind, std::vector<Tensor>(inputs), std::move(value), std::move(vjp));
  }

  Tensor record(const char* op_kind, const std::vector<Tensor>& inputs, MatS value, Vjp vjp) {
    bool track = false;
    std::vector<typename Tensor::Node*> in_nodes;
    in_nodes.reserve(inputs.size());
    for (const Tensor& t : inputs) {
      check(t.valid(), std::string(op_kind) + ": input tensor is empty");
      check(t.tape_ == this, std::string(op_kind) + ": inputs must live on the same tape");
      track = track || t.node_->requires_grad;
      in_nodes.push_back(t.node_);
    }
    Tensor out = make_node(std::move(value), track);
    if (track) {
      steps_.push_back([kind = std::string(op_kind), out_node = out.node_,
                        in_nodes = std::move(in_nodes), vjp = std::move(vjp)]() {
        const MatS cot = out_node->grad.size() != 0
                             ? out_node->grad
                             : MatS::Zero(out_node->value.rows(), out_node->value.cols());
        std::vector<MatS> input_cots = vjp(cot);
        check(input_cots.size() == in_nodes.size(),
              kind + ": backward rule returned a cotangent count different from the input count");
        for (std::size_t i = 0; i < in_nodes.size(); ++i) {
          if (!in_nodes[i]->requires_grad) continue;
          accumulate(kind, in_nodes[i], input_cots[i]);
        }
      });
    }
    return out;
  }

  // Vector-Jacobian product: seeds `out` with `cotangent` and propagates to
  // every reachable node. Gradients from any earlier backward call are
  // cleared first, so each call stands alone.
  void backward(Tensor out, const MatS& cotangent) {
    check(out.tape_ == this, "backward: output lives on a different tape");
    check(cotangent.rows() == out.rows() && cotangent.cols() == out.cols(),
          "backward: cotangent shape does not match the output shape");
    for (auto& node : nodes_) node->grad.resize(0, 0);
    out.node_->grad = cotangent;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  // Backward from a scalar loss with unit seed.
  void backward(Tensor loss) {
    check(loss.size() == 1, "backward: loss must be a scalar (one element)");
    backward(loss, MatS::Ones(1, 1));
  }

  // Frozen-replay hookup; see FrozenReplay above. Quantities captured through
  // frozen() behave as constants under finite-difference perturbation.
  void set_replay(FrozenReplay* replay) { replay_ = replay; }
  template <class T>
  T frozen(std::function<T()> compute) {
    if (replay_ == nullptr) return compute();
    return replay_->capture<T>(compute);
  }

  std::size_t op_count() const { return steps_.size(); }

 private:
  Tensor make_node(MatS value, bool requires_grad) {
    nodes_.push_back(std::make_unique<typename Tensor::Node>());
    typename Tensor::Node* n = nodes_.back().get();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Tensor(this, n);
  }

  static void accumulate(const std::string& kind, typename Tensor::Node* node, const MatS& cot) {
    check(cot.rows() == node->value.rows() && cot.cols() == node->value.cols(),
          kind + ": accumulated gradient shape does not match the tensor shape");
    if (node->grad.size() == 0) {
      node->grad = cot;
    } else {
      node->grad += cot;
    }
  }

  std::vector<std::unique_ptr<typename Tensor::Node>> nodes_;
  std::vector<std::function<void()>> steps_;
  FrozenReplay* replay_ = nullptr;
};

using Tape = TapeT<Real>;
using Tensor = TensorT<Real>;

}  // namespace vqknn
