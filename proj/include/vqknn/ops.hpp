#pragma once

#include "vqknn/tape.hpp"

#include <cmath>
#include <vector>

// Differentiable operations over tape tensors. Each function computes the
// forward value eagerly and registers its backward rule with the tape.
// Conventions: batches are row-major (one item per row); reductions return
// 1x1 tensors; logarithms clamp their argument at kLogClamp before the log
// and propagate zero gradient in the clamped region.

namespace vqknn {

inline constexpr Real kLogClamp = 1e-12;

namespace detail {
template <class S>
void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(),
        std::string(op) + ": operands must have identical shapes");
}
}  // namespace detail

template <class S>
TensorT<S> add(TensorT<S> a, TensorT<S> b) {
  detail::check_same_shape("add", a, b);
  using M = typename TensorT<S>::MatS;
  return a.tape().record("add", {a, b}, M(a.value() + b.value()),
                         [](const M& v) { return std::vector<M>{v, v}; });
}

template <class S>
TensorT<S> sub(TensorT<S> a, TensorT<S> b) {
  detail::check_same_shape("sub", a, b);
  using M = typename TensorT<S>::MatS;
  return a.tape().record("sub", {a, b}, M(a.value() - b.value()),
                         [](const M& v) { return std::vector<M>{v, M(-v)}; });
}

// Elementwise (Hadamard) product.
template <class S>
TensorT<S> mul(TensorT<S> a, TensorT<S> b) {
  detail::check_same_shape("mul", a, b);
  using M = typename TensorT<S>::MatS;
  return a.tape().record(
      "mul", {a, b}, M(a.value().cwiseProduct(b.value())), [a, b](const M& v) {
        return std::vector<M>{M(v.cwiseProduct(b.value())), M(v.cwiseProduct(a.value()))};
      });
}

template <class S>
TensorT<S> scale(TensorT<S> x, S c) {
  using M = typename TensorT<S>::MatS;
  return x.tape().record("scale", {x}, M(x.value() * c),
                         [c](const M& v) { return std::vector<M>{M(v * c)}; });
}

template <class S>
TensorT<S> neg(TensorT<S> x) {
  return scale(x, S(-1));
}

template <class S>
TensorT<S> matmul(TensorT<S> a, TensorT<S> b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions do not match");
  using M = typename TensorT<S>::MatS;
  return a.tape().record("matmul", {a, b}, M(a.value() * b.value()), [a, b](const M& v) {
    return std::vector<M>{M(v * b.value().transpose()), M(a.value().transpose() * v)};
  });
}

template <class S>
TensorT<S> transpose(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  return x.tape().record("transpose", {x}, M(x.value().transpose()),
                         [](const M& v) { return std::vector<M>{M(v.transpose())}; });
}

// Multiplies every entry of x by the 1x1 tensor s.
template <class S>
TensorT<S> bcast_mul(TensorT<S> x, TensorT<S> s) {
  check(s.size() == 1, "bcast_mul: scale factor must be 1x1");
  using M = typename TensorT<S>::MatS;
  const S sv = s.value()(0, 0);
  return x.tape().record("bcast_mul", {x, s}, M(x.value() * sv), [x, sv](const M& v) {
    M gs(1, 1);
    gs(0, 0) = v.cwiseProduct(x.value()).sum();
    return std::vector<M>{M(v * sv), gs};
  });
}

// Adds a 1xH row vector to every row of an NxH matrix.
template <class S>
TensorT<S> add_rowvec(TensorT<S> x, TensorT<S> b) {
  check(b.rows() == 1 && b.cols() == x.cols(), "add_rowvec: bias must be 1 x cols(x)");
  using M = typename TensorT<S>::MatS;
  M out = x.value();
  out.rowwise() += b.value().row(0);
  return x.tape().record("add_rowvec", {x, b}, std::move(out), [](const M& v) {
    return std::vector<M>{v, M(v.colwise().sum())};
  });
}

template <class S>
TensorT<S> exp(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M out = x.value().array().exp().matrix();
  return x.tape().record("exp", {x}, out, [out](const M& v) {
    return std::vector<M>{M(v.cwiseProduct(out))};
  });
}

template <class S>
TensorT<S> tanh(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M out = x.value().array().tanh().matrix();
  return x.tape().record("tanh", {x}, out, [out](const M& v) {
    return std::vector<M>{M(v.cwiseProduct((1.0 - out.array().square()).matrix()))};
  });
}

// log(max(x, kLogClamp)); gradient vanishes where the clamp is active.
template <class S>
TensorT<S> log_clamped(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M out = x.value().array().max(S(kLogClamp)).log().matrix();
  return x.tape().record("log_clamped", {x}, std::move(out), [x](const M& v) {
    M g = v;
    const auto& xv = x.value();
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        g(i, j) = xv(i, j) > S(kLogClamp) ? g(i, j) / xv(i, j) : S(0);
    return std::vector<M>{g};
  });
}

template <class S>
TensorT<S> sum_all(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M out(1, 1);
  out(0, 0) = x.value().sum();
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.tape().record("sum_all", {x}, std::move(out), [r, c](const M& v) {
    return std::vector<M>{M(M::Constant(r, c, v(0, 0)))};
  });
}

template <class S>
TensorT<S> mean_all(TensorT<S> x) {
  check(x.size() > 0, "mean_all: empty tensor");
  return scale(sum_all(x), S(1) / static_cast<S>(x.size()));
}

// Column means: NxM -> 1xM.
template <class S>
TensorT<S> col_mean(TensorT<S> x) {
  check(x.rows() > 0, "col_mean: empty tensor");
  using M = typename TensorT<S>::MatS;
  const Eigen::Index n = x.rows();
  M out = x.value().colwise().mean();
  return x.tape().record("col_mean", {x}, std::move(out), [n](const M& v) {
    M g(n, v.cols());
    g.rowwise() = v.row(0) / static_cast<S>(n);
    return std::vector<M>{g};
  });
}

// Row-wise softmax with max subtraction.
template <class S>
TensorT<S> softmax_rows(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.value().row(i);
    const S mx = row.maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (row.array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return x.tape().record("softmax_rows", {x}, out, [out](const M& v) {
    M g(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const S dot = v.row(i).dot(out.row(i));
      g.row(i) = out.row(i).cwiseProduct(v.row(i) - M::Constant(1, out.cols(), dot));
    }
    return std::vector<M>{g};
  });
}

// Scales every row to unit L2 norm. Zero rows are a contract violation.
template <class S>
TensorT<S> row_l2_normalize(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  constexpr S kMinNorm = 1e-12;
  M out(x.rows(), x.cols());
  std::vector<S> norms(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S n = x.value().row(i).norm();
    check(n >= kMinNorm, "row_l2_normalize: degenerate input, row norm below 1e-12");
    norms[static_cast<std::size_t>(i)] = n;
    out.row(i) = x.value().row(i) / n;
  }
  return x.tape().record("row_l2_normalize", {x}, out, [out, norms](const M& v) {
    M g(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const S dot = v.row(i).dot(out.row(i));
      g.row(i) = (v.row(i) - out.row(i) * dot) / norms[static_cast<std::size_t>(i)];
    }
    return std::vector<M>{g};
  });
}

// Gathers rows of x; a row may be gathered more than once, in which case its
// backward contributions sum.
template <class S>
TensorT<S> gather_rows(TensorT<S> x, const std::vector<int>& rows) {
  using M = typename TensorT<S>::MatS;
  M out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    check(rows[k] >= 0 && rows[k] < x.rows(), "gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = x.value().row(rows[k]);
  }
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.tape().record("gather_rows", {x}, std::move(out), [rows, r, c](const M& v) {
    M g = M::Zero(r, c);
    for (std::size_t k = 0; k < rows.size(); ++k)
      g.row(rows[k]) += v.row(static_cast<Eigen::Index>(k));
    return std::vector<M>{g};
  });
}

// Picks x(rows(i,j), cols(i,j)) entrywise; output has the index matrices'
// shape. Duplicated picks accumulate on backward.
template <class S>
TensorT<S> gather_entries(TensorT<S> x, const IndexMat& rows, const IndexMat& cols) {
  check(rows.rows() == cols.rows() && rows.cols() == cols.cols(),
        "gather_entries: index matrices must share a shape");
  using M = typename TensorT<S>::MatS;
  M out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      check(rows(i, j) >= 0 && rows(i, j) < x.rows() && cols(i, j) >= 0 && cols(i, j) < x.cols(),
            "gather_entries: index out of range");
      out(i, j) = x.value()(rows(i, j), cols(i, j));
    }
  }
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.tape().record("gather_entries", {x}, std::move(out), [rows, cols, r, c](const M& v) {
    M g = M::Zero(r, c);
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      for (Eigen::Index j = 0; j < rows.cols(); ++j) g(rows(i, j), cols(i, j)) += v(i, j);
    return std::vector<M>{g};
  });
}

// Contiguous column slice [offset, offset + count).
template <class S>
TensorT<S> slice_cols(TensorT<S> x, Eigen::Index offset, Eigen::Index count) {
  check(offset >= 0 && count >= 0 && offset + count <= x.cols(),
        "slice_cols: slice exceeds tensor width");
  using M = typename TensorT<S>::MatS;
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.tape().record("slice_cols", {x}, M(x.value().middleCols(offset, count)),
                         [r, c, offset, count](const M& v) {
                           M g = M::Zero(r, c);
                           g.middleCols(offset, count) = v;
                           return std::vector<M>{g};
                         });
}

// Horizontal concatenation; all parts must share a row count.
template <class S>
TensorT<S> hcat(const std::vector<TensorT<S>>& parts) {
  check(!parts.empty(), "hcat: needs at least one part");
  using M = typename TensorT<S>::MatS;
  const Eigen::Index r = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.rows() == r, "hcat: parts must share a row count");
    total += p.cols();
  }
  M out(r, total);
  std::vector<Eigen::Index> widths;
  widths.reserve(parts.size());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    widths.push_back(p.cols());
    at += p.cols();
  }
  return parts.front().tape().record("hcat", parts, std::move(out), [widths](const M& v) {
    std::vector<M> gs;
    gs.reserve(widths.size());
    Eigen::Index at = 0;
    for (Eigen::Index w : widths) {
      gs.emplace_back(v.middleCols(at, w));
      at += w;
    }
    return gs;
  });
}

// Value-identical copy through which no gradient flows. Under frozen replay
// the detached value is recorded on the first pass and replayed afterwards,
// so finite differences see the declared (estimator) Jacobian of the graph.
template <class S>
TensorT<S> detach(TensorT<S> x) {
  using M = typename TensorT<S>::MatS;
  M frozen_value =
      x.tape().template frozen<M>([&x]() { return x.value(); });
  return x.tape().constant(std::move(frozen_value));
}

}  // namespace vqknn
