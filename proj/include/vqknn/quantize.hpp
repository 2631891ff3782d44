#pragma once

#include "vqknn/codebook.hpp"
#include "vqknn/ops.hpp"
#include "vqknn/rng.hpp"
#include "vqknn/tape.hpp"

#include <vector>

namespace vqknn {

enum class DistanceMetric { Euclid, Cosine };
enum class QuantizeMode { Ste, Rotation, Softmax, SoftGumbel, HardGumbel };

inline bool is_hard_mode(QuantizeMode m) {
  return m == QuantizeMode::Ste || m == QuantizeMode::Rotation;
}

// Tape-side view of a codebook: leaves (or constants) for the code matrix
// and log-temperature, created per step by the caller that owns the values.
struct CodebookVars {
  Tensor codes;    // M x D
  Tensor log_tau;  // 1 x 1
};

// Per-batch quantization bundle. `pi` are assignment probabilities (cosine
// logits through the shared temperature), `p` the smoothed or onehot
// quantizer actually multiplied with the codebook, `index` the hard code
// per row, `quantized` the N x D result.
struct QuantizerOutput {
  Tensor pi;
  Tensor p;
  std::vector<int> index;
  Tensor quantized;
};

// Index of the code closest to z. Euclid compares squared L2 distances,
// Cosine compares 1 - cosine similarity; ties break to the smallest index.
int nearest_code(const Eigen::Ref<const Vec>& z, const Mat& codes, DistanceMetric metric);
std::vector<int> nearest_codes(const Mat& z_rows, const Mat& codes, DistanceMetric metric);

// Householder-based rotation aligning the unit vector z_hat onto q_hat:
// R = I - 2 r r^T + 2 q_hat z_hat^T with r = normalize(q_hat + z_hat).
// For antiparallel inputs (q_hat = -z_hat) r is undefined and R falls back
// to -I, which still maps z_hat onto q_hat.
Mat rotation_align_matrix(const Vec& z_hat, const Vec& q_hat);

// Hard quantization with the straight-through backward: the forward value is
// exactly q_{iota(z)} per row while the cotangent passes to z unchanged. By
// default the selected code is detached so the codebook trains only through
// its own loss; `grad_through_codebook` restores the literal expression in
// which the cotangent also reaches the selected rows of Q.
QuantizerOutput ste_quantize(Tensor z, const CodebookVars& cb, DistanceMetric metric,
                             bool grad_through_codebook = false);

// Hard quantization with the rotation backward: the forward value equals
// q_{iota(z)} and the backward applies the transpose of the frozen scaled
// rotation (|q|/|z|) R per row. No gradient reaches the codebook.
QuantizerOutput rotation_quantize(Tensor z, const CodebookVars& cb, DistanceMetric metric);

// softmax(cos(q_m, z) / tau) with both sides L2-normalized and tau the
// learnable shared temperature; differentiable in z, Q and log tau.
Tensor assignment_probs(Tensor z, const CodebookVars& cb);

// Gumbel-softmax rows: softmax((g + log pi) / gumbel_temperature) with
// g = -log(-log u), u uniform from rng. Gradients flow through pi only.
Tensor gumbel_sample(Tensor pi, Real gumbel_temperature, Rng& rng);
// Deterministic variant used by gradient checks; `gumbel_noise` is g itself.
Tensor gumbel_sample_with_noise(Tensor pi, Real gumbel_temperature, const Mat& gumbel_noise);
// Draws the Gumbel noise matrix g for a pi of the given shape.
Mat draw_gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Onehot at argmax(p) per row with a straight-through backward (identity
// wrt p). Ties break to the smallest index.
Tensor hard_gumbel(Tensor p);

enum class SmoothMode { Softmax, SoftGumbel, HardGumbel };

// Smoothed quantization: always fills pi; p depends on the mode (pi itself,
// a Gumbel-softmax sample, or its straight-through onehot); quantized = p Q
// with the unnormalized codebook.
QuantizerOutput smooth_quantize(Tensor z, const CodebookVars& cb, SmoothMode mode,
                                Real gumbel_temperature, Rng& rng);

// Non-differentiable argmax inference; returns indices and their onehots.
struct HardInference {
  std::vector<int> index;
  Mat onehot;
};
HardInference hard_inference(const Mat& probs);

struct ProductQuantizerOutput {
  std::vector<QuantizerOutput> groups;
  Tensor quantized;  // concatenation in group order
};

struct ProductCodebookVars {
  std::vector<CodebookVars> groups;
};

// Quantizes each contiguous sub-vector of z independently under the shared
// mode and concatenates the results in group order.
ProductQuantizerOutput product_quantize(Tensor z, const ProductCodebookVars& pcb,
                                        QuantizeMode mode, DistanceMetric metric,
                                        Real gumbel_temperature, Rng& rng,
                                        bool ste_grad_through_codebook = false);

// Mode dispatcher over the five pathways.
QuantizerOutput quantize(Tensor z, const CodebookVars& cb, QuantizeMode mode,
                         DistanceMetric metric, Real gumbel_temperature, Rng& rng,
                         bool ste_grad_through_codebook = false);

// Running count of antiparallel rotation fallbacks (R = -I), kept for tests
// and diagnostics of the logged warning path.
long rotation_antiparallel_count();

}  // namespace vqknn
