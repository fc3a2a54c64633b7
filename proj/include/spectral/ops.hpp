#pragma once

#include <random>

#include "spectral/autodiff.hpp"

namespace spectral {
namespace ops {

// ---- structural / arithmetic -------------------------------------------

VarPtr add(const VarPtr& a, const VarPtr& b);             // same shape
VarPtr add_rowvec(const VarPtr& m, const VarPtr& v);      // [r x c] + [c]
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr mul(const VarPtr& a, const VarPtr& b);             // elementwise
VarPtr scale(const VarPtr& a, double s);
VarPtr matmul(const VarPtr& a, const VarPtr& b);          // [m x k] . [k x n]
VarPtr slice_cols(const VarPtr& x, std::size_t c0, std::size_t c1);
VarPtr concat_cols(const VarPtr& a, const VarPtr& b);
VarPtr gather_rows(const VarPtr& x, std::vector<std::size_t> rows);
VarPtr sum_all(const VarPtr& x);                          // -> [1]
VarPtr mean_all(const VarPtr& x);                         // -> [1]

// ---- nonlinearities ----------------------------------------------------

VarPtr relu(const VarPtr& x);
VarPtr sigmoid(const VarPtr& x);
VarPtr softplus(const VarPtr& x);
// lo + (hi - lo) * sigmoid(x); keeps regression outputs strictly inside
// the configured salinity range.
VarPtr scaled_sigmoid(const VarPtr& x, double lo = 0.05, double hi = 90.0);
VarPtr softmax_rows(const VarPtr& x);

// ---- normalization / regularization ------------------------------------

VarPtr layer_norm_rows(const VarPtr& x, const VarPtr& gain, const VarPtr& bias,
                       double eps = 1e-5);
// Training mode normalizes with batch statistics and updates the running
// buffers in place; eval mode is a deterministic affine map using them.
VarPtr batch_norm(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta,
                  const VarPtr& running_mean, const VarPtr& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);
// Inverted mask scaled by 1/(1-rate) at train time, identity at eval.
VarPtr dropout(const VarPtr& x, double rate, std::mt19937_64& rng,
               bool training);

// ---- sequence ops (batch folded as [B*L x d]) ---------------------------

// out[(i*L+t), :] = x(i,t) * w + b + pos(t, :)
VarPtr token_embed(const VarPtr& x, const VarPtr& w, const VarPtr& b,
                   const Tensor& pos);
// Multi-head scaled dot-product self-attention over B independent
// sequences of length L. q,k,v: [B*L x d] with d = heads * head_dim,
// head h occupying columns [h*head_dim, (h+1)*head_dim). Softmax rows of
// every head sum to 1. If weights_out is given it receives the
// [B*heads*L x L] attention matrix (eval inspection only).
VarPtr scaled_attention(const VarPtr& q, const VarPtr& k, const VarPtr& v,
                        std::size_t batch, std::size_t seq_len,
                        std::size_t heads, Tensor* weights_out = nullptr);
VarPtr mean_pool_blocks(const VarPtr& x, std::size_t batch,
                        std::size_t seq_len);  // [B*L x d] -> [B x d]

// ---- losses -------------------------------------------------------------

// Mean over samples of the piecewise quadratic/linear Huber form.
VarPtr huber_loss(const VarPtr& pred, const Tensor& target, double delta = 1.0);
// Mean over all elements of smooth-L1 with threshold delta (quadratic
// branch d^2/(2*delta) for |d| < delta, |d| - delta/2 otherwise).
VarPtr smooth_l1_loss(const VarPtr& a, const VarPtr& b, double delta = 0.1);
VarPtr smooth_l1_loss(const VarPtr& a, const Tensor& b, double delta = 0.1);
// Mean over batch rows of the squared Euclidean reconstruction residual.
VarPtr recon_mse(const VarPtr& recon, const Tensor& target);
// Mean over paired rows of 1 - cos(u_i, v_i) on L2-normalized rows.
// Zero rows are rejected.
VarPtr cosine_align(const VarPtr& u, const VarPtr& v);
// KL(softmax(teacher) || softmax(student)) over the batch axis. The
// teacher side is a detached tensor so no gradient ever reaches it.
VarPtr kl_batch_softmax(const Tensor& teacher_preds, const VarPtr& student_preds);
// Symmetrized variants used by the alignment-objective ablation flag.
VarPtr kl_align(const VarPtr& u, const VarPtr& v);
VarPtr jsd_align(const VarPtr& u, const VarPtr& v);

// ---- plain-tensor helpers (no graph) ------------------------------------

Tensor sinusoidal_positional_encoding(std::size_t seq_len,
                                      std::size_t model_dim);
std::vector<double> softmax(const std::vector<double>& v);
double cosine_distance(const std::vector<double>& u,
                       const std::vector<double>& v);
double scaled_sigmoid_value(double z, double lo = 0.05, double hi = 90.0);

}  // namespace ops
}  // namespace spectral
