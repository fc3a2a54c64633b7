#pragma once

#include "spectral/ops.hpp"

namespace spectral {

struct ForwardCtx {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

struct EncoderLayerConfig {
  std::size_t model_dim = 128;
  std::size_t head_count = 4;
  std::size_t per_head_dim = 32;
  std::size_t ffn_dim = 128;
  double dropout_rate = 0.1;

  void validate() const {
    require(head_count * per_head_dim == model_dim,
            "encoder config: head_count * per_head_dim != model_dim");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0,
            "encoder config: dropout_rate outside [0,1)");
  }
};

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in,
         std::size_t out, std::mt19937_64& rng);

  VarPtr forward(const VarPtr& x) const {
    return ops::add_rowvec(ops::matmul(x, W_), b_);
  }
  VarPtr weight() const { return W_; }
  VarPtr bias() const { return b_; }

 private:
  VarPtr W_, b_;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(ParameterSet& params, const std::string& name,
              std::size_t features);

  VarPtr forward(const VarPtr& x, bool training) const {
    return ops::batch_norm(x, gamma_, beta_, run_mean_, run_var_, training);
  }

 private:
  VarPtr gamma_, beta_, run_mean_, run_var_;
};

/// Hidden layer of the encoder/decoder MLP paths:
/// Linear -> ReLU -> BatchNorm -> Dropout.
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(ParameterSet& params, const std::string& name, std::size_t in,
             std::size_t out, double dropout_rate, std::mt19937_64& rng);

  VarPtr forward(const VarPtr& x, const ForwardCtx& ctx) const;

 private:
  Linear linear_;
  BatchNorm1d bn_;
  double dropout_rate_ = 0.0;
};

/// Post-norm transformer encoder layer:
/// LayerNorm(x + MHSA(x)) then LayerNorm(. + FFN(.)).
/// Operates on B sequences folded as [B*L x d].
class TransformerEncoderLayer {
 public:
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(ParameterSet& params, const std::string& name,
                          const EncoderLayerConfig& cfg, std::mt19937_64& rng);

  VarPtr forward(const VarPtr& x, std::size_t batch, std::size_t seq_len,
                 const ForwardCtx& ctx, Tensor* attn_weights = nullptr) const;
  // Attention sublayer alone (projections + softmax attention + output
  // projection), without residual or norms.
  VarPtr attention(const VarPtr& x, std::size_t batch, std::size_t seq_len,
                   Tensor* attn_weights = nullptr) const;

  const EncoderLayerConfig& config() const { return cfg_; }
  const Linear& query_proj() const { return wq_; }
  const Linear& key_proj() const { return wk_; }
  const Linear& value_proj() const { return wv_; }
  const Linear& out_proj() const { return wo_; }

 private:
  EncoderLayerConfig cfg_;
  Linear wq_, wk_, wv_, wo_, ffn1_, ffn2_;
  VarPtr ln1_g_, ln1_b_, ln2_g_, ln2_b_;
};

/// Transformer trunk over scalar token sequences: a shared 1->d token
/// embedding plus a fixed sinusoidal positional table, a stack of encoder
/// layers, and mean pooling over the sequence axis.
class TokenTransformer {
 public:
  TokenTransformer() = default;
  // pos_rows: number of leading token positions that receive the
  // sinusoidal encoding; remaining rows of the table are zero.
  TokenTransformer(ParameterSet& params, const std::string& name,
                   std::size_t n_tokens, std::size_t pos_rows,
                   const EncoderLayerConfig& layer_cfg, std::size_t n_layers,
                   std::mt19937_64& rng);

  // x: [B x n_tokens] scalar tokens -> pooled [B x model_dim].
  VarPtr forward(const VarPtr& x, const ForwardCtx& ctx) const;
  // Same, additionally collecting the pooled activation of every layer.
  VarPtr forward_collect(const VarPtr& x, const ForwardCtx& ctx,
                         std::vector<VarPtr>* layer_pooled) const;

  std::size_t n_tokens() const { return n_tokens_; }
  std::size_t model_dim() const { return layer_cfg_.model_dim; }
  const std::vector<TransformerEncoderLayer>& layers() const { return layers_; }

 private:
  std::size_t n_tokens_ = 0;
  EncoderLayerConfig layer_cfg_;
  Tensor pos_;
  VarPtr embed_w_, embed_b_;
  std::vector<TransformerEncoderLayer> layers_;
};

}  // namespace spectral
