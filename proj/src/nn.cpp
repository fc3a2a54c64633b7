#include "spectral/nn.hpp"

#include <cmath>

namespace spectral {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor w({fan_in, fan_out});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = u(rng);
  return w;
}

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in,
               std::size_t out, std::mt19937_64& rng) {
  W_ = params.create(name + ".W", xavier_uniform(in, out, rng));
  b_ = params.create(name + ".b", Tensor({out}));
}

BatchNorm1d::BatchNorm1d(ParameterSet& params, const std::string& name,
                         std::size_t features) {
  gamma_ = params.create(name + ".gamma", Tensor::full({features}, 1.0));
  beta_ = params.create(name + ".beta", Tensor({features}));
  run_mean_ = params.create(name + ".run_mean", Tensor({features}),
                            /*trainable=*/false);
  run_var_ = params.create(name + ".run_var", Tensor::full({features}, 1.0),
                           /*trainable=*/false);
}

DenseBlock::DenseBlock(ParameterSet& params, const std::string& name,
                       std::size_t in, std::size_t out, double dropout_rate,
                       std::mt19937_64& rng)
    : linear_(params, name, in, out, rng),
      bn_(params, name + ".bn", out),
      dropout_rate_(dropout_rate) {}

VarPtr DenseBlock::forward(const VarPtr& x, const ForwardCtx& ctx) const {
  auto h = bn_.forward(ops::relu(linear_.forward(x)), ctx.training);
  if (ctx.training && dropout_rate_ > 0.0) {
    require(ctx.rng != nullptr, "dense block: training requires an RNG");
    h = ops::dropout(h, dropout_rate_, *ctx.rng, true);
  }
  return h;
}

TransformerEncoderLayer::TransformerEncoderLayer(ParameterSet& params,
                                                 const std::string& name,
                                                 const EncoderLayerConfig& cfg,
                                                 std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  std::size_t d = cfg_.model_dim;
  wq_ = Linear(params, name + ".wq", d, d, rng);
  wk_ = Linear(params, name + ".wk", d, d, rng);
  wv_ = Linear(params, name + ".wv", d, d, rng);
  wo_ = Linear(params, name + ".wo", d, d, rng);
  ffn1_ = Linear(params, name + ".ffn1", d, cfg_.ffn_dim, rng);
  ffn2_ = Linear(params, name + ".ffn2", cfg_.ffn_dim, d, rng);
  ln1_g_ = params.create(name + ".ln1.gain", Tensor::full({d}, 1.0));
  ln1_b_ = params.create(name + ".ln1.bias", Tensor({d}));
  ln2_g_ = params.create(name + ".ln2.gain", Tensor::full({d}, 1.0));
  ln2_b_ = params.create(name + ".ln2.bias", Tensor({d}));
}

VarPtr TransformerEncoderLayer::attention(const VarPtr& x, std::size_t batch,
                                          std::size_t seq_len,
                                          Tensor* attn_weights) const {
  require(x->value.cols() == cfg_.model_dim,
          "attention: input width != model_dim");
  auto q = wq_.forward(x);
  auto k = wk_.forward(x);
  auto v = wv_.forward(x);
  auto ctxv = ops::scaled_attention(q, k, v, batch, seq_len, cfg_.head_count,
                                    attn_weights);
  return wo_.forward(ctxv);
}

VarPtr TransformerEncoderLayer::forward(const VarPtr& x, std::size_t batch,
                                        std::size_t seq_len,
                                        const ForwardCtx& ctx,
                                        Tensor* attn_weights) const {
  auto att = attention(x, batch, seq_len, attn_weights);
  if (ctx.training && cfg_.dropout_rate > 0.0) {
    require(ctx.rng != nullptr, "encoder layer: training requires an RNG");
    att = ops::dropout(att, cfg_.dropout_rate, *ctx.rng, true);
  }
  auto h = ops::layer_norm_rows(ops::add(x, att), ln1_g_, ln1_b_);
  auto f = ffn2_.forward(ops::relu(ffn1_.forward(h)));
  if (ctx.training && cfg_.dropout_rate > 0.0)
    f = ops::dropout(f, cfg_.dropout_rate, *ctx.rng, true);
  return ops::layer_norm_rows(ops::add(h, f), ln2_g_, ln2_b_);
}

TokenTransformer::TokenTransformer(ParameterSet& params,
                                   const std::string& name,
                                   std::size_t n_tokens, std::size_t pos_rows,
                                   const EncoderLayerConfig& layer_cfg,
                                   std::size_t n_layers, std::mt19937_64& rng)
    : n_tokens_(n_tokens), layer_cfg_(layer_cfg) {
  layer_cfg_.validate();
  require(pos_rows <= n_tokens, "token transformer: pos_rows > n_tokens");
  pos_ = Tensor({n_tokens, layer_cfg_.model_dim});
  if (pos_rows > 0) {
    Tensor pe =
        ops::sinusoidal_positional_encoding(pos_rows, layer_cfg_.model_dim);
    for (std::size_t t = 0; t < pos_rows; ++t)
      for (std::size_t j = 0; j < layer_cfg_.model_dim; ++j)
        pos_.at(t, j) = pe.at(t, j);
  }
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Tensor w({layer_cfg_.model_dim});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = u(rng);
  embed_w_ = params.create(name + ".embed.w", std::move(w));
  embed_b_ = params.create(name + ".embed.b", Tensor({layer_cfg_.model_dim}));
  layers_.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l)
    layers_.emplace_back(params, name + ".layer" + std::to_string(l),
                         layer_cfg_, rng);
}

VarPtr TokenTransformer::forward(const VarPtr& x, const ForwardCtx& ctx) const {
  return forward_collect(x, ctx, nullptr);
}

VarPtr TokenTransformer::forward_collect(
    const VarPtr& x, const ForwardCtx& ctx,
    std::vector<VarPtr>* layer_pooled) const {
  require(x->value.ndim() == 2 && x->value.cols() == n_tokens_,
          "token transformer: input width != n_tokens");
  std::size_t batch = x->value.rows();
  auto h = ops::token_embed(x, embed_w_, embed_b_, pos_);
  for (const auto& layer : layers_) {
    h = layer.forward(h, batch, n_tokens_, ctx);
    if (layer_pooled)
      layer_pooled->push_back(ops::mean_pool_blocks(h, batch, n_tokens_));
  }
  return ops::mean_pool_blocks(h, batch, n_tokens_);
}

}  // namespace spectral
