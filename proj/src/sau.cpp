#include "spectral/sau.hpp"

#include <cmath>

namespace spectral {

AlignObjective parse_align_objective(const std::string& s) {
  if (s == "cosine") return AlignObjective::cosine;
  if (s == "kld") return AlignObjective::kld;
  if (s == "jsd") return AlignObjective::jsd;
  throw ValidationError("align objective: expected cosine|kld|jsd, got '" +
                        s + "'");
}

void SauConfig::validate() const {
  require(ftir_bands >= 1 && sat_bands >= 1, "sau: band counts");
  require(latent_dim >= 2, "sau: latent_dim too small");
  require(!ftir_hidden.empty() && !sat_hidden.empty(), "sau: hidden stacks");
  require(mlp_dropout >= 0.0 && mlp_dropout < 1.0, "sau: mlp dropout range");
  require(refine_layers >= 1 && refine_heads >= 1 && refine_head_dim >= 1,
          "sau: refinement shape");
  require(alpha_init >= 0.0 && beta_init >= 0.0,
          "sau: loss weights must be nonnegative");
}

namespace {

// softplus^{-1}(y): raw value whose softplus equals y.
double inverse_softplus(double y) { return std::log(std::expm1(y)); }

}  // namespace

SauModel::SauModel(const SauConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  auto rng = make_rng(init_seed, 0x5a01);

  auto build_mlp = [&](std::vector<DenseBlock>& blocks, Linear& out,
                       const std::string& prefix, std::size_t in,
                       const std::vector<std::size_t>& hidden,
                       std::size_t out_dim) {
    std::size_t w = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      blocks.emplace_back(params_, prefix + ".h" + std::to_string(i), w,
                          hidden[i], cfg_.mlp_dropout, rng);
      w = hidden[i];
    }
    out = Linear(params_, prefix + ".out", w, out_dim, rng);
  };

  build_mlp(ftir_enc_, ftir_enc_out_, "ftir.enc", cfg_.ftir_bands,
            cfg_.ftir_hidden, cfg_.latent_dim);
  build_mlp(sat_enc_, sat_enc_out_, "sat.enc", cfg_.sat_bands,
            cfg_.sat_hidden, cfg_.latent_dim);

  shared_proj_ =
      Linear(params_, "shared.proj", cfg_.latent_dim, cfg_.latent_dim, rng);
  ln_a_g_ = params_.create("shared.ln_a.gain",
                           Tensor::full({cfg_.latent_dim}, 1.0));
  ln_a_b_ = params_.create("shared.ln_a.bias", Tensor({cfg_.latent_dim}));

  EncoderLayerConfig rcfg{cfg_.refine_heads * cfg_.refine_head_dim,
                          cfg_.refine_heads, cfg_.refine_head_dim,
                          cfg_.refine_ffn, cfg_.refine_dropout};
  refine_ = TokenTransformer(params_, "shared.refine", cfg_.latent_dim,
                             cfg_.latent_dim, rcfg, cfg_.refine_layers, rng);
  refine_out_ = Linear(params_, "shared.refine_out", rcfg.model_dim,
                       cfg_.latent_dim, rng);
  ln_b_g_ = params_.create("shared.ln_b.gain",
                           Tensor::full({cfg_.latent_dim}, 1.0));
  ln_b_b_ = params_.create("shared.ln_b.bias", Tensor({cfg_.latent_dim}));

  std::vector<std::size_t> ftir_dec_hidden(cfg_.ftir_hidden.rbegin(),
                                           cfg_.ftir_hidden.rend());
  std::vector<std::size_t> sat_dec_hidden(cfg_.sat_hidden.rbegin(),
                                          cfg_.sat_hidden.rend());
  build_mlp(ftir_dec_, ftir_dec_out_, "ftir.dec", cfg_.latent_dim,
            ftir_dec_hidden, cfg_.ftir_bands);
  build_mlp(sat_dec_, sat_dec_out_, "sat.dec", cfg_.latent_dim,
            sat_dec_hidden, cfg_.sat_bands);

  zero_ = make_const(Tensor::scalar(0.0));
  if (cfg_.alpha_init > 0.0) {
    Tensor raw = Tensor::scalar(inverse_softplus(cfg_.alpha_init));
    alpha_ = params_.create("loss.alpha_raw", std::move(raw),
                            cfg_.learnable_weights);
  }
  if (cfg_.beta_init > 0.0) {
    Tensor raw = Tensor::scalar(inverse_softplus(cfg_.beta_init));
    beta_ = params_.create("loss.beta_raw", std::move(raw),
                           cfg_.learnable_weights);
  }
}

VarPtr SauModel::weight_value(const VarPtr& raw) const {
  return ops::softplus(raw);
}

VarPtr SauModel::encode(const VarPtr& x, SpectrumPath path,
                        const ForwardCtx& ctx) const {
  require(x->value.ndim() == 2 && x->value.cols() == cfg_.bands(path),
          "sau encode: band count does not match the path");
  const auto& blocks = path == SpectrumPath::ftir ? ftir_enc_ : sat_enc_;
  const auto& out = path == SpectrumPath::ftir ? ftir_enc_out_ : sat_enc_out_;
  VarPtr h = x;
  for (const auto& b : blocks) h = b.forward(h, ctx);
  h = out.forward(h);
  // shared projection + layer normalization into the common latent
  auto z0 = ops::layer_norm_rows(shared_proj_.forward(h), ln_a_g_, ln_a_b_);
  // transformer refinement over the latent treated as scalar tokens
  auto pooled = refine_.forward(z0, ctx);
  auto z = ops::add(z0, refine_out_.forward(pooled));
  return ops::layer_norm_rows(z, ln_b_g_, ln_b_b_);
}

VarPtr SauModel::decode(const VarPtr& z, SpectrumPath path,
                        const ForwardCtx& ctx) const {
  require(z->value.ndim() == 2 && z->value.cols() == cfg_.latent_dim,
          "sau decode: latent width mismatch");
  const auto& blocks = path == SpectrumPath::ftir ? ftir_dec_ : sat_dec_;
  const auto& out = path == SpectrumPath::ftir ? ftir_dec_out_ : sat_dec_out_;
  VarPtr h = z;
  for (const auto& b : blocks) h = b.forward(h, ctx);
  return out.forward(h);
}

Tensor SauModel::encode_eval(const Tensor& batch, SpectrumPath path) const {
  ForwardCtx eval{false, nullptr};
  auto z = encode(make_const(batch), path, eval);
  return z->value;
}

void SauModel::set_path_trainable(SpectrumPath path, bool trainable,
                                  bool encoder_only) {
  std::string prefix = path == SpectrumPath::ftir ? "ftir." : "sat.";
  if (encoder_only) prefix += "enc.";
  params_.set_trainable_prefix(prefix, trainable);
}

VarPtr recon_loss(const SauModel& model, const Tensor& batch,
                  SpectrumPath path, const ForwardCtx& ctx) {
  require(batch.rows() >= 1, "recon_loss: empty batch");
  auto x = make_const(batch);
  auto z = model.encode(x, path, ctx);
  auto xhat = model.decode(z, path, ctx);
  return ops::mul(model.alpha(), ops::recon_mse(xhat, batch));
}

namespace {

VarPtr alignment_divergence(const SauModel& model, const VarPtr& zf,
                            const VarPtr& zh) {
  switch (model.config().align) {
    case AlignObjective::cosine: return ops::cosine_align(zf, zh);
    case AlignObjective::kld: return ops::kl_align(zf, zh);
    case AlignObjective::jsd: return ops::jsd_align(zf, zh);
  }
  throw ValidationError("align objective: unknown variant");
}

}  // namespace

VarPtr align_loss(const SauModel& model, const Tensor& ftir_batch,
                  const Tensor& sat_batch, const ForwardCtx& ctx) {
  require(ftir_batch.rows() == sat_batch.rows() && ftir_batch.rows() >= 1,
          "align_loss: pair batch mismatch or empty");
  auto zf = model.encode(make_const(ftir_batch), SpectrumPath::ftir, ctx);
  auto zh = model.encode(make_const(sat_batch), SpectrumPath::satellite, ctx);
  return ops::mul(model.beta(), alignment_divergence(model, zf, zh));
}

VarPtr sau_total_loss(const SauModel& model, const Tensor& ftir_batch,
                      const Tensor& sat_batch, const ForwardCtx& ctx) {
  auto total = align_loss(model, ftir_batch, sat_batch, ctx);
  if (model.config().aux_decoder_mse) {
    total = ops::add(total,
                     recon_loss(model, ftir_batch, SpectrumPath::ftir, ctx));
    total = ops::add(
        total, recon_loss(model, sat_batch, SpectrumPath::satellite, ctx));
  }
  return total;
}

double mean_pair_cosine(const SauModel& model, const Tensor& ftir_batch,
                        const Tensor& sat_batch) {
  Tensor zf = model.encode_eval(ftir_batch, SpectrumPath::ftir);
  Tensor zh = model.encode_eval(sat_batch, SpectrumPath::satellite);
  double acc = 0.0;
  std::size_t n = zf.rows(), d = zf.cols();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> u(d), v(d);
    for (std::size_t j = 0; j < d; ++j) {
      u[j] = zf.at(i, j);
      v[j] = zh.at(i, j);
    }
    acc += ops::cosine_distance(u, v);
  }
  return acc / static_cast<double>(n);
}

namespace {

Tensor gather_batch(const Tensor& data, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), data.cols()});
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t c = 0; c < data.cols(); ++c)
      out.at(j, c) = data.at(rows[j], c);
  return out;
}

double raw_recon_eval(const SauModel& model, const Tensor& data,
                      SpectrumPath path) {
  ForwardCtx eval{false, nullptr};
  auto x = make_const(data);
  auto xhat = model.decode(model.encode(x, path, eval), path, eval);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double d = xhat->value[i] - data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(data.rows());
}

}  // namespace

RunResult pretrain_ftir(SauModel& model, const Tensor& train,
                        const Tensor& heldout, const TrainSchedule& sched) {
  require(train.rows() >= 1 && heldout.rows() >= 1,
          "pretrain: empty train or held-out set");
  // Stage one touches only the laboratory path and the shared trunk.
  model.set_path_trainable(SpectrumPath::satellite, false);

  auto train_epoch = [&](int epoch, AdamOptimizer& opt, double lr,
                         std::vector<double>& step_norms) -> MetricRow {
    auto batch_rng = make_rng(sched.seed, 0xb000 + epoch);
    auto batches = make_batches(train.rows(), sched.batch_size, batch_rng);
    double total = 0.0;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      auto drop_rng = make_rng(sched.seed, mix_seed(epoch, s));
      ForwardCtx ctx{true, &drop_rng};
      model.params().zero_grads();
      Tensor batch = gather_batch(train, batches[s]);
      auto loss = recon_loss(model, batch, SpectrumPath::ftir, ctx);
      if (!std::isfinite(loss->scalar()))
        throw DivergenceError("pretrain: non-finite loss at epoch " +
                              std::to_string(epoch) + " batch " +
                              std::to_string(s));
      backward(loss);
      step_norms.push_back(opt.clip_and_step(lr));
      total += loss->scalar();
    }
    return {{"recon", total / static_cast<double>(batches.size())},
            {"align", 0.0},
            {"total", total / static_cast<double>(batches.size())}};
  };
  auto validate = [&]() -> MetricRow {
    return {{"val_recon", raw_recon_eval(model, heldout, SpectrumPath::ftir)}};
  };

  auto result = run_schedule(model.params(), sched, train_epoch, validate,
                             "val_recon");
  model.set_path_trainable(SpectrumPath::satellite, true);
  return result;
}

RunResult finetune_align(SauModel& model, const Tensor& ftir_train,
                         const Tensor& sat_train, const Tensor& ftir_held,
                         const Tensor& sat_held, const TrainSchedule& sched) {
  require(ftir_train.rows() == sat_train.rows() && ftir_train.rows() >= 1,
          "finetune: pair count mismatch or empty");
  require(ftir_held.rows() == sat_held.rows() && ftir_held.rows() >= 1,
          "finetune: held-out pair count mismatch or empty");
  bool froze = model.config().freeze_ftir_on_align;
  if (froze)
    model.set_path_trainable(SpectrumPath::ftir, false, /*encoder_only=*/true);

  auto train_epoch = [&](int epoch, AdamOptimizer& opt, double lr,
                         std::vector<double>& step_norms) -> MetricRow {
    auto batch_rng = make_rng(sched.seed, 0xa000 + epoch);
    auto batches = make_batches(ftir_train.rows(), sched.batch_size, batch_rng);
    double t_recon = 0.0, t_align = 0.0, t_total = 0.0;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      auto drop_rng = make_rng(sched.seed, mix_seed(0x40000 + epoch, s));
      ForwardCtx ctx{true, &drop_rng};
      model.params().zero_grads();
      Tensor fb = gather_batch(ftir_train, batches[s]);
      Tensor hb = gather_batch(sat_train, batches[s]);
      auto a = align_loss(model, fb, hb, ctx);
      VarPtr loss = a;
      double recon_part = 0.0;
      if (model.config().aux_decoder_mse) {
        auto r = ops::add(recon_loss(model, fb, SpectrumPath::ftir, ctx),
                          recon_loss(model, hb, SpectrumPath::satellite, ctx));
        recon_part = r->scalar();
        loss = ops::add(loss, r);
      }
      if (!std::isfinite(loss->scalar()))
        throw DivergenceError("finetune: non-finite loss at epoch " +
                              std::to_string(epoch) + " batch " +
                              std::to_string(s));
      backward(loss);
      step_norms.push_back(opt.clip_and_step(lr));
      t_align += a->scalar();
      t_recon += recon_part;
      t_total += loss->scalar();
    }
    double nb = static_cast<double>(batches.size());
    return {{"recon", t_recon / nb},
            {"align", t_align / nb},
            {"total", t_total / nb}};
  };
  auto validate = [&]() -> MetricRow {
    return {{"val_cosine", mean_pair_cosine(model, ftir_held, sat_held)},
            {"val_recon",
             raw_recon_eval(model, sat_held, SpectrumPath::satellite)}};
  };

  auto result = run_schedule(model.params(), sched, train_epoch, validate,
                             "val_cosine");
  if (froze)
    model.set_path_trainable(SpectrumPath::ftir, true, /*encoder_only=*/true);
  return result;
}

Tensor spectra_matrix(const std::vector<FtirSpectrum>& specs) {
  require(!specs.empty(), "spectra_matrix: empty list");
  Tensor out({specs.size(), specs.front().absorbance.size()});
  for (std::size_t i = 0; i < specs.size(); ++i) {
    require(specs[i].absorbance.size() == out.cols(),
            "spectra_matrix: ragged band counts");
    for (std::size_t j = 0; j < out.cols(); ++j)
      out.at(i, j) = specs[i].absorbance[j];
  }
  return out;
}

Tensor spectra_matrix(const std::vector<SatelliteSpectrum>& specs) {
  require(!specs.empty(), "spectra_matrix: empty list");
  Tensor out({specs.size(), specs.front().reflectance.size()});
  for (std::size_t i = 0; i < specs.size(); ++i) {
    require(specs[i].reflectance.size() == out.cols(),
            "spectra_matrix: ragged band counts");
    for (std::size_t j = 0; j < out.cols(); ++j)
      out.at(i, j) = specs[i].reflectance[j];
  }
  return out;
}

}  // namespace spectral
