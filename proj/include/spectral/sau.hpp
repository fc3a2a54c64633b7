#pragma once

#include "spectral/nn.hpp"
#include "spectral/spectra.hpp"
#include "spectral/train.hpp"

namespace spectral {

enum class SpectrumPath { ftir, satellite };
enum class AlignObjective { cosine, kld, jsd };

AlignObjective parse_align_objective(const std::string&);

struct SauConfig {
  std::size_t ftir_bands = kFtirBands;
  std::size_t sat_bands = kSatFilteredBands;  // 218 after band removal;
                                              // 224 accepted via config
  std::size_t latent_dim = kLatentDim;
  std::vector<std::size_t> ftir_hidden = {1024, 512, 256};
  std::vector<std::size_t> sat_hidden = {256, 128};
  double mlp_dropout = 0.20;
  // latent refinement: 64 scalar tokens embedded to heads * head_dim
  std::size_t refine_layers = 3;
  std::size_t refine_heads = 4;
  std::size_t refine_head_dim = 32;
  std::size_t refine_ffn = 128;
  double refine_dropout = 0.1;
  // alignment objective and the hybrid switches
  AlignObjective align = AlignObjective::cosine;
  bool freeze_ftir_on_align = true;
  bool aux_decoder_mse = true;
  // loss weights; positive values are softplus-parameterized learnable
  // scalars, zero pins the term off
  double alpha_init = 1.0;
  double beta_init = 1.0;
  bool learnable_weights = true;

  void validate() const;
  std::size_t bands(SpectrumPath p) const {
    return p == SpectrumPath::ftir ? ftir_bands : sat_bands;
  }
};

/// Dual-path encoder with a shared projection, latent layer
/// normalization, transformer refinement of the latent, and per-path
/// decoders mirroring the encoders.
class SauModel {
 public:
  SauModel(const SauConfig& cfg, std::uint64_t init_seed);

  // x: [B x bands(path)] -> layer-normalized latent [B x latent_dim]
  VarPtr encode(const VarPtr& x, SpectrumPath path,
                const ForwardCtx& ctx) const;
  VarPtr decode(const VarPtr& z, SpectrumPath path,
                const ForwardCtx& ctx) const;

  Tensor encode_eval(const Tensor& batch, SpectrumPath path) const;

  VarPtr alpha() const { return alpha_ ? weight_value(alpha_) : zero_; }
  VarPtr beta() const { return beta_ ? weight_value(beta_) : zero_; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const SauConfig& config() const { return cfg_; }

  // Freeze prefixes: "ftir.enc.", "sat.enc.", full paths "ftir." / "sat.".
  void set_path_trainable(SpectrumPath path, bool trainable,
                          bool encoder_only = false);

 private:
  VarPtr weight_value(const VarPtr& raw) const;

  SauConfig cfg_;
  ParameterSet params_;
  std::vector<DenseBlock> ftir_enc_, sat_enc_, ftir_dec_, sat_dec_;
  Linear ftir_enc_out_, sat_enc_out_, ftir_dec_out_, sat_dec_out_;
  Linear shared_proj_, refine_out_;
  VarPtr ln_a_g_, ln_a_b_, ln_b_g_, ln_b_b_;
  TokenTransformer refine_;
  VarPtr alpha_, beta_;  // raw softplus parameters (null when pinned to 0)
  VarPtr zero_;
};

// ---- losses (Eq. 3/4/5 assembly) ------------------------------------------

/// alpha * mean over the batch of the squared reconstruction residual.
VarPtr recon_loss(const SauModel& model, const Tensor& batch,
                  SpectrumPath path, const ForwardCtx& ctx);

/// beta * mean alignment divergence between paired embeddings
/// (cosine distance by default; KLD/JSD behind the config flag).
VarPtr align_loss(const SauModel& model, const Tensor& ftir_batch,
                  const Tensor& sat_batch, const ForwardCtx& ctx);

/// Reconstruction + alignment; the auxiliary decoder MSE folds into the
/// reconstruction term (disabled entirely when aux_decoder_mse is off).
VarPtr sau_total_loss(const SauModel& model, const Tensor& ftir_batch,
                      const Tensor& sat_batch, const ForwardCtx& ctx);

/// Mean cosine distance between paired embeddings in eval mode.
double mean_pair_cosine(const SauModel& model, const Tensor& ftir_batch,
                        const Tensor& sat_batch);

// ---- training ---------------------------------------------------------------

/// Stage one: reconstruction-only training on laboratory spectra. The
/// satellite path is frozen for the duration. Objective: held-out
/// reconstruction error.
RunResult pretrain_ftir(SauModel& model, const Tensor& train,
                        const Tensor& heldout, const TrainSchedule& sched);

/// Stage two: joint alignment on paired samples with the laboratory
/// encoder frozen (per config). Objective: held-out mean cosine distance.
RunResult finetune_align(SauModel& model, const Tensor& ftir_train,
                         const Tensor& sat_train, const Tensor& ftir_held,
                         const Tensor& sat_held, const TrainSchedule& sched);

Tensor spectra_matrix(const std::vector<FtirSpectrum>& specs);
Tensor spectra_matrix(const std::vector<SatelliteSpectrum>& specs);

}  // namespace spectral
