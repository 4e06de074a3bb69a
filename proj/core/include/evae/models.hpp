#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evae/data.hpp"
#include "evae/rng.hpp"
#include "evae/sampling.hpp"
#include "evae/tensor.hpp"

namespace evae {

enum class ModelKind { vae, evae };
enum class ReconModel { bernoulli, gaussian };

struct EvaeConfig {
  ModelKind model = ModelKind::evae;
  int image_h = 28;
  int image_w = 28;
  int d_z = 16;
  std::vector<int> hidden = {512, 256};  // encoder trunk; decoder mirrors it
  int M = 100;                           // minibatch size
  int L = 1;                             // latent draws averaged per step
  ReconModel recon = ReconModel::bernoulli;
  SamplerConfig sampler;                 // B, b_m, prior family
  double lr = 3e-4;
  int epochs = 10;
  double r_min = 1e-3;                   // floor added to softplus spread
  std::uint64_t seed = 1;

  int pixels() const { return image_h * image_w; }
  void validate() const;
};

// Encoder heads. For the uniform-support model `spread` is the kernel radius
// r = softplus(raw) + r_min (strictly positive); for the Gaussian baseline it
// is the log-variance.
struct EncoderOutput {
  Tensor mu;
  Tensor spread;
};

// Shared-trunk MLP encoder with two heads plus a mirrored decoder ending in
// a sigmoid. Both model kinds use the identical architecture; only the head
// interpretation and the latent sampling differ.
class Model {
 public:
  Model() = default;

  static Model zeros(const EvaeConfig& cfg);
  static Model random_init(const EvaeConfig& cfg, Rng& rng);

  const EvaeConfig& config() const { return cfg_; }

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  // x: [M, pixels] with entries in [0,1].
  EncoderOutput encode(const Tensor& x) const;
  // z: [M, d_z] -> pixels in (0,1).
  Tensor decode(const Tensor& z) const;

 private:
  EvaeConfig cfg_;
  std::vector<Tensor> enc_w_, enc_b_;
  Tensor mu_w_, mu_b_, sp_w_, sp_b_;
  std::vector<Tensor> dec_w_, dec_b_;

  void build(const EvaeConfig& cfg);
  friend Model load_checkpoint(const std::string& path);
};

struct LossTerms {
  Tensor total;
  Tensor recon;
  Tensor divergence;  // closed-form divergence (vae) or spread penalty (evae)
};

// Gaussian-baseline step: z = mu + exp(logvar/2) * eps with eps standard
// normal (overridable via hook->gauss), summed reconstruction loss plus the
// closed-form divergence to N(0, I).
LossTerms loss_vae(const Tensor& x, const Model& model, Rng& rng,
                   const NoiseOverride* hook = nullptr);

// Kernel-smoothed step: z from resample_minibatch on the encoder heads,
// reconstruction averaged over L draws, plus the 3B/(5M) sum of 1/r. The
// penalty only touches r; mu trains through the reconstruction alone.
LossTerms loss_evae(const Tensor& x, const Model& model, Rng& rng,
                    const NoiseOverride* hook = nullptr);

struct CurvePoint {
  int epoch = 0;           // 0 is the pre-training evaluation
  std::string split;       // "train" or "val"
  double recon = 0.0;      // per-image means
  double divergence = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<CurvePoint> curve;
};

// Minibatch Adam over shuffled epochs. Both splits are re-evaluated after
// every epoch (and once before training) with noise streams fixed per split,
// so lr=0 yields exactly flat curves. Deterministic given config and data.
TrainResult train(const ImageDataset& train_set, const ImageDataset& val_set,
                  const EvaeConfig& cfg);

// epoch,split,recon,divergence,total
void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

// Encodes, draws one latent per image, decodes. Gradients are off.
ImageDataset reconstruct(const Model& model, const ImageDataset& images, Rng& rng);

// Decodes prior draws (scaled by B for the kernel model, standard normal for
// the Gaussian baseline). Optional B override for support sweeps.
ImageDataset sample_images(const Model& model, int count, Rng& rng, double B_override = 0.0);

// Versioned binary container: magic "EVAE", u32 version, length-prefixed
// key=value config text, then named little-endian f64 arrays with shapes.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace evae
