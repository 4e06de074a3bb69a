#include "evae/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "evae/divergences.hpp"
#include "evae/errors.hpp"
#include "evae/optim.hpp"

namespace evae {
namespace {

Tensor batch_tensor(const ImageDataset& ds, const std::vector<int>& indices, int first, int count) {
  const int d = ds.pixels_per_image();
  std::vector<double> flat(static_cast<std::size_t>(count) * d);
  for (int i = 0; i < count; ++i) {
    const auto& img = ds.pixels[static_cast<std::size_t>(indices[first + i])];
    std::copy(img.begin(), img.end(), flat.begin() + static_cast<std::size_t>(i) * d);
  }
  return Tensor::from_data({static_cast<std::size_t>(count), static_cast<std::size_t>(d)},
                           std::move(flat));
}

Tensor recon_loss(const Tensor& xhat, const Tensor& x, ReconModel recon) {
  if (recon == ReconModel::bernoulli) return bce_sum(xhat, x);
  Tensor d = sub(xhat, x);
  return sum(mul(d, d));
}

}  // namespace

void EvaeConfig::validate() const {
  if (image_h < 1 || image_w < 1) throw ConfigError("config: image sides must be positive");
  if (d_z < 1) throw ConfigError("config: d_z must be at least 1");
  if (hidden.empty()) throw ConfigError("config: at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("config: hidden sizes must be positive");
  }
  if (M < 1) throw ConfigError("config: minibatch size M must be at least 1");
  if (L < 1) throw ConfigError("config: latent draw count L must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("config: lr must be finite and >= 0");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (!(r_min > 0.0) || !std::isfinite(r_min)) {
    throw ConfigError("config: r_min must be finite and positive");
  }
  sampler.validate();
}

void Model::build(const EvaeConfig& cfg) {
  cfg.validate();
  cfg_ = cfg;
  enc_w_.clear();
  enc_b_.clear();
  dec_w_.clear();
  dec_b_.clear();

  std::vector<int> enc_sizes;
  enc_sizes.push_back(cfg.pixels());
  enc_sizes.insert(enc_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  for (std::size_t i = 0; i + 1 < enc_sizes.size(); ++i) {
    enc_w_.push_back(Tensor::zeros({static_cast<std::size_t>(enc_sizes[i]),
                                    static_cast<std::size_t>(enc_sizes[i + 1])},
                                   true));
    enc_b_.push_back(Tensor::zeros({static_cast<std::size_t>(enc_sizes[i + 1])}, true));
  }
  const auto trunk_out = static_cast<std::size_t>(cfg.hidden.back());
  const auto dz = static_cast<std::size_t>(cfg.d_z);
  mu_w_ = Tensor::zeros({trunk_out, dz}, true);
  mu_b_ = Tensor::zeros({dz}, true);
  sp_w_ = Tensor::zeros({trunk_out, dz}, true);
  sp_b_ = Tensor::zeros({dz}, true);

  std::vector<int> dec_sizes;
  dec_sizes.push_back(cfg.d_z);
  dec_sizes.insert(dec_sizes.end(), cfg.hidden.rbegin(), cfg.hidden.rend());
  dec_sizes.push_back(cfg.pixels());
  for (std::size_t i = 0; i + 1 < dec_sizes.size(); ++i) {
    dec_w_.push_back(Tensor::zeros({static_cast<std::size_t>(dec_sizes[i]),
                                    static_cast<std::size_t>(dec_sizes[i + 1])},
                                   true));
    dec_b_.push_back(Tensor::zeros({static_cast<std::size_t>(dec_sizes[i + 1])}, true));
  }
}

Model Model::zeros(const EvaeConfig& cfg) {
  Model m;
  m.build(cfg);
  return m;
}

Model Model::random_init(const EvaeConfig& cfg, Rng& rng) {
  Model m = zeros(cfg);
  const auto fill = [&rng](Tensor& w) {
    const double fan_in = static_cast<double>(w.shape()[0]);
    const double fan_out = static_cast<double>(w.shape()[1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.mutable_data()) v = rng.uniform(-limit, limit);
  };
  for (auto& w : m.enc_w_) fill(w);
  fill(m.mu_w_);
  fill(m.sp_w_);
  for (auto& w : m.dec_w_) fill(w);
  return m;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < enc_w_.size(); ++i) {
    out.emplace_back("enc_w" + std::to_string(i), enc_w_[i]);
    out.emplace_back("enc_b" + std::to_string(i), enc_b_[i]);
  }
  out.emplace_back("mu_w", mu_w_);
  out.emplace_back("mu_b", mu_b_);
  out.emplace_back("sp_w", sp_w_);
  out.emplace_back("sp_b", sp_b_);
  for (std::size_t i = 0; i < dec_w_.size(); ++i) {
    out.emplace_back("dec_w" + std::to_string(i), dec_w_[i]);
    out.emplace_back("dec_b" + std::to_string(i), dec_b_[i]);
  }
  return out;
}

EncoderOutput Model::encode(const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != static_cast<std::size_t>(cfg_.pixels())) {
    throw DimensionError("encode: expected [M, " + std::to_string(cfg_.pixels()) + "] input");
  }
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("encode: pixel values must lie in [0, 1]");
    }
  }
  Tensor h = x;
  for (std::size_t i = 0; i < enc_w_.size(); ++i) {
    h = relu(affine(h, enc_w_[i], enc_b_[i]));
  }
  EncoderOutput out;
  out.mu = affine(h, mu_w_, mu_b_);
  Tensor raw = affine(h, sp_w_, sp_b_);
  out.spread = cfg_.model == ModelKind::evae ? add_scalar(softplus(raw), cfg_.r_min) : raw;
  return out;
}

Tensor Model::decode(const Tensor& z) const {
  if (z.shape().size() != 2 || z.cols() != static_cast<std::size_t>(cfg_.d_z)) {
    throw DimensionError("decode: expected [M, " + std::to_string(cfg_.d_z) + "] input");
  }
  Tensor h = z;
  for (std::size_t i = 0; i + 1 < dec_w_.size(); ++i) {
    h = relu(affine(h, dec_w_[i], dec_b_[i]));
  }
  return sigmoid(affine(h, dec_w_.back(), dec_b_.back()));
}

LossTerms loss_vae(const Tensor& x, const Model& model, Rng& rng, const NoiseOverride* hook) {
  const EvaeConfig& cfg = model.config();
  EncoderOutput enc = model.encode(x);
  const std::size_t n = enc.mu.size();

  std::vector<double> eps(n);
  if (hook != nullptr && hook->gauss.has_value()) {
    const auto& g = *hook->gauss;
    if (g.size() == 1) {
      std::fill(eps.begin(), eps.end(), g[0]);
    } else if (g.size() == n) {
      eps = g;
    } else {
      throw DimensionError("loss_vae: gauss override length does not match mu");
    }
  } else {
    for (double& e : eps) e = rng.normal();
  }

  Tensor eps_t = Tensor::from_data(enc.mu.shape(), std::move(eps));
  Tensor std_t = exp(scale(enc.spread, 0.5));
  Tensor z = add(enc.mu, mul(std_t, eps_t));
  Tensor recon = recon_loss(model.decode(z), x, cfg.recon);
  Tensor kl = kl_gaussian(enc.mu, enc.spread);
  LossTerms out;
  out.recon = recon;
  out.divergence = kl;
  out.total = add(recon, kl);
  return out;
}

LossTerms loss_evae(const Tensor& x, const Model& model, Rng& rng, const NoiseOverride* hook) {
  const EvaeConfig& cfg = model.config();
  EncoderOutput enc = model.encode(x);
  const std::size_t rows = x.rows();

  Tensor recon;
  for (int l = 0; l < cfg.L; ++l) {
    LatentBatch z = resample_minibatch(enc.mu, enc.spread, cfg.sampler, rng, hook);
    Tensor term = recon_loss(model.decode(z.values), x, cfg.recon);
    recon = l == 0 ? term : add(recon, term);
  }
  if (cfg.L > 1) recon = scale(recon, 1.0 / cfg.L);

  Tensor penalty = evae_penalty(enc.spread, cfg.sampler.B, rows);
  LossTerms out;
  out.recon = recon;
  out.divergence = penalty;
  out.total = add(recon, penalty);
  return out;
}

namespace {

// Per-image mean losses over one split with a fresh, split-tagged noise
// stream; identical inputs give identical rows on every call.
CurvePoint evaluate_split(const Model& model, const ImageDataset& ds, const EvaeConfig& cfg,
                          std::uint64_t root_seed, int split_tag, const std::string& split_name,
                          int epoch) {
  GradGuard guard;
  Rng eval_rng = Rng(root_seed).child(3, static_cast<std::uint64_t>(split_tag));
  std::vector<int> order(ds.count());
  std::iota(order.begin(), order.end(), 0);

  double recon_sum = 0.0;
  double div_sum = 0.0;
  double total_sum = 0.0;
  for (int first = 0; first < ds.count(); first += cfg.M) {
    const int count = std::min(cfg.M, ds.count() - first);
    Tensor x = batch_tensor(ds, order, first, count);
    LossTerms terms = cfg.model == ModelKind::evae ? loss_evae(x, model, eval_rng)
                                                   : loss_vae(x, model, eval_rng);
    recon_sum += terms.recon.value();
    div_sum += terms.divergence.value();
    total_sum += terms.total.value();
  }
  CurvePoint p;
  p.epoch = epoch;
  p.split = split_name;
  p.recon = recon_sum / ds.count();
  p.divergence = div_sum / ds.count();
  p.total = total_sum / ds.count();
  return p;
}

}  // namespace

TrainResult train(const ImageDataset& train_set, const ImageDataset& val_set,
                  const EvaeConfig& cfg) {
  cfg.validate();
  // B = 0 is allowed for one-off ablation losses but not for a training run:
  // it collapses the prior to a point and the penalty to zero.
  if (cfg.model == ModelKind::evae && !(cfg.sampler.B > 0.0)) {
    throw ConfigError("train: B must be positive");
  }
  if (train_set.count() == 0) throw ConfigError("train: training split is empty");
  if (val_set.count() == 0) throw ConfigError("train: validation split is empty");
  if (train_set.pixels_per_image() != cfg.pixels() || val_set.pixels_per_image() != cfg.pixels()) {
    throw DimensionError("train: dataset image size does not match config");
  }

  Rng root(cfg.seed);
  Rng init_rng = root.child(0);
  TrainResult result;
  result.model = Model::random_init(cfg, init_rng);

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  Adam opt(result.model.parameters(), adam_cfg);

  const auto log_both = [&](int epoch) {
    result.curve.push_back(
        evaluate_split(result.model, train_set, cfg, cfg.seed, 0, "train", epoch));
    result.curve.push_back(evaluate_split(result.model, val_set, cfg, cfg.seed, 1, "val", epoch));
  };
  log_both(0);

  std::vector<int> order(train_set.count());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.child(1, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    int batch_index = 0;
    for (int first = 0; first < train_set.count(); first += cfg.M, ++batch_index) {
      const int count = std::min(cfg.M, train_set.count() - first);
      Tensor x = batch_tensor(train_set, order, first, count);
      Rng noise_rng = root.child(2, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(batch_index));
      LossTerms terms;
      try {
        terms = cfg.model == ModelKind::evae ? loss_evae(x, result.model, noise_rng)
                                             : loss_vae(x, result.model, noise_rng);
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      const double total = terms.total.value();
      if (!std::isfinite(total)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "train: non-finite loss at epoch %d batch %d (recon=%g divergence=%g)",
                      epoch, batch_index, terms.recon.value(), terms.divergence.value());
        throw NumericError(msg);
      }
      opt.zero_grad();
      terms.total.backward();
      opt.step();
    }
    log_both(epoch);
  }
  return result;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "epoch,split,recon,divergence,total\n";
  char line[256];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof(line), "%d,%s,%.17g,%.17g,%.17g\n", p.epoch, p.split.c_str(),
                  p.recon, p.divergence, p.total);
    out << line;
  }
  if (!out) throw FormatError(path + ": write failed");
}

ImageDataset reconstruct(const Model& model, const ImageDataset& images, Rng& rng) {
  GradGuard guard;
  const EvaeConfig& cfg = model.config();
  if (images.pixels_per_image() != cfg.pixels()) {
    throw DimensionError("reconstruct: dataset image size does not match config");
  }
  ImageDataset out;
  out.height = images.height;
  out.width = images.width;
  out.pixels.reserve(images.count());

  std::vector<int> order(images.count());
  std::iota(order.begin(), order.end(), 0);
  for (int first = 0; first < images.count(); first += cfg.M) {
    const int count = std::min(cfg.M, images.count() - first);
    Tensor x = batch_tensor(images, order, first, count);
    EncoderOutput enc = model.encode(x);
    Tensor z;
    if (cfg.model == ModelKind::evae) {
      z = resample_minibatch(enc.mu, enc.spread, cfg.sampler, rng).values;
    } else {
      std::vector<double> eps(enc.mu.size());
      for (double& e : eps) e = rng.normal();
      z = add(enc.mu, mul(exp(scale(enc.spread, 0.5)),
                          Tensor::from_data(enc.mu.shape(), std::move(eps))));
    }
    Tensor xhat = model.decode(z);
    const auto vals = xhat.data();
    const int d = cfg.pixels();
    for (int i = 0; i < count; ++i) {
      out.pixels.emplace_back(vals.begin() + static_cast<std::size_t>(i) * d,
                              vals.begin() + static_cast<std::size_t>(i + 1) * d);
    }
  }
  return out;
}

ImageDataset sample_images(const Model& model, int count, Rng& rng, double B_override) {
  if (count < 1) throw ConfigError("sample_images: count must be positive");
  GradGuard guard;
  const EvaeConfig& cfg = model.config();

  Tensor z;
  if (cfg.model == ModelKind::evae) {
    SamplerConfig s = cfg.sampler;
    if (B_override > 0.0) s.B = B_override;
    z = sample_prior(static_cast<std::size_t>(count), static_cast<std::size_t>(cfg.d_z), s, rng);
  } else {
    std::vector<double> draws(static_cast<std::size_t>(count) * cfg.d_z);
    for (double& v : draws) v = rng.normal();
    z = Tensor::from_data({static_cast<std::size_t>(count), static_cast<std::size_t>(cfg.d_z)},
                          std::move(draws));
  }
  Tensor xhat = model.decode(z);

  ImageDataset out;
  out.height = cfg.image_h;
  out.width = cfg.image_w;
  out.pixels.reserve(count);
  const auto vals = xhat.data();
  const int d = cfg.pixels();
  for (int i = 0; i < count; ++i) {
    out.pixels.emplace_back(vals.begin() + static_cast<std::size_t>(i) * d,
                            vals.begin() + static_cast<std::size_t>(i + 1) * d);
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'E', 'V', 'A', 'E'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw FormatError(path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string config_to_text(const EvaeConfig& cfg) {
  std::ostringstream os;
  os << "model=" << (cfg.model == ModelKind::evae ? "evae" : "vae") << "\n";
  os << "image_h=" << cfg.image_h << "\n";
  os << "image_w=" << cfg.image_w << "\n";
  os << "d_z=" << cfg.d_z << "\n";
  os << "hidden=";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    if (i > 0) os << ",";
    os << cfg.hidden[i];
  }
  os << "\n";
  os << "M=" << cfg.M << "\n";
  os << "L=" << cfg.L << "\n";
  os << "recon=" << (cfg.recon == ReconModel::bernoulli ? "bernoulli" : "gaussian") << "\n";
  os << "prior=" << (cfg.sampler.prior == PriorFamily::uniform ? "uniform" : "gaussian") << "\n";
  char num[64];
  std::snprintf(num, sizeof(num), "%.17g", cfg.sampler.B);
  os << "B=" << num << "\n";
  std::snprintf(num, sizeof(num), "%.17g", cfg.sampler.b_m);
  os << "bm=" << num << "\n";
  std::snprintf(num, sizeof(num), "%.17g", cfg.lr);
  os << "lr=" << num << "\n";
  os << "epochs=" << cfg.epochs << "\n";
  std::snprintf(num, sizeof(num), "%.17g", cfg.r_min);
  os << "r_min=" << num << "\n";
  os << "seed=" << cfg.seed << "\n";
  return os.str();
}

EvaeConfig config_from_text(const std::string& text, const std::string& path) {
  EvaeConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path + ": malformed config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "model") {
        if (val != "vae" && val != "evae") throw FormatError(path + ": unknown model '" + val + "'");
        cfg.model = val == "evae" ? ModelKind::evae : ModelKind::vae;
      } else if (key == "image_h") {
        cfg.image_h = std::stoi(val);
      } else if (key == "image_w") {
        cfg.image_w = std::stoi(val);
      } else if (key == "d_z") {
        cfg.d_z = std::stoi(val);
      } else if (key == "hidden") {
        cfg.hidden.clear();
        std::istringstream hs(val);
        std::string item;
        while (std::getline(hs, item, ',')) cfg.hidden.push_back(std::stoi(item));
      } else if (key == "M") {
        cfg.M = std::stoi(val);
      } else if (key == "L") {
        cfg.L = std::stoi(val);
      } else if (key == "recon") {
        if (val != "bernoulli" && val != "gaussian") {
          throw FormatError(path + ": unknown recon model '" + val + "'");
        }
        cfg.recon = val == "bernoulli" ? ReconModel::bernoulli : ReconModel::gaussian;
      } else if (key == "prior") {
        if (val != "uniform" && val != "gaussian") {
          throw FormatError(path + ": unknown prior '" + val + "'");
        }
        cfg.sampler.prior = val == "uniform" ? PriorFamily::uniform : PriorFamily::gaussian;
      } else if (key == "B") {
        cfg.sampler.B = std::stod(val);
      } else if (key == "bm") {
        cfg.sampler.b_m = std::stod(val);
      } else if (key == "lr") {
        cfg.lr = std::stod(val);
      } else if (key == "epochs") {
        cfg.epochs = std::stoi(val);
      } else if (key == "r_min") {
        cfg.r_min = std::stod(val);
      } else if (key == "seed") {
        cfg.seed = std::stoull(val);
      } else {
        throw FormatError(path + ": unknown config key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw FormatError(path + ": bad value for key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw FormatError(path + ": out-of-range value for key '" + key + "'");
    }
  }
  return cfg;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);

  const std::string cfg_text = config_to_text(model.config());
  put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  const auto named = model.named_parameters();
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t dim : t.shape()) put_u64(out, dim);
    // Little-endian doubles; written via the integer path so the container
    // is byte-stable across hosts.
    for (double v : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  }
  if (!out) throw FormatError(path + ": write failed");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  const std::uint32_t cfg_len = get_u32(in, path);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (static_cast<std::uint32_t>(in.gcount()) != cfg_len) {
    throw FormatError(path + ": truncated checkpoint config");
  }

  Model model = Model::zeros(config_from_text(cfg_text, path));
  auto named = model.named_parameters();

  const std::uint32_t n_arrays = get_u32(in, path);
  if (n_arrays != named.size()) {
    throw ValidationError(path + ": checkpoint holds " + std::to_string(n_arrays) +
                          " arrays but the config implies " + std::to_string(named.size()));
  }
  for (std::uint32_t a = 0; a < n_arrays; ++a) {
    const std::uint32_t name_len = get_u32(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (static_cast<std::uint32_t>(in.gcount()) != name_len) {
      throw FormatError(path + ": truncated array name");
    }
    const std::uint32_t ndim = get_u32(in, path);
    std::vector<std::size_t> shape(ndim);
    for (auto& dim : shape) dim = static_cast<std::size_t>(get_u64(in, path));

    auto it = std::find_if(named.begin(), named.end(),
                           [&name](const auto& p) { return p.first == name; });
    if (it == named.end()) throw ValidationError(path + ": unexpected array '" + name + "'");
    Tensor& target = it->second;
    if (shape != target.shape()) {
      throw ValidationError(path + ": array '" + name + "' has shape " + shape_string(shape) +
                            " but the config implies " + shape_string(target.shape()));
    }
    auto dst = target.mutable_data();
    for (double& v : dst) {
      const std::uint64_t bits = get_u64(in, path);
      std::memcpy(&v, &bits, 8);
    }
  }
  return model;
}

}  // namespace evae
