#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "evae/data.hpp"
#include "evae/divergences.hpp"
#include "evae/errors.hpp"
#include "evae/kernels.hpp"
#include "evae/metrics.hpp"
#include "evae/models.hpp"
#include "evae/rng.hpp"

namespace fs = std::filesystem;
using namespace evae;

namespace {

// Everything the train/eval/sample commands can be told, with defaults.
// Values come from (lowest to highest precedence): defaults, the --config
// key=value file, command-line flags.
struct Params {
  std::string model = "evae";
  std::string prior = "uniform";
  std::string recon = "bernoulli";
  double B = 0.1;
  double bm = 0.3594;
  int dz = 16;
  int M = 100;
  int L = 1;
  int epochs = 10;
  double lr = 3e-4;
  double r_min = 1e-3;
  std::uint64_t seed = 1;
  std::string data = "synth:two-blob";
  std::string out = "evae-out";
  int n = 1000;          // synthetic dataset size
  int side = 28;         // synthetic image side
  double val_frac = 0.2;
  std::string checkpoint;
  int count = 16;        // sample grid size
};

const std::vector<std::string> kConfigKeys = {
    "model", "prior", "recon", "B",    "bm",  "dz",       "M",   "L",     "epochs", "lr",
    "r_min", "seed",  "data",  "out",  "n",   "side",     "val_frac", "checkpoint", "count"};

void apply_config_file(Params& p, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "model") p.model = val;
      else if (key == "prior") p.prior = val;
      else if (key == "recon") p.recon = val;
      else if (key == "B") p.B = std::stod(val);
      else if (key == "bm") p.bm = std::stod(val);
      else if (key == "dz") p.dz = std::stoi(val);
      else if (key == "M") p.M = std::stoi(val);
      else if (key == "L") p.L = std::stoi(val);
      else if (key == "epochs") p.epochs = std::stoi(val);
      else if (key == "lr") p.lr = std::stod(val);
      else if (key == "r_min") p.r_min = std::stod(val);
      else if (key == "seed") p.seed = std::stoull(val);
      else if (key == "data") p.data = val;
      else if (key == "out") p.out = val;
      else if (key == "n") p.n = std::stoi(val);
      else if (key == "side") p.side = std::stoi(val);
      else if (key == "val_frac") p.val_frac = std::stod(val);
      else if (key == "checkpoint") p.checkpoint = val;
      else if (key == "count") p.count = std::stoi(val);
      else {
        std::string keys;
        for (const auto& k : kConfigKeys) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                          "' (valid keys: " + keys + ")");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": value out of range for '" + key +
                        "'");
    }
  }
}

EvaeConfig to_model_config(const Params& p) {
  EvaeConfig cfg;
  if (p.model == "vae") cfg.model = ModelKind::vae;
  else if (p.model == "evae") cfg.model = ModelKind::evae;
  else throw ConfigError("unknown model '" + p.model + "' (use vae or evae)");
  if (p.prior == "uniform") cfg.sampler.prior = PriorFamily::uniform;
  else if (p.prior == "gaussian") cfg.sampler.prior = PriorFamily::gaussian;
  else throw ConfigError("unknown prior '" + p.prior + "' (use uniform or gaussian)");
  if (p.recon == "bernoulli") cfg.recon = ReconModel::bernoulli;
  else if (p.recon == "gaussian") cfg.recon = ReconModel::gaussian;
  else throw ConfigError("unknown recon '" + p.recon + "' (use bernoulli or gaussian)");
  cfg.image_h = p.side;
  cfg.image_w = p.side;
  cfg.d_z = p.dz;
  cfg.M = p.M;
  cfg.L = p.L;
  cfg.sampler.B = p.B;
  cfg.sampler.b_m = p.bm;
  cfg.lr = p.lr;
  cfg.epochs = p.epochs;
  cfg.r_min = p.r_min;
  cfg.seed = p.seed;
  cfg.validate();
  return cfg;
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for hashing");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::uint64_t hash_dataset(const ImageDataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(ds.count()));
  mix(static_cast<std::uint64_t>(ds.height));
  mix(static_cast<std::uint64_t>(ds.width));
  for (const auto& img : ds.pixels) {
    for (double v : img) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, 8);
      mix(bits);
    }
  }
  return h;
}

struct LoadedData {
  ImageDataset all;
  std::string source;
  std::uint64_t content_hash = 0;
};

LoadedData load_data(const Params& p) {
  LoadedData d;
  d.source = p.data;
  if (p.data.rfind("idx:", 0) == 0) {
    const std::string path = p.data.substr(4);
    d.all = load_idx(path);
    d.content_hash = hash_file(path);
  } else if (p.data.rfind("synth:", 0) == 0) {
    const std::string kind = p.data.substr(6);
    Rng rng(p.seed);
    Rng data_rng = rng.child(9);
    d.all = synth_dataset(kind, p.n, p.side, data_rng);
    d.content_hash = hash_dataset(d.all);
  } else {
    throw ConfigError("data spec '" + p.data + "' must start with idx: or synth:");
  }
  return d;
}

void split_dataset(const ImageDataset& all, double val_frac, ImageDataset& train_set,
                   ImageDataset& val_set) {
  if (!(val_frac > 0.0 && val_frac < 1.0)) {
    throw ConfigError("val_frac must lie strictly between 0 and 1");
  }
  const int n = all.count();
  int n_val = static_cast<int>(std::lround(n * val_frac));
  n_val = std::max(1, std::min(n - 1, n_val));
  train_set.height = val_set.height = all.height;
  train_set.width = val_set.width = all.width;
  train_set.pixels.assign(all.pixels.begin(), all.pixels.end() - n_val);
  val_set.pixels.assign(all.pixels.end() - n_val, all.pixels.end());
}

// The manifest goes down before any heavy work so a crashed run always
// leaves a record of what it was trying to do.
void write_manifest(const fs::path& dir, const std::string& command, const Params& p,
                    const std::string& extra = "") {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw FormatError((dir / "manifest.txt").string() + ": cannot open for writing");
  char num[64];
  out << "command=" << command << "\n";
  out << "model=" << p.model << "\n";
  out << "prior=" << p.prior << "\n";
  out << "recon=" << p.recon << "\n";
  std::snprintf(num, sizeof(num), "%.17g", p.B);
  out << "B=" << num << "\n";
  std::snprintf(num, sizeof(num), "%.17g", p.bm);
  out << "bm=" << num << "\n";
  out << "dz=" << p.dz << "\n";
  out << "M=" << p.M << "\n";
  out << "L=" << p.L << "\n";
  out << "epochs=" << p.epochs << "\n";
  std::snprintf(num, sizeof(num), "%.17g", p.lr);
  out << "lr=" << num << "\n";
  std::snprintf(num, sizeof(num), "%.17g", p.r_min);
  out << "r_min=" << num << "\n";
  out << "seed=" << p.seed << "\n";
  out << "data=" << p.data << "\n";
  out << "n=" << p.n << "\n";
  out << "side=" << p.side << "\n";
  std::snprintf(num, sizeof(num), "%.17g", p.val_frac);
  out << "val_frac=" << num << "\n";
  out << "out=" << p.out << "\n";
  if (!p.checkpoint.empty()) out << "checkpoint=" << p.checkpoint << "\n";
  if (!extra.empty()) out << extra;
}

void write_failure_marker(const fs::path& dir, const std::string& what) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(dir / "failure.txt");
  out << what << "\n";
}

void append_hash_line(const fs::path& dir, std::uint64_t hash) {
  std::ofstream out(dir / "manifest.txt", std::ios::app);
  char line[64];
  std::snprintf(line, sizeof(line), "input_hash=%016llx\n",
                static_cast<unsigned long long>(hash));
  out << line;
}

int cmd_train(const Params& p) {
  const fs::path dir(p.out);
  const EvaeConfig cfg = to_model_config(p);
  write_manifest(dir, "train", p);

  LoadedData data = load_data(p);
  append_hash_line(dir, data.content_hash);
  ImageDataset train_set, val_set;
  split_dataset(data.all, p.val_frac, train_set, val_set);

  TrainResult result = train(train_set, val_set, cfg);
  save_checkpoint(result.model, (dir / "checkpoint.bin").string());
  write_curve_csv(result.curve, (dir / "curves.csv").string());

  const auto& last = result.curve.back();
  std::printf("trained %s for %d epochs on %d/%d images; final val recon %.4f\n", p.model.c_str(),
              cfg.epochs, train_set.count(), val_set.count(), last.recon);
  std::printf("wrote %s and %s\n", (dir / "checkpoint.bin").c_str(), (dir / "curves.csv").c_str());
  return 0;
}

int cmd_eval(const Params& p, bool dz_given) {
  if (p.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  const fs::path dir(p.out);
  write_manifest(dir, "eval", p);

  Model model = load_checkpoint(p.checkpoint);
  if (dz_given && model.config().d_z != p.dz) {
    throw ValidationError("eval: --dz " + std::to_string(p.dz) +
                          " does not match checkpoint d_z " +
                          std::to_string(model.config().d_z));
  }

  Params data_params = p;
  data_params.side = model.config().image_h;
  LoadedData data = load_data(data_params);
  append_hash_line(dir, data.content_hash);

  Rng rng(p.seed);
  Rng recon_rng = rng.child(4);
  ImageDataset recon = reconstruct(model, data.all, recon_rng);

  // Mean per-image reconstruction loss on the hold-out set.
  double recon_loss_sum = 0.0;
  {
    GradGuard guard;
    Rng loss_rng = rng.child(5);
    const auto& cfg = model.config();
    std::vector<int> order(data.all.count());
    for (int i = 0; i < data.all.count(); ++i) order[i] = i;
    for (int first = 0; first < data.all.count(); first += cfg.M) {
      const int count = std::min(cfg.M, data.all.count() - first);
      std::vector<double> flat(static_cast<std::size_t>(count) * cfg.pixels());
      for (int i = 0; i < count; ++i) {
        const auto& img = data.all.pixels[static_cast<std::size_t>(order[first + i])];
        std::copy(img.begin(), img.end(), flat.begin() + static_cast<std::size_t>(i) * cfg.pixels());
      }
      Tensor x = Tensor::from_data(
          {static_cast<std::size_t>(count), static_cast<std::size_t>(cfg.pixels())},
          std::move(flat));
      LossTerms terms = cfg.model == ModelKind::evae ? loss_evae(x, model, loss_rng)
                                                     : loss_vae(x, model, loss_rng);
      recon_loss_sum += terms.recon.value();
    }
  }

  MetricReport report;
  report.n_images = data.all.count();
  report.sharpness = sharpness(recon);
  report.fid_proxy = fid_proxy(data.all, recon);
  {
    std::ostringstream echo;
    echo << "model=" << (model.config().model == ModelKind::evae ? "evae" : "vae")
         << " dz=" << model.config().d_z << " B=" << model.config().sampler.B
         << " seed=" << p.seed;
    report.config_echo = echo.str();
  }

  std::ofstream out(dir / "metrics.txt");
  char line[160];
  std::snprintf(line, sizeof(line), "fid_proxy=%.17g\n", report.fid_proxy);
  out << line;
  std::snprintf(line, sizeof(line), "sharpness=%.17g\n", report.sharpness);
  out << line;
  std::snprintf(line, sizeof(line), "recon_loss=%.17g\n", recon_loss_sum / data.all.count());
  out << line;
  out << "n_images=" << report.n_images << "\n";
  out << "config=" << report.config_echo << "\n";
  out.close();

  // Side-by-side grid: original on the left, reconstruction on the right.
  const int pairs = std::min(8, data.all.count());
  ImageDataset side_by_side;
  side_by_side.height = data.all.height;
  side_by_side.width = data.all.width;
  for (int i = 0; i < pairs; ++i) {
    side_by_side.pixels.push_back(data.all.pixels[i]);
    side_by_side.pixels.push_back(recon.pixels[i]);
  }
  write_pgm_grid(side_by_side, (dir / "recon_grid.pgm").string(), pairs, 2);

  std::printf("eval on %d images: fid_proxy %.4f, sharpness %.6f, recon %.4f\n", report.n_images,
              report.fid_proxy, report.sharpness, recon_loss_sum / data.all.count());
  std::printf("wrote %s and %s\n", (dir / "metrics.txt").c_str(), (dir / "recon_grid.pgm").c_str());
  return 0;
}

int cmd_sample(const Params& p, double B_override) {
  if (p.checkpoint.empty()) throw ConfigError("sample: --checkpoint is required");
  if (p.count < 1) throw ConfigError("sample: count must be positive");
  const fs::path dir(p.out);
  write_manifest(dir, "sample", p);

  Model model = load_checkpoint(p.checkpoint);
  Rng rng(p.seed);
  Rng sample_rng = rng.child(6);
  ImageDataset images = sample_images(model, p.count, sample_rng, B_override);

  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p.count))));
  const int rows = (p.count + cols - 1) / cols;
  write_pgm_grid(images, (dir / "samples.pgm").string(), rows, cols);

  const double B_used =
      B_override > 0.0 ? B_override : model.config().sampler.B;
  std::ofstream meta(dir / "samples_meta.txt");
  char line[96];
  std::snprintf(line, sizeof(line), "count=%d\nB=%.17g\nseed=%llu\n", p.count, B_used,
                static_cast<unsigned long long>(p.seed));
  meta << line;

  std::printf("wrote %d samples (B=%g) to %s\n", p.count, B_used, (dir / "samples.pgm").c_str());
  return 0;
}

Kernel make_kernel(const std::string& name, double mu, double r, const std::string& table) {
  if (!table.empty()) return Kernel::from_table_file(table);
  if (name == "epanechnikov") return Kernel::epanechnikov(mu, r);
  if (name == "gaussian") return Kernel::gaussian(mu, r);
  if (name == "uniform") return Kernel::uniform(mu, r);
  if (name == "quartic") return Kernel::quartic(mu, r);
  throw ConfigError("unknown kernel '" + name +
                    "' (use epanechnikov, gaussian, uniform, quartic, or --table)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-smoothed autoencoder lab"};
  app.require_subcommand(1);

  Params p;
  std::string config_path;
  bool dz_given = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file (flags override)");
    cmd->add_option("--model", p.model, "vae or evae");
    cmd->add_option("--prior", p.prior, "uniform or gaussian");
    cmd->add_option("--recon", p.recon, "bernoulli or gaussian");
    cmd->add_option("--B", p.B, "prior support width / scale");
    cmd->add_option("--bm", p.bm, "latent smoothing step size");
    cmd->add_option("--dz", p.dz, "latent dimension")->check([&dz_given](const std::string&) {
      dz_given = true;
      return std::string();
    });
    cmd->add_option("--M", p.M, "minibatch size");
    cmd->add_option("--L", p.L, "latent draws per step");
    cmd->add_option("--epochs", p.epochs, "training epochs");
    cmd->add_option("--lr", p.lr, "Adam learning rate");
    cmd->add_option("--r-min", p.r_min, "spread floor");
    cmd->add_option("--seed", p.seed, "RNG seed");
    cmd->add_option("--data", p.data, "idx:<path> or synth:{two-blob,bars}");
    cmd->add_option("--n", p.n, "synthetic dataset size");
    cmd->add_option("--side", p.side, "synthetic image side length");
    cmd->add_option("--val-frac", p.val_frac, "validation fraction");
    cmd->add_option("--out", p.out, "output directory");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model, write checkpoint and curves");
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", p.checkpoint, "checkpoint file");

  CLI::App* sample_cmd = app.add_subcommand("sample", "Decode prior draws into an image grid");
  double sample_B = 0.0;
  sample_cmd->add_option("--checkpoint", p.checkpoint, "checkpoint file");
  sample_cmd->add_option("--count", p.count, "number of samples");
  sample_cmd->add_option("--B", sample_B, "override the prior scale");
  sample_cmd->add_option("--seed", p.seed, "RNG seed");
  sample_cmd->add_option("--out", p.out, "output directory");
  sample_cmd->add_option("--config", config_path, "key=value config file (flags override)");

  CLI::App* lab_cmd = app.add_subcommand("lab", "Kernel functional and bound experiments");
  lab_cmd->require_subcommand(1);

  std::string lab_kernel = "epanechnikov";
  std::string lab_table;
  double lab_mu = 0.0;
  double lab_r = 1.0;
  int lab_points = 4001;
  CLI::App* ik_cmd = lab_cmd->add_subcommand("ik", "Roughness functional of one kernel");
  ik_cmd->add_option("--kernel", lab_kernel, "epanechnikov, gaussian, uniform, quartic");
  ik_cmd->add_option("--table", lab_table, "tabulated kernel file (overrides --kernel)");
  ik_cmd->add_option("--mu", lab_mu, "kernel location");
  ik_cmd->add_option("--r", lab_r, "kernel scale");
  ik_cmd->add_option("--points", lab_points, "quadrature points (odd, >= 1001)");
  ik_cmd->add_option("--out", p.out, "output directory");

  CLI::App* opt_cmd =
      lab_cmd->add_subcommand("optimality", "Compare the variance-matched kernel family");
  opt_cmd->add_option("--mu", lab_mu, "family location");
  opt_cmd->add_option("--r", lab_r, "family scale");
  opt_cmd->add_option("--points", lab_points, "quadrature points (odd, >= 1001)");
  opt_cmd->add_option("--out", p.out, "output directory");

  std::size_t ise_m = 10000;
  double ise_gamma = 0.23;
  std::size_t ise_R = 200;
  int ise_threads = 0;
  CLI::App* ise_cmd =
      lab_cmd->add_subcommand("ise", "Integrated-squared-error statistic of the KDE");
  ise_cmd->add_option("--m", ise_m, "sample size per replication");
  ise_cmd->add_option("--gamma", ise_gamma, "bandwidth exponent, strictly inside (2/9, 1/4)");
  ise_cmd->add_option("--R", ise_R, "replications");
  ise_cmd->add_option("--r", lab_r, "kernel scale");
  ise_cmd->add_option("--threads", ise_threads, "worker cap (0: EVAE_LAB_THREADS or hardware)");
  ise_cmd->add_option("--seed", p.seed, "RNG seed");
  ise_cmd->add_option("--out", p.out, "output directory");

  double bound_mu = 0.0;
  double bound_r = 1.0;
  // Wide enough that the smoothed posterior sits inside the prior box; the
  // training default B = 0.1 would spill almost all of its mass outside.
  double bound_B = 2.0;
  std::size_t bound_n = 100;
  std::size_t bound_nmc = 100000;
  CLI::App* bound_cmd = lab_cmd->add_subcommand("bound", "Divergence chain of the smoothed posterior");
  bound_cmd->add_option("--mu", bound_mu, "posterior location");
  bound_cmd->add_option("--r", bound_r, "posterior spread");
  bound_cmd->add_option("--B", bound_B, "prior support width");
  bound_cmd->add_option("--bm", p.bm, "latent smoothing step size");
  bound_cmd->add_option("--n", bound_n, "sample size in the analytic cap");
  bound_cmd->add_option("--nmc", bound_nmc, "Monte Carlo draws");
  bound_cmd->add_option("--seed", p.seed, "RNG seed");
  bound_cmd->add_option("--out", p.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const fs::path out_dir(p.out);
  try {
    if (!config_path.empty()) apply_config_file(p, config_path);
    // Re-apply flag values on top of the config file: CLI11 already wrote
    // them into p before the file was read, so a second parse restores them.
    if (!config_path.empty()) {
      try {
        app.clear();
        app.parse(argc, argv);
      } catch (const CLI::ParseError&) {
        return 1;
      }
    }

    if (train_cmd->parsed()) return cmd_train(p);
    if (eval_cmd->parsed()) return cmd_eval(p, dz_given);
    if (sample_cmd->parsed()) return cmd_sample(p, sample_B);

    if (ik_cmd->parsed()) {
      fs::create_directories(out_dir);
      Kernel k = make_kernel(lab_kernel, lab_mu, lab_r, lab_table);
      QuadratureSpec q;
      q.points = lab_points;
      const double i_value = functional_I(k, q);
      const double j_value = functional_J(k, q);
      std::ofstream csv(out_dir / "ik.csv");
      char line[160];
      std::snprintf(line, sizeof(line), "kernel,mu,r,i_value,j_value\n%s,%.17g,%.17g,%.17g,%.17g\n",
                    k.name().c_str(), k.mu(), k.r(), i_value, j_value);
      csv << line;
      std::printf("I(%s, mu=%g, r=%g) = %.9f\nJ = %.9f\n", k.name().c_str(), k.mu(), k.r(),
                  i_value, j_value);
      return 0;
    }
    if (opt_cmd->parsed()) {
      fs::create_directories(out_dir);
      QuadratureSpec q;
      q.points = lab_points;
      const std::vector<Kernel> family = {
          Kernel::epanechnikov(lab_mu, lab_r), Kernel::gaussian(lab_mu, lab_r),
          Kernel::uniform(lab_mu, lab_r), Kernel::quartic(lab_mu, lab_r)};
      RoughnessReport report = verify_min_roughness(family, q);
      std::ofstream csv(out_dir / "optimality.csv");
      write_csv(report, csv);
      std::printf("minimum roughness: %s (I = %.9f)\n", report.rows[report.best].kernel.c_str(),
                  report.rows[report.best].i_value);
      return 0;
    }
    if (ise_cmd->parsed()) {
      fs::create_directories(out_dir);
      IseStatSpec spec;
      spec.density = [](double) { return 1.0; };  // Unif[0,1] inside the window
      spec.sampler = [](Rng& r) { return r.uniform01(); };
      spec.kernel = Kernel::epanechnikov(0.0, lab_r);
      spec.gamma = ise_gamma;
      spec.m = ise_m;
      spec.R = ise_R;
      spec.validate();
      Rng rng(p.seed);
      IseStatResult res = simulate_ise_stat(spec, rng, ise_threads);
      std::ofstream csv(out_dir / "ise.csv");
      char line[200];
      std::snprintf(line, sizeof(line), "m,gamma,R,mean,se,limit,bandwidth\n");
      csv << line;
      std::snprintf(line, sizeof(line), "%zu,%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n", spec.m,
                    spec.gamma, spec.R, res.mean, res.se, res.limit, res.bandwidth);
      csv << line;
      std::printf("mean %.6f (se %.6f) vs limit %.6f at m=%zu, R=%zu\n", res.mean, res.se,
                  res.limit, spec.m, spec.R);
      return 0;
    }
    if (bound_cmd->parsed()) {
      fs::create_directories(out_dir);
      SamplerConfig scfg;
      scfg.B = bound_B;
      scfg.b_m = p.bm;
      scfg.prior = PriorFamily::uniform;
      Rng rng(p.seed);
      BoundCheck res = kl_bound_chain_check(bound_mu, bound_r, scfg, bound_n, bound_nmc, rng);
      std::ofstream csv(out_dir / "bound.csv");
      char line[256];
      std::snprintf(line, sizeof(line),
                    "mu,r,B,bm,n,kl_mc,kl_se,chi2_mc,chi2_se,analytic_cap,outside_mass\n");
      csv << line;
      std::snprintf(line, sizeof(line),
                    "%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", bound_mu,
                    bound_r, scfg.B, scfg.b_m, bound_n, res.kl_mc, res.kl_se, res.chi2_mc,
                    res.chi2_se, res.analytic_cap, res.outside_mass);
      csv << line;
      std::printf("kl %.6g (se %.2g) <= chi2 %.6g (se %.2g), cap %.6g, outside mass %.3g\n",
                  res.kl_mc, res.kl_se, res.chi2_mc, res.chi2_se, res.analytic_cap,
                  res.outside_mass);
      return 0;
    }
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 1;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 1;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_failure_marker(out_dir, e.what());
    return 3;
  }
}
