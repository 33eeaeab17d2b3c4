#include "blindsr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <thread>

#include "blindsr/degradation.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/estimators.hpp"
#include "blindsr/gem.hpp"
#include "blindsr/io_util.hpp"
#include "blindsr/kernel.hpp"
#include "blindsr/metrics.hpp"
#include "blindsr/parallel.hpp"
#include "blindsr/png_io.hpp"
#include "blindsr/rng.hpp"

namespace fs = std::filesystem;

namespace blindsr::cli {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

// Options shared by every subcommand that touches the degradation model.
struct ModelOptions {
  int scale = 2;
  double sigma = 0.01;
  int support = 21;
  int components = 3;
  std::vector<double> prior_rates;
  std::uint64_t seed = 0;
  int jobs = 0;

  void add_to(CLI::App& app) {
    app.add_option("--scale", scale, "Downsampling factor s")->capture_default_str();
    app.add_option("--sigma", sigma, "Noise standard deviation sigma_n")
        ->capture_default_str();
    app.add_option("--support", support, "Kernel support P (odd)")->capture_default_str();
    app.add_option("--components", components, "Mixture components L")
        ->capture_default_str();
    app.add_option("--prior-rates", prior_rates,
                   "Prior exponential rates, comma separated (default 0.5 each)")
        ->delimiter(',');
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--jobs", jobs, "Worker threads (0 = logical cores)")
        ->capture_default_str();
  }

  ExponentialParams prior() const {
    if (prior_rates.empty()) return ExponentialParams::uniform(components, 0.5);
    if (static_cast<int>(prior_rates.size()) != components) {
      throw DimensionError("--prior-rates has " + std::to_string(prior_rates.size()) +
                           " values but --components is " + std::to_string(components));
    }
    return ExponentialParams(prior_rates);
  }

  DegradationConfig degradation() const {
    DegradationConfig cfg;
    cfg.scale = scale;
    cfg.sigma_n = sigma;
    cfg.support = support;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct SynthCommand {
  ModelOptions model;
  std::string hr_dir;
  std::string out_dir;
  bool anisotropic = false;

  void add_to(CLI::App& app) {
    app.add_option("--hr-dir", hr_dir, "Directory of HR PNG images")->required();
    app.add_option("--out", out_dir, "Output dataset directory")->required();
    app.add_flag("--anisotropic", anisotropic, "Draw anisotropic Gaussian kernels");
    model.add_to(app);
  }

  void validate() const {
    (void)model.degradation();
    (void)model.prior();
  }

  int run(std::ostream& out) const {
    const DegradationConfig cfg = model.degradation();
    SynthOptions opts;
    opts.prior = model.prior();
    opts.anisotropic = anisotropic;
    opts.jobs = model.jobs;
    if (!fs::is_directory(hr_dir)) throw IoError("not a directory: " + hr_dir);
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(hr_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        images.push_back(entry.path());
      }
    }
    std::sort(images.begin(), images.end());
    const auto records = synth_dataset(images, cfg, out_dir, opts);
    out << "wrote " << records.size() << " records to "
        << (fs::path(out_dir) / "manifest.jsonl").string() << "\n";
    return kOk;
  }
};

struct SolveCommand {
  ModelOptions model;
  std::string lr;
  std::string manifest;
  std::string out_path;
  std::string kernel_out;
  std::string trace;
  std::vector<double> b2;
  bool true_b2 = false;
  GemConfig gem;

  void add_to(CLI::App& app) {
    auto* in = app.add_option_group("input");
    in->add_option("--lr", lr, "Single LR PNG");
    in->add_option("--manifest", manifest, "Dataset manifest (batch mode)");
    in->require_option(1);
    app.add_option("--out", out_path,
                   "SR PNG (single) or output directory (batch: sr/, kernels/, traces/)")
        ->required();
    app.add_option("--kernel-out", kernel_out, "Estimated kernel text file (single)");
    app.add_option("--trace", trace, "ELBO trace CSV (single, blind)");
    app.add_option("--b2", b2, "Known bandwidths b^2, comma separated: non-blind mode")
        ->delimiter(',');
    app.add_flag("--true-b2", true_b2,
                 "Batch mode: non-blind with each record's b2_true");
    app.add_option("--max-outer", gem.max_outer, "Outer GEM iterations")
        ->capture_default_str();
    app.add_option("--e-steps", gem.e_steps, "Gradient steps per E-step")
        ->capture_default_str();
    app.add_option("--cg-iters", gem.m_cg_iters, "CG iterations per M-step")
        ->capture_default_str();
    app.add_option("--tol", gem.tol_rel, "Relative ELBO stopping tolerance")
        ->capture_default_str();
    app.add_option("--ridge", gem.ridge, "Weight of the bicubic anchor")
        ->capture_default_str();
    app.add_option("--n-mc", gem.n_mc, "Monte Carlo draws")->capture_default_str();
    model.add_to(app);
  }

  GemConfig config(std::size_t index) const {
    GemConfig cfg = gem;
    cfg.degradation = model.degradation();
    cfg.lambda_prior = model.prior();
    cfg.seed = derive_seed(model.seed, "solve", index);
    cfg.validate();
    return cfg;
  }

  std::optional<BandwidthVector> fixed_b2() const {
    if (b2.empty()) return std::nullopt;
    return BandwidthVector(b2);
  }

  struct Outcome {
    Image sr;
    Kernel kernel;
    std::optional<std::string> trace;
    std::string summary;
  };

  static std::string trace_csv(const GemState& s) {
    std::string csv = "half_step,phase,elbo,std_error\n";
    for (std::size_t i = 0; i < s.elbo_trace.size(); ++i) {
      csv += std::to_string(i + 1) + (i % 2 == 0 ? ",E," : ",M,") +
             fmt(s.elbo_trace[i].value) + "," + fmt(s.elbo_trace[i].std_error) + "\n";
    }
    return csv;
  }

  static Outcome solve_one(const Image& y, const GemConfig& cfg,
                           const std::optional<BandwidthVector>& known) {
    Outcome o;
    const int p = cfg.degradation.support;
    if (known) {
      o.sr = solve_nonblind(y, *known, cfg);
      o.kernel = make_mixture_kernel(*known, p);
      o.summary = "non-blind b2=" + fmt_list(known->values());
      return o;
    }
    const GemState s = solve_blind(y, cfg);
    const BandwidthVector mean = posterior_mean_bandwidth(s.lambda_hat);
    o.sr = s.x_hat;
    o.kernel = make_mixture_kernel(mean, p);
    o.trace = trace_csv(s);
    o.summary = "blind b2_mean=" + fmt_list(mean.values()) +
                " outer=" + std::to_string(s.outer_iter) + " elbo=" +
                fmt((s.elbo_trace.empty() ? s.initial : s.elbo_trace.back()).value);
    if (s.cg_warning) o.summary += " (cg breakdown)";
    return o;
  }

  void validate() const {
    const GemConfig cfg = config(0);
    if (!b2.empty()) {
      if (b2.size() != cfg.lambda_prior.size()) {
        throw DimensionError("--b2 needs " + std::to_string(cfg.lambda_prior.size()) +
                             " values");
      }
      (void)make_mixture_kernel(BandwidthVector(b2), model.support);
    }
    if (!lr.empty() && true_b2) throw DomainError("--true-b2 needs --manifest");
    if (true_b2 && !b2.empty()) throw DomainError("--true-b2 and --b2 are exclusive");
  }

  int run_single(std::ostream& out, std::ostream& err) const {
    if (!fs::exists(lr)) throw IoError("input not found: " + lr);
    const Outcome o = solve_one(read_png(lr), config(0), fixed_b2());
    write_png(out_path, o.sr);
    if (!kernel_out.empty()) write_kernel_text(kernel_out, o.kernel);
    if (!trace.empty()) {
      if (o.trace) {
        write_file_atomic(trace, *o.trace);
      } else {
        err << "note: --trace is ignored in non-blind mode\n";
      }
    }
    out << fs::path(lr).stem().string() << " " << o.summary << "\n";
    return kOk;
  }

  int run_batch(std::ostream& out, std::ostream& err) const {
    if (!fs::exists(manifest)) throw IoError("input not found: " + manifest);
    const auto records = read_manifest(manifest);
    const fs::path base = fs::path(manifest).parent_path();
    const fs::path dir(out_path);
    for (const char* sub : {"sr", "kernels", "traces"}) fs::create_directories(dir / sub);
    const auto known = fixed_b2();
    std::vector<std::string> lines(records.size());
    std::vector<int> failed(records.size(), 0);
    parallel_for(records.size(), model.jobs, [&](std::size_t i) {
      const DatasetRecord& r = records[i];
      try {
        const GemConfig cfg = config(i);
        std::optional<BandwidthVector> b = known;
        if (true_b2) {
          if (!r.b2_true) throw DomainError("record " + r.id + " has no b2_true");
          b = *r.b2_true;
        }
        const fs::path lr_path = base / r.lr_path;
        if (!fs::exists(lr_path)) throw IoError("input not found: " + lr_path.string());
        const Image y = read_png(lr_path);
        const Outcome o = solve_one(y, cfg, b);
        write_png(dir / "sr" / (r.id + ".png"), o.sr);
        write_kernel_text(dir / "kernels" / (r.id + ".txt"), o.kernel);
        if (o.trace) write_file_atomic(dir / "traces" / (r.id + ".csv"), *o.trace);
        lines[i] = r.id + " " + o.summary;
      } catch (const std::exception& e) {
        failed[i] = 1;
        lines[i] = r.id + " FAILED: " + e.what();
      }
    });
    int n_failed = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      (failed[i] ? err : out) << lines[i] << "\n";
      n_failed += failed[i];
    }
    if (n_failed > 0) {
      err << n_failed << " of " << records.size() << " images failed\n";
      return kRuntimeError;
    }
    return kOk;
  }

  int run(std::ostream& out, std::ostream& err) const {
    return lr.empty() ? run_batch(out, err) : run_single(out, err);
  }
};

struct EvalCommand {
  std::string sr_dir;
  std::string hr_dir;
  std::string out_csv;
  int crop = 0;
  int jobs = 0;

  void add_to(CLI::App& app) {
    app.add_option("--sr-dir", sr_dir, "Directory of restored PNGs")->required();
    app.add_option("--hr-dir", hr_dir, "Directory of ground-truth PNGs")->required();
    app.add_option("--out", out_csv, "Per-image metrics CSV");
    app.add_option("--crop", crop, "Pixels shaved from each border before scoring")
        ->capture_default_str();
    app.add_option("--jobs", jobs, "Worker threads (0 = logical cores)")
        ->capture_default_str();
  }

  static std::map<std::string, fs::path> list_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::map<std::string, fs::path> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        ids[entry.path().stem().string()] = entry.path();
      }
    }
    return ids;
  }

  void validate() const {
    if (crop < 0) throw DomainError("--crop must be >= 0");
  }

  int run(std::ostream& out, std::ostream& err) const {
    const auto sr = list_pngs(sr_dir);
    const auto hr = list_pngs(hr_dir);
    std::vector<std::string> ids;
    std::vector<std::string> unmatched;
    for (const auto& [id, path] : sr) (hr.count(id) ? ids : unmatched).push_back(id);
    for (const auto& [id, path] : hr) {
      if (!sr.count(id)) unmatched.push_back(id);
    }
    if (!unmatched.empty() || ids.empty()) {
      std::sort(unmatched.begin(), unmatched.end());
      err << "unmatched ids:";
      for (const auto& id : unmatched) err << " " << id;
      err << (ids.empty() ? " (no common ids)\n" : "\n");
      return kRuntimeError;
    }
    std::vector<double> psnr_v(ids.size());
    std::vector<double> ssim_v(ids.size());
    parallel_for(ids.size(), jobs, [&](std::size_t i) {
      Image a = rgb_to_y(read_png(sr.at(ids[i])));
      Image b = rgb_to_y(read_png(hr.at(ids[i])));
      if (crop > 0) {
        a = shave_border(a, crop);
        b = shave_border(b, crop);
      }
      psnr_v[i] = psnr(a, b);
      ssim_v[i] = ssim(a, b);
    });
    std::string csv = "id,psnr,ssim\n";
    double mp = 0.0;
    double ms = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      csv += ids[i] + "," + fmt(psnr_v[i]) + "," + fmt(ssim_v[i]) + "\n";
      mp += psnr_v[i];
      ms += ssim_v[i];
    }
    mp /= static_cast<double>(ids.size());
    ms /= static_cast<double>(ids.size());
    if (!out_csv.empty()) write_file_atomic(out_csv, csv);
    out << "images " << ids.size() << "\n"
        << "mean_psnr " << fmt(mp) << "\n"
        << "mean_ssim " << fmt(ms) << "\n";
    return kOk;
  }
};

struct TrainCommand {
  ModelOptions model;
  std::string manifest;
  std::string unlabeled;
  std::string out_path;
  std::string curve;
  std::string init;
  LossWeights weights;
  TrainConfig train_cfg;
  int cg_steps = 5;

  void add_to(CLI::App& app) {
    app.add_option("--manifest", manifest, "Labeled manifest (records with HR)")
        ->required();
    app.add_option("--unlabeled", unlabeled, "Manifest of unlabeled LR images");
    app.add_option("--alpha-g", weights.alpha_g, "Weight of the ELBO term")
        ->capture_default_str();
    app.add_option("--alpha-r", weights.alpha_r, "Weight of the supervised term")
        ->capture_default_str();
    app.add_option("--epochs", train_cfg.epochs, "Training epochs")->capture_default_str();
    app.add_option("--batch", train_cfg.batch_size, "Minibatch size")
        ->capture_default_str();
    app.add_option("--lr", train_cfg.learning_rate, "Adam learning rate")
        ->capture_default_str();
    app.add_option("--n-mc", train_cfg.n_mc, "Monte Carlo draws per loss")
        ->capture_default_str();
    app.add_option("--divergence-threshold", train_cfg.divergence_threshold,
                   "Abort with exit 3 when the loss exceeds this")
        ->capture_default_str();
    app.add_option("--cg-steps", cg_steps, "Unrolled CG steps T of the restorer")
        ->capture_default_str();
    app.add_option("--init", init, "Initial params JSON (default: zeros)");
    app.add_option("--out", out_path, "Output params JSON")->required();
    app.add_option("--curve", curve, "Learning-curve CSV");
    model.add_to(app);
  }

  static std::vector<DatasetRecord> load(const std::string& path) {
    if (!fs::exists(path)) throw IoError("input not found: " + path);
    return read_manifest(path);
  }

  TrainConfig config() const {
    TrainConfig tc = train_cfg;
    tc.seed = derive_seed(model.seed, "train");
    tc.validate();
    return tc;
  }

  void validate() const {
    (void)model.degradation();
    (void)model.prior();
    weights.validate();
    (void)config();
    if (init.empty()) EstimatorParams::zeros(model.components, model.support, cg_steps).validate();
  }

  int run(std::ostream& out, std::ostream&) const {
    const DegradationConfig cfg = model.degradation();
    const ExponentialParams prior = model.prior();
    const TrainConfig tc = config();
    const EstimatorParams params =
        init.empty() ? EstimatorParams::zeros(model.components, model.support, cg_steps)
                     : read_params(init);

    TrainingSet data;
    const fs::path base = fs::path(manifest).parent_path();
    for (const DatasetRecord& r : load(manifest)) {
      if (!r.hr_path) throw DomainError("record " + r.id + " in " + manifest + " has no HR image");
      LabeledSample s{read_png(base / *r.hr_path), read_png(base / r.lr_path), std::nullopt};
      if (r.kernel_path) s.kernel = read_kernel_text(base / *r.kernel_path);
      data.labeled.push_back(std::move(s));
    }
    if (!unlabeled.empty()) {
      const fs::path ubase = fs::path(unlabeled).parent_path();
      for (const DatasetRecord& r : load(unlabeled)) {
        data.unlabeled.push_back(read_png(ubase / r.lr_path));
      }
    }
    out << "labeled " << data.labeled.size() << "\n"
        << "unlabeled " << data.unlabeled.size() << "\n";
    const TrainResult result = train(data, weights, tc, params, prior, cfg);
    write_params(out_path, result.params);
    if (!curve.empty()) {
      std::string csv = "epoch,loss\n";
      for (std::size_t e = 0; e < result.curve.size(); ++e) {
        csv += std::to_string(e) + "," + fmt(result.curve[e]) + "\n";
      }
      write_file_atomic(curve, csv);
    }
    out << "eta " << fmt(result.eta) << "\n"
        << "final_loss " << fmt(result.curve.back()) << "\n";
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blind super-resolution by variational generalized EM", "blindsr"};
  app.set_config("--config", "", "TOML-style config file; [synth]/[solve]/[train]/[eval] sections");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  SynthCommand synth;
  SolveCommand solve;
  TrainCommand train_cmd;
  EvalCommand eval;
  auto* synth_app = app.add_subcommand("synth", "Degrade HR images into a dataset");
  auto* solve_app = app.add_subcommand("solve", "Blind or non-blind restoration");
  auto* train_app = app.add_subcommand("train", "Fit the estimator parameters");
  auto* eval_app = app.add_subcommand("eval", "PSNR/SSIM on the Y channel");
  synth.add_to(*synth_app);
  solve.add_to(*solve_app);
  train_cmd.add_to(*train_app);
  eval.add_to(*eval_app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (synth_app->parsed()) synth.validate();
    if (solve_app->parsed()) solve.validate();
    if (train_app->parsed()) train_cmd.validate();
    if (eval_app->parsed()) eval.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (synth_app->parsed()) return synth.run(out);
    if (solve_app->parsed()) return solve.run(out, err);
    if (train_app->parsed()) return train_cmd.run(out, err);
    return eval.run(out, err);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace blindsr::cli
