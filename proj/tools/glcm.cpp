// glcm: command-line front end for phantom generation, training, suppression, fusion,
// evaluation and timing.
//
// exit codes: 0 ok, 2 bad configuration / arguments / files, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "glcm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace glcm;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// ---------------------------------------------------------------- phantom-gen

struct PhantomGenArgs {
  std::uint64_t seed = 0;
  int count = 16;
  int size = 64;
  double rib_scale = 1.0;
  double texture_scale = 1.0;
  std::string out_dir;
};

void cmd_phantom_gen(const PhantomGenArgs& a) {
  PhantomOptions opt;
  opt.rib_amplitude_scale = a.rib_scale;
  opt.texture_scale = a.texture_scale;
  const auto samples = generate_phantoms(a.seed, a.count, a.size, opt);
  write_dataset(a.out_dir, samples);
  std::printf("wrote %d phantoms (%dx%d, seed %llu) to %s\n", a.count, a.size, a.size,
              static_cast<unsigned long long>(a.seed), a.out_dir.c_str());
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
  std::string data_dir;
  int phantoms = 64;
  std::uint64_t phantom_seed = 7;
  int size = 64;
  std::string codec = "identity";
  int steps = kDefaultSteps;
  std::vector<int> hidden{8, 8};
  int epochs = 25;
  int batch_size = 8;
  int max_steps = 0;
  double lr = 1e-2;
  std::uint64_t seed = 7;
  int log_every = 50;
  std::string out;
};

void cmd_train(const TrainArgs& a) {
  const auto codec = make_codec(a.codec);
  std::vector<TrainingExample> data;
  if (!a.data_dir.empty()) {
    for (const auto& e : read_dataset(a.data_dir))
      for (auto& ex : training_examples(e.cxr, e.soft, e.lung, *codec)) data.push_back(std::move(ex));
  } else {
    const auto samples = generate_phantoms(a.phantom_seed, a.phantoms, a.size);
    data = training_examples(samples, *codec);
  }
  const Schedule schedule = make_schedule(a.steps, kDefaultBetaStart, kDefaultBetaEnd);

  ToyArchitecture arch;
  arch.latent_channels = data.front().target.channels;
  arch.hidden = a.hidden;
  arch.timesteps = a.steps;
  ToyDenoiser model = ToyDenoiser::initialized(arch, a.seed);

  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch_size;
  opt.lr = a.lr;
  opt.seed = a.seed;
  opt.max_steps = a.max_steps;
  const auto losses = train(model, data, schedule, opt);

  for (std::size_t i = 0; i < losses.size(); ++i)
    if (a.log_every > 0 && (i % a.log_every == 0 || i + 1 == losses.size()))
      std::printf("step %5zu  loss %.6f\n", i, losses[i]);
  const std::size_t k = std::min<std::size_t>(10, losses.size());
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < k; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 1 - i];
  }
  std::printf("%zu steps, %zu examples, %zu parameters; loss %.6f -> %.6f (mean of %zu)\n",
              losses.size(), data.size(), model.parameters().size(), head / k, tail / k, k);
  save_checkpoint(a.out, model);
  std::printf("checkpoint: %s\n", a.out.c_str());
}

// ------------------------------------------------------------------- suppress

struct SuppressArgs {
  std::string config;
  // command-line overrides; empty means "keep the config file value"
  std::string input, mask, model, path, codec, mask_provider, inner, out_prefix, ground_truth,
      bone_mask, steps, alpha_l, seed, tol, shared_noise;
};

void cmd_suppress(const SuppressArgs& a) {
  KeyValueConfig kv = a.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(a.config);
  const std::pair<const char*, const std::string*> overrides[] = {
      {"input", &a.input},         {"mask", &a.mask},
      {"denoiser", &a.model},      {"path", &a.path},
      {"codec", &a.codec},         {"mask_provider", &a.mask_provider},
      {"inner_term", &a.inner},    {"out_prefix", &a.out_prefix},
      {"ground_truth", &a.ground_truth}, {"bone_mask", &a.bone_mask},
      {"steps", &a.steps},         {"alpha_l", &a.alpha_l},
      {"seed", &a.seed},           {"fusion_tol", &a.tol},
      {"shared_noise", &a.shared_noise}};
  for (const auto& [key, value] : overrides)
    if (!value->empty()) kv.set(key, *value);
  const PipelineConfig cfg = pipeline_config_from(kv);
  if (cfg.input.empty()) throw ConfigError("suppress: no input image (--input or input = ...)");

  PipelineInputs in;
  in.cxr = read_image(cfg.input);
  if (!cfg.mask.empty()) in.mask = read_mask(cfg.mask);
  if (!cfg.ground_truth.empty()) in.ground_truth = read_image(cfg.ground_truth);
  if (!cfg.bone_mask.empty()) in.bone_mask = read_mask(cfg.bone_mask);
  const std::string prefix = cfg.out_prefix.empty() ? "glcm_out/" : cfg.out_prefix;

  const PipelineResult r = run_pipeline(cfg, in, nullptr, prefix);
  std::printf("path %s, %d steps, alpha_l %g, seed %llu, mask %zu px", to_string(cfg.sampler.path),
              cfg.sampler.steps, cfg.sampler.alpha_l,
              static_cast<unsigned long long>(cfg.sampler.seed), r.mask.count());
  if (r.fused) std::printf(", fusion %d CG iterations", r.fusion_iterations);
  std::printf("\nartifacts under %s\n", prefix.c_str());
  if (!r.report.rows.empty()) {
    write_table(std::cout, r.report);
    std::ofstream csv(artifact_path(prefix, "metrics.csv"));
    write_csv(csv, r.report);
  }
}

// ----------------------------------------------------------------------- fuse

struct FuseArgs {
  std::string global, local, mask, out;
  double tol = kDefaultFusionTol;
  int max_iter = 0;
};

void cmd_fuse(const FuseArgs& a) {
  const Image g = read_image(a.global), l = read_image(a.local);
  const Mask m = read_mask(a.mask);
  const FusionResult f = poisson_solve(g, l, m, a.tol, a.max_iter);
  Image out = f.image;
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  write_image(a.out, out);
  std::printf("%zu unknowns, %d CG iterations, relative residual %.3g -> %s\n", f.unknowns,
              f.iterations, f.relative_residual, a.out.c_str());
}

// ----------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred, soft, cxr, bone_mask, lung_mask, id = "image";
  std::string data_dir, pred_pattern;
  std::string csv;
  double psnr_cap = kDefaultPsnrCap;
};

Mask bone_mask_from(const Image& cxr, const Image& soft) {
  Mask m(cxr.height, cxr.width);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.bits[i] = cxr.pixels[i] - soft.pixels[i] > kBoneThreshold ? 1 : 0;
  return m;
}

std::string expand(std::string pattern, const std::string& id) {
  for (std::size_t p; (p = pattern.find("{id}")) != std::string::npos;) pattern.replace(p, 4, id);
  return pattern;
}

void cmd_eval(const EvalArgs& a) {
  MetricsReport report;
  if (!a.data_dir.empty()) {
    if (a.pred_pattern.empty()) throw ConfigError("eval: --data-dir needs --pred-pattern");
    for (const auto& e : read_dataset(a.data_dir))
      report.rows.push_back(evaluate_image(e.id, read_image(expand(a.pred_pattern, e.id)), e.cxr,
                                           e.soft, e.bone, e.lung, a.psnr_cap));
  } else {
    if (a.pred.empty() || a.soft.empty() || a.cxr.empty())
      throw ConfigError("eval: need --pred, --soft and --cxr (or --data-dir)");
    const Image pred = read_image(a.pred), soft = read_image(a.soft), cxr = read_image(a.cxr);
    require_same_shape(pred, soft, "eval");
    require_same_shape(pred, cxr, "eval");
    const Mask bone = a.bone_mask.empty() ? bone_mask_from(cxr, soft) : read_mask(a.bone_mask);
    const Mask lung = a.lung_mask.empty() ? threshold_lung_mask(cxr) : read_mask(a.lung_mask);
    report.rows.push_back(evaluate_image(a.id, pred, cxr, soft, bone, lung, a.psnr_cap));
  }
  write_table(std::cout, report);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv);
    if (!os) throw ConfigError("cannot write " + a.csv);
    write_csv(os, report);
  }
}

// ---------------------------------------------------------------------- bench

struct BenchArgs {
  std::string config, model = "oracle", io_prefix;
  int size = 256;
  int reps = 3;
  int steps = 0;
  std::uint64_t seed = 1;
};

void cmd_bench(const BenchArgs& a) {
  KeyValueConfig kv = a.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(a.config);
  kv.set("denoiser", a.model);
  if (a.steps > 0) kv.set("steps", std::to_string(a.steps));
  const PipelineConfig cfg = pipeline_config_from(kv);
  const PhantomSample s = make_phantom(a.seed, 0, a.size);
  PipelineInputs in;
  in.cxr = s.cxr;
  in.ground_truth = s.soft;
  in.bone_mask = s.bone_mask;
  in.phantom = &s.params;
  const BenchReport b = bench(cfg, in, nullptr, a.reps, a.io_prefix);
  std::printf("phantom %dx%d seed %llu, denoiser %s\n", a.size, a.size,
              static_cast<unsigned long long>(a.seed), cfg.denoiser.c_str());
  write_bench(std::cout, b);
}

// -------------------------------------------------------------- schedule-dump

struct ScheduleArgs {
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart, beta_end = kDefaultBetaEnd;
  double sigma_data = kDefaultSigmaData, timestep_scale = kDefaultTimestepScale;
  std::string out = "-";
};

void cmd_schedule_dump(const ScheduleArgs& a) {
  const Schedule s = make_schedule(a.steps, a.beta_start, a.beta_end, a.sigma_data, a.timestep_scale);
  if (a.out == "-") {
    dump_schedule(std::cout, s);
    return;
  }
  std::ofstream os(a.out);
  if (!os) throw ConfigError("cannot write " + a.out);
  dump_schedule(os, s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glcm: latent-consistency bone suppression on chest radiographs"};
  app.require_subcommand(1);

  PhantomGenArgs pg;
  auto* c_pg = app.add_subcommand("phantom-gen", "write a seeded phantom dataset");
  c_pg->add_option("--seed", pg.seed);
  c_pg->add_option("--count", pg.count)->check(CLI::PositiveNumber);
  c_pg->add_option("--size", pg.size);
  c_pg->add_option("--rib-scale", pg.rib_scale, "multiplier on rib amplitudes (0 = no bones)");
  c_pg->add_option("--texture-scale", pg.texture_scale);
  c_pg->add_option("--out-dir", pg.out_dir)->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train the toy noise estimator");
  c_tr->add_option("--data-dir", tr.data_dir, "dataset from phantom-gen (default: generate)");
  c_tr->add_option("--phantoms", tr.phantoms, "phantoms to generate without --data-dir");
  c_tr->add_option("--phantom-seed", tr.phantom_seed);
  c_tr->add_option("--size", tr.size);
  c_tr->add_option("--codec", tr.codec);
  c_tr->add_option("--steps", tr.steps, "diffusion steps T");
  c_tr->add_option("--hidden", tr.hidden, "hidden channel widths")->delimiter(',');
  c_tr->add_option("--epochs", tr.epochs);
  c_tr->add_option("--batch-size", tr.batch_size);
  c_tr->add_option("--max-steps", tr.max_steps, "stop after this many SGD steps (0 = all epochs)");
  c_tr->add_option("--lr", tr.lr);
  c_tr->add_option("--seed", tr.seed);
  c_tr->add_option("--log-every", tr.log_every);
  c_tr->add_option("--out", tr.out)->required();

  SuppressArgs sp;
  auto* c_sp = app.add_subcommand("suppress", "run the bone-suppression pipeline on one image");
  c_sp->add_option("--config", sp.config, "key = value config file");
  c_sp->add_option("--input", sp.input);
  c_sp->add_option("--mask", sp.mask, "lung mask (default: mask provider)");
  c_sp->add_option("--model", sp.model, "'oracle' or a checkpoint from train");
  c_sp->add_option("--ground-truth", sp.ground_truth, "soft-tissue image (metrics, oracle)");
  c_sp->add_option("--bone-mask", sp.bone_mask);
  c_sp->add_option("--steps", sp.steps);
  c_sp->add_option("--alpha-l", sp.alpha_l);
  c_sp->add_option("--path", sp.path, "global | local | dual | fused");
  c_sp->add_option("--seed", sp.seed);
  c_sp->add_option("--codec", sp.codec);
  c_sp->add_option("--mask-provider", sp.mask_provider);
  c_sp->add_option("--inner", sp.inner, "posterior_mean | x0_prediction");
  c_sp->add_option("--shared-noise", sp.shared_noise, "true | false");
  c_sp->add_option("--tol", sp.tol, "fusion CG tolerance");
  c_sp->add_option("--out-prefix", sp.out_prefix);

  FuseArgs fu;
  auto* c_fu = app.add_subcommand("fuse", "Poisson-fuse a global and a local image");
  c_fu->add_option("--global", fu.global)->required();
  c_fu->add_option("--local", fu.local)->required();
  c_fu->add_option("--mask", fu.mask)->required();
  c_fu->add_option("--tol", fu.tol);
  c_fu->add_option("--max-iter", fu.max_iter);
  c_fu->add_option("--out", fu.out)->required();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "BSR / MSE / PSNR / gradient similarity");
  c_ev->add_option("--pred", ev.pred);
  c_ev->add_option("--soft", ev.soft);
  c_ev->add_option("--cxr", ev.cxr);
  c_ev->add_option("--bone-mask", ev.bone_mask, "default: cxr - soft > 0.02");
  c_ev->add_option("--lung-mask", ev.lung_mask, "default: threshold mask of the cxr");
  c_ev->add_option("--id", ev.id);
  c_ev->add_option("--data-dir", ev.data_dir, "evaluate a whole phantom dataset");
  c_ev->add_option("--pred-pattern", ev.pred_pattern, "prediction path, {id} is substituted");
  c_ev->add_option("--psnr-cap", ev.psnr_cap);
  c_ev->add_option("--csv", ev.csv);

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "time sampling, fusion and IO on a phantom");
  c_be->add_option("--config", be.config);
  c_be->add_option("--model", be.model);
  c_be->add_option("--size", be.size);
  c_be->add_option("--reps", be.reps);
  c_be->add_option("--steps", be.steps);
  c_be->add_option("--seed", be.seed);
  c_be->add_option("--io-prefix", be.io_prefix, "also write artifacts (timed as io)");

  ScheduleArgs sd;
  auto* c_sd = app.add_subcommand("schedule-dump", "print the noise schedule table");
  c_sd->add_option("--steps", sd.steps);
  c_sd->add_option("--beta-start", sd.beta_start);
  c_sd->add_option("--beta-end", sd.beta_end);
  c_sd->add_option("--sigma-data", sd.sigma_data);
  c_sd->add_option("--timestep-scale", sd.timestep_scale);
  c_sd->add_option("--out", sd.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_pg) cmd_phantom_gen(pg);
    else if (*c_tr) cmd_train(tr);
    else if (*c_sp) cmd_suppress(sp);
    else if (*c_fu) cmd_fuse(fu);
    else if (*c_ev) cmd_eval(ev);
    else if (*c_be) cmd_bench(be);
    else if (*c_sd) cmd_schedule_dump(sd);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "glcm: numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "glcm: %s\n", e.what());
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "glcm: %s\n", e.what());
    return kExitConfig;
  }
  return 0;
}
