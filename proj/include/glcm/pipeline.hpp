#ifndef GLCM_PIPELINE_HPP
#define GLCM_PIPELINE_HPP

// End-to-end bone suppression: lung mask -> encode conditions -> dual-path sampling ->
// decode -> Poisson fusion -> metrics.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "glcm/codec.hpp"
#include "glcm/denoiser.hpp"
#include "glcm/error.hpp"
#include "glcm/fusion.hpp"
#include "glcm/io.hpp"
#include "glcm/metrics.hpp"
#include "glcm/sampler.hpp"
#include "glcm/scheduler.hpp"
#include "glcm/segmentation.hpp"
#include "glcm/toy_denoiser.hpp"
#include "glcm/training.hpp"

namespace glcm {

inline constexpr double kDefaultBetaStart = 0.00085;
inline constexpr double kDefaultBetaEnd = 0.012;
inline constexpr int kDefaultSteps = 50;

struct PipelineConfig {
  std::string codec = "identity";
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  double sigma_data = kDefaultSigmaData;
  double timestep_scale = kDefaultTimestepScale;
  // "oracle" (needs ground truth) or a toy-denoiser checkpoint path.
  std::string denoiser = "oracle";
  SamplerConfig sampler{.path = SamplePath::fused};
  double fusion_tol = kDefaultFusionTol;
  int fusion_max_iter = 0;
  MaskProvider mask_provider = MaskProvider::threshold;

  std::string input;
  std::string mask;
  std::string ground_truth;
  std::string bone_mask;
  std::string out_prefix;

  Schedule schedule() const {
    return make_schedule(sampler.steps, beta_start, beta_end, sigma_data, timestep_scale);
  }

  void validate() const {
    detail::require(sampler.steps >= 1, "steps must be >= 1");
    detail::require(std::isfinite(sampler.alpha_l), "alpha_l must be finite");
    detail::require(fusion_tol > 0.0 && fusion_tol < 1.0, "fusion_tol must lie in (0,1)");
    detail::require(fusion_max_iter >= 0, "fusion_max_iter must be >= 0");
    (void)schedule();
    (void)make_codec(codec);
  }
};

// Reads every recognised key; unknown keys are rejected.
inline PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
  static const char* known[] = {"codec",        "steps",           "beta_start", "beta_end",
                                "sigma_data",   "timestep_scale",  "denoiser",   "alpha_l",
                                "seed",         "path",            "inner_term", "shared_noise",
                                "fusion_tol",   "fusion_max_iter", "mask_provider", "input",
                                "mask",         "ground_truth",    "bone_mask",  "out_prefix"};
  for (const auto& [k, v] : kv.values()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown config key '" + k + "'");
  }
  PipelineConfig c;
  c.codec = kv.get("codec", c.codec);
  c.sampler.steps = static_cast<int>(kv.get_int("steps", c.sampler.steps));
  c.beta_start = kv.get("beta_start", c.beta_start);
  c.beta_end = kv.get("beta_end", c.beta_end);
  c.sigma_data = kv.get("sigma_data", c.sigma_data);
  c.timestep_scale = kv.get("timestep_scale", c.timestep_scale);
  c.denoiser = kv.get("denoiser", c.denoiser);
  c.sampler.alpha_l = kv.get("alpha_l", c.sampler.alpha_l);
  c.sampler.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  c.sampler.path = parse_sample_path(kv.get("path", std::string(to_string(c.sampler.path))));
  c.sampler.inner =
      parse_inner_term(kv.get("inner_term", std::string(to_string(c.sampler.inner))));
  c.sampler.shared_noise = kv.get_bool("shared_noise", c.sampler.shared_noise);
  c.fusion_tol = kv.get("fusion_tol", c.fusion_tol);
  c.fusion_max_iter = static_cast<int>(kv.get_int("fusion_max_iter", c.fusion_max_iter));
  c.mask_provider = parse_mask_provider(kv.get("mask_provider", std::string("threshold")));
  c.input = kv.get("input", c.input);
  c.mask = kv.get("mask", c.mask);
  c.ground_truth = kv.get("ground_truth", c.ground_truth);
  c.bone_mask = kv.get("bone_mask", c.bone_mask);
  c.out_prefix = kv.get("out_prefix", c.out_prefix);
  c.validate();
  return c;
}

// Two items per pair: the soft tissue conditioned on the full CXR (global) and on the
// lung-masked CXR (local). The target is the full soft-tissue image in both cases.
inline std::vector<TrainingExample> training_examples(const Image& cxr, const Image& soft,
                                                      const Mask& lung, const Codec& codec) {
  const Latent target = codec.encode(soft);
  return {{target, {codec.encode(cxr), ConditionKind::global}},
          {target, {codec.encode(apply_mask(cxr, lung)), ConditionKind::local}}};
}

inline std::vector<TrainingExample> training_examples(std::span<const PhantomSample> samples,
                                                      const Codec& codec) {
  std::vector<TrainingExample> out;
  out.reserve(2 * samples.size());
  for (const auto& s : samples)
    for (auto& ex : training_examples(s.cxr, s.soft, s.lung_mask, codec)) out.push_back(std::move(ex));
  return out;
}

struct PipelineInputs {
  Image cxr;
  std::optional<Mask> mask;           // overrides the mask provider
  std::optional<Image> ground_truth;  // soft-tissue image, enables metrics and the oracle
  std::optional<Mask> bone_mask;
  const PhantomParams* phantom = nullptr;
};

struct StageTimings {
  double segmentation = 0, sampling = 0, decode = 0, fusion = 0, io = 0;
};

struct PipelineResult {
  Mask mask;
  std::optional<Image> global;
  std::optional<Image> local;
  std::optional<Image> fused;
  std::optional<DualResult> latents;
  MetricsReport report;  // rows "global", "local", "fused" when ground truth is given
  int fusion_iterations = 0;
  StageTimings timings;
};

// Runs `fn`, prefixing any error with the stage name. Error type (exit code) is preserved.
template <class F>
auto run_stage(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string("[") + stage + "] " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[") + stage + "] " + e.what());
  }
}

// Oracle for the ground truth, or the checkpoint named by config.denoiser.
inline std::unique_ptr<NoiseEstimator> make_denoiser(const PipelineConfig& config,
                                                     const Schedule& schedule, const Codec& codec,
                                                     const std::optional<Image>& ground_truth) {
  if (config.denoiser == "oracle") {
    if (!ground_truth) throw ConfigError("oracle denoiser needs a ground-truth soft-tissue image");
    return std::make_unique<OracleDenoiser>(schedule, codec.encode(*ground_truth));
  }
  auto model = std::make_unique<ToyDenoiser>(load_checkpoint(config.denoiser));
  if (model->architecture().timesteps != schedule.T)
    throw ConfigError("checkpoint was trained for T=" +
                      std::to_string(model->architecture().timesteps) + ", config uses " +
                      std::to_string(schedule.T));
  return model;
}

inline std::string artifact_path(const std::string& prefix, const std::string& name) {
  return prefix + name;
}

namespace detail {
inline void prepare_prefix(const std::string& prefix) {
  if (prefix.empty()) return;
  const std::filesystem::path p(prefix + "x");
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace detail

// Runs the configured stages. When out_prefix is non-empty each artifact is written as soon
// as it exists (mask.pgm, global.pgm/.f32, local.pgm/.f32, fused.pgm/.f32), so a failing
// later stage leaves the earlier ones on disk. `denoiser` overrides config.denoiser.
inline PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& in,
                                   const NoiseEstimator* denoiser = nullptr,
                                   const std::string& out_prefix = {}) {
  using detail::Clock;
  PipelineResult res;
  run_stage("config", [&] {
    config.validate();
    return 0;
  });
  const Schedule schedule = config.schedule();
  const std::unique_ptr<Codec> codec = make_codec(config.codec);
  auto write = [&](const std::string& name, const auto& artifact) {
    if (out_prefix.empty()) return;
    const auto t0 = Clock::now();
    run_stage("io", [&] {
      detail::prepare_prefix(out_prefix);
      write_pgm(artifact_path(out_prefix, name + ".pgm"), artifact);
      if constexpr (std::is_same_v<std::decay_t<decltype(artifact)>, Image>)
        write_raw(artifact_path(out_prefix, name + ".f32"), artifact);
    });
    res.timings.io += detail::seconds_since(t0);
  };

  auto t0 = Clock::now();
  res.mask = run_stage("segmentation", [&] {
    if (in.mask) {
      require_same_shape(in.cxr, *in.mask, "pipeline mask");
      return *in.mask;
    }
    return lung_mask(in.cxr, config.mask_provider, in.phantom);
  });
  res.timings.segmentation = detail::seconds_since(t0);
  write("mask", res.mask);

  std::unique_ptr<NoiseEstimator> owned;
  if (denoiser == nullptr) {
    owned = run_stage("denoiser",
                      [&] { return make_denoiser(config, schedule, *codec, in.ground_truth); });
    denoiser = owned.get();
  }

  const SamplePath path = config.sampler.path;
  const bool want_global = path != SamplePath::local;
  const bool want_local = path != SamplePath::global;

  t0 = Clock::now();
  run_stage("sampling", [&] {
    const Latent zg = codec->encode(in.cxr);
    const Latent zl = codec->encode(apply_mask(in.cxr, res.mask));
    if (want_global && want_local) {
      res.latents = dual_path_sample(*denoiser, zg, zl, schedule, config.sampler);
    } else {
      SamplerConfig sc = config.sampler;
      const ConditionSpec spec{zg, zl};
      DualResult d;
      if (want_global) {
        sc.path = SamplePath::global;
        d.global_latent = sample(*denoiser, spec, schedule, sc);
      } else {
        sc.path = SamplePath::local;
        sc.seed = config.sampler.shared_noise ? config.sampler.seed : config.sampler.seed ^ 1ULL;
        d.local_latent = sample(*denoiser, spec, schedule, sc);
      }
      res.latents = std::move(d);
    }
    return 0;
  });
  res.timings.sampling = detail::seconds_since(t0);

  t0 = Clock::now();
  run_stage("decode", [&] {
    if (want_global) res.global = codec->decode(res.latents->global_latent);
    if (want_local) res.local = codec->decode(res.latents->local_latent);
    return 0;
  });
  res.timings.decode = detail::seconds_since(t0);
  if (res.global) write("global", *res.global);
  if (res.local) write("local", *res.local);

  if (path == SamplePath::fused) {
    t0 = Clock::now();
    const FusionResult f = run_stage("fusion", [&] {
      return poisson_solve(*res.global, *res.local, res.mask, config.fusion_tol,
                           config.fusion_max_iter);
    });
    res.timings.fusion = detail::seconds_since(t0);
    Image fused = f.image;
    for (double& v : fused.pixels) v = std::clamp(v, 0.0, 1.0);
    res.fused = std::move(fused);
    res.fusion_iterations = f.iterations;
    write("fused", *res.fused);
  }

  if (in.ground_truth) {
    run_stage("metrics", [&] {
      require_same_shape(in.cxr, *in.ground_truth, "ground truth");
      const Mask bone = in.bone_mask ? *in.bone_mask : Mask(in.cxr.height, in.cxr.width);
      auto add = [&](const char* name, const std::optional<Image>& im) {
        if (im)
          res.report.rows.push_back(
              evaluate_image(name, *im, in.cxr, *in.ground_truth, bone, res.mask));
      };
      add("global", res.global);
      add("local", res.local);
      add("fused", res.fused);
      return 0;
    });
  }
  return res;
}

struct BenchReport {
  int steps = 0;
  int repetitions = 0;
  Summary sampling, fusion, io, total;
};

// Times `repetitions` full runs (after one untimed warm-up) on the given inputs.
inline BenchReport bench(const PipelineConfig& config, const PipelineInputs& in,
                         const NoiseEstimator* denoiser, int repetitions,
                         const std::string& io_prefix = {}) {
  detail::require(repetitions >= 1, "bench: repetitions must be >= 1");
  PipelineConfig c = config;
  c.sampler.path = SamplePath::fused;
  (void)run_pipeline(c, in, denoiser, io_prefix);
  std::vector<double> s, f, io, total;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = detail::Clock::now();
    const PipelineResult res = run_pipeline(c, in, denoiser, io_prefix);
    total.push_back(detail::seconds_since(t0));
    s.push_back(res.timings.sampling);
    f.push_back(res.timings.fusion);
    io.push_back(res.timings.io);
  }
  return {c.sampler.steps, repetitions, summarize(s), summarize(f), summarize(io), summarize(total)};
}

inline void write_bench(std::ostream& os, const BenchReport& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "steps %d\nrepetitions %d\n", b.steps, b.repetitions);
  os << buf;
  auto row = [&](const char* name, const Summary& s) {
    std::snprintf(buf, sizeof buf, "%-10s %10.6f s ± %.6f\n", name, s.mean, s.std);
    os << buf;
  };
  row("sampling", b.sampling);
  row("fusion", b.fusion);
  row("io", b.io);
  row("total", b.total);
}

}  // namespace glcm

#endif  // GLCM_PIPELINE_HPP
