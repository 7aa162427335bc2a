// Copyright 2026 The ebmrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>

#include "ebmrec/cli/commands.hpp"

namespace {

using ebmrec::cli::ExperimentConfig;

// Flag values in the order they override the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::string> seed, out, R, pattern, lambda, init, levels, steps, eps;
  std::optional<std::string> checkpoint, reference, kspace, mask, resume, iterations, data;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "global seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--set", o.set, "override any config key, e.g. --set train.beta=0.5");
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = ebmrec::cli::load_config(o.config_path);
  const std::pair<const std::optional<std::string>*, const char*> table[] = {
      {&o.seed, "seed"},
      {&o.out, "output.dir"},
      {&o.R, "recon.R"},
      {&o.pattern, "recon.pattern"},
      {&o.lambda, "recon.lambda"},
      {&o.init, "recon.init"},
      {&o.levels, "sample.levels"},
      {&o.steps, "sample.steps"},
      {&o.eps, "sample.eps"},
      {&o.checkpoint, "recon.checkpoint"},
      {&o.reference, "recon.reference"},
      {&o.kspace, "recon.kspace"},
      {&o.mask, "recon.mask"},
      {&o.resume, "train.resume"},
      {&o.iterations, "train.iterations"},
      {&o.data, "data.manifest"},
  };
  for (const auto& [value, key] : table)
    if (*value) ebmrec::cli::set_value(c, key, **value);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ebmrec::cli::ConfigError("--set expects key=value, got '" + kv + "'");
    ebmrec::cli::set_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-based prior MRI reconstruction toolkit"};
  app.require_subcommand(1);
  Overrides o;
  ebmrec::cli::EvalInputs eval_inputs;

  auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
  add_common(phantom, o);

  auto* mask = app.add_subcommand("mask", "generate an undersampling mask");
  add_common(mask, o);
  mask->add_option("--R", o.R, "acceleration factor");
  mask->add_option("--pattern", o.pattern, "cartesian1d | pseudo_radial | random2d | poisson_disk");

  auto* train = app.add_subcommand("train", "train the energy network");
  add_common(train, o);
  train->add_option("--data", o.data, "phantom manifest (default: generate from the seed)");
  train->add_option("--iterations", o.iterations, "training iterations");
  train->add_option("--resume", o.resume, "checkpoint to continue from");

  auto* recon = app.add_subcommand("recon", "reconstruct undersampled data");
  add_common(recon, o);
  recon->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
  recon->add_option("--reference", o.reference, "fully sampled image (simulates the measurement)");
  recon->add_option("--kspace", o.kspace, "measured k-space CIMG (needs --mask)");
  recon->add_option("--mask", o.mask, "mask file");
  recon->add_option("--R", o.R, "acceleration factor");
  recon->add_option("--pattern", o.pattern, "mask family");
  recon->add_option("--lambda", o.lambda, "data-consistency weight");
  recon->add_option("--init", o.init, "uniform_noise | zero_filled");
  recon->add_option("--levels", o.levels, "number of noise levels");
  recon->add_option("--steps", o.steps, "Langevin steps per level");
  recon->add_option("--eps", o.eps, "base step size");

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of results against references");
  add_common(eval, o);
  eval->add_option("--result", eval_inputs.result, "result CIMG");
  eval->add_option("--reference", eval_inputs.reference, "reference CIMG");
  eval->add_option("--manifest", eval_inputs.manifest, "CSV of id,result,reference");

  auto* sample = app.add_subcommand("sample", "draw samples from a trained prior");
  add_common(sample, o);
  sample->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
  sample->add_option("--levels", o.levels, "number of noise levels");
  sample->add_option("--steps", o.steps, "Langevin steps per level");
  sample->add_option("--eps", o.eps, "base step size");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig config = build_config(o);
    if (phantom->parsed()) ebmrec::cli::cmd_phantom(config, std::cout);
    if (mask->parsed()) ebmrec::cli::cmd_mask(config, std::cout);
    if (train->parsed()) ebmrec::cli::cmd_train(config, std::cout);
    if (recon->parsed()) ebmrec::cli::cmd_recon(config, std::cout);
    if (sample->parsed()) ebmrec::cli::cmd_sample(config, std::cout);
    if (eval->parsed()) {
      if (eval_inputs.manifest.empty() && (eval_inputs.result.empty() || eval_inputs.reference.empty()))
        throw std::runtime_error("eval needs --result and --reference, or --manifest");
      ebmrec::cli::cmd_eval(config, eval_inputs, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
