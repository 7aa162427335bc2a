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
#include "ebmrec/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "ebmrec/cli/png.hpp"
#include "ebmrec/io.hpp"
#include "ebmrec/phantom.hpp"
#include "ebmrec/recon.hpp"
#include "ebmrec/trainer.hpp"

namespace ebmrec::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t min_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = split_csv(line);
    if (cells.size() < min_columns)
      throw std::runtime_error(path.string() + ": expected " + std::to_string(min_columns) +
                               " columns in '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

fs::path resolve(const fs::path& base_file, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_file.parent_path() / path;
}

fs::path prepare_output(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir(config.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
  write_file_atomic(dir / "config.ini", to_ini(config));
  return dir;
}

ComplexImage load_image(const std::string& path, const char* what) {
  if (path.empty()) throw std::runtime_error(std::string("no ") + what + " file given");
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " file not found: " + path);
  return load_cimg(path);
}

SamplingMask mask_from_config(const ExperimentConfig& config, std::size_t h, std::size_t w) {
  if (!config.recon.mask.empty()) {
    if (!fs::exists(config.recon.mask))
      throw std::runtime_error("mask file not found: " + config.recon.mask);
    SamplingMask m = load_mask(config.recon.mask);
    if (m.height != h || m.width != w)
      throw DimensionError("mask " + config.recon.mask + " does not match the image size");
    return m;
  }
  RandomStream rs(config.seed, kStreamMask);
  return make_mask(config.recon.pattern, config.recon.R, h, w, config.recon.center_fraction, rs);
}

std::vector<RealTensor> training_set(const ExperimentConfig& config, std::ostream& log) {
  std::vector<RealTensor> data;
  if (!config.data.manifest.empty()) {
    for (const auto& e : read_manifest(config.data.manifest))
      if (e.split == "train") data.push_back(normalize_for_training(load_image(e.path, "phantom")));
    log << "loaded " << data.size() << " training images from " << config.data.manifest << "\n";
  } else {
    const Dataset ds = make_dataset(config.phantom_spec(), config.data.count,
                                    RandomStream(config.seed, kStreamPhantoms));
    for (auto i : ds.train) data.push_back(normalize_for_training(ds.images[i]));
    log << "generated " << data.size() << " training phantoms\n";
  }
  if (data.empty()) throw std::runtime_error("no training images");
  return data;
}

void write_image_png(const fs::path& path, const ComplexImage& img, double white) {
  write_png(path, magnitude_image(img, white));
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::vector<ManifestEntry> out;
  for (auto& row : read_csv(path, 3)) {
    if (row[2] != "train" && row[2] != "test")
      throw std::runtime_error(path.string() + ": unknown split '" + row[2] + "'");
    out.push_back({row[0], resolve(path, row[1]), row[2]});
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "image_id,mask,R,psnr_db,ssim\n";
  for (const auto& r : rows)
    out += r.image_id + "," + r.mask + "," + r.R + "," + num(r.metrics.psnr_db) + "," +
           num(r.metrics.ssim) + "\n";
  return out;
}

void cmd_phantom(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  const Dataset ds = make_dataset(config.phantom_spec(), config.data.count,
                                  RandomStream(config.seed, kStreamPhantoms));
  std::vector<std::string> split(ds.images.size(), "train");
  for (auto i : ds.test) split[i] = "test";
  std::string manifest = "id,path,split\n";
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "phantom_%04zu", i);
    const std::string file = std::string(name) + ".cimg";
    save_cimg(dir / file, ds.images[i]);
    if (config.output.png) write_image_png(dir / (std::string(name) + ".png"), ds.images[i], 1.0);
    manifest += std::string(name) + "," + file + "," + split[i] + "\n";
  }
  // The manifest goes last so it only ever lists files that exist.
  write_file_atomic(dir / "manifest.csv", manifest);
  log << "wrote " << ds.images.size() << " phantoms (" << ds.train.size() << " train, "
      << ds.test.size() << " test) to " << dir.string() << "\n";
}

void cmd_mask(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  const std::size_t n = config.data.phantom.height;
  RandomStream rs(config.seed, kStreamMask);
  const SamplingMask m =
      make_mask(config.recon.pattern, config.recon.R, n, n, config.recon.center_fraction, rs);
  save_mask(dir / "mask.mask", m);
  if (config.output.png) {
    GrayImage g{n, n, {}, {}};
    // Shifted so the k-space center sits in the middle of the picture.
    g.pixels.resize(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        g.pixels[((r + n / 2) % n) * n + (c + n / 2) % n] = m.kept(r, c) ? 255 : 0;
    write_png(dir / "mask.png", g);
  }
  log << "pattern=" << to_string(m.pattern) << " R=" << num(config.recon.R)
      << " kept_fraction=" << num(m.kept_fraction()) << " target=" << num(1.0 / config.recon.R)
      << "\n";
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  const TrainConfig tc = config.train_config();
  const std::vector<RealTensor> data = training_set(config, log);
  const RandomStream stream(config.seed, kStreamTrain);

  RandomStream init_stream = stream;
  TrainState state = make_train_state(tc, init_stream);
  if (!config.resume.empty()) {
    Checkpoint ck = load_checkpoint(config.resume);
    if (!(ck.params.arch == tc.arch))
      throw std::runtime_error("checkpoint " + config.resume +
                               " was trained with a different architecture");
    state.params = std::move(ck.params);
    if (ck.adam) state.adam = std::move(*ck.adam);
    state.iteration = ck.iteration;
    log << "resuming from " << config.resume << " at iteration " << state.iteration << "\n";
  }

  std::string csv = config.output.wallclock ? "iter,e_pos,e_neg,gap,grad_norm,wallclock_s\n"
                                            : "iter,e_pos,e_neg,gap,grad_norm\n";
  const std::size_t every = std::max<std::size_t>(1, tc.iterations / 20);
  train_more(state, data, tc, stream, [&](const TrainLogEntry& e) {
    csv += std::to_string(e.iter) + "," + num(e.mean_energy_pos) + "," + num(e.mean_energy_neg) +
           "," + num(e.gap) + "," + num(e.grad_norm);
    if (config.output.wallclock) csv += "," + num(e.wallclock_s);
    csv += "\n";
    if ((e.iter + 1) % every == 0)
      log << "iter " << e.iter + 1 << " E+ " << e.mean_energy_pos << " E- " << e.mean_energy_neg
          << "\n";
  });
  save_checkpoint(dir / "checkpoint.ebmw", {state.params, state.adam, state.iteration});
  write_file_atomic(dir / "train_log.csv", csv);
  log << "checkpoint at iteration " << state.iteration << " written to "
      << (dir / "checkpoint.ebmw").string() << "\n";
}

void cmd_recon(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  if (config.recon.checkpoint.empty()) throw std::runtime_error("recon needs recon.checkpoint");
  if (!fs::exists(config.recon.checkpoint))
    throw std::runtime_error("checkpoint not found: " + config.recon.checkpoint);
  const EnergyParams params = load_checkpoint(config.recon.checkpoint).params;

  std::unique_ptr<ComplexImage> reference;
  if (!config.recon.reference.empty())
    reference = std::make_unique<ComplexImage>(load_image(config.recon.reference, "reference"));

  std::unique_ptr<CoilSensitivities> coils;
  KSpaceMeasurement y;
  if (!config.recon.kspace.empty()) {
    y.data = load_image(config.recon.kspace, "k-space");
    if (config.recon.mask.empty()) throw std::runtime_error("measured k-space needs recon.mask");
    y.mask = mask_from_config(config, y.data.height(), y.data.width());
    y.noise_std = config.data.noise_std;
    if (config.recon.mode == ReconMode::parallel_sens)
      coils = std::make_unique<CoilSensitivities>(
          simulate_sensitivities(y.data.coils(), y.data.height(), y.data.width()));
  } else {
    if (!reference) throw std::runtime_error("recon needs recon.kspace or recon.reference");
    const SamplingMask m = mask_from_config(config, reference->height(), reference->width());
    if (config.data.coils > 1)
      coils = std::make_unique<CoilSensitivities>(
          simulate_sensitivities(config.data.coils, reference->height(), reference->width()));
    RandomStream ms(config.seed, kStreamMeasure);
    y = forward(*reference, m, coils.get(), config.data.noise_std, &ms);
  }

  RandomStream rs(config.seed, kStreamRecon);
  const ReconReport r = reconstruct(y, params, config.recon_config(),
                                    config.recon.mode == ReconMode::parallel_sens ? coils.get()
                                                                                  : nullptr,
                                    rs, reference.get());
  const ComplexImage zf = config.recon.mode == ReconMode::calib_free
                              ? rss_combine(zero_filled_per_coil(y))
                              : zero_filled(y, config.recon.mode == ReconMode::parallel_sens
                                                   ? coils.get()
                                                   : nullptr);
  save_cimg(dir / "recon.cimg", r.image);
  save_cimg(dir / "zero_filled.cimg", zf);

  const double white = reference ? reference->max_magnitude() : r.image.max_magnitude();
  if (config.output.png) {
    write_image_png(dir / "recon.png", r.image, white);
    write_image_png(dir / "zero_filled.png", zf, white);
  }
  if (reference) {
    const std::string id = fs::path(config.recon.reference).stem().string();
    const std::string mask = to_string(y.mask.pattern), R = num(y.mask.acceleration);
    const MetricsRow ebm{id, mask, R, evaluate(r.image, *reference)};
    const MetricsRow base{id, mask, R, evaluate(zf, *reference)};
    write_file_atomic(dir / "metrics.csv", metrics_csv({ebm}));
    write_file_atomic(dir / "metrics_zero_filled.csv", metrics_csv({base}));
    std::string trace = "iteration,psnr_db\n";
    for (std::size_t i = 0; i < r.psnr_trace.size(); ++i)
      trace += std::to_string(i) + "," + num(r.psnr_trace[i]) + "\n";
    write_file_atomic(dir / "psnr_trace.csv", trace);
    if (config.output.png) {
      write_png(dir / "error.png", error_map(r.image, *reference));
      write_png(dir / "error_zero_filled.png", error_map(zf, *reference));
    }
    log << "recon psnr " << ebm.metrics.psnr_db << " dB ssim " << ebm.metrics.ssim
        << " | zero-filled psnr " << base.metrics.psnr_db << " dB ssim " << base.metrics.ssim
        << "\n";
  }
  if (config.output.wallclock)
    write_file_atomic(dir / "timing.csv", "wallclock_s\n" + num(r.wallclock_s) + "\n");
  log << "reconstruction written to " << (dir / "recon.cimg").string() << "\n";
}

void cmd_eval(const ExperimentConfig& config, const EvalInputs& inputs, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  std::vector<MetricsRow> rows;
  auto one = [&](const std::string& id, const std::string& result, const std::string& ref) {
    const ComplexImage a = load_image(result, "result");
    const ComplexImage b = load_image(ref, "reference");
    rows.push_back({id, "", "", evaluate(a, b)});
  };
  if (!inputs.manifest.empty()) {
    for (const auto& row : read_csv(inputs.manifest, 3))
      one(row[0], resolve(inputs.manifest, row[1]).string(),
          resolve(inputs.manifest, row[2]).string());
  } else {
    one(fs::path(inputs.result).stem().string(), inputs.result, inputs.reference);
  }
  write_file_atomic(dir / "metrics.csv", metrics_csv(rows));
  for (const auto& r : rows)
    log << r.image_id << " psnr " << r.metrics.psnr_db << " dB ssim " << r.metrics.ssim << "\n";
}

void cmd_sample(const ExperimentConfig& config, std::ostream& log) {
  const fs::path dir = prepare_output(config);
  if (config.recon.checkpoint.empty()) throw std::runtime_error("sample needs recon.checkpoint");
  if (!fs::exists(config.recon.checkpoint))
    throw std::runtime_error("checkpoint not found: " + config.recon.checkpoint);
  const EnergyParams params = load_checkpoint(config.recon.checkpoint).params;
  const NetEnergy model(params);
  const NoiseSchedule s = config.schedule();
  const std::size_t n = config.data.phantom.height;
  LangevinOptions opts;
  opts.temperature = config.sample.temperature;

  const RandomStream root(config.seed, kStreamSample);
  std::vector<ComplexImage> samples(config.sample.count);
  parallel_for(samples.size(), [&](std::size_t k) {
    RandomStream rs = root.split(k);
    RealTensor x = uniform(rs, {2, n, n}, -1.0, 1.0);
    for (double sigma : s.sigmas)
      x = run_chain(model, x, s.inner_steps, anneal_step_size(s.base_step, sigma, s.sigmas.back()),
                    sigma, rs, opts);
    samples[k] = from_channels(x);
  });
  for (std::size_t k = 0; k < samples.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%03zu", k);
    save_cimg(dir / (std::string(name) + ".cimg"), samples[k]);
    if (config.output.png)
      write_image_png(dir / (std::string(name) + ".png"), samples[k], samples[k].max_magnitude());
  }
  log << "wrote " << samples.size() << " samples to " << dir.string() << "\n";
}

}  // namespace ebmrec::cli
