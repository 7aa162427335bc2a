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
#include <png.h>
#include <unistd.h>

#include <doctest.h>
#include <filesystem>
#include <sstream>

#include "ebmrec/cli/commands.hpp"
#include "ebmrec/cli/config.hpp"
#include "ebmrec/cli/png.hpp"
#include "ebmrec/io.hpp"

namespace fs = std::filesystem;
using namespace ebmrec;
using namespace ebmrec::cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ebmrec_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

// Small enough that every command finishes in well under a second.
ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.seed = 7;
  c.data.phantom.height = c.data.phantom.width = 16;
  c.data.count = 6;
  c.model.stem_width = 4;
  c.model.widths = {4, 8};
  c.model.downsample = {false, true};
  c.train.iterations = 2;
  c.train.batch_size = 2;
  c.train.langevin_steps = 2;
  c.sample.levels = 2;
  c.sample.steps = 2;
  c.sample.count = 2;
  c.output.dir = out.string();
  c.output.wallclock = false;
  return c;
}

struct DecodedPng {
  std::size_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::pair<std::string, std::string>> text;
};

DecodedPng decode_png(const fs::path& path) {
  DecodedPng out;
  FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  out.pixels.resize(out.width * out.height);
  for (std::size_t r = 0; r < out.height; ++r) png_read_row(png, out.pixels.data() + r * out.width, nullptr);
  png_read_end(png, info);
  png_textp text = nullptr;
  int n = 0;
  png_get_text(png, info, &text, &n);
  for (int i = 0; i < n; ++i) out.text.emplace_back(text[i].key, text[i].text);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return out;
}

std::string run(void (*cmd)(const ExperimentConfig&, std::ostream&), const ExperimentConfig& c) {
  std::ostringstream log;
  cmd(c, log);
  return log.str();
}

std::size_t count_lines(const std::string& s) {
  return std::size_t(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config: defaults roundtrip through the INI echo") {
  const ExperimentConfig d;
  const ExperimentConfig back = parse_config(to_ini(d));
  CHECK(to_ini(back) == to_ini(d));
  CHECK(back.train.learning_rate == 3e-4);
  CHECK(back.train.batch_size == 16);
  CHECK(back.train.beta == 1.0);
  CHECK(back.sample.eps == 2e-5);
  CHECK(back.sample.levels == 10);
  CHECK(back.train.reuse_probability == 0.95);
  CHECK(back.architecture() == Architecture{});
}

TEST_CASE("config: file values and overrides") {
  ExperimentConfig c = parse_config(
      "seed = 42\n[data]\nsize = 32\n[model]\nwidths = 8, 16\ndownsample = false, true\n"
      "[recon]\npattern = cartesian1d\nR = 4\n");
  CHECK(c.seed == 42);
  CHECK(c.data.phantom.height == 32);
  CHECK(c.data.phantom.width == 32);
  CHECK(c.recon.pattern == MaskPattern::cartesian1d);
  CHECK(c.architecture().blocks == std::vector<BlockSpec>{{8, false}, {16, true}});
  set_value(c, "recon.R", "6");
  set_value(c, "seed", "3");
  CHECK(c.recon.R == 6.0);
  CHECK(c.seed == 3);
  // Exact double echo: the written value parses back to the same bits.
  set_value(c, "train.learning_rate", "0.1");
  CHECK(parse_config(to_ini(c)).train.learning_rate == 0.1);
}

TEST_CASE("config: unknown keys and bad values fail closed") {
  CHECK_THROWS_AS(parse_config("[train]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nosuchsection]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nbeta = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\niterations = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[recon]\ninit = sometimes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[output]\npng = maybe\n"), ConfigError);
  ExperimentConfig c;
  CHECK_THROWS_AS(set_value(c, "recon.nope", "1"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ebmrec.ini"), ConfigError);
  try {
    parse_config("[train]\nbogus = 1\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.bogus") != std::string::npos);
  }
}

TEST_CASE("config: validation") {
  ExperimentConfig c;
  c.data.phantom.height = c.data.phantom.width = 48;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.model.downsample = {false};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.recon.R = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.sample.sigma_last = 0.9;  // above sigma_first: not decreasing
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(ExperimentConfig{}.validate());
}

TEST_CASE("png: magnitude scaling, error map scale and text chunk") {
  TempDir t;
  // Images must be at least 4x4; only the first row carries signal.
  ComplexImage ref(4, 4, 1), res(4, 4, 1);
  ref.values()[0] = {2.0, 0.0};
  ref.values()[1] = {0.0, 1.0};
  ref.values()[3] = {0.0, -4.0};  // max magnitude 4 -> white
  res = ref;
  res.values()[1] = {0.0, 1.2};   // error 0.2 -> 0.2*5/4*255
  res.values()[3] = {0.0, -1.0};  // error 3 -> clipped
  write_png(t.path / "m.png", magnitude_image(ref, ref.max_magnitude()));
  write_png(t.path / "e.png", error_map(res, ref));
  const DecodedPng m = decode_png(t.path / "m.png");
  CHECK(m.width == 4);
  CHECK(m.height == 4);
  CHECK(m.bit_depth == 8);
  CHECK(m.color_type == PNG_COLOR_TYPE_GRAY);
  CHECK(std::vector<std::uint8_t>(m.pixels.begin(), m.pixels.begin() + 4) ==
        std::vector<std::uint8_t>{128, 64, 0, 255});
  CHECK(std::all_of(m.pixels.begin() + 4, m.pixels.end(), [](auto p) { return p == 0; }));
  const DecodedPng e = decode_png(t.path / "e.png");
  CHECK(std::vector<std::uint8_t>(e.pixels.begin(), e.pixels.begin() + 4) ==
        std::vector<std::uint8_t>{0, 64, 0, 255});
  REQUIRE(e.text.size() == 1);
  CHECK(e.text[0].first == "error_scale");
  CHECK(e.text[0].second == "5");
}

TEST_CASE("phantom: files, manifest and byte-identical reruns") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "a");
  run(cmd_phantom, c);
  const auto entries = read_manifest(t.path / "a" / "manifest.csv");
  CHECK(entries.size() == 6);
  for (const auto& e : entries) CHECK(fs::exists(e.path));
  CHECK(fs::exists(t.path / "a" / "config.ini"));
  c.output.dir = (t.path / "b").string();
  run(cmd_phantom, c);
  for (const auto& e : entries)
    CHECK(read_file(e.path) == read_file(t.path / "b" / e.path.filename()));
  CHECK(read_file(t.path / "a" / "manifest.csv") == read_file(t.path / "b" / "manifest.csv"));
}

TEST_CASE("phantom: unwritable output leaves no manifest") {
  TempDir t;
  // A regular file where the directory should be.
  write_file_atomic(t.path / "blocked", "x");
  ExperimentConfig c = tiny(t.path / "blocked" / "sub");
  CHECK_THROWS(run(cmd_phantom, c));
  CHECK_FALSE(fs::exists(t.path / "blocked" / "sub" / "manifest.csv"));
}

TEST_CASE("mask: R = 1 is all ones and the file roundtrips") {
  TempDir t;
  ExperimentConfig c = tiny(t.path);
  c.recon.R = 1.0;
  const std::string log = run(cmd_mask, c);
  const SamplingMask m = load_mask(t.path / "mask.mask");
  CHECK(m.kept_count() == 16 * 16);
  CHECK(log.find("kept_fraction=1") != std::string::npos);
  CHECK(encode_mask(m) == read_file(t.path / "mask.mask"));
}

TEST_CASE("mask: kept fraction near 1/R is reported") {
  TempDir t;
  ExperimentConfig c = tiny(t.path);
  c.data.phantom.height = c.data.phantom.width = 64;
  c.recon.R = 4.0;
  c.recon.pattern = MaskPattern::random2d;
  run(cmd_mask, c);
  const SamplingMask m = load_mask(t.path / "mask.mask");
  CHECK(m.kept_fraction() == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("train: zero iterations writes the initialization") {
  TempDir t;
  ExperimentConfig c = tiny(t.path);
  c.train.iterations = 0;
  run(cmd_train, c);
  const Checkpoint ck = load_checkpoint(t.path / "checkpoint.ebmw");
  RandomStream init = RandomStream(c.seed, kStreamTrain).split(0xC0FFEE);
  CHECK(ck.params == init_params(c.architecture(), init, c.train.sn_init_iterations));
  CHECK(ck.iteration == 0);
}

TEST_CASE("train: identical seeds give identical bytes; resume continues the counter") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "a");
  run(cmd_train, c);
  c.output.dir = (t.path / "b").string();
  run(cmd_train, c);
  CHECK(read_file(t.path / "a" / "checkpoint.ebmw") == read_file(t.path / "b" / "checkpoint.ebmw"));
  CHECK(read_file(t.path / "a" / "train_log.csv") == read_file(t.path / "b" / "train_log.csv"));

  c.output.dir = (t.path / "c").string();
  c.resume = (t.path / "a" / "checkpoint.ebmw").string();
  run(cmd_train, c);
  const Checkpoint ck = load_checkpoint(t.path / "c" / "checkpoint.ebmw");
  CHECK(ck.iteration == 4);
  REQUIRE(ck.adam);
  CHECK(ck.adam->t == 4);
  const std::string log = read_file(t.path / "c" / "train_log.csv");
  CHECK(log.find("\n2,") != std::string::npos);
  CHECK(log.find("\n0,") == std::string::npos);
}

TEST_CASE("train: resume with a different architecture is refused") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "a");
  run(cmd_train, c);
  c.output.dir = (t.path / "b").string();
  c.resume = (t.path / "a" / "checkpoint.ebmw").string();
  c.model.stem_width = 8;
  CHECK_THROWS(run(cmd_train, c));
}

TEST_CASE("train: from a phantom manifest") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "ph");
  run(cmd_phantom, c);
  c.output.dir = (t.path / "tr").string();
  c.data.manifest = (t.path / "ph" / "manifest.csv").string();
  const std::string log = run(cmd_train, c);
  CHECK(log.find("loaded 5 training images") != std::string::npos);
}

TEST_CASE("recon: full mask with lambda 0 hits the PSNR cap; outputs present") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "ph");
  run(cmd_phantom, c);
  c.output.dir = (t.path / "tr").string();
  run(cmd_train, c);
  c.output.dir = (t.path / "rc").string();
  c.recon.checkpoint = (t.path / "tr" / "checkpoint.ebmw").string();
  c.recon.reference = (t.path / "ph" / "phantom_0005.cimg").string();
  c.recon.R = 1.0;
  c.recon.lambda = 0.0;
  run(cmd_recon, c);
  const std::string csv = read_file(t.path / "rc" / "metrics.csv");
  CHECK(csv.rfind("image_id,mask,R,psnr_db,ssim\n", 0) == 0);
  const auto row = csv.substr(csv.find('\n') + 1);
  CHECK(row.rfind("phantom_0005,pseudo_radial,1,99,", 0) == 0);
  CHECK(std::stod(row.substr(row.rfind(',') + 1)) == doctest::Approx(1.0).epsilon(1e-12));
  for (const char* f : {"recon.cimg", "recon.png", "error.png", "zero_filled.cimg", "psnr_trace.csv",
                        "metrics_zero_filled.csv", "config.ini"})
    CHECK_MESSAGE(fs::exists(t.path / "rc" / f), f);
  const DecodedPng e = decode_png(t.path / "rc" / "error.png");
  REQUIRE(e.text.size() == 1);
  CHECK(e.text[0].second == "5");
  CHECK(count_lines(read_file(t.path / "rc" / "psnr_trace.csv")) == 1 + 2 * 2);
  CHECK_FALSE(fs::exists(t.path / "rc" / "timing.csv"));
}

TEST_CASE("recon: both inits run, reruns are byte-identical, measured k-space input works") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "ph");
  run(cmd_phantom, c);
  c.output.dir = (t.path / "tr").string();
  run(cmd_train, c);
  c.recon.checkpoint = (t.path / "tr" / "checkpoint.ebmw").string();
  c.recon.reference = (t.path / "ph" / "phantom_0005.cimg").string();
  for (InitMode init : {InitMode::uniform_noise, InitMode::zero_filled}) {
    c.recon.init = init;
    c.output.dir = (t.path / ("r_" + to_string(init))).string();
    const std::string log = run(cmd_recon, c);
    CHECK(log.find("recon psnr") != std::string::npos);
  }
  c.output.dir = (t.path / "again").string();
  run(cmd_recon, c);
  for (const char* f : {"recon.cimg", "metrics.csv", "psnr_trace.csv", "recon.png", "error.png"})
    CHECK(read_file(t.path / "again" / f) == read_file(t.path / "r_zero_filled" / f));

  // Same measurement, supplied as files instead of simulated.
  c.output.dir = (t.path / "m").string();
  run(cmd_mask, c);
  const SamplingMask m = load_mask(t.path / "m" / "mask.mask");
  const ComplexImage ref = load_cimg(c.recon.reference);
  save_cimg(t.path / "k.cimg", forward(ref, m, nullptr, 0.0).data);
  c.recon.kspace = (t.path / "k.cimg").string();
  c.recon.mask = (t.path / "m" / "mask.mask").string();
  c.output.dir = (t.path / "files").string();
  run(cmd_recon, c);
  CHECK(read_file(t.path / "files" / "recon.cimg") == read_file(t.path / "again" / "recon.cimg"));
}

TEST_CASE("recon: missing inputs are reported") {
  TempDir t;
  ExperimentConfig c = tiny(t.path);
  CHECK_THROWS_WITH(run(cmd_recon, c), doctest::Contains("checkpoint"));
  c.recon.checkpoint = (t.path / "missing.ebmw").string();
  CHECK_THROWS_WITH(run(cmd_recon, c), doctest::Contains("missing.ebmw"));
}

TEST_CASE("eval: identical files, missing files, manifest mode") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "ph");
  run(cmd_phantom, c);
  c.output.dir = (t.path / "ev").string();
  std::ostringstream log;
  const std::string a = (t.path / "ph" / "phantom_0001.cimg").string();
  const std::string b = (t.path / "ph" / "phantom_0002.cimg").string();
  cmd_eval(c, {a, a, ""}, log);
  CHECK(read_file(t.path / "ev" / "metrics.csv") ==
        "image_id,mask,R,psnr_db,ssim\nphantom_0001,,,99,1\n");
  CHECK_THROWS_WITH(cmd_eval(c, {a, "/no/such/ref.cimg", ""}, log),
                    doctest::Contains("/no/such/ref.cimg"));
  write_file_atomic(t.path / "pairs.csv",
                    "id,result,reference\nx,ph/phantom_0001.cimg,ph/phantom_0001.cimg\n"
                    "y,ph/phantom_0002.cimg,ph/phantom_0001.cimg\nz," + b + "," + b + "\n");
  cmd_eval(c, {"", "", (t.path / "pairs.csv").string()}, log);
  const std::string csv = read_file(t.path / "ev" / "metrics.csv");
  CHECK(count_lines(csv) == 4);
  CHECK(csv.find("\nx,,,99,1\n") != std::string::npos);
  CHECK(csv.find("\nz,,,99,1\n") != std::string::npos);
}

TEST_CASE("sample: writes the requested number of finite samples") {
  TempDir t;
  ExperimentConfig c = tiny(t.path / "tr");
  run(cmd_train, c);
  c.recon.checkpoint = (t.path / "tr" / "checkpoint.ebmw").string();
  c.output.dir = (t.path / "s").string();
  run(cmd_sample, c);
  for (const char* f : {"sample_000.cimg", "sample_001.cimg", "sample_000.png"})
    CHECK(fs::exists(t.path / "s" / f));
  const ComplexImage s = load_cimg(t.path / "s" / "sample_000.cimg");
  CHECK(s.height() == 16);
  CHECK(s.all_finite());
}
