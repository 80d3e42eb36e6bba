// Copyright 2026 The fmr Authors
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


// fmr: degradation synthesis, training, evaluation, weight-search traces,
// oracle checks and report export for the frequency-modulated micro-model.
//
// Exit codes: 0 ok, 1 I/O error, 2 configuration error, 3 divergence,
// 4 oracle failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmr/config.hpp"
#include "fmr/degrade.hpp"
#include "fmr/eos.hpp"
#include "fmr/fmm_io.hpp"
#include "fmr/grid_io.hpp"
#include "fmr/testing/oracle_suite.hpp"
#include "fmr/trainer.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kDivergence = 3, kOracle = 4 };

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::size_t workers = 0;  // 0 keeps run.workers
};

fmr::RunConfig resolve_config(const Globals& g) {
  fmr::RunConfig cfg = g.config.empty() ? fmr::RunConfig{} : fmr::load_config(g.config);
  for (const auto& kv : g.overrides) fmr::apply_override(cfg, kv);
  if (g.workers > 0) cfg.workers = g.workers;
  return cfg;
}

fs::path output_dir(const Globals& g) {
  fs::path dir = g.out;
  if (dir.empty()) {
    const char* env = std::getenv("FMR_OUTPUT_DIR");
    dir = env && *env ? fs::path(env) : fs::path("fmr_out");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw fmr::IoError("cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_text(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw fmr::IoError("cannot write " + p.string());
  return os;
}

fmr::PairedDataset load_manifest_dataset(const fmr::RunConfig& cfg, const std::string& flag) {
  const std::string path = flag.empty() ? cfg.dataset.manifest : flag;
  if (path.empty()) {
    throw fmr::ConfigError("no dataset manifest (use --manifest or dataset.manifest)");
  }
  return fmr::load_dataset(path, cfg.dataset.split);
}

// Built-in pass-through model for a given grid: identity low-pass with
// fully open masks.
fmr::FmmParams identity_model(std::size_t h, std::size_t w) {
  fmr::FmmOptions opt;
  opt.kernel_size = 1;
  opt.spectral_logit = 40.0;
  opt.spatial_logit = 40.0;
  return fmr::make_fmm_params(h, w, opt);
}

fmr::FmmParams load_model(const std::string& spec, const fmr::PairedDataset& ds) {
  if (spec == "identity") {
    const auto& g = ds.pairs.front().degraded;
    return identity_model(g.height(), g.width());
  }
  return fmr::io::load_fmmp(spec);
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ------------------------------------------------------------------ degrade

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw fmr::ConfigError("image directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".fgrid")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    throw fmr::ConfigError("image directory " + dir.string() + " holds no .pgm or .fgrid images");
  }
  return out;
}

int cmd_degrade(const Globals& g, const std::string& images) {
  auto cfg = resolve_config(g);
  if (!images.empty()) cfg.dataset.image_dir = images;
  const auto specs = cfg.degradation.specs();
  std::vector<fmr::FeatureGrid> sources;
  if (cfg.dataset.image_dir.empty()) {
    if (cfg.dataset.synthetic_count == 0) throw fmr::ConfigError("dataset.synthetic_count is 0");
    for (std::size_t i = 0; i < cfg.dataset.synthetic_count; ++i)
      sources.push_back(fmr::synthetic_scene(cfg.dataset.synthetic_height,
                                             cfg.dataset.synthetic_width,
                                             fmr::mix_seed(cfg.dataset.synthetic_seed, i)));
  } else {
    for (const auto& p : list_images(cfg.dataset.image_dir)) sources.push_back(fmr::io::load_image(p));
  }
  const auto ds = fmr::build_dataset(sources, specs, cfg.dataset.split);
  const auto dir = output_dir(g);
  fs::create_directories(dir / "clean");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.fgrid", i);
    fmr::io::save_fgrid(dir / "clean" / name, sources[i]);
  }
  std::vector<fmr::ManifestRow> rows;
  std::map<std::string, std::size_t> per_kind;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const auto& p = ds.pairs[i];
    fs::create_directories(dir / p.kind);
    char clean[32];
    char deg[32];
    std::snprintf(clean, sizeof clean, "clean/%05zu.fgrid", p.source);
    std::snprintf(deg, sizeof deg, "%05zu.fgrid", p.source);
    const std::string deg_rel = p.kind + "/" + deg;
    fmr::io::save_fgrid(dir / deg_rel, p.degraded);
    rows.push_back({i, p.kind, p.seed, clean, deg_rel});
    ++per_kind[p.kind];
  }
  auto os = open_text(dir / "manifest.csv");
  fmr::write_manifest(os, rows);
  std::cout << "wrote " << rows.size() << " pairs (" << sources.size() << " images x "
            << specs.size() << " kinds) to " << (dir / "manifest.csv").string() << "\n";
  for (const auto& [k, n] : per_kind) std::cout << "  " << k << ": " << n << "\n";
  std::cout << "  split: train " << ds.train.size() << ", validation " << ds.validation.size()
            << ", test " << ds.test.size() << "\n";
  return kOk;
}

// ------------------------------------------------------------------ train

int cmd_train(const Globals& g, const std::string& manifest) {
  const auto cfg = resolve_config(g);
  const auto ds = load_manifest_dataset(cfg, manifest);
  const auto tc = fmr::effective_train_config(cfg);
  const auto dir = output_dir(g);
  fs::create_directories(dir / "checkpoints");
  fmr::TrainHooks hooks;
  hooks.on_checkpoint = [&](long done, const fmr::FmmParams& p) {
    char name[40];
    std::snprintf(name, sizeof name, "iter_%07ld.fmmp", done);
    fmr::io::save_fmmp(dir / "checkpoints" / name, p);
  };
  const auto res = fmr::train(ds, tc, hooks);
  fmr::io::save_fmmp(dir / "model.fmmp", res.model);
  {
    auto os = open_text(dir / "train_trace.csv");
    fmr::write_train_csv(os, res.trace);
  }
  {
    auto os = open_text(dir / "eval_trace.csv");
    fmr::write_eval_csv(os, res.trace);
  }
  {
    auto os = open_text(dir / "eos_trace.csv");
    fmr::write_eos_trace_csv(os, res.trace.eos);
  }
  {
    auto os = open_text(dir / "eos_summary.csv");
    fmr::write_eos_summary_csv(os, res.trace.eos);
  }
  {
    auto os = open_text(dir / "eos_overhead.csv");
    fmr::write_overhead_csv(os, fmr::eos_overhead_report(res.trace.eos, res.trace.train_ms));
  }
  const auto& last = res.trace.iterations.back();
  std::cout << "trained " << res.trace.iterations.size() << " iterations, "
            << res.trace.eos.size() << " weight-search triggers\n"
            << "final batch loss " << fixed(last.loss.combined) << " at (alpha, beta) = ("
            << fixed(last.loss.alpha, 4) << ", " << fixed(last.loss.beta, 4) << ")\n";
  if (!res.trace.evals.empty()) {
    const auto& e = res.trace.evals.back();
    std::cout << "validation PSNR " << fixed(e.psnr, 3) << " dB, SSIM " << fixed(e.ssim, 4)
              << "\n";
  }
  std::cout << "outputs in " << dir.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------ eval

int cmd_eval(const Globals& g, const std::string& manifest, const std::string& model,
             const std::string& split) {
  const auto cfg = resolve_config(g);
  const auto ds = load_manifest_dataset(cfg, manifest);
  const auto params = load_model(model, ds);
  const auto table =
      fmr::evaluate(params, ds, fmr::parse_split(split), cfg.trainer.loss, cfg.workers);
  const auto dir = output_dir(g);
  {
    auto os = open_text(dir / "metrics.csv");
    fmr::write_metrics_csv(os, table);
  }
  std::cout << std::left << std::setw(10) << "kind" << std::right << std::setw(7) << "count"
            << std::setw(12) << "psnr" << std::setw(8) << "capped" << std::setw(11) << "ssim"
            << std::setw(12) << "loss_fid" << std::setw(12) << "loss_perc" << "\n";
  for (const auto& r : table.rows)
    std::cout << std::left << std::setw(10) << r.kind << std::right << std::setw(7) << r.count
              << std::setw(12) << fixed(r.psnr, 3) << std::setw(8) << r.psnr_capped
              << std::setw(11) << fixed(r.ssim) << std::setw(12) << fixed(r.fidelity)
              << std::setw(12) << fixed(r.perceptual) << "\n";
  return kOk;
}

// ------------------------------------------------------------------ eos-trace

int cmd_eos_trace(const Globals& g, const std::string& manifest, const std::string& model) {
  const auto cfg = resolve_config(g);
  const auto ds = load_manifest_dataset(cfg, manifest);
  const auto params = load_model(model, ds);
  auto ec = cfg.trainer.eos;
  ec.workers = cfg.workers;
  const auto subset = fmr::stratified_subset(ds, ds.validation, ec.subset_per_kind);
  const auto val = fmr::make_validation_set(ds, subset);
  const auto res = fmr::run_eos(params, val, ec, {cfg.trainer.init_weights}, 0, cfg.trainer.loss);
  const auto dir = output_dir(g);
  {
    auto os = open_text(dir / "eos_trace.csv");
    fmr::write_eos_trace_csv(os, {res.trace});
  }
  {
    auto os = open_text(dir / "eos_summary.csv");
    fmr::write_eos_summary_csv(os, {res.trace});
  }
  std::cout << std::setw(10) << "generation" << std::setw(16) << "best_fitness" << std::setw(12)
            << "alpha" << std::setw(12) << "beta" << "\n";
  for (std::size_t gen = 0; gen < res.trace.best_fitness.size(); ++gen) {
    const fmr::EosCandidate* best = nullptr;
    for (const auto& c : res.trace.candidates)
      if (c.generation == gen && (!best || c.fitness > best->fitness)) best = &c;
    std::cout << std::setw(10) << gen << std::setw(16) << fixed(res.trace.best_fitness[gen], 9)
              << std::setw(12) << fixed(best->weights.alpha) << std::setw(12)
              << fixed(best->weights.beta) << "\n";
  }
  std::cout << "winner (alpha, beta) = (" << fixed(res.winner.alpha) << ", "
            << fixed(res.winner.beta) << ") after " << res.trace.evaluations
            << " evaluations on " << val.size() << " validation images\n";
  return kOk;
}

// ------------------------------------------------------------------ oracle

int cmd_oracle(const Globals& g, const std::vector<std::string>& only) {
  const auto cfg = resolve_config(g);
  const auto& all = fmr::oracle::oracle_checks();
  std::vector<const fmr::oracle::NamedCheck*> selected;
  for (const auto& want : only) {
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& c) { return c.name == want; });
    if (it == all.end()) {
      std::string names;
      for (const auto& c : all) names += (names.empty() ? "" : ", ") + c.name;
      throw fmr::ConfigError("unknown oracle '" + want + "' (available: " + names + ")");
    }
    selected.push_back(&*it);
  }
  if (selected.empty())
    for (const auto& c : all) selected.push_back(&c);
  bool ok = true;
  for (const auto* c : selected) {
    for (const auto& r : c->run(cfg.workers)) {
      const bool pass = r.passed();
      ok = ok && pass;
      std::ostringstream m;
      m << std::scientific << std::setprecision(3) << r.measured;
      std::ostringstream t;
      t << std::scientific << std::setprecision(3) << r.tolerance;
      std::cout << (pass ? "PASS " : "FAIL ") << r.name << ": measured " << m.str()
                << (r.at_least ? " >= " : " <= ") << t.str() << "\n";
    }
  }
  return ok ? kOk : kOracle;
}

// ------------------------------------------------------------------ report

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p, std::string& header) {
  std::ifstream is(p);
  if (!is) throw fmr::IoError("cannot open " + p.string());
  std::getline(is, header);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    rows.push_back(std::move(f));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& where) {
  try {
    return std::stod(s);
  } catch (const std::logic_error&) {
    throw fmr::IoError("malformed number '" + s + "' in " + where.string());
  }
}

void write_svg(const fs::path& path, const std::string& title, const std::string& ylabel,
               const std::vector<Curve>& curves) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      x0 = std::min(x0, c.x[i]);
      x1 = std::max(x1, c.x[i]);
      y0 = std::min(y0, c.y[i]);
      y1 = std::max(y1, c.y[i]);
    }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  auto os = open_text(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\">iteration</text>\n"
     << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
     << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n"
     << "<text x=\"" << L - 5 << "\" y=\"" << sy(y1) + 4 << "\" text-anchor=\"end\">"
     << fixed(y1, 4) << "</text>\n"
     << "<text x=\"" << L - 5 << "\" y=\"" << sy(y0) + 4 << "\" text-anchor=\"end\">"
     << fixed(y0, 4) << "</text>\n"
     << "<text x=\"" << sx(x1) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"end\">" << x1
     << "</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* color = colors[k % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curves[k].x.size(); ++i)
      os << sx(curves[k].x[i]) << ',' << sy(curves[k].y[i]) << ' ';
    os << "\"/>\n<text x=\"" << W - R - 5 << "\" y=\"" << T + 15 * (k + 1) << "\" fill=\""
       << color << "\" text-anchor=\"end\">" << curves[k].label << "</text>\n";
  }
  os << "</svg>\n";
}

int cmd_report(const Globals& g, const std::vector<std::string>& runs, bool svg) {
  const auto dir = output_dir(g);
  std::vector<Curve> loss;
  std::vector<Curve> psnr;
  auto os = open_text(dir / "report.csv");
  os << "run,iteration,loss_combined,alpha,beta\n";
  auto vs = open_text(dir / "report_validation.csv");
  vs << "run,iteration,val_psnr,val_ssim,val_loss_fid,val_loss_perc\n";
  for (const auto& run : runs) {
    const fs::path rdir(run);
    const std::string label = rdir.filename().empty() ? rdir.parent_path().filename().string()
                                                       : rdir.filename().string();
    std::string header;
    const auto rows = read_csv(rdir / "train_trace.csv", header);
    if (header != fmr::kTrainTraceHeader)
      throw fmr::IoError("unexpected header in " + (rdir / "train_trace.csv").string());
    Curve c{label, {}, {}};
    for (const auto& r : rows) {
      if (r.size() != 7) throw fmr::IoError("malformed row in " + (rdir / "train_trace.csv").string());
      c.x.push_back(to_double(r[0], rdir));
      c.y.push_back(to_double(r[3], rdir));
      os << label << ',' << r[0] << ',' << r[3] << ',' << r[4] << ',' << r[5] << '\n';
    }
    loss.push_back(std::move(c));
    const auto evals = read_csv(rdir / "eval_trace.csv", header);
    if (header != fmr::kEvalTraceHeader)
      throw fmr::IoError("unexpected header in " + (rdir / "eval_trace.csv").string());
    Curve p{label, {}, {}};
    for (const auto& r : evals) {
      if (r.size() != 7) throw fmr::IoError("malformed row in " + (rdir / "eval_trace.csv").string());
      p.x.push_back(to_double(r[0], rdir));
      p.y.push_back(to_double(r[1], rdir));
      vs << label << ',' << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[3] << ',' << r[4]
         << '\n';
    }
    psnr.push_back(std::move(p));
    std::cout << label << ": " << loss.back().x.size() << " iterations";
    if (!psnr.back().y.empty()) std::cout << ", final validation PSNR " << fixed(psnr.back().y.back(), 3) << " dB";
    std::cout << "\n";
  }
  if (svg) {
    write_svg(dir / "loss_curves.svg", "training loss", "combined loss", loss);
    write_svg(dir / "psnr_curves.svg", "validation PSNR", "PSNR (dB)", psnr);
  }
  std::cout << "report written to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fmr: frequency-modulated restoration micro-model toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value configuration file");
  app.add_option("--set", g.overrides, "override a configuration key (key=value), repeatable")
      ->allow_extra_args(false);
  app.add_option("--out", g.out, "output directory (default: $FMR_OUTPUT_DIR or ./fmr_out)");
  app.add_option("--workers", g.workers, "evaluation threads; does not change any output")
      ->check(CLI::PositiveNumber);
  app.fallthrough();

  std::string images, manifest, model = "identity", split = "validation";
  std::vector<std::string> only, runs;
  bool svg = false;

  auto* degrade = app.add_subcommand("degrade", "synthesize a paired dataset and manifest");
  degrade->add_option("--images", images, "directory of clean .pgm/.fgrid images");
  auto* train = app.add_subcommand("train", "train the model and write checkpoints and traces");
  train->add_option("--manifest", manifest, "dataset manifest");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write metrics.csv");
  eval->add_option("--manifest", manifest, "dataset manifest");
  eval->add_option("--model", model, "FMMP checkpoint, or 'identity'");
  eval->add_option("--split", split, "train | validation | test | all");
  auto* eos = app.add_subcommand("eos-trace", "run one weight search against a checkpoint");
  eos->add_option("--manifest", manifest, "dataset manifest");
  eos->add_option("--model", model, "FMMP checkpoint, or 'identity'");
  auto* oracle = app.add_subcommand("oracle", "run the reference checks");
  oracle->add_option("--only", only, "checks to run: dft, conv, adjoint, split, fmm-grad, "
                                     "loss-grad, simplex, wiener")
      ->delimiter(',');
  auto* report = app.add_subcommand("report", "collect training traces into report CSVs");
  report->add_option("--run", runs, "training output directory, repeatable")->required();
  report->add_flag("--svg", svg, "also render SVG line charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (degrade->parsed()) return cmd_degrade(g, images);
    if (train->parsed()) return cmd_train(g, manifest);
    if (eval->parsed()) return cmd_eval(g, manifest, model, split);
    if (eos->parsed()) return cmd_eos_trace(g, manifest, model);
    if (oracle->parsed()) return cmd_oracle(g, only);
    if (report->parsed()) return cmd_report(g, runs, svg);
  } catch (const fmr::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const fmr::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const fmr::DimensionError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const fmr::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fmr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  }
  return kConfig;
}
