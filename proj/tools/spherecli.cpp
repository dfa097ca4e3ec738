// Command-line surface for the spherical TV inpainting library:
// harmonic transforms, single inpainting runs, the full experiment
// matrix, and Mollweide figure rendering over SPH1 containers.
//
// Exit codes: 0 success, 2 malformed container or config, 3 payload
// kind mismatch, 4 solver divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <sphtv/container.hpp>
#include <sphtv/inpaint.hpp>
#include <sphtv/render.hpp>

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitMalformed = 2;
constexpr int kExitKindMismatch = 3;
constexpr int kExitDiverged = 4;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

sphtv::Scheme scheme_from_flag(const std::string& s) {
  if (s == "mw") return sphtv::Scheme::mw;
  if (s == "dh") return sphtv::Scheme::dh;
  throw CliError(kExitMalformed, "unknown scheme '" + s + "', expected mw or dh");
}

sphtv::Domain domain_from_flag(const std::string& s) {
  if (s == "spatial") return sphtv::Domain::spatial;
  if (s == "harmonic") return sphtv::Domain::harmonic;
  throw CliError(kExitMalformed, "unknown domain '" + s + "', expected spatial or harmonic");
}

sphtv::SignalContainer load_container(const std::string& path) {
  try {
    return sphtv::read_container(path);
  } catch (const sphtv::ContainerError& e) {
    throw CliError(kExitMalformed, path + ": " + e.what());
  }
}

void require_kind(const sphtv::SignalContainer& c, sphtv::PayloadKind want,
                  const std::string& path) {
  if (c.kind != want)
    throw CliError(kExitKindMismatch, path + ": holds " + std::string(kind_name(c.kind)) +
                                          ", needs " + kind_name(want));
}

// flags may restate what the container header already fixes; a
// disagreement is treated like a kind mismatch
void check_header_match(const sphtv::SignalContainer& c, const std::string& scheme_flag,
                        int bandlimit_flag, const std::string& path) {
  if (!scheme_flag.empty() && scheme_from_flag(scheme_flag) != c.scheme)
    throw CliError(kExitKindMismatch, path + ": container scheme is " +
                                          sphtv::scheme_name(c.scheme) + ", flag says " +
                                          scheme_flag);
  if (bandlimit_flag > 0 && bandlimit_flag != c.band_limit)
    throw CliError(kExitKindMismatch,
                   path + ": container band limit is " + std::to_string(c.band_limit) +
                       ", flag says " + std::to_string(bandlimit_flag));
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CliError(kExitMalformed, "cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kExitMalformed, path + ": not valid JSON: " + e.what());
  }
}

void apply_solver_json(const nlohmann::json& j, sphtv::SolverConfig& cfg) {
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("max_iters")) cfg.max_iters = j.at("max_iters").get<int>();
  if (j.contains("rel_obj_tol")) cfg.rel_obj_tol = j.at("rel_obj_tol").get<double>();
  if (j.contains("inner_prox_iters"))
    cfg.inner_prox_iters = j.at("inner_prox_iters").get<int>();
}

sphtv::ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  sphtv::ExperimentConfig cfg;
  try {
    if (j.contains("band_limit")) cfg.band_limit = j.at("band_limit").get<int>();
    if (j.contains("schemes")) {
      cfg.schemes.clear();
      for (const auto& s : j.at("schemes"))
        cfg.schemes.push_back(scheme_from_flag(s.get<std::string>()));
    }
    if (j.contains("domains")) {
      cfg.domains.clear();
      for (const auto& d : j.at("domains"))
        cfg.domains.push_back(domain_from_flag(d.get<std::string>()));
    }
    if (j.contains("ratios")) cfg.ratios = j.at("ratios").get<std::vector<double>>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("sigma_n")) cfg.sigma_n = j.at("sigma_n").get<double>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("timings")) cfg.zero_timings = !j.at("timings").get<bool>();
    if (j.contains("caps")) cfg.caps = j.at("caps").get<int>();
    if (j.contains("cap_radius_lo")) cfg.cap_radius_lo = j.at("cap_radius_lo").get<double>();
    if (j.contains("cap_radius_hi")) cfg.cap_radius_hi = j.at("cap_radius_hi").get<double>();
    if (j.contains("sigma_s")) cfg.sigma_s = j.at("sigma_s").get<double>();
    if (j.contains("solver")) apply_solver_json(j.at("solver"), cfg.solver);
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kExitMalformed, std::string("config field mistyped: ") + e.what());
  }
  return cfg;
}

nlohmann::json summary_json(const sphtv::ExperimentResults& res) {
  nlohmann::json out;
  out["band_limit"] = res.config.band_limit;
  out["trials"] = res.config.trials;
  out["sigma_n"] = res.config.sigma_n;
  out["alpha"] = res.config.alpha;
  out["master_seed"] = res.config.master_seed;
  out["ratios"] = res.config.ratios;
  out["cells"] = nlohmann::json::array();
  for (const sphtv::CellSummary& c : res.cells) {
    nlohmann::json cell;
    cell["scheme"] = sphtv::scheme_name(c.scheme);
    cell["domain"] = sphtv::domain_name(c.domain);
    cell["ratio"] = c.ratio;
    cell["mean_snr_db"] = c.mean_snr_db;
    cell["completed"] = c.completed;
    out["cells"].push_back(cell);
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// densifies op and its adjoint over the transform's complex spaces and
// reports the worst conjugate-transpose disagreement
template <typename Op, typename Adj>
double densified_transpose_gap(int in_dim, int out_dim, Op&& op, Adj&& adj) {
  std::vector<std::vector<sphtv::cplx>> a(out_dim, std::vector<sphtv::cplx>(in_dim));
  for (int j = 0; j < in_dim; ++j) {
    std::vector<sphtv::cplx> e(in_dim, sphtv::cplx{});
    e[j] = 1.0;
    const std::vector<sphtv::cplx> col = op(e);
    for (int i = 0; i < out_dim; ++i) a[i][j] = col[i];
  }
  double gap = 0.0;
  for (int i = 0; i < out_dim; ++i) {
    std::vector<sphtv::cplx> e(out_dim, sphtv::cplx{});
    e[i] = 1.0;
    const std::vector<sphtv::cplx> row = adj(e);  // i-th row of the adjoint
    for (int j = 0; j < in_dim; ++j)
      gap = std::max(gap, std::abs(row[j] - std::conj(a[i][j])));
  }
  return gap;
}

int cmd_transform(const std::string& in_file, const std::string& out_file,
                  const std::string& direction, const std::string& scheme_flag,
                  int bandlimit_flag, bool check_densify) {
  const sphtv::SignalContainer in = load_container(in_file);
  check_header_match(in, scheme_flag, bandlimit_flag, in_file);
  const sphtv::SphereTransform tr(in.scheme, in.band_limit);
  const int n = tr.grid().n_samples();
  const int l2 = in.band_limit * in.band_limit;

  sphtv::SignalContainer out;
  if (direction == "forward" || direction == "inverse-adjoint") {
    require_kind(in, sphtv::PayloadKind::image, in_file);
    const sphtv::SphereImage img = in.to_image();
    const std::vector<sphtv::cplx> cimg(img.v.begin(), img.v.end());
    sphtv::HarmonicCoeffs h(in.band_limit);
    h.v = direction == "forward" ? tr.forward(cimg) : tr.inverse_adjoint(cimg);
    out = sphtv::SignalContainer::from_coeffs(h, in.scheme);
  } else if (direction == "inverse" || direction == "forward-adjoint") {
    require_kind(in, sphtv::PayloadKind::coeffs, in_file);
    const sphtv::HarmonicCoeffs h = in.to_coeffs();
    const std::vector<sphtv::cplx> s =
        direction == "inverse" ? tr.inverse(h.v) : tr.forward_adjoint(h.v);
    sphtv::SphereImage img(tr.grid());
    double imag_peak = 0.0;
    for (int i = 0; i < n; ++i) {
      img.v[i] = s[i].real();
      imag_peak = std::max(imag_peak, std::abs(s[i].imag()));
    }
    std::cerr << "discarded imaginary part <= " << imag_peak << "\n";
    out = sphtv::SignalContainer::from_image(img);
  } else {
    throw CliError(kExitMalformed, "unknown direction '" + direction + "'");
  }

  if (check_densify) {
    if (in.band_limit > 8)
      throw CliError(kExitMalformed, "densify check is limited to band limits <= 8");
    double gap = 0.0;
    if (direction == "forward" || direction == "forward-adjoint")
      gap = densified_transpose_gap(
          n, l2, [&](const std::vector<sphtv::cplx>& v) { return tr.forward(v); },
          [&](const std::vector<sphtv::cplx>& v) { return tr.forward_adjoint(v); });
    else
      gap = densified_transpose_gap(
          l2, n, [&](const std::vector<sphtv::cplx>& v) { return tr.inverse(v); },
          [&](const std::vector<sphtv::cplx>& v) { return tr.inverse_adjoint(v); });
    std::printf("densified transpose gap %.3e\n", gap);
  }

  sphtv::write_container(out_file, out);
  std::printf("max abs %.17g\n", max_abs(out.data));
  return 0;
}

int cmd_inpaint(const std::string& truth_file, const std::string& out_file,
                const std::string& report_file, double ratio, const std::string& domain_flag,
                const std::string& scheme_flag, int bandlimit_flag, std::uint64_t seed,
                double sigma_n, double alpha, const std::string& config_file) {
  const sphtv::SignalContainer in = load_container(truth_file);
  check_header_match(in, scheme_flag, bandlimit_flag, truth_file);
  require_kind(in, sphtv::PayloadKind::image, truth_file);
  const sphtv::Domain domain = domain_from_flag(domain_flag);

  sphtv::SolverConfig solver;
  if (!config_file.empty()) {
    const nlohmann::json j = load_json_file(config_file);
    try {
      apply_solver_json(j.contains("solver") ? j.at("solver") : j, solver);
    } catch (const nlohmann::json::exception& e) {
      throw CliError(kExitMalformed, std::string("config field mistyped: ") + e.what());
    }
  }

  const sphtv::SphereImage truth = in.to_image();
  const sphtv::SphereTransform tr(in.scheme, in.band_limit);
  const sphtv::QuadratureWeights weights = sphtv::quadrature_weights(tr.grid());
  const int m = static_cast<int>(std::lround(ratio * in.band_limit * in.band_limit));
  if (m < 0 || m > tr.grid().n_samples())
    throw CliError(kExitMalformed, "ratio " + std::to_string(ratio) +
                                       " needs M outside [0, sample count]");

  const sphtv::MeasurementOp mask =
      sphtv::random_mask(tr.grid(), m, sphtv::seed_child(seed, 1));
  const std::vector<double> y = sphtv::add_noise(sphtv::apply_mask(mask, truth), sigma_n,
                                                 sphtv::seed_child(seed, 2));
  solver.epsilon = sphtv::chi2_epsilon(sigma_n, std::max(m, 1), alpha);
  solver.seed = seed;

  std::cerr << "solving " << sphtv::domain_name(domain) << " problem on "
            << sphtv::scheme_name(in.scheme) << " L=" << in.band_limit << " with M=" << m
            << " epsilon=" << solver.epsilon << "\n";

  sphtv::SphereImage solution(tr.grid());
  sphtv::SolverReport report;
  sphtv::HarmonicCoeffs rec(in.band_limit);
  try {
    if (domain == sphtv::Domain::spatial) {
      sphtv::SpatialResult r = sphtv::solve_spatial(y, mask, tr, weights, solver);
      solution = r.image;
      report = r.report;
      rec = tr.analyze(solution);
    } else {
      sphtv::HarmonicResult r = sphtv::solve_harmonic(y, mask, tr, weights, solver);
      solution = r.image;
      report = r.report;
      rec = sphtv::conj_sym_extend(r.half);
    }
  } catch (const std::runtime_error& e) {
    std::cerr << "solver diverged: " << e.what() << "\n";
    return kExitDiverged;
  }

  sphtv::write_container(out_file, sphtv::SignalContainer::from_image(solution));

  nlohmann::json rep;
  rep["scheme"] = sphtv::scheme_name(in.scheme);
  rep["band_limit"] = in.band_limit;
  rep["domain"] = sphtv::domain_name(domain);
  rep["ratio"] = ratio;
  rep["m"] = m;
  rep["seed"] = seed;
  rep["sigma_n"] = sigma_n;
  rep["alpha"] = alpha;
  rep["epsilon"] = solver.epsilon;
  rep["iterations"] = report.iterations;
  rep["objective"] = report.objective;
  rep["residual"] = report.residual;
  rep["converged"] = report.converged;
  rep["wall_ms"] = report.wall_ms;
  rep["snr_db"] = sphtv::snr_harmonic(tr.analyze(truth), rec);
  const std::string text = rep.dump(2) + "\n";
  if (report_file.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text_file(report_file, text);
  return 0;
}

int cmd_experiment(const std::string& config_file, const std::string& csv_file,
                   const std::string& summary_file, bool quiet) {
  const sphtv::ExperimentConfig cfg = experiment_config_from_json(load_json_file(config_file));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitMalformed, std::string("invalid config: ") + e.what());
  }

  sphtv::ExperimentResults res;
  try {
    res = sphtv::run_experiment(cfg, quiet ? nullptr : &std::cerr);
  } catch (const std::runtime_error& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return kExitDiverged;
  }

  write_text_file(csv_file, sphtv::to_csv(res));
  if (!summary_file.empty()) write_text_file(summary_file, summary_json(res).dump(2) + "\n");
  std::cerr << res.trials.size() << " trials written to " << csv_file << "\n";
  return 0;
}

int cmd_render(const std::string& in_file, const std::string& out_png, int width, double lo,
               double hi) {
  const sphtv::SignalContainer in = load_container(in_file);
  require_kind(in, sphtv::PayloadKind::image, in_file);
  if (!(hi > lo)) throw CliError(kExitMalformed, "need --max greater than --min");
  if (width < 2) throw CliError(kExitMalformed, "need --width of at least 2");
  sphtv::write_png(out_png, sphtv::render_mollweide(in.to_image(), width, lo, hi));
  std::cerr << "wrote " << out_png << " (" << width << "x" << width / 2 << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spherical TV inpainting toolkit"};
  app.require_subcommand(1);

  std::string in_file, out_file, report_file, config_file, direction, scheme_flag, domain_flag;
  std::string csv_file = "results.csv", summary_file;
  int bandlimit = 0, width = 800;
  std::uint64_t seed = 1;
  double ratio = 0.5, sigma_n = 0.01, alpha = 0.99, lo = 0.0, hi = 1.0;
  bool check_densify = false, quiet = false;

  CLI::App* transform = app.add_subcommand("transform", "apply a harmonic transform operator");
  transform->add_option("input", in_file, "input container")->required();
  transform->add_option("output", out_file, "output container")->required();
  transform
      ->add_option("--direction", direction,
                   "forward, inverse, forward-adjoint, or inverse-adjoint")
      ->required();
  transform->add_option("--scheme", scheme_flag, "mw or dh, must match the container");
  transform->add_option("--bandlimit", bandlimit, "must match the container");
  transform->add_flag("--check-densify", check_densify,
                      "densify the operator pair and report the transpose gap (L <= 8)");

  CLI::App* inpaint = app.add_subcommand("inpaint", "solve one inpainting problem");
  inpaint->add_option("truth", in_file, "ground-truth image container")->required();
  inpaint->add_option("output", out_file, "solution image container")->required();
  inpaint->add_option("--report", report_file, "report JSON path (default: stdout)");
  inpaint->add_option("--ratio", ratio, "measurement ratio M / L^2");
  inpaint->add_option("--domain", domain_flag, "spatial or harmonic")->required();
  inpaint->add_option("--scheme", scheme_flag, "mw or dh, must match the container");
  inpaint->add_option("--bandlimit", bandlimit, "must match the container");
  inpaint->add_option("--seed", seed, "mask and noise seed");
  inpaint->add_option("--sigma-n", sigma_n, "noise standard deviation");
  inpaint->add_option("--alpha", alpha, "confidence level for the data bound");
  inpaint->add_option("--config", config_file, "solver settings JSON");

  CLI::App* experiment = app.add_subcommand("experiment", "run the full experiment matrix");
  experiment->add_option("--config", config_file, "experiment config JSON")->required();
  experiment->add_option("--csv", csv_file, "results CSV path");
  experiment->add_option("--summary", summary_file, "summary JSON path");
  experiment->add_flag("--quiet", quiet, "suppress progress lines");

  CLI::App* render = app.add_subcommand("render", "rasterize an image container to PNG");
  render->add_option("input", in_file, "image container")->required();
  render->add_option("output", out_file, "PNG path")->required();
  render->add_option("--width", width, "raster width in pixels (height is width / 2)");
  render->add_option("--min", lo, "value mapped to black");
  render->add_option("--max", hi, "value mapped to yellow");

  CLI11_PARSE(app, argc, argv);

  try {
    if (transform->parsed())
      return cmd_transform(in_file, out_file, direction, scheme_flag, bandlimit, check_densify);
    if (inpaint->parsed())
      return cmd_inpaint(in_file, out_file, report_file, ratio, domain_flag, scheme_flag,
                         bandlimit, seed, sigma_n, alpha, config_file);
    if (experiment->parsed()) return cmd_experiment(config_file, csv_file, summary_file, quiet);
    if (render->parsed()) return cmd_render(in_file, out_file, width, lo, hi);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  }
  return 0;
}
