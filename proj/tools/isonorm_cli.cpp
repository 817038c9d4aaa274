// isonorm — fit, apply, invert, and analyze invertible feature-space
// normalizations; build Hadamard matrices; fuse normalizers into linear
// layers; run the synthetic multi-teacher distillation harness.
//
// Every output file is written atomically (temp + rename). Errors exit with
// a per-class code; --json additionally prints a machine-readable record on
// stderr. All randomness descends from --seed.

#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "isonorm/analysis.hpp"
#include "isonorm/distill.hpp"
#include "isonorm/errors.hpp"
#include "isonorm/fuse.hpp"
#include "isonorm/hadamard.hpp"
#include "isonorm/moments.hpp"
#include "isonorm/normalize.hpp"
#include "isonorm/tensor_io.hpp"

namespace {

using namespace isonorm;

struct GlobalOpts {
  bool json = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void emit_error(const Error& e, bool as_json) {
  if (as_json) {
    nlohmann::json j;
    j["error"] = e.code_name();
    j["code"] = static_cast<int>(e.code());
    j["message"] = e.what();
    if (auto* dc = dynamic_cast<const DegenerateChannel*>(&e)) j["channel"] = dc->index;
    if (auto* rd = dynamic_cast<const RankDeficient*>(&e))
      j["effective_rank"] = rd->effective_rank;
    if (auto* td = dynamic_cast<const TrainingDiverged*>(&e)) j["step"] = td->step;
    if (auto* pe = dynamic_cast<const ParseError*>(&e)) j["line"] = pe->line;
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error (" << e.code_name() << "): " << e.what() << "\n";
  }
}

Matrix read_matrix(const std::string& path) {
  io::TensorData t = io::read_tensor_file(path);
  return io::as_matrix(t);
}

void write_output(const std::string& path, const std::string& text) {
  io::atomic_write(path, text);
}

void write_report(const std::string& out, const nlohmann::json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_output(out, text);
}

normalize::Normalizer load_normalizer(const std::string& path) {
  return normalize::deserialize(io::read_file(path));
}

moments::Eigensystem eigs_from_stats(const std::string& stats_path) {
  moments::FinalizedMoments stats = io::load_stats(stats_path);
  return moments::eigh(stats.covariance);
}

int run_hadamard(std::size_t size, bool plan_only, const std::string& out) {
  hadamard::HadamardMatrix h = hadamard::construct(size);
  std::cout << h.recipe.to_sexpr() << "\n";
  if (!plan_only && !out.empty()) {
    std::vector<std::uint8_t> bytes = io::encode_tensor(h.entries);
    io::atomic_write(out, bytes.data(), bytes.size());
  }
  return 0;
}

int run_fit_stats(const std::string& in, const std::string& out) {
  Matrix features = read_matrix(in);
  io::save_stats(out, moments::compute_moments(features));
  return 0;
}

int run_fit(const std::string& method, const std::string& stats_path,
            const std::string& out, bool clamp, bool no_sign_fix, double floor_rel) {
  moments::FinalizedMoments stats = io::load_stats(stats_path);
  normalize::FitOptions opt;
  opt.clamp = clamp;
  opt.sign_fix = !no_sign_fix;
  if (floor_rel > 0.0) opt.floor_rel = floor_rel;
  normalize::Normalizer nrm =
      normalize::fit(normalize::method_from_name(method), stats, opt);
  std::vector<std::uint8_t> bytes = normalize::serialize(nrm);
  io::atomic_write(out, bytes.data(), bytes.size());
  return 0;
}

int run_apply(bool inverse, const std::string& nrm_path, const std::string& in,
              const std::string& out) {
  normalize::Normalizer nrm = load_normalizer(nrm_path);
  io::TensorData t = io::read_tensor_file(in);
  Matrix x = io::as_matrix(t);
  Matrix y = inverse ? normalize::invert(nrm, x) : normalize::apply(nrm, x);
  std::vector<std::uint8_t> bytes =
      t.was_f32 ? io::encode_tensor_f32(y) : io::encode_tensor(y);
  io::atomic_write(out, bytes.data(), bytes.size());
  return 0;
}

int run_analyze_radial(const std::string& stats_path, const std::string& method,
                       std::size_t grid, const std::string& out) {
  moments::Eigensystem eigs = eigs_from_stats(stats_path);
  analysis::RadialCurve curve =
      analysis::radial_error(eigs, normalize::method_from_name(method), grid);
  std::ostringstream csv;
  csv << "theta,radius\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.thetas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", curve.thetas[i], curve.radii[i]);
    csv << buf;
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_output(out, csv.str());
  return 0;
}

int run_analyze_var_range(const std::string& nrm_path, const std::string& err_path,
                          const std::string& out) {
  normalize::Normalizer nrm = load_normalizer(nrm_path);
  Matrix err = read_matrix(err_path);
  analysis::VarianceRangeReport rep = analysis::variance_range(nrm, err);
  nlohmann::json doc;
  doc["method"] = normalize::method_name(nrm.method);
  doc["normalized_variance"] = rep.normalized_variance;
  doc["denormalized_variance"] = rep.denormalized_variance;
  doc["normalized_range"] = rep.normalized_range;
  doc["denormalized_range"] = rep.denormalized_range;
  write_report(out, doc);
  return 0;
}

int run_analyze_rank(const std::string& stats_path, const std::string& out) {
  moments::Eigensystem eigs = eigs_from_stats(stats_path);
  nlohmann::json doc;
  doc["channels"] = eigs.values.size();
  doc["effective_rank"] = analysis::effective_rank(eigs.values);
  doc["eigenvalues"] = eigs.values;
  write_report(out, doc);
  return 0;
}

int run_analyze_align(const std::string& stats_path, const std::string& out) {
  moments::Eigensystem eigs = eigs_from_stats(stats_path);
  hadamard::HadamardMatrix h = hadamard::construct(eigs.values.size());
  analysis::AlignmentReport rep = analysis::alignment_report(eigs, h);
  nlohmann::json doc;
  doc["mean"] = rep.mean;
  doc["min"] = rep.min;
  doc["max"] = rep.max;
  doc["count_above"] = rep.count_above;
  doc["threshold"] = rep.threshold;
  doc["recipe"] = h.recipe.to_sexpr();
  write_report(out, doc);
  return 0;
}

int run_fuse(const std::string& layer_path, const std::string& nrm_path,
             const std::string& out, std::size_t verify_probes, std::uint64_t seed) {
  fuse::LinearLayer layer = fuse::deserialize_layer(io::read_file(layer_path));
  normalize::Normalizer nrm = load_normalizer(nrm_path);
  fuse::FusedLinear fused = fuse::fuse(layer, nrm);
  if (verify_probes > 0) {
    const double rel = fuse::verify_fusion(layer, nrm, fused, verify_probes, seed);
    std::cout << "max relative two-path error over " << verify_probes
              << " probes: " << rel << "\n";
  }
  std::vector<std::uint8_t> bytes = fuse::serialize(fused);
  io::atomic_write(out, bytes.data(), bytes.size());
  return 0;
}

std::string trajectory_csv(const distill::DistillReport& rep) {
  std::ostringstream csv;
  const std::size_t nteach = rep.teachers.size();
  csv << "step";
  for (std::size_t t = 0; t < nteach; ++t) csv << ",train_loss_" << t;
  for (std::size_t t = 0; t < nteach; ++t) csv << ",normalized_mse_" << t;
  for (std::size_t t = 0; t < nteach; ++t) csv << ",denormalized_mse_" << t;
  csv << "\n";
  char buf[64];
  for (const distill::StepRecord& rec : rep.trajectory) {
    csv << rec.step;
    auto put = [&](const Vector& v) {
      for (double x : v) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        csv << buf;
      }
    };
    put(rec.train_loss);
    put(rec.normalized_mse);
    put(rec.denormalized_mse);
    csv << "\n";
  }
  return csv.str();
}

int run_simulate(const GlobalOpts& g, const std::string& config_path,
                 const std::string& out, const std::string& traj_path) {
  std::vector<std::uint8_t> raw = io::read_file(config_path);
  nlohmann::json doc =
      nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded())
    throw ParseError(0, "simulate: config is not valid JSON: " + config_path);
  distill::DistillConfig cfg = distill::config_from_json(doc);
  if (g.seed_given) cfg.seed = g.seed;
  distill::DistillReport rep = distill::run_distillation(cfg);
  write_report(out, rep.to_json());
  if (!traj_path.empty()) write_output(traj_path, trajectory_csv(rep));
  return 0;
}

int run_csv_import(const std::string& in, const std::string& out, bool header) {
  Matrix m = io::csv_import(in, header);
  std::vector<std::uint8_t> bytes = io::encode_tensor(m);
  io::atomic_write(out, bytes.data(), bytes.size());
  return 0;
}

int run_csv_export(const std::string& in, const std::string& out) {
  io::csv_export(out, read_matrix(in));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isonorm: invertible teacher-feature normalization toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_flag("--json", g.json, "emit machine-readable JSON errors on stderr");
  app.add_option("--seed", g.seed, "seed for randomized operations")
      ->each([&](const std::string&) { g.seed_given = true; });

  std::function<int()> run;

  {
    auto* cmd = app.add_subcommand("hadamard", "construct a Hadamard matrix");
    auto size = std::make_shared<std::size_t>(0);
    auto plan = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--size", *size, "matrix order C")->required();
    cmd->add_flag("--plan", *plan, "print the construction plan only");
    cmd->add_option("--out", *out, "write the matrix as a tensor file");
    cmd->callback([&run, size, plan, out] {
      run = [=] { return run_hadamard(*size, *plan, *out); };
    });
  }
  {
    auto* cmd = app.add_subcommand("fit-stats", "accumulate moments of a feature set");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "input N x C tensor file")->required();
    cmd->add_option("--out", *out, "output stats JSON (covariance in sidecar)")
        ->required();
    cmd->callback([&run, in, out] {
      run = [=] { return run_fit_stats(*in, *out); };
    });
  }
  {
    auto* cmd = app.add_subcommand("fit", "fit a normalizer from stats");
    auto method = std::make_shared<std::string>();
    auto stats = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto clamp = std::make_shared<bool>(false);
    auto no_sign_fix = std::make_shared<bool>(false);
    auto floor = std::make_shared<double>(0.0);
    cmd->add_option("--method", *method, "gstd | std | pca | zca | hca | phis")
        ->required();
    cmd->add_option("--stats", *stats, "stats JSON from fit-stats")->required();
    cmd->add_option("--out", *out, "output normalizer file")->required();
    cmd->add_flag("--clamp-sigma", *clamp,
                  "clamp degenerate channels/eigenvalues at the floor instead "
                  "of raising an error");
    cmd->add_flag("--no-sign-fix", *no_sign_fix,
                  "keep raw eigenvector signs (PHI-S only)");
    cmd->add_option("--floor", *floor, "relative degeneracy floor (default 1e-6)");
    cmd->callback([&run, method, stats, out, clamp, no_sign_fix, floor] {
      run = [=] {
        return run_fit(*method, *stats, *out, *clamp, *no_sign_fix, *floor);
      };
    });
  }
  for (const bool inverse : {false, true}) {
    auto* cmd = app.add_subcommand(inverse ? "invert" : "apply",
                                   inverse ? "map normalized features back"
                                           : "normalize features");
    auto nrm = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--nrm", *nrm, "normalizer file from fit")->required();
    cmd->add_option("--in", *in, "input N x C tensor file")->required();
    cmd->add_option("--out", *out, "output tensor file")->required();
    cmd->callback([&run, inverse, nrm, in, out] {
      run = [=] { return run_apply(inverse, *nrm, *in, *out); };
    });
  }
  {
    auto* cmd = app.add_subcommand("analyze", "error-profile diagnostics");
    cmd->require_subcommand(1);
    {
      auto* sub = cmd->add_subcommand("radial", "2-D error-circle radius vs angle (CSV)");
      auto stats = std::make_shared<std::string>();
      auto method = std::make_shared<std::string>("phis");
      auto grid = std::make_shared<std::size_t>(720);
      auto out = std::make_shared<std::string>();
      sub->add_option("--stats", *stats, "stats JSON of a 2-channel distribution")
          ->required();
      sub->add_option("--method", *method, "normalization method");
      sub->add_option("--grid", *grid, "number of angle samples");
      sub->add_option("--out", *out, "output CSV (default stdout)");
      sub->callback([&run, stats, method, grid, out] {
        run = [=] { return run_analyze_radial(*stats, *method, *grid, *out); };
      });
    }
    {
      auto* sub = cmd->add_subcommand("var-range",
                                      "per-channel error variance in both spaces");
      auto nrm = std::make_shared<std::string>();
      auto err = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      sub->add_option("--nrm", *nrm, "normalizer file")->required();
      sub->add_option("--err", *err, "N x C student-error tensor (normalized space)")
          ->required();
      sub->add_option("--out", *out, "output JSON (default stdout)");
      sub->callback([&run, nrm, err, out] {
        run = [=] { return run_analyze_var_range(*nrm, *err, *out); };
      });
    }
    {
      auto* sub = cmd->add_subcommand("rank", "effective rank of the fitted spectrum");
      auto stats = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      sub->add_option("--stats", *stats, "stats JSON from fit-stats")->required();
      sub->add_option("--out", *out, "output JSON (default stdout)");
      sub->callback([&run, stats, out] {
        run = [=] { return run_analyze_rank(*stats, *out); };
      });
    }
    {
      auto* sub = cmd->add_subcommand(
          "align", "Hadamard-row vs eigenbasis alignment after optimal matching");
      auto stats = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      sub->add_option("--stats", *stats, "stats JSON from fit-stats")->required();
      sub->add_option("--out", *out, "output JSON (default stdout)");
      sub->callback([&run, stats, out] {
        run = [=] { return run_analyze_align(*stats, *out); };
      });
    }
  }
  {
    auto* cmd = app.add_subcommand("fuse", "fold a normalizer inverse into a linear layer");
    auto layer = std::make_shared<std::string>();
    auto nrm = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto verify = std::make_shared<std::size_t>(16);
    cmd->add_option("--layer", *layer, "linear layer container")->required();
    cmd->add_option("--nrm", *nrm, "normalizer file")->required();
    cmd->add_option("--out", *out, "output fused layer")->required();
    cmd->add_option("--verify", *verify, "two-path verification probes (0 = skip)");
    cmd->callback([&run, &g, layer, nrm, out, verify] {
      run = [=, &g] { return run_fuse(*layer, *nrm, *out, *verify, g.seed); };
    });
  }
  {
    auto* cmd = app.add_subcommand("simulate", "multi-teacher distillation harness");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto traj = std::make_shared<std::string>();
    cmd->add_option("--config", *config, "run configuration JSON")->required();
    cmd->add_option("--out", *out, "output report JSON (default stdout)");
    cmd->add_option("--trajectory", *traj, "also write the per-step trajectory CSV");
    cmd->callback([&run, &g, config, out, traj] {
      run = [=, &g] { return run_simulate(g, *config, *out, *traj); };
    });
  }
  {
    auto* cmd = app.add_subcommand("csv-import", "numeric CSV to tensor file");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto header = std::make_shared<bool>(false);
    cmd->add_option("--in", *in, "input CSV")->required();
    cmd->add_option("--out", *out, "output tensor file")->required();
    cmd->add_flag("--header", *header, "skip a header row");
    cmd->callback([&run, in, out, header] {
      run = [=] { return run_csv_import(*in, *out, *header); };
    });
  }
  {
    auto* cmd = app.add_subcommand("csv-export", "tensor file to numeric CSV");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "input tensor file")->required();
    cmd->add_option("--out", *out, "output CSV")->required();
    cmd->callback([&run, in, out] {
      run = [=] { return run_csv_export(*in, *out); };
    });
  }

  try {
    app.parse(argc, argv);
    if (run) return run();
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    emit_error(e, g.json);
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    emit_error(Error(ErrorCode::Generic, e.what()), g.json);
    return static_cast<int>(ErrorCode::Generic);
  }
}
