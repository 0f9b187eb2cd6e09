// cqr: benchmark driver.
//
//   cqr run (--data FILE --target COL | --synthetic KIND) [--method M]... [--engine E] [--out report.json]
//   cqr demo-fig1 [--out bounds.csv]
//   cqr coverage-audit [--trials N]
//
// Every flag may also come from a key = value file given with --config; flags on the
// command line take precedence.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cqr/cqr.hpp"

namespace {

struct SyntheticOptions {
  std::size_t n = cqr::SyntheticSpec{}.n;
  double noise_scale = cqr::SyntheticSpec{}.noise_scale;
  double outlier_prob = cqr::SyntheticSpec{}.outlier_prob;
  double outlier_scale = cqr::SyntheticSpec{}.outlier_scale;
  std::uint64_t data_seed = 0;
  bool data_seed_set = false;
};

struct EngineOptions {
  int trees = cqr::EngineConfig{}.forest.n_trees;
  int min_leaf = cqr::EngineConfig{}.forest.min_leaf_size;
  int mlp_epochs = cqr::EngineConfig{}.mlp.max_epochs;
  int linear_epochs = cqr::EngineConfig{}.linear.epochs;
  std::size_t knn_k = cqr::EngineConfig{}.knn_k;

  cqr::EngineConfig build() const {
    cqr::EngineConfig cfg;
    cfg.forest.n_trees = trees;
    cfg.forest.min_leaf_size = min_leaf;
    cfg.mlp.max_epochs = mlp_epochs;
    cfg.linear.epochs = linear_epochs;
    cfg.knn_k = knn_k;
    return cfg;
  }
};

void add_synthetic_options(CLI::App* app, SyntheticOptions& s) {
  app->add_option("--n", s.n, "synthetic sample size")->capture_default_str();
  app->add_option("--noise-scale", s.noise_scale, "synthetic noise scale")->capture_default_str();
  app->add_option("--outlier-prob", s.outlier_prob, "synthetic outlier probability")->capture_default_str();
  app->add_option("--outlier-scale", s.outlier_scale, "synthetic outlier scale")->capture_default_str();
  app->add_option("--data-seed", s.data_seed, "seed for the synthetic draw (default: --seed)");
}

void add_engine_options(CLI::App* app, EngineOptions& e) {
  app->add_option("--trees", e.trees, "forest size")->capture_default_str();
  app->add_option("--min-leaf", e.min_leaf, "forest minimum leaf size")->capture_default_str();
  app->add_option("--mlp-epochs", e.mlp_epochs, "MLP epoch budget")->capture_default_str();
  app->add_option("--linear-epochs", e.linear_epochs, "linear quantile epochs")->capture_default_str();
  app->add_option("--knn-k", e.knn_k, "neighbours for the dispersion model")->capture_default_str();
}

cqr::SyntheticSpec make_spec(const std::string& kind, const SyntheticOptions& s, std::uint64_t seed) {
  cqr::SyntheticSpec spec;
  spec.kind = cqr::parse_kind(kind);
  spec.n = s.n;
  spec.noise_scale = s.noise_scale;
  spec.outlier_prob = s.outlier_prob;
  spec.outlier_scale = s.outlier_scale;
  spec.seed = s.data_seed_set ? s.data_seed : seed;
  return spec;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw cqr::Error(cqr::ErrorCode::unwritable_path, "cannot write: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction interval benchmarks"};
  app.set_config("--config", "", "key = value configuration file");
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "repeated-split benchmark");
  std::string data_path, target, synthetic, engine = "qrf", out_path;
  std::vector<std::string> methods;
  SyntheticOptions syn;
  EngineOptions eng;
  cqr::ExperimentConfig cfg;
  bool timings = false;
  auto* data_opt = run->add_option("--data", data_path, "CSV file with a header row");
  run->add_option("--target", target, "response column of --data")->needs(data_opt);
  auto* syn_opt = run->add_option("--synthetic", synthetic, "homoscedastic|heteroscedastic|heteroscedastic_outliers");
  data_opt->excludes(syn_opt);
  run->add_option("--method", methods, "split|local|cqr|cqr-asym (repeatable)");
  run->add_option("--engine", engine, "ridge|mlp|qrf|linear-q|oracle")->capture_default_str();
  run->add_option("--alpha", cfg.alpha, "miscoverage rate")->capture_default_str();
  run->add_option("--reps", cfg.n_repetitions, "number of random splits")->capture_default_str();
  run->add_option("--test-fraction", cfg.test_fraction)->capture_default_str();
  run->add_option("--calibration-fraction", cfg.calibration_fraction)->capture_default_str();
  run->add_option("--gamma", cfg.gamma, "dispersion offset for the local method")->capture_default_str();
  run->add_flag("--tune-quantiles", cfg.tune_quantiles, "cross-validate the nominal quantile levels");
  run->add_option("--cv-folds", cfg.cv_folds)->capture_default_str();
  run->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  run->add_option("--threads", cfg.threads, "repetitions run concurrently")->capture_default_str();
  run->add_flag("--original-units", cfg.original_units, "report lengths in response units");
  run->add_flag("--timings", timings, "include wall times in JSON output");
  run->add_option("--out", out_path, "report path (.json or .csv); stdout CSV if absent");
  add_synthetic_options(run, syn);
  add_engine_options(run, eng);

  // demo-fig1
  auto* demo = app.add_subcommand("demo-fig1", "split vs local vs CQR on the synthetic law, per-point bounds");
  std::string demo_kind = "heteroscedastic_outliers", demo_engine = "qrf", demo_out;
  SyntheticOptions demo_syn;
  EngineOptions demo_eng;
  cqr::ExperimentConfig demo_cfg;
  demo->add_option("--synthetic", demo_kind)->capture_default_str();
  demo->add_option("--engine", demo_engine)->capture_default_str();
  demo->add_option("--alpha", demo_cfg.alpha)->capture_default_str();
  demo->add_option("--gamma", demo_cfg.gamma)->capture_default_str();
  demo->add_option("--seed", demo_cfg.seed)->capture_default_str();
  demo->add_option("--out", demo_out, "CSV path; stdout if absent");
  add_synthetic_options(demo, demo_syn);
  add_engine_options(demo, demo_eng);

  // coverage-audit
  auto* audit = app.add_subcommand("coverage-audit", "Monte Carlo check of the marginal coverage bounds");
  cqr::AuditConfig acfg;
  std::string audit_method = "cqr", audit_engine = "linear-q", audit_kind = "heteroscedastic";
  SyntheticOptions audit_syn;
  EngineOptions audit_eng;
  audit->add_option("--trials", acfg.trials)->capture_default_str();
  audit->add_option("--method", audit_method)->capture_default_str();
  audit->add_option("--engine", audit_engine)->capture_default_str();
  audit->add_option("--synthetic", audit_kind)->capture_default_str();
  audit->add_option("--alpha", acfg.alpha)->capture_default_str();
  audit->add_option("--gamma", acfg.gamma)->capture_default_str();
  audit->add_option("--n-train", acfg.n_train)->capture_default_str();
  audit->add_option("--n-cal", acfg.n_cal)->capture_default_str();
  audit->add_option("--n-test", acfg.n_test)->capture_default_str();
  audit->add_flag("--refit", acfg.refit_each_trial, "refit the engine on a fresh training draw every trial");
  audit->add_option("--seed", acfg.seed)->capture_default_str();
  add_synthetic_options(audit, audit_syn);
  add_engine_options(audit, audit_eng);

  // --config belongs to the top-level app; accept it anywhere on the line.
  std::vector<std::string> args(argv + 1, argv + argc), hoisted;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      hoisted.insert(hoisted.end(), {args[i], args[i + 1]});
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      hoisted.push_back(args[i]);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  args.insert(args.begin(), hoisted.begin(), hoisted.end());
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) {
      syn.data_seed_set = run->count("--data-seed") > 0;
      cfg.engine = cqr::parse_engine(engine);
      cfg.engines = eng.build();
      cfg.methods.clear();
      for (const auto& m : methods.empty() ? std::vector<std::string>{"cqr"} : methods)
        cfg.methods.push_back(cqr::parse_method(m));

      cqr::ExperimentReport report;
      if (!synthetic.empty()) {
        const auto spec = make_spec(synthetic, syn, cfg.seed);
        const auto s = cqr::generate(spec);
        report = cqr::run_experiment(cfg, s.data, s.law, "synthetic:" + synthetic);
      } else if (!data_path.empty()) {
        if (target.empty()) throw cqr::Error(cqr::ErrorCode::invalid_argument, "--target is required with --data");
        const auto csv = cqr::load_csv(data_path, target);
        if (csv.dropped_rows > 0) std::cerr << "note: dropped " << csv.dropped_rows << " unusable rows\n";
        report = cqr::run_experiment(cfg, csv.data, std::nullopt, data_path);
      } else {
        throw cqr::Error(cqr::ErrorCode::invalid_argument, "one of --data or --synthetic is required");
      }
      for (const auto& r : report.rows)
        if (!r.ok) std::cerr << "repetition " << r.repetition << " [" << r.method << "] failed: " << r.error << "\n";
      if (out_path.empty())
        std::cout << cqr::to_csv(report);
      else
        cqr::emit_report(report, out_path, cqr::format_for_path(out_path), timings);
      return 0;
    }

    if (demo->parsed()) {
      demo_syn.data_seed_set = demo->count("--data-seed") > 0;
      demo_cfg.engine = cqr::parse_engine(demo_engine);
      demo_cfg.engines = demo_eng.build();
      demo_cfg.methods = {cqr::Method::split, cqr::Method::local, cqr::Method::cqr};
      const auto res = cqr::demo_fig1(make_spec(demo_kind, demo_syn, demo_cfg.seed), demo_cfg);
      std::string csv = "x,y,oracle_lo,oracle_hi";
      for (auto m : res.methods) {
        std::string name(cqr::method_name(m));
        csv += "," + name + "_lo," + name + "_hi";
      }
      csv += '\n';
      for (const auto& p : res.points) {
        csv += cqr::format_number(p.x) + ',' + cqr::format_number(p.y) + ',' + cqr::format_number(p.oracle_lo) +
               ',' + cqr::format_number(p.oracle_hi);
        for (const auto& b : p.bands) csv += ',' + cqr::format_number(b.lo) + ',' + cqr::format_number(b.hi);
        csv += '\n';
      }
      write_text(demo_out, csv);
      for (std::size_t i = 0; i < res.methods.size(); ++i)
        std::cerr << cqr::method_name(res.methods[i]) << ": coverage " << res.coverage[i] << ", avg length "
                  << res.avg_length[i] << "\n";
      return 0;
    }

    if (audit->parsed()) {
      audit_syn.data_seed_set = true;
      acfg.method = cqr::parse_method(audit_method);
      acfg.engine = cqr::parse_engine(audit_engine);
      acfg.engines = audit_eng.build();
      acfg.data = make_spec(audit_kind, audit_syn, acfg.seed);
      const auto r = cqr::coverage_audit(acfg);
      std::printf("trials %d\npooled_coverage %.6f\nstandard_error %.6f\nbounds [%.6f, %.6f]\n"
                  "tail_lo_miss %.6f\ntail_hi_miss %.6f\nwithin_bounds %s\n",
                  r.trials, r.pooled_coverage, r.standard_error, r.lower_bound, r.upper_bound, r.tail_lo_miss,
                  r.tail_hi_miss, r.within_bounds() ? "yes" : "no");
      return r.within_bounds() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
