#include "cli.hpp"

#include "confsteer/activation_store.hpp"
#include "confsteer/codec.hpp"
#include "confsteer/csv.hpp"
#include "confsteer/geometry.hpp"
#include "confsteer/numerics/calibration.hpp"
#include "confsteer/probes.hpp"
#include "confsteer/steering.hpp"
#include "confsteer/svg_plot.hpp"
#include "confsteer/synthdata.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace confsteer::cli {

namespace {

std::string opt_cell(const std::optional<double> &v) { return v ? format_double(*v) : ""; }

SplitFractions parse_fractions(const std::vector<double> &f) {
  if (f.size() != 3)
    throw ValidationError("--split needs three fractions train,val,test");
  return {f[0], f[1], f[2]};
}

void check_lambdas(const std::vector<double> &lambdas) {
  if (lambdas.empty())
    throw ValidationError("--lambdas must not be empty");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw ValidationError("--lambdas entries must be finite and >= 0");
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void ensure_parent(const fs::path &file) {
  if (file.has_parent_path())
    ensure_dir(file.parent_path());
}

/// Rows of `ds` in the named split. "all", or a dump carrying no split
/// labels at all, keeps every row.
ActivationDataset subset(const ActivationDataset &ds, const std::string &split) {
  if (split == "all")
    return ds;
  const bool labelled = std::any_of(ds.meta.begin(), ds.meta.end(),
                                    [](const RowMeta &m) { return m.split.has_value(); });
  if (!labelled)
    return ds;
  ActivationDataset out = ds.select(ds.indices_in(parse_split(split)));
  if (out.size() == 0)
    throw ValidationError("no rows in split '" + split + "'");
  return out;
}

/// The resolved configuration of a subcommand, in the same flat key = value
/// format the --config option reads.
void write_resolved_config(const CLI::App &sub, const fs::path &path) {
  std::string text = sub.config_to_str(true, false);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write resolved config '" + path.string() + "'");
  out << text;
}

fs::path config_path_for_dir(const fs::path &dir, const std::string &cmd) {
  return dir / (cmd + ".resolved.ini");
}

fs::path config_path_for_file(const fs::path &file) {
  fs::path p = file;
  p += ".resolved.ini";
  return p;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig cfg;
  fs::path out;
  std::vector<int> layers{0};
  std::vector<double> noise_by_layer;
  std::vector<std::string> conditions{"pure_correctness", "pure_confidence", "joint"};
  std::vector<double> split{0.6, 0.2, 0.2};
  bool write_sweep = true;
};

int cmd_synth(const SynthArgs &a, const CLI::App &sub, std::ostream &out) {
  if (!a.noise_by_layer.empty() && a.noise_by_layer.size() != a.layers.size())
    throw ValidationError("--noise-by-layer needs one value per layer");
  const SplitFractions fractions = parse_fractions(a.split);
  std::vector<Condition> conditions;
  for (const auto &c : a.conditions)
    conditions.push_back(parse_condition(c));
  a.cfg.validate();
  ensure_dir(a.out);

  nlohmann::json truth;
  truth["seed"] = a.cfg.seed;
  truth["planted_cosine"] = a.cfg.planted_cosine;
  GroundTruth last;
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    SynthConfig cfg = a.cfg;
    cfg.layer = a.layers[li];
    if (!a.noise_by_layer.empty())
      cfg.noise_sigma = a.noise_by_layer[li];
    for (Condition c : conditions) {
      cfg.condition = c;
      SynthOutput s = generate(cfg);
      const auto ds = split_by_question(s.dataset, fractions, cfg.seed);
      const std::string name = "L" + std::to_string(cfg.layer) + "_" + std::string(to_string(c));
      write_dataset(ds, a.out / name);
      out << "wrote " << (a.out / name).string() << " (" << ds.size() << " rows)\n";
      last = std::move(s.truth);
    }
    nlohmann::json layer;
    layer["layer"] = cfg.layer;
    layer["noise_sigma"] = cfg.noise_sigma;
    layer["u_b64"] = encode_f32(last.u);
    layer["v_b64"] = encode_f32(last.v);
    truth["layers"].push_back(layer);
  }
  {
    std::ofstream f(a.out / "truth.json", std::ios::binary);
    if (!f)
      throw IoError("cannot write truth.json");
    f << truth.dump(2) << "\n";
  }

  CsvTable latents;
  latents.header = {"question_id", "accuracy", "confidence"};
  for (std::size_t q = 0; q < last.question_ids.size(); ++q)
    latents.rows.push_back({last.question_ids[q],
                            format_double(last.accuracy(static_cast<Eigen::Index>(q))),
                            format_double(last.confidence(static_cast<Eigen::Index>(q)))});
  write_csv(a.out / "questions.csv", latents);

  if (a.write_sweep) {
    // One row per (alpha, question): the mean of samples_per_question responses.
    Xoshiro256 rng(derive_seed(a.cfg.seed, 5));
    CsvTable sweep;
    sweep.header = {"alpha", "question_id", "confidence"};
    for (double alpha : default_alpha_grid())
      for (std::size_t q = 0; q < last.question_ids.size(); ++q) {
        double s = 0;
        for (int k = 0; k < a.cfg.samples_per_question; ++k)
          s += simulate_response(last.confidence(static_cast<Eigen::Index>(q)), alpha, a.cfg, rng);
        sweep.rows.push_back({format_double(alpha), last.question_ids[q],
                              format_double(s / a.cfg.samples_per_question)});
      }
    write_csv(a.out / "sweep.csv", sweep);
  }
  write_resolved_config(sub, config_path_for_dir(a.out, "synth"));
  return kOk;
}

// ---------------------------------------------------------------- probe

struct ProbeArgs {
  std::vector<fs::path> data;
  std::vector<std::string> targets{"empirical_accuracy"};
  std::vector<double> lambdas = default_lambda_grid();
  std::vector<double> split{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
  bool binned = false;
  bool standardize = false;
  fs::path out;
};

int cmd_probe(const ProbeArgs &a, const CLI::App &sub, std::ostream &out) {
  check_lambdas(a.lambdas);
  const SplitFractions fractions = parse_fractions(a.split);
  std::vector<ProbeTarget> targets;
  for (const auto &t : a.targets)
    targets.push_back(parse_probe_target(t));
  std::vector<ActivationDataset> datasets;
  for (const auto &dir : a.data) {
    ActivationDataset ds = read_dataset(dir);
    const bool unlabelled = std::any_of(ds.meta.begin(), ds.meta.end(),
                                        [](const RowMeta &m) { return !m.split; });
    if (unlabelled)
      ds = split_by_question(ds, fractions, a.seed);
    datasets.push_back(std::move(ds));
  }
  ensure_dir(a.out);
  const ProbeOptions options{a.binned, a.standardize};
  for (ProbeTarget target : targets) {
    CsvTable t;
    t.header = {"layer",      "lambda",     "r2_train",   "r2_val",     "r2_test",
                "cohens_d",   "pearson_r",  "train_rows", "val_rows",   "test_rows",
                "excluded_rows"};
    std::vector<LayerProbeResult> results;
    for (const auto &ds : datasets)
      results.push_back(fit_probe(ds, target, a.lambdas, options));
    std::stable_sort(results.begin(), results.end(),
                     [](const auto &x, const auto &y) { return x.layer < y.layer; });
    for (const auto &r : results) {
      const std::string name =
          "probe_L" + std::to_string(r.layer) + "_" + std::string(to_string(target)) + ".json";
      save_probe(a.out / name, r);
      std::optional<double> d, pr;
      if (r.projection_stats) {
        d = r.projection_stats->cohens_d;
        pr = r.projection_stats->pearson_r;
      }
      t.rows.push_back({std::to_string(r.layer), format_double(r.fit.lambda),
                        format_double(r.fit.r2_train), opt_cell(r.fit.r2_val),
                        opt_cell(r.fit.r2_test), opt_cell(d), opt_cell(pr),
                        std::to_string(r.train_rows), std::to_string(r.val_rows),
                        std::to_string(r.test_rows), std::to_string(r.excluded_rows)});
      out << to_string(target) << " layer " << r.layer << ": r2_test "
          << opt_cell(r.fit.r2_test) << "\n";
    }
    write_csv(a.out / ("r2_" + std::string(to_string(target)) + ".csv"), t);
  }
  write_resolved_config(sub, config_path_for_dir(a.out, "probe"));
  return kOk;
}

// ---------------------------------------------------------------- caa

struct CaaArgs {
  fs::path data;
  double tau_hi = kDefaultTauHi;
  double tau_lo = kDefaultTauLo;
  fs::path out;
};

int cmd_caa(const CaaArgs &a, const CLI::App &sub, std::ostream &out) {
  if (!(a.tau_lo < a.tau_hi))
    throw ValidationError("--tau-lo must be below --tau-hi");
  const ActivationDataset ds = read_dataset(a.data);
  const SteeringVector sv = build_caa(ds, a.tau_hi, a.tau_lo);
  ensure_parent(a.out);
  save_steering_vector(a.out, sv);
  out << "steering vector from " << sv.num_questions << " questions ("
      << sv.skipped_questions << " skipped)\n";
  write_resolved_config(sub, config_path_for_file(a.out));
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  fs::path sweep;
  fs::path out;
  std::string print_grid;
};

int cmd_sweep(const SweepArgs &a, const CLI::App &sub, std::ostream &out) {
  if (!a.print_grid.empty()) {
    std::vector<double> grid;
    if (a.print_grid == "default")
      grid = default_alpha_grid();
    else if (a.print_grid == "coarse")
      grid = coarse_alpha_grid();
    else
      throw ValidationError("--print-grid must be 'default' or 'coarse'");
    for (double g : grid)
      out << format_double(g) << "\n";
    if (a.sweep.empty())
      return kOk;
  }
  if (a.sweep.empty() || a.out.empty())
    throw ValidationError("sweep needs --sweep and --out");
  const TransferFunction tf = fit_transfer(load_sweep(a.sweep));
  ensure_parent(a.out);
  save_transfer(a.out, tf);
  out << "transfer knots: " << tf.knots.size() << ", alpha range ["
      << format_double(tf.alpha_range.first) << ", " << format_double(tf.alpha_range.second)
      << "]\n";
  write_resolved_config(sub, config_path_for_file(a.out));
  return kOk;
}

// ---------------------------------------------------------------- plan

struct PlanArgs {
  fs::path probe;
  fs::path calib;
  fs::path transfer;
  fs::path data;
  std::string calib_split = "val";
  std::string test_split = "test";
  fs::path out;
  fs::path iso_out;
};

int cmd_plan(const PlanArgs &a, const CLI::App &sub, std::ostream &out) {
  const ProbeFile probe = load_probe(a.probe);
  const TransferFunction tf = load_transfer(a.transfer);
  const ActivationDataset calib = subset(read_dataset(a.calib), a.calib_split);
  const ActivationDataset test = subset(read_dataset(a.data), a.test_split);
  const auto iso = calibrate_probe(probe.fit, calib);
  const SteeringPlan plan = plan_adaptive(probe.fit, iso, tf, test);
  ensure_parent(a.out);
  save_plan(a.out, plan);
  if (!a.iso_out.empty()) {
    ensure_parent(a.iso_out);
    save_isotonic(a.iso_out, iso);
  }
  const auto n_clamped = std::count_if(plan.entries.begin(), plan.entries.end(),
                                       [](const PlanEntry &e) { return e.clamped; });
  out << "planned " << plan.entries.size() << " questions (" << n_clamped << " clamped)\n";
  write_resolved_config(sub, config_path_for_file(a.out));
  return kOk;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  fs::path input;
  std::string confidence_col = "confidence";
  std::string accuracy_col = "accuracy";
  std::size_t bins = 10;
  bool brier_per_sample = false;
  fs::path out;
  fs::path bins_out;
};

int cmd_metrics(const MetricsArgs &a, const CLI::App &sub, std::ostream &out) {
  const CsvTable t = read_csv(a.input);
  const std::size_t ci = t.require_column(a.confidence_col);
  std::vector<double> conf, acc;
  std::optional<double> brier_sample;
  if (const auto ai = t.column(a.accuracy_col)) {
    if (a.brier_per_sample)
      throw ValidationError("--brier-per-sample needs a 'correct' column, not accuracy");
    for (const auto &r : t.rows) {
      conf.push_back(parse_double_cell(r[ci], a.confidence_col));
      acc.push_back(parse_double_cell(r[*ai], a.accuracy_col));
    }
  } else {
    const auto ki = t.column("correct");
    if (!ki)
      throw ValidationError("metrics input needs an '" + a.accuracy_col +
                            "' or 'correct' column");
    const std::size_t qi = t.require_column("question_id");
    // Per-sample rows: aggregate to per-question means in first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::array<double, 3>> sums; // conf, correct, count
    std::vector<double> row_conf;
    std::vector<bool> row_correct;
    for (const auto &r : t.rows) {
      const double c = parse_double_cell(r[ci], a.confidence_col);
      const double k = parse_double_cell(r[*ki], "correct");
      if (k != 0.0 && k != 1.0)
        throw ValidationError("'correct' must be 0 or 1");
      if (!sums.count(r[qi]))
        order.push_back(r[qi]);
      auto &s = sums[r[qi]];
      s[0] += c;
      s[1] += k;
      s[2] += 1;
      row_conf.push_back(c);
      row_correct.push_back(k == 1.0);
    }
    for (const auto &q : order) {
      conf.push_back(sums[q][0] / sums[q][2]);
      acc.push_back(sums[q][1] / sums[q][2]);
    }
    if (a.brier_per_sample)
      brier_sample = brier_binary(row_conf, row_correct);
  }
  if (conf.empty())
    throw ValidationError("metrics input has no rows");
  const CalibrationReport rep =
      ece(Eigen::Map<const VectorXd>(conf.data(), static_cast<Eigen::Index>(conf.size())),
          Eigen::Map<const VectorXd>(acc.data(), static_cast<Eigen::Index>(acc.size())), a.bins);
  const double brier = brier_sample ? *brier_sample : rep.brier;
  const std::string brier_def = brier_sample ? "per_sample" : "per_question";

  out << "n " << conf.size() << "\nece " << format_double(rep.ece) << "\nbrier "
      << format_double(brier) << " (" << brier_def << ")\nmae " << format_double(rep.mae)
      << "\n";
  if (!a.out.empty()) {
    CsvTable m;
    m.header = {"n", "ece", "brier", "mae", "bins", "brier_definition"};
    m.rows.push_back({std::to_string(conf.size()), format_double(rep.ece), format_double(brier),
                      format_double(rep.mae), std::to_string(a.bins), brier_def});
    ensure_parent(a.out);
    write_csv(a.out, m);
    write_resolved_config(sub, config_path_for_file(a.out));
  }
  if (!a.bins_out.empty()) {
    CsvTable b;
    b.header = {"bin", "lo", "hi", "count", "mean_confidence", "mean_accuracy"};
    for (std::size_t i = 0; i < rep.bins.size(); ++i) {
      const auto &bin = rep.bins[i];
      b.rows.push_back({std::to_string(i), format_double(bin.lo), format_double(bin.hi),
                        std::to_string(bin.count),
                        bin.count ? format_double(bin.mean_confidence) : "",
                        bin.count ? format_double(bin.mean_accuracy) : ""});
    }
    ensure_parent(a.bins_out);
    write_csv(a.bins_out, b);
  }
  return kOk;
}

// ---------------------------------------------------------------- geometry

struct GeometryArgs {
  std::vector<fs::path> probe_a, probe_b;
  std::vector<fs::path> pure, joint;
  std::vector<fs::path> subspace;
  double hi_q = 0.75, lo_q = 0.25;
  SubspaceReportOptions sub;
  fs::path out;
};

int cmd_geometry(const GeometryArgs &a, const CLI::App &sub, std::ostream &out) {
  if (a.probe_a.empty() && a.pure.empty() && a.subspace.empty())
    throw ValidationError("geometry needs --probe-a/--probe-b, --pure/--joint or --subspace");
  check_lambdas(a.sub.lambdas);
  ensure_dir(a.out);

  if (!a.probe_a.empty() || !a.probe_b.empty()) {
    std::map<int, VectorXd> wa, wb;
    for (const auto &p : a.probe_a) {
      auto f = load_probe(p);
      wa[f.layer] = f.fit.weights;
    }
    for (const auto &p : a.probe_b) {
      auto f = load_probe(p);
      wb[f.layer] = f.fit.weights;
    }
    CsvTable t;
    t.header = {"layer", "cosine"};
    for (const auto &[layer, w] : wa) {
      const auto it = wb.find(layer);
      if (it == wb.end())
        throw ValidationError("no --probe-b file for layer " + std::to_string(layer));
      const double c = weight_cosine(w, it->second);
      t.rows.push_back({std::to_string(layer), format_double(c)});
      out << "layer " << layer << " probe cosine " << format_double(c) << "\n";
    }
    write_csv(a.out / "probe_cosine.csv", t);
  }

  if (!a.pure.empty() || !a.joint.empty()) {
    std::vector<ActivationDataset> pure, joint;
    for (const auto &d : a.pure)
      pure.push_back(read_dataset(d));
    for (const auto &d : a.joint)
      joint.push_back(read_dataset(d));
    CsvTable t;
    t.header = {"layer", "cos_pure", "cos_joint"};
    for (const auto &p : contamination_curve(pure, joint, a.hi_q, a.lo_q))
      t.rows.push_back(
          {std::to_string(p.layer), format_double(p.cos_pure), format_double(p.cos_joint)});
    write_csv(a.out / "contamination.csv", t);
  }

  if (!a.subspace.empty()) {
    CsvTable t;
    t.header = {"layer",
                "k",
                "pca_dim",
                "mean_angle_deg",
                "min_angle_deg",
                "baseline_mean_deg",
                "baseline_two_sigma_deg",
                "cca_top",
                "cca_mean",
                "retention_a_given_b",
                "retention_b_given_a",
                "r2_a_self_removed",
                "r2_b_self_removed",
                "full_a",
                "shared_a",
                "unique_a",
                "full_b",
                "shared_b",
                "unique_b",
                "unique_estimator",
                "retention_flag"};
    std::vector<SubspaceReport> reps;
    for (const auto &d : a.subspace)
      reps.push_back(subspace_report(read_dataset(d), a.sub));
    std::stable_sort(reps.begin(), reps.end(),
                     [](const auto &x, const auto &y) { return x.layer < y.layer; });
    for (const auto &r : reps) {
      t.rows.push_back({std::to_string(r.layer), std::to_string(r.k), std::to_string(r.pca_dim),
                        format_double(r.mean_principal_angle_deg),
                        format_double(r.min_principal_angle_deg),
                        format_double(r.random_baseline.mean_deg),
                        format_double(r.random_baseline.two_sigma_deg),
                        format_double(r.cca_correlations(0)),
                        format_double(r.cca_correlations.mean()),
                        opt_cell(r.a_given_b_removed.ratio), opt_cell(r.b_given_a_removed.ratio),
                        format_double(r.a_self_removed.r2_after),
                        format_double(r.b_self_removed.r2_after), format_double(r.variance_a.full),
                        format_double(r.variance_a.shared), format_double(r.variance_a.unique),
                        format_double(r.variance_b.full), format_double(r.variance_b.shared),
                        format_double(r.variance_b.unique), "subtraction",
                        r.retention_flag ? "1" : "0"});
      out << "layer " << r.layer << " mean principal angle "
          << format_double(r.mean_principal_angle_deg) << " deg (baseline "
          << format_double(r.random_baseline.mean_deg) << ")\n";
    }
    write_csv(a.out / "subspace.csv", t);
  }
  write_resolved_config(sub, config_path_for_dir(a.out, "geometry"));
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<fs::path> r2;
  fs::path transfer, bins, subspace, contamination, probe_cosine, plan;
  fs::path out;
};

std::vector<double> column_values(const CsvTable &t, std::string_view name) {
  const std::size_t c = t.require_column(name);
  std::vector<double> v;
  for (const auto &r : t.rows)
    v.push_back(r[c].empty() ? std::numeric_limits<double>::quiet_NaN()
                             : parse_double_cell(r[c], name));
  return v;
}

int cmd_report(const ReportArgs &a, const CLI::App &sub, std::ostream &out) {
  ensure_dir(a.out);
  int written = 0;
  auto emit = [&](const std::string &name, const Plot &p) {
    write_svg(a.out / name, p);
    out << "wrote " << (a.out / name).string() << "\n";
    ++written;
  };
  if (!a.r2.empty()) {
    Plot p{"Probe R2 by layer", "layer", "R2", {}, {}, {}, false};
    for (const auto &f : a.r2) {
      const CsvTable t = read_csv(f);
      const auto layer = column_values(t, "layer");
      p.series.push_back({f.stem().string() + " train", layer, column_values(t, "r2_train")});
      p.series.push_back({f.stem().string() + " test", layer, column_values(t, "r2_test")});
    }
    emit("layer_curves.svg", p);
  }
  if (!a.transfer.empty()) {
    const CsvTable t = read_csv(a.transfer);
    Plot p{"Steering transfer", "alpha", "mean confidence", {}, {}, std::pair{0.0, 1.0}, false};
    p.series.push_back(
        {"transfer", column_values(t, "alpha"), column_values(t, "mean_confidence")});
    emit("sweep_curve.svg", p);
  }
  if (!a.bins.empty()) {
    const CsvTable t = read_csv(a.bins);
    Plot p{"Reliability diagram", "confidence", "accuracy", {}, std::pair{0.0, 1.0},
           std::pair{0.0, 1.0}, true};
    p.series.push_back({"bins", column_values(t, "mean_confidence"),
                        column_values(t, "mean_accuracy"), {}, SeriesStyle::markers});
    emit("reliability.svg", p);
  }
  if (!a.subspace.empty()) {
    const CsvTable t = read_csv(a.subspace);
    const auto layer = column_values(t, "layer");
    const auto base = column_values(t, "baseline_mean_deg");
    const auto two = column_values(t, "baseline_two_sigma_deg");
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < base.size(); ++i) {
      lo.push_back(base[i] - two[i]);
      hi.push_back(base[i] + two[i]);
    }
    Plot p{"Principal angles", "layer", "degrees", {}, {}, {}, false};
    p.series.push_back({"random +-2 sd", layer, lo, hi, SeriesStyle::band});
    p.series.push_back({"mean angle", layer, column_values(t, "mean_angle_deg")});
    p.series.push_back({"min angle", layer, column_values(t, "min_angle_deg")});
    emit("principal_angles.svg", p);
  }
  if (!a.contamination.empty()) {
    const CsvTable t = read_csv(a.contamination);
    const auto layer = column_values(t, "layer");
    Plot p{"Confidence/accuracy contrast cosine", "layer", "cosine", {}, {},
           std::pair{-1.0, 1.0}, false};
    p.series.push_back({"pure", layer, column_values(t, "cos_pure")});
    p.series.push_back({"joint", layer, column_values(t, "cos_joint")});
    emit("contamination.svg", p);
  }
  if (!a.probe_cosine.empty()) {
    const CsvTable t = read_csv(a.probe_cosine);
    Plot p{"Probe weight cosine", "layer", "cosine", {}, {}, std::pair{-1.0, 1.0}, false};
    p.series.push_back({"cosine", column_values(t, "layer"), column_values(t, "cosine")});
    emit("probe_cosine.svg", p);
  }
  if (!a.plan.empty()) {
    const CsvTable t = read_csv(a.plan);
    Plot p{"Steering plan", "target confidence", "alpha*", {}, {}, {}, false};
    p.series.push_back({"questions", column_values(t, "target_confidence"),
                        column_values(t, "alpha_star"), {}, SeriesStyle::markers});
    emit("plan.svg", p);
  }
  if (written == 0)
    throw ValidationError("report: no input CSVs given");
  write_resolved_config(sub, config_path_for_dir(a.out, "report"));
  return kOk;
}

// ---------------------------------------------------------------- wiring

CLI::App *with_config(std::string &config, CLI::App *sub) {
  sub->option_defaults()->always_capture_default();
  sub->add_option("--config", config, "Flat key = value file; flags override it")
      ->configurable(false);
  return sub;
}

bool given_on_command_line(const std::vector<std::string> &args, const std::string &flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string &a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

/// Splices the keys of a --config file in front of the subcommand's flags,
/// skipping keys that were also given as flags.
std::vector<std::string> expand_config(const std::vector<std::string> &args) {
  std::optional<std::string> file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      file = args[i].substr(9);
  }
  if (!file)
    return args;
  if (!fs::is_regular_file(*file))
    throw IoError("cannot open config file '" + *file + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(*file);
  } catch (const CLI::Error &e) {
    throw ValidationError("malformed config file '" + *file + "': " + e.what());
  }
  std::vector<std::string> out{args.front()};
  for (const auto &item : items) {
    if (item.name == "++" || item.name == "--")
      continue;
    const std::string flag = "--" + item.name;
    if (given_on_command_line(args, flag) || item.inputs.empty())
      continue;
    if (item.inputs.size() == 1 && (item.inputs[0] == "{}" || item.inputs[0].empty()))
      continue;
    if (item.inputs.size() == 1) {
      out.push_back(flag + "=" + item.inputs[0]);
    } else {
      out.push_back(flag);
      out.insert(out.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Probes, steering and subspace geometry for activation dumps", "confsteer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  std::function<int()> action;
  std::string config_file;

  SynthArgs synth;
  auto *s = with_config(config_file, app.add_subcommand("synth", "Write synthetic dumps with planted directions"));
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--layers", synth.layers, "Layer indices")->delimiter(',');
  s->add_option("--noise-by-layer", synth.noise_by_layer, "noise_sigma per layer")->delimiter(',');
  s->add_option("--conditions", synth.conditions, "Prompt conditions")->delimiter(',');
  s->add_option("--dim", synth.cfg.dim)->check(CLI::Range(2, 1 << 20));
  s->add_option("--questions", synth.cfg.n_questions)->check(CLI::PositiveNumber);
  s->add_option("--rows-per-question", synth.cfg.rows_per_question)->check(CLI::PositiveNumber);
  s->add_option("--planted-cosine", synth.cfg.planted_cosine)->check(CLI::Range(-1.0, 1.0));
  s->add_option("--noise-sigma", synth.cfg.noise_sigma)->check(CLI::NonNegativeNumber);
  s->add_option("--confidence-bias", synth.cfg.confidence_bias);
  s->add_option("--confidence-coupling", synth.cfg.confidence_coupling);
  s->add_option("--confidence-noise", synth.cfg.confidence_noise)->check(CLI::NonNegativeNumber);
  s->add_option("--framing-spread", synth.cfg.framing_spread)->check(CLI::NonNegativeNumber);
  s->add_option("--response-gain", synth.cfg.response_gain);
  s->add_option("--response-noise", synth.cfg.response_noise)->check(CLI::NonNegativeNumber);
  s->add_option("--samples", synth.cfg.samples_per_question, "Simulated samples per question")
      ->check(CLI::PositiveNumber);
  s->add_option("--split", synth.split, "train,val,test fractions")->delimiter(',');
  s->add_option("--seed", synth.cfg.seed);
  s->add_flag("--sweep,!--no-sweep", synth.write_sweep, "Write the simulated sweep.csv");
  s->callback([&] { action = [&] { return cmd_synth(synth, *s, out); }; });

  ProbeArgs probe;
  auto *p = with_config(config_file, app.add_subcommand("probe", "Fit ridge probes per layer"));
  p->add_option("--data", probe.data, "Dump directories (one per layer)")->required();
  p->add_option("--target", probe.targets, "Probe targets")->delimiter(',');
  p->add_option("--lambdas", probe.lambdas, "Ridge penalty grid")->delimiter(',');
  p->add_option("--split", probe.split, "Fractions used when rows carry no split")->delimiter(',');
  p->add_option("--seed", probe.seed, "Split seed");
  p->add_flag("--binned", probe.binned, "Decile-binned accuracy target");
  p->add_flag("--standardize", probe.standardize, "Fit on z-scored features");
  p->add_option("--out", probe.out, "Output directory")->required();
  p->callback([&] { action = [&] { return cmd_probe(probe, *p, out); }; });

  CaaArgs caa;
  auto *c = with_config(config_file, app.add_subcommand("caa", "Build a contrastive steering vector"));
  c->add_option("--data", caa.data, "pure_confidence dump")->required();
  c->add_option("--tau-hi", caa.tau_hi)->check(CLI::Range(0.0, 1.0));
  c->add_option("--tau-lo", caa.tau_lo)->check(CLI::Range(0.0, 1.0));
  c->add_option("--out", caa.out, "Steering vector JSON")->required();
  c->callback([&] { action = [&] { return cmd_caa(caa, *c, out); }; });

  SweepArgs sweep;
  auto *w = with_config(config_file, app.add_subcommand("sweep", "Fit the alpha -> confidence transfer"));
  w->add_option("--sweep", sweep.sweep, "Sweep CSV (alpha,question_id,confidence)");
  w->add_option("--out", sweep.out, "Transfer CSV");
  w->add_option("--print-grid", sweep.print_grid, "Print the 'default' or 'coarse' alpha grid");
  w->callback([&] { action = [&] { return cmd_sweep(sweep, *w, out); }; });

  PlanArgs plan;
  auto *l = with_config(config_file, app.add_subcommand("plan", "Per-question steering strengths"));
  l->add_option("--probe", plan.probe, "Accuracy probe JSON")->required();
  l->add_option("--calib", plan.calib, "Dump used for isotonic calibration")->required();
  l->add_option("--calib-split", plan.calib_split, "Split of --calib to use, or 'all'");
  l->add_option("--transfer", plan.transfer, "Transfer CSV")->required();
  l->add_option("--data", plan.data, "Dump with the questions to plan")->required();
  l->add_option("--test-split", plan.test_split, "Split of --data to use, or 'all'");
  l->add_option("--out", plan.out, "Plan CSV")->required();
  l->add_option("--isotonic-out", plan.iso_out, "Also write the calibration map");
  l->callback([&] { action = [&] { return cmd_plan(plan, *l, out); }; });

  MetricsArgs metrics;
  auto *m = with_config(config_file, app.add_subcommand("metrics", "ECE, Brier and MAE"));
  m->add_option("--input", metrics.input, "CSV with confidence and accuracy or correct")
      ->required();
  m->add_option("--confidence-col", metrics.confidence_col);
  m->add_option("--accuracy-col", metrics.accuracy_col);
  m->add_option("--bins", metrics.bins)->check(CLI::Range(1, 1000));
  m->add_flag("--brier-per-sample", metrics.brier_per_sample, "Binary Brier over sample rows");
  m->add_option("--out", metrics.out, "Metrics CSV");
  m->add_option("--bins-out", metrics.bins_out, "Per-bin CSV");
  m->callback([&] { action = [&] { return cmd_metrics(metrics, *m, out); }; });

  GeometryArgs geo;
  auto *g = with_config(config_file, app.add_subcommand("geometry", "Probe cosines, contamination, subspaces"));
  g->add_option("--probe-a", geo.probe_a, "Accuracy probe JSON files");
  g->add_option("--probe-b", geo.probe_b, "Confidence probe JSON files");
  g->add_option("--pure", geo.pure, "pure_confidence dumps");
  g->add_option("--joint", geo.joint, "joint dumps");
  g->add_option("--subspace", geo.subspace, "Dumps carrying both labels");
  g->add_option("--hi-q", geo.hi_q)->check(CLI::Range(0.0, 1.0));
  g->add_option("--lo-q", geo.lo_q)->check(CLI::Range(0.0, 1.0));
  g->add_option("--k", geo.sub.k)->check(CLI::PositiveNumber);
  g->add_option("--pca-dim", geo.sub.pca_dim)->check(CLI::PositiveNumber);
  g->add_option("--cca-dim", geo.sub.cca_dim)->check(CLI::PositiveNumber);
  g->add_option("--trials", geo.sub.baseline_trials)->check(CLI::Range(2, 1000000));
  g->add_option("--seed", geo.sub.seed);
  g->add_option("--lambdas", geo.sub.lambdas)->delimiter(',');
  g->add_option("--out", geo.out, "Output directory")->required();
  g->callback([&] { action = [&] { return cmd_geometry(geo, *g, out); }; });

  ReportArgs report;
  auto *r = with_config(config_file, app.add_subcommand("report", "Render CSV outputs as SVG plots"));
  r->add_option("--r2", report.r2, "r2_*.csv from probe");
  r->add_option("--transfer", report.transfer);
  r->add_option("--bins", report.bins, "Per-bin CSV from metrics");
  r->add_option("--subspace", report.subspace);
  r->add_option("--contamination", report.contamination);
  r->add_option("--probe-cosine", report.probe_cosine);
  r->add_option("--plan", report.plan);
  r->add_option("--out", report.out, "Output directory")->required();
  r->callback([&] { action = [&] { return cmd_report(report, *r, out); }; });

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
    return action ? action() : kOk;
  } catch (const CLI::CallForHelp &) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::Success &) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError &e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError &e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError &e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
}

int run(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace confsteer::cli
