// Command-line harness: synthetic data generation, sentinel selection,
// prediction evaluation, and grid sweeps over noise / data-volume / budget.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentinet/dynamics.hpp"
#include "sentinet/errors.hpp"
#include "sentinet/gsbl.hpp"
#include "sentinet/io.hpp"
#include "sentinet/predict.hpp"
#include "sentinet/snma.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using sentinet::BadConfig;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  unsigned threads = 1;
};

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// ---- config plumbing -------------------------------------------------------

ordered_json load_config(const std::string& path) {
  const std::string text = sentinet::read_text_file(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw BadConfig("config file " + path + " is not valid JSON");
  }
  if (!j.is_object()) {
    throw BadConfig("config file " + path + " must hold a JSON object");
  }
  return j;
}

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw BadConfig("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_required(const ordered_json& j, const std::string& key,
               const std::string& where) {
  if (!j.contains(key)) {
    throw BadConfig("missing required key '" + key + "' in " + where);
  }
  try {
    return j.at(key).get<T>();
  } catch (const ordered_json::exception&) {
    throw BadConfig("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_optional(const ordered_json& j, const std::string& key, T fallback,
               const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const ordered_json::exception&) {
    throw BadConfig("key '" + key + "' in " + where + " has the wrong type");
  }
}

// Accepts a JSON number or the string "inf".
double parse_snr(const ordered_json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "INF") return kInf;
  }
  throw BadConfig("snr_db in " + where + " must be a number or \"inf\"");
}

sentinet::SystemKind parse_kind(const ordered_json& j,
                                const std::string& where) {
  const auto s = get_required<std::string>(j, "kind", where);
  try {
    return sentinet::system_kind_from_string(s);
  } catch (const sentinet::Error&) {
    throw BadConfig("kind in " + where + " must be 'linear' or 'logistic'");
  }
}

sentinet::FitControl parse_fit(const ordered_json& j,
                               const std::string& where) {
  sentinet::FitControl ctrl;
  if (!j.contains("fit")) return ctrl;
  const auto& f = j.at("fit");
  if (!f.is_object()) throw BadConfig("'fit' in " + where + " must be an object");
  check_keys(f, {"max_iters", "tol"}, where + ".fit");
  ctrl.max_iters = get_optional<int>(f, "max_iters", ctrl.max_iters, where);
  ctrl.tol = get_optional<double>(f, "tol", ctrl.tol, where);
  if (ctrl.max_iters < 1) throw BadConfig("fit.max_iters must be >= 1");
  if (!(ctrl.tol > 0)) throw BadConfig("fit.tol must be positive");
  return ctrl;
}

std::vector<std::string> parse_basis(const ordered_json& j,
                                     const std::string& where) {
  auto names = get_optional<std::vector<std::string>>(j, "basis", {}, where);
  if (!names.empty()) sentinet::make_basis(names);  // validate against registry
  return names;
}

std::uint64_t resolve_seed(const CommonOpts& opts, const ordered_json& j,
                           const std::string& where) {
  if (opts.seed) return *opts.seed;
  if (j.contains("seed")) {
    return get_required<std::uint64_t>(j, "seed", where);
  }
  throw BadConfig("no seed: set 'seed' in " + where + " or pass --seed");
}

ordered_json indices_json(const std::vector<Eigen::Index>& v) {
  ordered_json out = ordered_json::array();
  for (auto i : v) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_json(const fs::path& path, const ordered_json& j) {
  sentinet::write_text_file(path, j.dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
}

// Locates the truth sidecar: explicit config key first, then the
// <dynamics>.truth.json convention next to the data file.
std::optional<sentinet::SyntheticTruth> load_truth(
    const ordered_json& cfg, const fs::path& dynamics_path,
    const std::string& where) {
  if (cfg.contains("truth")) {
    return sentinet::read_truth_json(
        get_required<std::string>(cfg, "truth", where));
  }
  fs::path sidecar = dynamics_path;
  sidecar.replace_extension();
  sidecar += ".truth.json";
  if (fs::exists(sidecar)) return sentinet::read_truth_json(sidecar);
  return std::nullopt;
}

// ---- generate --------------------------------------------------------------

int cmd_generate(const CommonOpts& opts) {
  const ordered_json cfg = load_config(opts.config_path);
  const std::string where = "generate config";
  check_keys(cfg,
             {"n_components", "n_sentinels", "t_rows", "t_over_n", "kind",
              "snr_db", "ber", "var_big", "var_small", "basis", "seed",
              "prefix"},
             where);

  sentinet::SyntheticConfig scfg;
  scfg.n_components = get_required<std::int64_t>(cfg, "n_components", where);
  scfg.n_sentinels = get_required<std::int64_t>(cfg, "n_sentinels", where);
  scfg.kind = parse_kind(cfg, where);

  if (cfg.contains("t_rows") == cfg.contains("t_over_n")) {
    throw BadConfig("give exactly one of 't_rows' or 't_over_n' in " + where);
  }
  if (cfg.contains("t_rows")) {
    scfg.t_rows = get_required<std::int64_t>(cfg, "t_rows", where);
  } else {
    const double ratio = get_required<double>(cfg, "t_over_n", where);
    if (!(ratio > 0)) throw BadConfig("t_over_n must be positive");
    scfg.t_rows = static_cast<Eigen::Index>(
        std::llround(ratio * static_cast<double>(scfg.n_components)));
  }

  if (cfg.contains("snr_db")) {
    if (scfg.kind != sentinet::SystemKind::linear) {
      throw BadConfig("snr_db applies to the linear kind only");
    }
    scfg.snr_db = parse_snr(cfg.at("snr_db"), where);
  }
  if (cfg.contains("ber")) {
    if (scfg.kind != sentinet::SystemKind::logistic) {
      throw BadConfig("ber applies to the logistic kind only");
    }
    scfg.ber = get_required<double>(cfg, "ber", where);
  }
  scfg.var_big = get_optional<double>(cfg, "var_big", scfg.var_big, where);
  scfg.var_small =
      get_optional<double>(cfg, "var_small", scfg.var_small, where);
  scfg.basis_names = parse_basis(cfg, where);
  scfg.seed = resolve_seed(opts, cfg, where);

  const auto prefix =
      get_optional<std::string>(cfg, "prefix", "synthetic", where);

  auto [dynamics, truth] = sentinet::generate_synthetic(scfg);
  dynamics.component_ids.reserve(dynamics.n_components());
  for (Eigen::Index i = 0; i < dynamics.n_components(); ++i) {
    dynamics.component_ids.push_back("c" + std::to_string(i));
  }

  fs::create_directories(opts.out_dir);
  const fs::path csv = fs::path(opts.out_dir) / (prefix + ".csv");
  const fs::path tj = fs::path(opts.out_dir) / (prefix + ".truth.json");
  sentinet::write_dynamics_csv(csv, dynamics);
  std::cout << "wrote " << csv.string() << "\n";
  sentinet::write_truth_json(tj, truth);
  std::cout << "wrote " << tj.string() << "\n";
  return 0;
}

// ---- select ----------------------------------------------------------------

int cmd_select(const CommonOpts& opts) {
  const ordered_json cfg = load_config(opts.config_path);
  const std::string where = "select config";
  check_keys(cfg,
             {"dynamics", "truth", "kind", "k", "basis", "fit", "carry_hyper",
              "random_init", "seed", "prefix", "timing"},
             where);

  sentinet::SnmaConfig scfg;
  scfg.kind = parse_kind(cfg, where);
  scfg.k = get_required<std::int64_t>(cfg, "k", where);
  scfg.fit = parse_fit(cfg, where);
  scfg.basis_names = parse_basis(cfg, where);
  scfg.carry_hyper =
      get_optional<bool>(cfg, "carry_hyper", scfg.carry_hyper, where);
  scfg.random_init =
      get_optional<bool>(cfg, "random_init", scfg.random_init, where);
  if (scfg.random_init || opts.seed || cfg.contains("seed")) {
    scfg.seed = resolve_seed(opts, cfg, where);
  }
  const bool timing = get_optional<bool>(cfg, "timing", false, where);
  const auto prefix = get_optional<std::string>(cfg, "prefix", "select", where);

  const fs::path dyn_path = get_required<std::string>(cfg, "dynamics", where);
  const auto mode = scfg.kind == sentinet::SystemKind::logistic
                        ? sentinet::Mode::discrete
                        : sentinet::Mode::continuous;
  const sentinet::DynamicsMatrix d = sentinet::read_dynamics_csv(dyn_path, mode);

  const double t0 = now_ms();
  const sentinet::SelectionResult sel = sentinet::run_snma(d, scfg);
  const double wall = now_ms() - t0;

  fs::create_directories(opts.out_dir);
  const auto model = sentinet::model_from_selection(sel, d.n_components(),
                                                    scfg.basis_names);
  const fs::path model_path =
      fs::path(opts.out_dir) / (prefix + ".model.json");
  sentinet::write_model_json(model_path, model);
  std::cout << "wrote " << model_path.string() << "\n";

  ordered_json rec;
  rec["subcommand"] = "select";
  rec["config"] = cfg;
  rec["seed"] = scfg.seed;
  rec["kind"] = sentinet::to_string(sel.kind);
  rec["n_components"] = static_cast<std::int64_t>(d.n_components());
  rec["sentinels"] = indices_json(sel.sentinels);
  rec["priority_order"] = indices_json(sel.priority_order);
  rec["gamma_final"] = vector_json(sel.gamma_final);
  const auto truth = load_truth(cfg, dyn_path, where);
  if (truth) {
    rec["failure_rate"] =
        sentinet::failure_rate(truth->sentinels, sel.sentinels);
  }
  ordered_json rounds = ordered_json::array();
  for (const auto& r : sel.rounds) {
    ordered_json rj;
    rj["removed"] = static_cast<std::int64_t>(r.removed_component);
    rj["iterations"] = r.iterations;
    rj["converged"] = r.converged;
    rounds.push_back(std::move(rj));
  }
  rec["rounds"] = std::move(rounds);
  write_json(fs::path(opts.out_dir) / (prefix + ".result.json"), rec);

  if (timing) {
    ordered_json tj;
    tj["wall_ms_total"] = wall;
    ordered_json per_round = ordered_json::array();
    for (const auto& r : sel.rounds) per_round.push_back(r.wall_ms);
    tj["rounds_ms"] = std::move(per_round);
    write_json(fs::path(opts.out_dir) / (prefix + ".timing.json"), tj);
  }

  std::cout << "sentinels:";
  for (auto s : sel.sentinels) std::cout << ' ' << s;
  std::cout << "\n";
  return 0;
}

// ---- predict-eval ----------------------------------------------------------

int cmd_predict_eval(const CommonOpts& opts) {
  const ordered_json cfg = load_config(opts.config_path);
  const std::string where = "predict-eval config";
  check_keys(cfg, {"model", "dynamics", "truth", "prefix", "timing"}, where);

  const sentinet::ModelFile model = sentinet::read_model_json(
      get_required<std::string>(cfg, "model", where));
  const fs::path dyn_path = get_required<std::string>(cfg, "dynamics", where);
  const auto mode = model.kind == sentinet::SystemKind::logistic
                        ? sentinet::Mode::discrete
                        : sentinet::Mode::continuous;
  const sentinet::DynamicsMatrix observed =
      sentinet::read_dynamics_csv(dyn_path, mode);
  if (observed.n_components() != model.n_components) {
    throw sentinet::DimensionMismatch(
        "model expects " + std::to_string(model.n_components) +
        " components but dynamics file has " +
        std::to_string(observed.n_components()));
  }
  if (observed.t_rows() < 2) {
    throw sentinet::EmptyDynamics("need at least 2 rows to evaluate");
  }
  const bool timing = get_optional<bool>(cfg, "timing", false, where);
  const auto prefix =
      get_optional<std::string>(cfg, "prefix", "predict", where);

  sentinet::BasisSet basis;
  const sentinet::BasisSet* basis_ptr = nullptr;
  if (!model.basis_names.empty()) {
    basis = sentinet::make_basis(model.basis_names);
    basis_ptr = &basis;
  }
  sentinet::Posterior post;
  post.kind = model.kind;
  post.M = model.M;
  post.sigma = model.sigma;

  const double t0 = now_ms();
  const auto rows =
      sentinet::extract_surveillance(observed, model.sentinels, basis_ptr);
  const Eigen::MatrixXd preds = sentinet::rollout(
      post,
      model.kind == sentinet::SystemKind::linear
          ? std::optional<double>(model.lambda)
          : std::nullopt,
      rows);
  const Eigen::Index horizon = observed.t_rows() - 1;
  const Eigen::MatrixXd aligned = preds.topRows(horizon);
  const Eigen::MatrixXd actual = observed.values.bottomRows(horizon);
  const double rp = sentinet::rmse_paper(actual, aligned);
  const double rc = sentinet::rmse(actual, aligned);
  const double wall = now_ms() - t0;

  fs::create_directories(opts.out_dir);
  const fs::path pred_path =
      fs::path(opts.out_dir) / (prefix + ".predictions.csv");
  sentinet::write_matrix_csv(pred_path, aligned);
  std::cout << "wrote " << pred_path.string() << "\n";

  ordered_json rec;
  rec["subcommand"] = "predict-eval";
  rec["config"] = cfg;
  rec["kind"] = sentinet::to_string(model.kind);
  rec["n_components"] = static_cast<std::int64_t>(model.n_components);
  rec["sentinels"] = indices_json(model.sentinels);
  rec["t_predicted"] = static_cast<std::int64_t>(horizon);
  rec["rmse_paper"] = rp;
  rec["rmse"] = rc;
  const auto truth = load_truth(cfg, dyn_path, where);
  if (truth) {
    rec["failure_rate"] =
        sentinet::failure_rate(truth->sentinels, model.sentinels);
  }
  write_json(fs::path(opts.out_dir) / (prefix + ".result.json"), rec);

  if (timing) {
    ordered_json tj;
    tj["wall_ms_total"] = wall;
    write_json(fs::path(opts.out_dir) / (prefix + ".timing.json"), tj);
  }
  std::cout << "rmse_paper " << sentinet::format_double(rp) << " rmse "
            << sentinet::format_double(rc) << "\n";
  return 0;
}

// ---- sweep -----------------------------------------------------------------

struct SweepCell {
  double noise = 0.0;  // snr_db or ber depending on kind
  double t_over_n = 0.0;
  std::uint64_t seed = 0;
};

struct SweepRow {
  Eigen::Index k = 0;
  double failure = kNan;
  double rmse_p = kNan;
  double rmse_c = kNan;
  bool converged = false;
};

struct CellResult {
  std::vector<SweepRow> rows;
  double wall_ms = 0.0;
  std::string error;
};

struct SweepPlan {
  sentinet::SystemKind kind;
  Eigen::Index n_components = 0;
  Eigen::Index n_sentinels = 0;
  std::vector<double> noise_levels;
  std::vector<double> t_over_n;
  std::vector<Eigen::Index> ks;
  std::vector<std::uint64_t> seeds;
  int cv_folds = 5;
  double var_big = 10.0;
  double var_small = 0.1;
  std::vector<std::string> basis_names;
  sentinet::FitControl fit;
  bool carry_hyper = true;
  bool random_init = false;
};

// Contiguous row range [begin, end) of fold f when T rows split into n blocks.
std::pair<Eigen::Index, Eigen::Index> fold_range(Eigen::Index t_rows, int folds,
                                                 int f) {
  const Eigen::Index base = t_rows / folds;
  const Eigen::Index extra = t_rows % folds;
  Eigen::Index begin = 0;
  for (int i = 0; i < f; ++i) begin += base + (i < extra ? 1 : 0);
  const Eigen::Index len = base + (f < extra ? 1 : 0);
  return {begin, begin + len};
}

CellResult run_sweep_cell(const SweepPlan& plan, const SweepCell& cell) {
  CellResult out;
  const double t0 = now_ms();
  try {
    sentinet::SyntheticConfig gcfg;
    gcfg.n_components = plan.n_components;
    gcfg.n_sentinels = plan.n_sentinels;
    gcfg.t_rows = static_cast<Eigen::Index>(std::llround(
        cell.t_over_n * static_cast<double>(plan.n_components)));
    gcfg.kind = plan.kind;
    if (plan.kind == sentinet::SystemKind::linear) {
      gcfg.snr_db = cell.noise;
    } else {
      gcfg.ber = cell.noise;
    }
    gcfg.var_big = plan.var_big;
    gcfg.var_small = plan.var_small;
    gcfg.basis_names = plan.basis_names;
    gcfg.seed = cell.seed;
    const auto [dynamics, truth] = sentinet::generate_synthetic(gcfg);

    sentinet::SnmaConfig scfg;
    scfg.kind = plan.kind;
    scfg.fit = plan.fit;
    scfg.basis_names = plan.basis_names;
    scfg.seed = cell.seed;
    scfg.random_init = plan.random_init;
    scfg.carry_hyper = plan.carry_hyper;

    // Full-panel selection gives the recovery metric at each budget.
    const auto full_path = sentinet::run_snma_path(dynamics, scfg, plan.ks);

    // Contiguous-fold cross-validation gives the prediction metric: train on
    // the remaining blocks (boundary transitions dropped), roll out on the
    // held-out block.
    sentinet::BasisSet basis;
    const sentinet::BasisSet* basis_ptr = nullptr;
    if (!plan.basis_names.empty()) {
      basis = sentinet::make_basis(plan.basis_names);
      basis_ptr = &basis;
    }
    std::map<Eigen::Index, std::vector<double>> fold_rmse_p, fold_rmse_c;
    for (int f = 0; f < plan.cv_folds; ++f) {
      const auto [begin, end] = fold_range(dynamics.t_rows(), plan.cv_folds, f);
      if (end - begin < 2) {
        throw BadConfig("cv fold " + std::to_string(f) +
                        " has fewer than 2 rows");
      }
      std::vector<sentinet::LagPair> parts;
      for (const auto& [sb, se] :
           {std::pair{Eigen::Index{0}, begin},
            std::pair{end, dynamics.t_rows()}}) {
        if (se - sb < 2) continue;
        sentinet::DynamicsMatrix seg;
        seg.mode = dynamics.mode;
        seg.values = dynamics.values.middleRows(sb, se - sb);
        parts.push_back(sentinet::make_lag_pair(seg, basis_ptr));
      }
      if (parts.empty()) {
        throw BadConfig("cv fold " + std::to_string(f) +
                        " leaves no usable training rows");
      }
      const sentinet::LagPair train = sentinet::concat_lag_pairs(parts);
      const auto path = sentinet::run_snma_path(train, scfg, plan.ks);

      sentinet::DynamicsMatrix test;
      test.mode = dynamics.mode;
      test.values = dynamics.values.middleRows(begin, end - begin);
      const Eigen::Index horizon = test.t_rows() - 1;
      const Eigen::MatrixXd actual = test.values.bottomRows(horizon);
      for (const auto& [k, sel] : path) {
        const auto rows = sentinet::extract_surveillance(
            test, sel.sentinels, basis_ptr);
        const Eigen::MatrixXd preds = sentinet::rollout(
            sel.posterior_final,
            plan.kind == sentinet::SystemKind::linear
                ? std::optional<double>(sel.linear_final.lambda)
                : std::nullopt,
            rows);
        const Eigen::MatrixXd aligned = preds.topRows(horizon);
        fold_rmse_p[k].push_back(sentinet::rmse_paper(actual, aligned));
        fold_rmse_c[k].push_back(sentinet::rmse(actual, aligned));
      }
    }

    for (const auto k : plan.ks) {
      SweepRow row;
      row.k = k;
      const auto& sel = full_path.at(k);
      row.failure = sentinet::failure_rate(truth.sentinels, sel.sentinels);
      row.converged =
          !sel.rounds.empty() && sel.rounds.back().converged;
      const auto& rp = fold_rmse_p.at(k);
      const auto& rc = fold_rmse_c.at(k);
      row.rmse_p = 0.0;
      row.rmse_c = 0.0;
      for (double v : rp) row.rmse_p += v;
      for (double v : rc) row.rmse_c += v;
      row.rmse_p /= static_cast<double>(rp.size());
      row.rmse_c /= static_cast<double>(rc.size());
      out.rows.push_back(row);
    }
  } catch (const std::exception& e) {
    out.rows.clear();
    out.error = e.what();
    for (const auto k : plan.ks) {
      SweepRow row;
      row.k = k;
      out.rows.push_back(row);
    }
  }
  out.wall_ms = now_ms() - t0;
  return out;
}

std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  return sentinet::format_double(v);
}

int cmd_sweep(const CommonOpts& opts) {
  const ordered_json cfg = load_config(opts.config_path);
  const std::string where = "sweep config";
  check_keys(cfg,
             {"kind", "n_components", "n_sentinels", "grid", "seeds",
              "cv_folds", "var_big", "var_small", "basis", "fit",
              "carry_hyper", "random_init", "prefix"},
             where);
  if (opts.seed) {
    throw BadConfig("sweep draws seeds from the config 'seeds' list; "
                    "--seed does not apply");
  }

  SweepPlan plan;
  plan.kind = parse_kind(cfg, where);
  plan.n_components = get_required<std::int64_t>(cfg, "n_components", where);
  plan.n_sentinels = get_required<std::int64_t>(cfg, "n_sentinels", where);
  plan.var_big = get_optional<double>(cfg, "var_big", plan.var_big, where);
  plan.var_small =
      get_optional<double>(cfg, "var_small", plan.var_small, where);
  plan.basis_names = parse_basis(cfg, where);
  plan.fit = parse_fit(cfg, where);
  plan.carry_hyper =
      get_optional<bool>(cfg, "carry_hyper", plan.carry_hyper, where);
  plan.random_init =
      get_optional<bool>(cfg, "random_init", plan.random_init, where);
  plan.cv_folds = get_optional<int>(cfg, "cv_folds", plan.cv_folds, where);
  if (plan.cv_folds < 2) throw BadConfig("cv_folds must be >= 2");

  if (!cfg.contains("grid") || !cfg.at("grid").is_object()) {
    throw BadConfig("sweep config needs a 'grid' object");
  }
  const auto& grid = cfg.at("grid");
  check_keys(grid, {"snr_db", "ber", "t_over_n", "k"}, where + ".grid");
  if (plan.kind == sentinet::SystemKind::linear) {
    if (grid.contains("ber")) {
      throw BadConfig("grid.ber applies to the logistic kind only");
    }
    if (grid.contains("snr_db")) {
      for (const auto& v : grid.at("snr_db")) {
        plan.noise_levels.push_back(parse_snr(v, where + ".grid"));
      }
    } else {
      plan.noise_levels.push_back(kInf);
    }
  } else {
    if (grid.contains("snr_db")) {
      throw BadConfig("grid.snr_db applies to the linear kind only");
    }
    plan.noise_levels = get_optional<std::vector<double>>(
        grid, "ber", {0.0}, where + ".grid");
  }
  plan.t_over_n =
      get_required<std::vector<double>>(grid, "t_over_n", where + ".grid");
  for (const auto k :
       get_required<std::vector<std::int64_t>>(grid, "k", where + ".grid")) {
    plan.ks.push_back(k);
  }
  plan.seeds = get_required<std::vector<std::uint64_t>>(cfg, "seeds", where);
  if (plan.noise_levels.empty() || plan.t_over_n.empty() || plan.ks.empty() ||
      plan.seeds.empty()) {
    throw BadConfig("grid lists and seeds must be non-empty");
  }
  for (const auto k : plan.ks) {
    if (k < 1 || k > plan.n_components) {
      throw BadConfig("grid.k entries must lie in [1, n_components]");
    }
  }
  const auto prefix = get_optional<std::string>(cfg, "prefix", "sweep", where);

  std::vector<SweepCell> cells;
  for (const double noise : plan.noise_levels) {
    for (const double ton : plan.t_over_n) {
      for (const auto seed : plan.seeds) {
        cells.push_back({noise, ton, seed});
      }
    }
  }

  std::vector<CellResult> results(cells.size());
  unsigned threads = opts.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
  if (threads <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) {
      results[i] = run_sweep_cell(plan, cells[i]);
    }
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
          results[i] = run_sweep_cell(plan, cells[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  const bool linear = plan.kind == sentinet::SystemKind::linear;
  std::string rec_csv =
      "kind,n_components,n_sentinels,t_over_n,snr_db,ber,k,seed,"
      "failure_rate,rmse_paper,rmse,converged,wall_ms,error\n";
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    const auto& res = results[i];
    for (const auto& row : res.rows) {
      rec_csv += sentinet::to_string(plan.kind);
      rec_csv += ',' + std::to_string(plan.n_components);
      rec_csv += ',' + std::to_string(plan.n_sentinels);
      rec_csv += ',' + sentinet::format_double(cell.t_over_n);
      rec_csv += ',' + (linear ? sentinet::format_double(cell.noise)
                               : std::string());
      rec_csv += ',' + (linear ? std::string()
                               : sentinet::format_double(cell.noise));
      rec_csv += ',' + std::to_string(row.k);
      rec_csv += ',' + std::to_string(cell.seed);
      rec_csv += ',' + csv_num(row.failure);
      rec_csv += ',' + csv_num(row.rmse_p);
      rec_csv += ',' + csv_num(row.rmse_c);
      rec_csv += ',';
      rec_csv += res.error.empty() ? (row.converged ? "1" : "0") : "";
      rec_csv += ',' + sentinet::format_double(res.wall_ms);
      rec_csv += ',' + res.error;
      rec_csv += '\n';
    }
  }
  fs::create_directories(opts.out_dir);
  const fs::path rec_path = fs::path(opts.out_dir) / (prefix + ".records.csv");
  sentinet::write_text_file(rec_path, rec_csv);
  std::cout << "wrote " << rec_path.string() << "\n";

  // Seed means per grid point, skipping errored cells.
  std::string mean_csv =
      "kind,n_components,n_sentinels,t_over_n,snr_db,ber,k,n_runs,"
      "failure_rate_mean,rmse_paper_mean,rmse_mean\n";
  for (const double noise : plan.noise_levels) {
    for (const double ton : plan.t_over_n) {
      for (const auto k : plan.ks) {
        double sf = 0, sp = 0, sc = 0;
        int n = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
          if (cells[i].noise != noise || cells[i].t_over_n != ton) continue;
          if (!results[i].error.empty()) continue;
          for (const auto& row : results[i].rows) {
            if (row.k != k) continue;
            sf += row.failure;
            sp += row.rmse_p;
            sc += row.rmse_c;
            ++n;
          }
        }
        mean_csv += sentinet::to_string(plan.kind);
        mean_csv += ',' + std::to_string(plan.n_components);
        mean_csv += ',' + std::to_string(plan.n_sentinels);
        mean_csv += ',' + sentinet::format_double(ton);
        mean_csv +=
            ',' + (linear ? sentinet::format_double(noise) : std::string());
        mean_csv +=
            ',' + (linear ? std::string() : sentinet::format_double(noise));
        mean_csv += ',' + std::to_string(k);
        mean_csv += ',' + std::to_string(n);
        if (n > 0) {
          mean_csv += ',' + sentinet::format_double(sf / n);
          mean_csv += ',' + sentinet::format_double(sp / n);
          mean_csv += ',' + sentinet::format_double(sc / n);
        } else {
          mean_csv += ",,,";
        }
        mean_csv += '\n';
      }
    }
  }
  const fs::path mean_path = fs::path(opts.out_dir) / (prefix + ".means.csv");
  sentinet::write_text_file(mean_path, mean_csv);
  std::cout << "wrote " << mean_path.string() << "\n";

  int errors = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) ++errors;
  }
  std::cout << cells.size() << " cells, " << errors << " errored\n";
  return 0;
}

// ---- dispatch --------------------------------------------------------------

int run_guarded(int (*fn)(const CommonOpts&), const CommonOpts& opts) {
  try {
    return fn(opts);
  } catch (const BadConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const sentinet::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const sentinet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"row-sparse sentinel mining and prediction toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "JSON config file")
        ->required();
    sub->add_option("--seed", opts.seed,
                    "override the seed in the config file");
    sub->add_option("-o,--out", opts.out_dir, "output directory")
        ->default_val(".");
    sub->add_option("-t,--threads", opts.threads,
                    "worker threads (sweep only; 0 = all cores)")
        ->default_val(1);
  };

  auto* gen = app.add_subcommand(
      "generate", "synthesize a planted-sentinel dynamics panel");
  auto* sel = app.add_subcommand(
      "select", "mine sentinels from a dynamics file via backward elimination");
  auto* pred = app.add_subcommand(
      "predict-eval", "roll a fitted model over a test window and score it");
  auto* swp = app.add_subcommand(
      "sweep", "grid of generate+select+evaluate runs with seed means");
  for (auto* sub : {gen, sel, pred, swp}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) return run_guarded(cmd_generate, opts);
  if (sel->parsed()) return run_guarded(cmd_select, opts);
  if (pred->parsed()) return run_guarded(cmd_predict_eval, opts);
  return run_guarded(cmd_sweep, opts);
}
