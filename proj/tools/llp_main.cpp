#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llp/harness.hpp"
#include "llp/verify.hpp"

namespace {

using nlohmann::ordered_json;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// key=value lines, '#' comments.  The tokens are spliced in right after the
// subcommand, before any explicit flags; every option keeps the last
// occurrence, so the command line overrides the file.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::vector<std::string> toks;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    std::string key = eq == std::string::npos ? "" : trim(t.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(no) +
                               ": expected key=value");
    }
    toks.push_back("--" + key + "=" + trim(t.substr(eq + 1)));
  }
  return toks;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + out);
  os << text;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

struct RuleOpts {
  std::string rule = "pm-sq";
  std::string p_mode = "plugin";
  double p = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t split_seed = 0;
};

void add_rule_opts(CLI::App* sub, RuleOpts& o) {
  sub->add_option("--rule", o.rule, "loss rule")
      ->check(CLI::IsMember(
          {"eprm", "pm-sq", "pm-sq-scaled", "pm-log", "dsq", "ez"}))
      ->capture_default_str();
  sub->add_option("--p-mode", o.p_mode, "label marginal source for dsq/ez")
      ->check(CLI::IsMember({"known", "plugin", "split"}))
      ->capture_default_str();
  sub->add_option(
      "--p", o.p,
      "known label marginal (defaults to the instance's exact marginal)");
  sub->add_option("--split-seed", o.split_seed, "seed for the split partition")
      ->capture_default_str();
}

llp::LossRule make_rule(const RuleOpts& o) {
  using llp::LossRule;
  if (o.rule == "eprm") return LossRule::eprm();
  if (o.rule == "pm-sq") return LossRule::pm_sq(false);
  if (o.rule == "pm-sq-scaled") return LossRule::pm_sq(true);
  if (o.rule == "pm-log") return LossRule::pm_log();
  if (o.rule == "dsq") {
    if (o.p_mode == "known") return LossRule::dsq_known(o.p);
    if (o.p_mode == "plugin") return LossRule::dsq_plugin();
    throw std::invalid_argument("dsq has no split mode");
  }
  if (o.p_mode == "known") return LossRule::ez_known(o.p);
  if (o.p_mode == "plugin") return LossRule::ez_plugin();
  return LossRule::ez_split(o.split_seed);
}

struct InstanceOpts {
  std::string instance = "prop32";
  double instance_eps = 0.01;
  std::size_t grid_m = std::size_t{1} << 17;
  double gamma = 0.2;
  double rho = 0.0;
};

void add_instance_opts(CLI::App* sub, InstanceOpts& o,
                       const std::vector<std::string>& names) {
  sub->add_option("--instance", o.instance, "synthetic instance")
      ->check(CLI::IsMember(names))
      ->capture_default_str();
  sub->add_option("--instance-eps", o.instance_eps,
                  "label bias of the eprm-expfail point")
      ->capture_default_str();
  sub->add_option("--grid-m", o.grid_m, "threshold grid size")
      ->capture_default_str();
  sub->add_option("--gamma", o.gamma, "threshold noise margin")
      ->capture_default_str();
  sub->add_option("--rho", o.rho, "threshold near-boundary noise width")
      ->capture_default_str();
}

// SweepSpec doubles as the instance description for one-shot commands.
llp::SweepSpec as_spec(const InstanceOpts& o, int k, std::uint64_t seed) {
  llp::SweepSpec spec;
  spec.instance = o.instance;
  spec.k = k;
  spec.seed = seed;
  spec.instance_eps = o.instance_eps;
  spec.grid_m = o.grid_m;
  spec.gamma = o.gamma;
  spec.rho = o.rho;
  return spec;
}

llp::LossRule resolve_rule(const RuleOpts& ro, const llp::SweepSpec& spec) {
  llp::LossRule rule = make_rule(ro);
  if (rule.p_mode == llp::LossRule::PMode::Known && !std::isfinite(rule.p)) {
    rule.p = llp::instance_marginal(spec);
  }
  return rule;
}

int cmd_generate(const InstanceOpts& inst, std::size_t n, int k,
                 std::uint64_t seed, double margin, int d, std::size_t member,
                 const std::string& from_csv, const std::string& label_col,
                 bool shuffle, const std::string& out) {
  llp::BagDataset ds;
  std::string source = inst.instance;
  if (!from_csv.empty()) {
    source = "csv";
    ds = llp::load_csv(from_csv, label_col, k,
                       shuffle ? std::optional<std::uint64_t>(seed)
                               : std::nullopt);
  } else if (inst.instance == "threshold") {
    llp::ThresholdExperiment exp = llp::ThresholdExperiment::make(
        inst.grid_m, llp::choose_t_star(inst.grid_m, seed), inst.gamma,
        inst.rho);
    ds = llp::to_bag_dataset(llp::sample_threshold(exp, n, k, seed));
  } else if (inst.instance == "linsep") {
    ds = llp::make_linsep_dataset(n, k, margin, seed);
  } else if (inst.instance == "lower-bound") {
    llp::LowerBoundFamily fam;
    fam.d = d;
    fam.gamma = inst.gamma;
    fam.member = member;
    ds = llp::lower_bound_sample(fam, n, k, seed);
  } else {
    llp::DiscreteDistribution dist;
    if (inst.instance == "prop41") {
      dist = llp::prop41_instance().dist;
    } else if (inst.instance == "eprm-expfail") {
      dist = llp::eprm_expfail_instance(inst.instance_eps).dist;
    } else {
      dist = llp::prop32_instance().dist;
    }
    ds = llp::sample_dataset(dist, n, k, seed);
  }

  if (out.empty() || out == "-") {
    llp::save_bags(ds, std::cout);
    return 0;
  }
  llp::save_bags(ds, out);
  ordered_json j{{"instance", source},        {"n", ds.n()},
                 {"k", k},                    {"feature_dim", ds.feature_dim},
                 {"out", out}};
  std::cout << dump(j);
  return 0;
}

int cmd_minimize(const InstanceOpts& inst, const RuleOpts& ro, std::size_t n,
                 int k, std::uint64_t seed, const std::string& mode_name,
                 const std::string& out) {
  llp::SweepSpec spec = as_spec(inst, k, seed);
  llp::LossRule rule = resolve_rule(ro, spec);

  llp::MinimizationResult res;
  ordered_json j;
  j["instance"] = inst.instance;
  j["rule"] = llp::rule_label(rule);
  j["k"] = k;
  j["n"] = n;
  j["seed"] = seed;

  double chosen_risk = 0.0;
  double best_risk = 0.0;
  if (inst.instance == "threshold") {
    llp::SweepMode mode = llp::SweepMode::Auto;
    if (mode_name == "exact") mode = llp::SweepMode::Exact;
    if (mode_name == "fast") mode = llp::SweepMode::Fast;
    llp::ThresholdExperiment exp = llp::ThresholdExperiment::make(
        inst.grid_m, llp::choose_t_star(inst.grid_m, seed), inst.gamma,
        inst.rho);
    llp::ThresholdSample sample = llp::sample_threshold(exp, n, k, seed);
    res = llp::sweep_threshold_class(rule, sample, exp.m, mode);
    best_risk = exp.risk_row(0);
    for (std::size_t h = 1; h < 2 * exp.m; ++h) {
      best_risk = std::min(best_risk, exp.risk_row(h));
    }
    chosen_risk = exp.risk_row(res.best_index);
    j["grid_m"] = exp.m;
    j["t_star"] = exp.t_star;
  } else {
    llp::DiscreteDistribution dist;
    llp::FiniteClass cls;
    if (inst.instance == "prop41") {
      llp::RealizablePairInstance i = llp::prop41_instance();
      dist = i.dist;
      cls = i.cls;
    } else if (inst.instance == "eprm-expfail") {
      llp::ConstantPairInstance i =
          llp::eprm_expfail_instance(inst.instance_eps);
      dist = i.dist;
      cls = i.cls;
    } else {
      llp::TwoPointInstance i = llp::prop32_instance();
      dist = i.dist;
      cls = i.cls;
    }
    llp::BagDataset ds = llp::sample_dataset(dist, n, k, seed);
    res = llp::minimize(rule, cls, ds);
    best_risk = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < cls.table.size(); ++h) {
      double r = llp::exact_risk(
          llp::Predictor::from_hypothesis(llp::FiniteHypothesis{&cls, h}),
          dist);
      if (h == res.best_index) chosen_risk = r;
      best_risk = std::min(best_risk, r);
    }
  }

  j["chosen_index"] = res.best_index;
  j["emp_risk"] = res.best_value;
  j["exact_risk"] = chosen_risk;
  j["best_exact_risk"] = best_risk;
  j["excess_risk"] = chosen_risk - best_risk;
  j["tie_count"] = res.tie_set.size();
  if (res.tie_set.size() <= 64) j["tie_set"] = res.tie_set;
  emit(dump(j), out);
  return 0;
}

llp::BagDataset slice(const llp::BagDataset& ds, std::size_t lo,
                      std::size_t hi) {
  llp::BagDataset out;
  out.k = ds.k;
  out.feature_dim = ds.feature_dim;
  out.bags.assign(ds.bags.begin() + lo, ds.bags.begin() + hi);
  if (ds.true_labels) {
    out.true_labels.emplace(ds.true_labels->begin() + lo,
                            ds.true_labels->begin() + hi);
  }
  return out;
}

int cmd_train(const std::string& rule_name, const std::string& arch,
              std::size_t hidden, std::size_t n, std::size_t test_n, int k,
              double margin, std::uint64_t seed, llp::TrainConfig cfg,
              const std::string& p_mode, const std::string& trace_path,
              const std::string& model_path, const std::string& out) {
  if (rule_name == "pm-sq") cfg.rule = llp::GradRule::PMSq;
  else if (rule_name == "pm-log") cfg.rule = llp::GradRule::PMLog;
  else if (rule_name == "dsq") cfg.rule = llp::GradRule::DebiasedSq;
  else if (rule_name == "ez-sq") cfg.rule = llp::GradRule::EZSq;
  else cfg.rule = llp::GradRule::EZLog;
  if (p_mode == "known") cfg.p_mode = llp::LossRule::PMode::Known;
  else if (p_mode == "split") cfg.p_mode = llp::LossRule::PMode::Split;
  else cfg.p_mode = llp::LossRule::PMode::Plugin;
  cfg.seed = llp::derive_seed(seed, {2});

  llp::BagDataset all = llp::make_linsep_dataset(n + test_n, k, margin, seed);
  llp::BagDataset train_ds = slice(all, 0, n);
  llp::BagDataset test_ds = slice(all, n, all.n());

  llp::ParametricModel model =
      arch == "mlp" ? llp::ParametricModel::mlp(all.feature_dim, hidden)
                    : llp::ParametricModel::linear(all.feature_dim);
  model.init(llp::derive_seed(seed, {1}));

  llp::TrainResult res = llp::train(model, train_ds, test_ds, cfg);
  if (!trace_path.empty()) llp::save_trace_csv(res.trace, trace_path);
  if (!model_path.empty()) llp::save_model(res.model, model_path);

  ordered_json j;
  j["rule"] = llp::to_string(cfg.rule);
  j["arch"] = arch;
  if (arch == "mlp") j["hidden"] = hidden;
  j["k"] = k;
  j["train_bags"] = train_ds.n();
  j["test_bags"] = test_ds.n();
  j["feature_dim"] = all.feature_dim;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["epochs_run"] = res.trace.records.size();
  j["aborted"] = res.trace.aborted;
  if (res.trace.aborted) j["abort_reason"] = res.trace.abort_reason;
  if (!res.trace.records.empty()) {
    const llp::EpochRecord& last = res.trace.records.back();
    j["final_train_loss"] = last.train_loss;
    j["final_test_err01"] = last.test_err01;
  }
  emit(dump(j), out);
  return res.trace.aborted ? 1 : 0;
}

int cmd_sweep(llp::SweepSpec spec, const RuleOpts& ro, unsigned threads,
              const std::string& out) {
  spec.rule = make_rule(ro);
  emit(llp::sweep_csv_string(llp::run_sweep(spec, threads)), out);
  return 0;
}

int cmd_rate_fit(const std::string& in, std::uint64_t bootstrap_seed,
                 std::size_t resamples, const std::string& out) {
  llp::RateFit fit =
      llp::fit_rate(llp::load_sweep_csv(in), bootstrap_seed, resamples);
  emit(dump(llp::rate_fit_json(fit)), out);
  return 0;
}

int cmd_verify(const std::string& inject, unsigned threads,
               const std::string& out) {
  llp::FaultInjection fault = llp::FaultInjection::None;
  if (inject == "dsq-bias-sign-flip") {
    fault = llp::FaultInjection::DsqBiasSignFlip;
  } else if (inject == "ez-wrong-p") {
    fault = llp::FaultInjection::EzWrongP;
  }
  llp::VerifyReport report = llp::verify_suite(fault, threads);
  emit(dump(llp::verify_report_json(report)), out);
  return report.all_pass ? 0 : 1;
}

int cmd_estimation_gap(const std::vector<std::size_t>& ns, std::size_t trials,
                       std::uint64_t seed, unsigned threads,
                       const std::string& out) {
  llp::EstimationGapSpec spec;
  if (!ns.empty()) spec.n_grid = ns;
  spec.trials = trials;
  spec.seed = seed;
  llp::EstimationGapReport report = llp::estimation_vs_learning(spec, threads);
  emit(dump(llp::estimation_gap_json(report)), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "llp: exact minimizers, failure constructions, gradient trainers and "
      "sample-complexity sweeps for learning from label proportions"};
  app.require_subcommand(1);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    std::string cfg_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
    }
    if (!cfg_path.empty()) {
      if (args.empty() || args[0].empty() || args[0][0] == '-') {
        throw std::runtime_error("--config needs the subcommand first");
      }
      std::vector<std::string> toks = config_tokens(cfg_path);
      args.insert(args.begin() + 1, toks.begin(), toks.end());
    }
  } catch (const std::exception& e) {
    std::cerr << "llp: error: " << e.what() << "\n";
    return 1;
  }

  // Shared state, one bundle per subcommand.
  int rc = 0;
  std::string config;

  InstanceOpts g_inst;
  std::size_t g_n = 100;
  int g_k = 2;
  std::uint64_t g_seed = 1;
  double g_margin = 0.5;
  int g_d = 6;
  std::size_t g_member = 0;
  std::string g_from_csv;
  std::string g_label_col = "label";
  bool g_shuffle = false;
  std::string g_out;
  CLI::App* gen = app.add_subcommand("generate", "sample a bag dataset");
  gen->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_instance_opts(gen, g_inst,
                    {"prop32", "prop41", "eprm-expfail", "logloss-fail",
                     "threshold", "linsep", "lower-bound"});
  gen->add_option("--n", g_n, "number of bags")->capture_default_str();
  gen->add_option("--k", g_k, "bag size")->capture_default_str();
  gen->add_option("--seed", g_seed, "sampling seed")->capture_default_str();
  gen->add_option("--margin", g_margin, "linsep margin")->capture_default_str();
  gen->add_option("--d", g_d, "lower-bound index bits")->capture_default_str();
  gen->add_option("--member", g_member, "lower-bound family member")
      ->capture_default_str();
  CLI::Option* g_csv_opt =
      gen->add_option("--from-csv", g_from_csv,
                      "bag a labeled instance CSV instead of sampling");
  gen->add_option("--label-col", g_label_col, "label column name in the CSV")
      ->needs(g_csv_opt);
  gen->add_flag("--shuffle", g_shuffle,
                "shuffle CSV rows with --seed before bagging")
      ->needs(g_csv_opt);
  gen->add_option("--out", g_out, "output path (default stdout)");
  gen->add_option("--config", config, "key=value defaults file");
  gen->callback([&] {
    rc = cmd_generate(g_inst, g_n, g_k, g_seed, g_margin, g_d, g_member,
                      g_from_csv, g_label_col, g_shuffle, g_out);
  });

  InstanceOpts m_inst;
  RuleOpts m_rule;
  std::size_t m_n = 100;
  int m_k = 2;
  std::uint64_t m_seed = 1;
  std::string m_mode = "auto";
  std::string m_out;
  CLI::App* mz = app.add_subcommand(
      "minimize", "exact empirical minimization on a fresh sample");
  mz->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_instance_opts(mz, m_inst, {"prop32", "prop41", "eprm-expfail",
                                 "logloss-fail", "threshold"});
  add_rule_opts(mz, m_rule);
  mz->add_option("--n", m_n, "number of bags")->capture_default_str();
  mz->add_option("--k", m_k, "bag size")->capture_default_str();
  mz->add_option("--seed", m_seed, "sampling seed")->capture_default_str();
  mz->add_option("--mode", m_mode, "threshold sweep mode")
      ->check(CLI::IsMember({"auto", "exact", "fast"}))
      ->capture_default_str();
  mz->add_option("--out", m_out, "output path (default stdout)");
  mz->add_option("--config", config, "key=value defaults file");
  mz->callback([&] {
    rc = cmd_minimize(m_inst, m_rule, m_n, m_k, m_seed, m_mode, m_out);
  });

  std::string t_rule = "pm-sq";
  std::string t_arch = "linear";
  std::size_t t_hidden = 16;
  std::size_t t_n = 500;
  std::size_t t_test_n = 100;
  int t_k = 10;
  double t_margin = 0.5;
  std::uint64_t t_seed = 1;
  llp::TrainConfig t_cfg;
  std::string t_pmode = "plugin";
  std::string t_trace, t_model, t_out;
  CLI::App* tr = app.add_subcommand(
      "train", "gradient training on the linearly separable task");
  tr->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  tr->add_option("--rule", t_rule, "surrogate rule")
      ->check(CLI::IsMember({"pm-sq", "pm-log", "dsq", "ez-sq", "ez-log"}))
      ->capture_default_str();
  tr->add_option("--arch", t_arch, "model architecture")
      ->check(CLI::IsMember({"linear", "mlp"}))
      ->capture_default_str();
  tr->add_option("--hidden", t_hidden, "mlp hidden width")
      ->capture_default_str();
  tr->add_option("--n", t_n, "training bags")->capture_default_str();
  tr->add_option("--test-n", t_test_n, "held-out bags")->capture_default_str();
  tr->add_option("--k", t_k, "bag size")->capture_default_str();
  tr->add_option("--margin", t_margin, "task margin")->capture_default_str();
  tr->add_option("--seed", t_seed, "data seed; init and shuffling derive")
      ->capture_default_str();
  tr->add_option("--lr", t_cfg.lr, "learning rate")->capture_default_str();
  tr->add_option("--epochs", t_cfg.epochs, "epochs")->capture_default_str();
  tr->add_option("--batch-bags", t_cfg.batch_bags, "bags per minibatch")
      ->capture_default_str();
  tr->add_option("--beta", t_cfg.beta, "dsq EMA coefficient")
      ->capture_default_str();
  tr->add_option("--p-mode", t_pmode, "label marginal source")
      ->check(CLI::IsMember({"known", "plugin", "split"}))
      ->capture_default_str();
  tr->add_option("--p", t_cfg.p, "known label marginal");
  tr->add_option("--split-seed", t_cfg.split_seed, "split partition seed")
      ->capture_default_str();
  tr->add_option("--trace", t_trace, "per-epoch CSV path");
  tr->add_option("--save-model", t_model, "checkpoint path");
  tr->add_option("--out", t_out, "summary path (default stdout)");
  tr->add_option("--config", config, "key=value defaults file");
  tr->callback([&] {
    rc = cmd_train(t_rule, t_arch, t_hidden, t_n, t_test_n, t_k, t_margin,
                   t_seed, t_cfg, t_pmode, t_trace, t_model, t_out);
  });

  llp::SweepSpec s_spec;
  RuleOpts s_rule;
  InstanceOpts s_inst;
  unsigned s_threads = 1;
  std::string s_out;
  CLI::App* sw = app.add_subcommand(
      "sweep", "seeded (n, trial) excess-risk sweep, CSV out");
  sw->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_instance_opts(sw, s_inst, {"prop32", "prop41", "eprm-expfail",
                                 "logloss-fail", "threshold"});
  add_rule_opts(sw, s_rule);
  sw->add_option("--n", s_spec.n_grid, "bag-count grid, comma separated")
      ->delimiter(',')
      ->required();
  sw->add_option("--k", s_spec.k, "bag size")->capture_default_str();
  sw->add_option("--trials", s_spec.trials, "trials per grid point")
      ->capture_default_str();
  sw->add_option("--seed", s_spec.seed, "base seed")->capture_default_str();
  sw->add_option("--eps", s_spec.eps, "target excess risk")
      ->capture_default_str();
  sw->add_option("--delta", s_spec.delta, "target failure probability")
      ->capture_default_str();
  sw->add_option("--threads", s_threads, "worker threads")
      ->capture_default_str();
  sw->add_option("--out", s_out, "CSV path (default stdout)");
  sw->add_option("--config", config, "key=value defaults file");
  sw->callback([&] {
    s_spec.instance = s_inst.instance;
    s_spec.instance_eps = s_inst.instance_eps;
    s_spec.grid_m = s_inst.grid_m;
    s_spec.gamma = s_inst.gamma;
    s_spec.rho = s_inst.rho;
    rc = cmd_sweep(s_spec, s_rule, s_threads, s_out);
  });

  std::string r_in;
  std::uint64_t r_bseed = 9000017ULL;
  std::size_t r_resamples = 1000;
  std::string r_out;
  CLI::App* rf = app.add_subcommand(
      "rate-fit", "log-log rate fit with bootstrap error from a sweep CSV");
  rf->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  rf->add_option("--in", r_in, "sweep CSV path")->required();
  rf->add_option("--bootstrap-seed", r_bseed, "bootstrap seed")
      ->capture_default_str();
  rf->add_option("--resamples", r_resamples, "bootstrap resamples")
      ->capture_default_str();
  rf->add_option("--out", r_out, "JSON path (default stdout)");
  rf->add_option("--config", config, "key=value defaults file");
  rf->callback([&] { rc = cmd_rate_fit(r_in, r_bseed, r_resamples, r_out); });

  std::string v_inject = "none";
  unsigned v_threads = 1;
  std::string v_out;
  CLI::App* vf = app.add_subcommand(
      "verify", "self-check suite; exits nonzero unless every check passes");
  vf->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  vf->add_option("--inject", v_inject, "fault injection")
      ->check(CLI::IsMember({"none", "dsq-bias-sign-flip", "ez-wrong-p"}))
      ->capture_default_str();
  vf->add_option("--threads", v_threads, "worker threads")
      ->capture_default_str();
  vf->add_option("--out", v_out, "JSON path (default stdout)");
  vf->add_option("--config", config, "key=value defaults file");
  vf->callback([&] { rc = cmd_verify(v_inject, v_threads, v_out); });

  std::vector<std::size_t> e_ns;
  std::size_t e_trials = 4000;
  std::uint64_t e_seed = 1;
  unsigned e_threads = 1;
  std::string e_out;
  CLI::App* eg = app.add_subcommand(
      "estimation-gap",
      "estimation error vs learning excess on the realizable pair");
  eg->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  eg->add_option("--n", e_ns, "bag-count grid (default 2,3,4,5,6,8)")
      ->delimiter(',');
  eg->add_option("--trials", e_trials, "trials per grid point")
      ->capture_default_str();
  eg->add_option("--seed", e_seed, "base seed")->capture_default_str();
  eg->add_option("--threads", e_threads, "worker threads")
      ->capture_default_str();
  eg->add_option("--out", e_out, "JSON path (default stdout)");
  eg->add_option("--config", config, "key=value defaults file");
  eg->callback(
      [&] { rc = cmd_estimation_gap(e_ns, e_trials, e_seed, e_threads, e_out); });

  std::vector<const char*> cargv;
  cargv.push_back(argv[0]);
  for (const std::string& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "llp: error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
