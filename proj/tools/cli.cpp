#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "sortition/sortition.hpp"

namespace sortition::cli {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::BadPool:
    return kBadPool;
  case ErrorKind::QuotaInfeasible:
  case ErrorKind::QuotaViolation:
  case ErrorKind::InfeasibleCap:
  case ErrorKind::RestartLimit:
    return kQuotaInfeasible;
  case ErrorKind::NumericalFailure:
  case ErrorKind::Stalled:
  case ErrorKind::IterationLimit:
  case ErrorKind::Diverged:
    return kNumericalFailure;
  default:
    return kUsage;
  }
}

namespace {

namespace fs = std::filesystem;

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

std::string cell(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

class Output {
public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec)
      throw Error(ErrorKind::Io, "cannot create output directory " + dir_ + ": " + ec.message());
  }

  std::string path(const std::string &name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string &name, const std::string &content) const {
    std::ofstream f(path(name), std::ios::binary);
    if (!f)
      throw Error(ErrorKind::Io, "cannot write " + path(name));
    f << content;
    if (!f)
      throw Error(ErrorKind::Io, "failed writing " + path(name));
  }

  void write_json(const std::string &name, const nlohmann::json &doc) const {
    write(name, doc.dump(2) + "\n");
  }

private:
  std::string dir_;
};

ParticipationModel load_model(const std::string &path, const FeatureSchema &schema) {
  std::ifstream f(path);
  if (!f)
    throw Error(ErrorKind::Io, "cannot open model " + path);
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
  }
  return model_from_json(doc, schema);
}

std::string beta_csv(const ParticipationModel &model) {
  std::ostringstream os;
  os << "parameter,theta,beta\n";
  os << "baseline," << num(model.theta[0]) << ',' << num(model.beta(0)) << '\n';
  for (std::size_t p = 0; p < model.schema.num_pairs(); ++p)
    os << cell(model.schema.pair_label(p)) << ',' << num(model.theta[1 + p]) << ','
       << num(model.beta(1 + p)) << '\n';
  return os.str();
}

void print_verdict(std::ostream &os, const GoodPoolVerdict &v, const Instance &inst,
                   const FeatureSchema &schema) {
  os << "alpha = " << num(inst.alpha) << " (q* = " << num(inst.q_star) << ", r = " << inst.r
     << ", k = " << inst.k << ")\n";
  os << "  cond1 (max pi <= 1): " << (v.cond1_ok ? "ok" : "FAILED") << ", max pi = "
     << num(v.max_pi) << '\n';
  os << "  cond2 (pair sums near k*share): " << (v.cond2_ok ? "ok" : "FAILED");
  if (v.cond2_worst_pair)
    os << ", worst " << schema.pair_label(*v.cond2_worst_pair) << " relative deviation "
       << num(v.cond2_worst_relative) << " vs allowed " << num(v.cond2_allowed);
  if (!(inst.alpha > 1.0))
    os << " (alpha <= 1)";
  os << '\n';
  os << "  cond3 (sum a bounded): " << (v.cond3_ok ? "ok" : "FAILED") << ", sum a = "
     << num(v.sum_a) << " vs bound " << num(v.cond3_bound) << '\n';
}

// --- options ---------------------------------------------------------------

struct Common {
  std::string schema;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
};

struct EstimateArgs {
  std::string pool, background;
  std::optional<double> qbar, letters, persons_per_household;
  double step = 1e-5;
  std::size_t iters = 100000;
  std::optional<double> tolerance;
};

struct SelectArgs {
  std::string pool, background, model;
  std::uint64_t n = 0, r = 0, k = 0;
  std::optional<double> q_star;
  double exponent = kDefaultExponent;
  double epsilon = 1e-6;
  std::optional<std::size_t> max_iterations;
  std::optional<std::size_t> seed_panels;
  std::string policy = "strict";
};

struct SimulateArgs {
  std::string background, model;
  std::uint64_t n = 0, k = 0;
  std::vector<std::uint64_t> r;
  std::size_t pools = 10000;
  std::vector<std::string> algorithms{"ours"};
  std::string policy = "strict";
  std::optional<double> q_star;
  double exponent = kDefaultExponent;
  std::size_t greedy_restarts = 100, greedy_trials = 10;
};

struct DiagnoseArgs {
  std::string pool, background, model;
  std::vector<double> edges{0.0,  0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.04,
                            0.05, 0.075,  0.1,   0.15,   0.2,  0.3,   0.5,  1.0};
  std::size_t min_bin = 7;
};

Policy parse_policy(const std::string &s) { return s == "relaxed" ? Policy::relaxed : Policy::strict; }

Algorithm parse_algorithm(const std::string &s) {
  if (s == "greedy")
    return Algorithm::greedy;
  if (s == "uniform")
    return Algorithm::uniform;
  return Algorithm::ours;
}

void check_r_k(std::uint64_t r, std::uint64_t k) {
  if (r < k)
    throw CLI::ValidationError("--letters", "need letters >= panel-size >= 1");
}

// --- subcommands -------------------------------------------------------------

int cmd_estimate(const Common &c, const EstimateArgs &a, std::ostream &out) {
  const auto schema = load_schema(c.schema);
  const auto pool = load_dataset(a.pool, schema, DatasetKind::pool);
  const auto bg = load_dataset(a.background, schema, DatasetKind::background);
  double qbar;
  if (a.qbar) {
    qbar = *a.qbar;
  } else if (a.letters) {
    const double pph = a.persons_per_household ? *a.persons_per_household : household_average(bg);
    qbar = estimate_qbar(static_cast<double>(pool.size()), *a.letters, pph);
  } else {
    throw CLI::ValidationError("--qbar", "give --qbar or --letters");
  }
  FitOptions fo;
  fo.step = a.step;
  fo.iters = a.iters;
  fo.tolerance = a.tolerance;
  FitReport rep;
  const auto rows = build_design(pool, bg);
  const auto model = fit_mle(rows, schema, qbar, bg.total_weight(),
                             static_cast<double>(pool.size()), fo, &rep);
  const double mean_q = mean_predicted_q(model, bg);

  const Output o(c.out_dir);
  o.write_json("model.json", model_to_json(model));
  o.write("beta.csv", beta_csv(model));
  o.write_json("calibration.json", {{"qbar", qbar},
                                    {"mean_predicted_q_background", mean_q},
                                    {"absolute_gap", std::abs(mean_q - qbar)},
                                    {"pool_size", pool.size()},
                                    {"background_weight", bg.total_weight()},
                                    {"initial_objective", rep.initial_objective},
                                    {"final_objective", rep.final_objective},
                                    {"iterations", rep.iterations},
                                    {"step_halvings", rep.step_halvings}});
  out << "qbar = " << num(qbar) << ", mean predicted q over background = " << num(mean_q)
      << "\nbaseline beta = " << num(model.beta(0)) << ", objective " << num(rep.initial_objective)
      << " -> " << num(rep.final_objective) << " in " << rep.iterations << " iterations\n";
  return kOk;
}

int cmd_select(const Common &c, const SelectArgs &a, std::ostream &out, std::ostream &err) {
  check_r_k(a.r, a.k);
  const auto schema = load_schema(c.schema);
  const auto pool = load_dataset(a.pool, schema, DatasetKind::pool);
  const auto bg = load_dataset(a.background, schema, DatasetKind::background);
  const auto model = load_model(a.model, schema);
  if (pool.empty())
    throw Error(ErrorKind::EmptyPool, "pool is empty");
  const auto q = predict_q(model, pool);
  const double q_star = a.q_star ? *a.q_star : *std::min_element(q.begin(), q.end());
  const auto inst = make_instance(population_stats_from_background(bg, a.n), a.r, a.k, q_star,
                                  schema.num_features(), a.exponent);
  const auto m = assign_marginals(pool, q, inst);
  const auto policy = parse_policy(a.policy);
  const bool good = m.good.good();
  if (!good && policy == Policy::strict) {
    err << "bad pool under the strict policy; no panel selected\n";
    print_verdict(err, m.good, inst, schema);
    return kBadPool;
  }
  print_verdict(out, m.good, inst, schema);

  std::vector<double> pi = m.pi;
  if (!m.good.cond1_ok) {
    pi = rescale_and_cap(pi, a.k);
    out << "marginals capped at 1 and rescaled\n";
  }
  const auto seat_quotas = compute_quotas(inst);
  // The seat guarantee only holds for good pools; otherwise only the |F| band
  // around the expected seats is enforced.
  const QuotaSet enforced = good ? seat_quotas : QuotaSet{};
  if (!good)
    out << "pool is not good: quota bounds are reported but not guaranteed\n";

  ColumnGenerationOptions co;
  co.epsilon = a.epsilon;
  co.max_iterations = a.max_iterations;
  co.seed_panels = a.seed_panels;
  co.seed = c.seed;
  const auto dist = build_panel_distribution(pi, pool, enforced, co);
  auto rng = numerics::split_stream(c.seed, 0);
  const Panel &panel = sample_panel(dist, rng);

  const Output o(c.out_dir);
  o.write_json("distribution.json", distribution_to_json(dist, pool));
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i : panel.members)
    members.push_back(pool.agent(i).id);
  nlohmann::json seats = nlohmann::json::object();
  for (std::size_t p = 0; p < schema.num_pairs(); ++p)
    seats[schema.pair_label(p)] = panel.seat_counts[p];
  o.write_json("panel.json", {{"seed", c.seed}, {"members", members}, {"seats", seats}});

  const auto expected = pair_sums(pool, pi);
  std::ostringstream audit;
  audit << "pair,proportional_seats,expected_seats,realized_seats,lower_quota,upper_quota\n";
  for (std::size_t p = 0; p < schema.num_pairs(); ++p)
    audit << cell(schema.pair_label(p)) << ',' << num(static_cast<double>(a.k) * inst.stats.share(p))
          << ',' << num(expected[p]) << ',' << panel.seat_counts[p] << ','
          << seat_quotas.lower[p] << ',' << seat_quotas.upper[p] << '\n';
  o.write("audit.csv", audit.str());
  out << "distribution over " << dist.panels.size() << " panels, max marginal error "
      << num(dist.max_marginal_error) << ", " << dist.iterations << " rounds\n";
  return kOk;
}

std::string estimate_rows_csv(const EndToEndReport &rep) {
  const double fair = static_cast<double>(rep.k) / static_cast<double>(rep.n);
  std::ostringstream os;
  os << "archetype,q,count,estimate,std_error,ratio_to_k_over_n\n";
  for (const auto &row : rep.rows)
    os << cell(row.id) << ',' << num(row.q) << ',' << row.count << ',' << num(row.estimate) << ','
       << num(row.std_error) << ',' << num(row.estimate / fair) << '\n';
  return os.str();
}

const char *kSummaryHeader =
    "algorithm,policy,r,k,n,alpha,pools,good_pools,cond1_failures,cond2_failures,"
    "cond3_failures,capped_pools,small_pools,greedy_quota_infeasible,greedy_restart_limit,"
    "mean_pool_size\n";

void summary_row(std::ostream &os, const EndToEndReport &rep) {
  os << to_string(rep.algorithm) << ',' << to_string(rep.policy) << ',' << rep.r << ',' << rep.k
     << ',' << rep.n << ',' << num(rep.alpha) << ',' << rep.pools << ',' << rep.good_pools << ','
     << rep.cond1_failures << ',' << rep.cond2_failures << ',' << rep.cond3_failures << ','
     << rep.capped_pools << ',' << rep.small_pools << ',' << rep.greedy_quota_infeasible << ','
     << rep.greedy_restart_limit << ',' << num(rep.mean_pool_size) << '\n';
}

EndToEndOptions end_to_end_options(const Common &c, const SimulateArgs &a, std::uint64_t r) {
  check_r_k(r, a.k);
  EndToEndOptions opt;
  opt.r = r;
  opt.k = a.k;
  opt.pools = a.pools;
  opt.policy = parse_policy(a.policy);
  opt.seed = c.seed;
  opt.q_star = a.q_star;
  opt.exponent = a.exponent;
  opt.greedy_max_restarts = a.greedy_restarts;
  opt.greedy_trials_per_pool = a.greedy_trials;
  return opt;
}

SyntheticPopulation load_population(const Common &c, const SimulateArgs &a) {
  const auto schema = load_schema(c.schema);
  const auto bg = load_dataset(a.background, schema, DatasetKind::background);
  const auto model = load_model(a.model, schema);
  return synthesize_population(bg, model, a.n, c.seed);
}

int cmd_simulate(const Common &c, const SimulateArgs &a, std::ostream &out) {
  const auto pop = load_population(c, a);
  const Output o(c.out_dir);
  std::ostringstream summary;
  summary << kSummaryHeader;
  for (const auto &alg : a.algorithms)
    for (std::uint64_t r : a.r) {
      auto opt = end_to_end_options(c, a, r);
      opt.algorithm = parse_algorithm(alg);
      const auto rep = estimate_end_to_end(pop, opt);
      const std::string name = "simulate_" + alg + "_" + a.policy + "_r" + std::to_string(r) + ".csv";
      o.write(name, estimate_rows_csv(rep));
      summary_row(summary, rep);
      out << name << ": " << rep.good_pools << "/" << rep.pools << " pools produced a panel\n";
    }
  o.write("simulate_summary.csv", summary.str());
  return kOk;
}

int cmd_compare(const Common &c, const SimulateArgs &a, std::ostream &out) {
  const auto pop = load_population(c, a);
  const Output o(c.out_dir);
  std::ostringstream summary;
  summary << kSummaryHeader;
  const Algorithm algs[] = {Algorithm::ours, Algorithm::greedy, Algorithm::uniform};
  for (std::uint64_t r : a.r) {
    std::vector<EndToEndReport> reps;
    for (auto alg : algs) {
      auto opt = end_to_end_options(c, a, r);
      opt.algorithm = alg;
      reps.push_back(estimate_end_to_end(pop, opt));
      summary_row(summary, reps.back());
    }
    const double fair = static_cast<double>(a.k) / static_cast<double>(pop.n);
    std::ostringstream os;
    os << "archetype,q,count";
    for (auto alg : algs)
      os << ',' << to_string(alg) << ',' << to_string(alg) << "_std_error";
    os << '\n';
    for (std::size_t j = 0; j < pop.archetypes.size(); ++j) {
      const auto &row = reps[0].rows[j];
      os << cell(row.id) << ',' << num(row.q) << ',' << row.count;
      for (const auto &rep : reps)
        os << ',' << num(rep.rows[j].estimate) << ',' << num(rep.rows[j].std_error);
      os << '\n';
    }
    const std::string name = "compare_r" + std::to_string(r) + ".csv";
    o.write(name, os.str());
    out << name << " (k/n = " << num(fair) << ")\n";
    for (const auto &rep : reps) {
      double lo = 1e300, hi = 0;
      for (const auto &row : rep.rows) {
        lo = std::min(lo, row.estimate / fair);
        hi = std::max(hi, row.estimate / fair);
      }
      out << "  " << to_string(rep.algorithm) << ": estimate / (k/n) in [" << num(lo) << ", "
          << num(hi) << "]\n";
    }
  }
  o.write("compare_summary.csv", summary.str());
  return kOk;
}

int cmd_diagnose(const Common &c, const DiagnoseArgs &a, std::ostream &out) {
  const auto schema = load_schema(c.schema);
  const auto pool = load_dataset(a.pool, schema, DatasetKind::pool);
  const auto bg = load_dataset(a.background, schema, DatasetKind::background);
  const auto model = load_model(a.model, schema);
  const Output o(c.out_dir);

  std::ostringstream comp;
  comp << "pair,pool_fraction,background_fraction\n";
  for (const auto &row : composition(pool, bg))
    comp << cell(schema.pair_label(row.pair)) << ',' << num(row.pool_fraction) << ','
         << num(row.background_fraction) << '\n';
  o.write("composition.csv", comp.str());
  o.write("beta.csv", beta_csv(model));

  // Hypothetical counts are also shown rescaled to the actual pool size.
  const auto hypo = hypothetical_pool(bg, model);
  double hypo_total = 0.0;
  const auto bg_q = predict_q(model, bg);
  for (std::size_t i = 0; i < bg_q.size(); ++i)
    hypo_total += bg.agent(i).weight * bg_q[i];
  const double scale = hypo_total > 0 ? static_cast<double>(pool.size()) / hypo_total : 0.0;
  std::vector<double> actual(schema.num_pairs(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t f = 0; f < schema.num_features(); ++f)
      actual[pool.pair_of(i, f)] += 1.0;
  std::ostringstream hp;
  hp << "pair,pool_count,hypothetical_count,hypothetical_scaled_to_pool\n";
  for (std::size_t p = 0; p < schema.num_pairs(); ++p)
    hp << cell(schema.pair_label(p)) << ',' << num(actual[p]) << ',' << num(hypo[p]) << ','
       << num(hypo[p] * scale) << '\n';
  o.write("hypothetical_pool.csv", hp.str());

  std::ostringstream inter;
  inter << "pair_a,pair_b,pool_fraction,hypothetical_fraction\n";
  for (const auto &row : pairwise_intersection_table(pool, bg, model))
    inter << cell(schema.pair_label(row.pair_a)) << ',' << cell(schema.pair_label(row.pair_b))
          << ',' << num(row.pool_fraction) << ',' << num(row.hypothetical_fraction) << '\n';
  o.write("intersections.csv", inter.str());

  std::ostringstream hist;
  hist << "q_low,q_high,pool_count,hypothetical_count\n";
  std::size_t suppressed = 0;
  for (const auto &b : q_histogram(pool, bg, model, a.edges, a.min_bin)) {
    hist << num(b.lo) << ',' << num(b.hi) << ',';
    hist << (b.pool_count ? num(*b.pool_count) : "suppressed") << ',';
    hist << (b.hypothetical_count ? num(*b.hypothetical_count) : "suppressed") << '\n';
    suppressed += !b.pool_count + !b.hypothetical_count;
  }
  o.write("q_histogram.csv", hist.str());
  out << "wrote diagnostics for " << pool.size() << " pool members; " << suppressed
      << " histogram cells suppressed (fewer than " << a.min_bin << " individuals)\n";
  return kOk;
}

void add_simulate_options(CLI::App *sub, SimulateArgs &a) {
  sub->add_option("--background", a.background, "Weighted background CSV")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--model", a.model, "Participation model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("-n,--population", a.n, "Synthetic population size")
      ->required()
      ->check(CLI::PositiveNumber);
  sub->add_option("-r,--letters", a.r, "Letters sent; repeat for a sweep")->required();
  sub->add_option("-k,--panel-size", a.k, "Panel size")->required()->check(CLI::PositiveNumber);
  sub->add_option("--pools", a.pools, "Simulated pools per configuration")
      ->check(CLI::PositiveNumber);
  sub->add_option("--policy", a.policy, "Bad-pool policy")
      ->check(CLI::IsMember({"strict", "relaxed"}));
  sub->add_option("--q-star", a.q_star, "Lower bound on participation probability")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--exponent", a.exponent, "Slack exponent for the good-pool conditions")
      ->check(CLI::PositiveNumber);
  sub->add_option("--greedy-restarts", a.greedy_restarts, "Greedy restarts per trial")
      ->check(CLI::PositiveNumber);
  sub->add_option("--greedy-trials", a.greedy_trials, "Greedy trials per pool")
      ->check(CLI::PositiveNumber);
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Panel selection with equal end-to-end probabilities"};
  app.set_config("--config", "", "TOML or INI file; command-line flags take precedence");
  app.require_subcommand(1);

  Common common;
  EstimateArgs est;
  SelectArgs sel;
  SimulateArgs sim, cmp;
  DiagnoseArgs diag;
  cmp.algorithms.clear();

  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--schema", common.schema, "Schema JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out-dir", common.out_dir, "Directory for output files");
    sub->add_option("--seed", common.seed, "Random seed");
  };

  auto *e = app.add_subcommand("estimate", "Fit participation probabilities");
  add_common(e);
  e->add_option("--pool", est.pool, "Pool CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--background", est.background, "Weighted background CSV")
      ->required()
      ->check(CLI::ExistingFile);
  auto *qbar_opt = e->add_option("--qbar", est.qbar, "Average participation probability")
                       ->check(CLI::Range(0.0, 1.0));
  auto *letters_opt =
      e->add_option("--letters", est.letters, "Letters sent (q̄ = pool / (letters · persons))")
          ->check(CLI::PositiveNumber);
  e->add_option("--persons-per-household", est.persons_per_household,
                "Eligible persons per household (default: from household_size column)")
      ->check(CLI::PositiveNumber)
      ->needs(letters_opt);
  qbar_opt->excludes(letters_opt);
  e->add_option("--step", est.step, "Gradient step")->check(CLI::PositiveNumber);
  e->add_option("--iters", est.iters, "Maximum iterations")->check(CLI::PositiveNumber);
  e->add_option("--tolerance", est.tolerance, "Stop once the objective gain falls below this")
      ->check(CLI::PositiveNumber);

  auto *s = app.add_subcommand("select", "Select a panel from a pool");
  add_common(s);
  s->add_option("--pool", sel.pool, "Pool CSV")->required()->check(CLI::ExistingFile);
  s->add_option("--background", sel.background, "Weighted background CSV (population shares)")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--model", sel.model, "Participation model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("-n,--population", sel.n, "Population size")
      ->required()
      ->check(CLI::PositiveNumber);
  s->add_option("-r,--letters", sel.r, "Letters sent")->required()->check(CLI::PositiveNumber);
  s->add_option("-k,--panel-size", sel.k, "Panel size")->required()->check(CLI::PositiveNumber);
  s->add_option("--q-star", sel.q_star, "Lower bound on q (default: smallest q in the pool)")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--exponent", sel.exponent, "Slack exponent for the good-pool conditions")
      ->check(CLI::PositiveNumber);
  s->add_option("--epsilon", sel.epsilon, "Marginal accuracy of the panel distribution")
      ->check(CLI::PositiveNumber);
  s->add_option("--max-iterations", sel.max_iterations, "Column generation round limit")
      ->check(CLI::PositiveNumber);
  s->add_option("--seed-panels", sel.seed_panels,
                "Randomized panels added before column generation (default 2·|P|)");
  s->add_option("--policy", sel.policy, "Bad-pool policy")
      ->check(CLI::IsMember({"strict", "relaxed"}));

  auto *m = app.add_subcommand("simulate", "Estimate end-to-end selection probabilities");
  add_common(m);
  add_simulate_options(m, sim);
  m->add_option("--algorithm", sim.algorithms, "ours, greedy or uniform; repeatable")
      ->check(CLI::IsMember({"ours", "greedy", "uniform"}));

  auto *cmpc = app.add_subcommand("compare", "Run ours, greedy and uniform on the same seeds");
  add_common(cmpc);
  add_simulate_options(cmpc, cmp);

  auto *d = app.add_subcommand("diagnose", "Calibration diagnostics for a fitted model");
  add_common(d);
  d->add_option("--pool", diag.pool, "Pool CSV")->required()->check(CLI::ExistingFile);
  d->add_option("--background", diag.background, "Weighted background CSV")
      ->required()
      ->check(CLI::ExistingFile);
  d->add_option("--model", diag.model, "Participation model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  d->add_option("--bin-edges", diag.edges, "Increasing q histogram edges");
  d->add_option("--min-bin-count", diag.min_bin, "Suppress histogram bins below this count");

  std::vector<std::string> argv_store{"sortition"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : argv_store)
    argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp &ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError &ex) {
    app.exit(ex, out, err);
    return kUsage;
  }

  try {
    if (e->parsed())
      return cmd_estimate(common, est, out);
    if (s->parsed())
      return cmd_select(common, sel, out, err);
    if (m->parsed())
      return cmd_simulate(common, sim, out);
    if (cmpc->parsed())
      return cmd_compare(common, cmp, out);
    if (d->parsed())
      return cmd_diagnose(common, diag, out);
  } catch (const CLI::ValidationError &ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const Error &ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex.kind());
  } catch (const std::exception &ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

} // namespace sortition::cli
