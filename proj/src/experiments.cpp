#include "signlab/experiments.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "signlab/flops.hpp"
#include "signlab/masks.hpp"
#include "signlab/multineuron.hpp"
#include "signlab/neuron_flow.hpp"
#include "signlab/seed.hpp"
#include "signlab/sparse_train.hpp"

namespace signlab {

namespace {

std::string num(double v) { return format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(std::size_t v, int) { return std::to_string(v); }

Json mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return Json{{"mean", mean}, {"std", sd}, {"values", xs}};
}

Execution g_exec = Execution::parallel;

// ---- quadrant-sweep ----------------------------------------------------

Json quadrant_defaults() {
  return {{"seed", 0u},        {"runs", 100u},     {"d_overparam", 5u},
          {"lr", 0.01},        {"steps", 20000u},  {"n_samples", 128u},
          {"beta1", 8.0},      {"beta2", 4.0},     {"init_std", 1.0},
          {"methods", {"sparse", "overparam", "sign-in", "overparam+sign-in"}}};
}

ExperimentResult run_quadrant(const Json& cfg) {
  QuadrantSweepConfig qc;
  qc.seed = get_uint(cfg, "seed");
  qc.runs = get_uint(cfg, "runs");
  qc.d_overparam = get_uint(cfg, "d_overparam");
  qc.lr = get_double(cfg, "lr");
  qc.steps = get_uint(cfg, "steps");
  qc.n_samples = get_uint(cfg, "n_samples");
  qc.beta1 = get_double(cfg, "beta1");
  qc.beta2 = get_double(cfg, "beta2");
  qc.init_std = get_double(cfg, "init_std");

  std::vector<SweepMethod> methods;
  for (const std::string& m : get_string_list(cfg, "methods")) {
    try {
      methods.push_back(parse_sweep_method(m));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid value for key: methods (") + e.what() + ")");
    }
  }

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "method", "quadrant", "outcome", "a_final",
                       "w1_final", "loss_final", "steps"});
  Json table = Json::object();
  for (SweepMethod m : methods) {
    const QuadrantResult res = quadrant_sweep(m, qc, g_exec);
    Json row = Json::object();
    for (std::size_t q = 0; q < 4; ++q) {
      row[std::string(to_string(kQuadrants[q]))] = res.success_fraction[q];
    }
    table[std::string(to_string(m))] = row;
    for (const NeuronRunRecord& r : res.runs) {
      out.runs.add_row({num(r.run_id, 0), num(r.seed), r.method, r.quadrant,
                        std::string(to_string(r.outcome)), num(r.a_final), num(r.w1_final),
                        num(r.loss_final), num(r.steps, 0)});
    }
  }
  out.summary = {{"success_fraction", table}, {"runs_per_cell", qc.runs}};
  return out;
}

// ---- multi-input -------------------------------------------------------

Json multi_input_defaults() {
  return {{"seed", 0u},         {"runs", 100u},     {"d", 5u},
          {"lrs", {0.001, 0.01}}, {"time", 200.0},  {"max_steps", 200000u},
          {"n_samples", 512u},  {"beta", 1.0},      {"init_std", 1.35},
          {"methods", {"standard", "sign-in"}}};
}

ExperimentResult run_multi_input(const Json& cfg) {
  MultiInputConfig mc;
  mc.seed = get_uint(cfg, "seed");
  mc.runs = get_uint(cfg, "runs");
  mc.d = get_uint(cfg, "d");
  mc.time = get_double(cfg, "time");
  mc.max_steps = get_uint(cfg, "max_steps");
  mc.n_samples = get_uint(cfg, "n_samples");
  mc.beta = get_double(cfg, "beta");
  mc.init_std = get_double(cfg, "init_std");

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "method", "lr", "outcome", "a_final", "w1_final",
                       "loss_final", "steps"});
  Json recovery = Json::object();
  for (const std::string& name : get_string_list(cfg, "methods")) {
    FlowMethod method;
    try {
      method = parse_flow_method(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid value for key: methods (") + e.what() + ")");
    }
    Json per_lr = Json::object();
    for (double lr : get_double_list(cfg, "lrs")) {
      mc.lr = lr;
      const RecoveryResult res = multi_input_recovery(method, mc, g_exec);
      per_lr[num(lr)] = 100.0 * res.recovered_fraction;
      for (const NeuronRunRecord& r : res.runs) {
        out.runs.add_row({num(r.run_id, 0), num(r.seed), r.method, num(lr),
                          std::string(to_string(r.outcome)), num(r.a_final), num(r.w1_final),
                          num(r.loss_final), num(r.steps, 0)});
      }
    }
    recovery[name] = per_lr;
  }
  out.summary = {{"recovery_percent", recovery}, {"runs", mc.runs}};
  return out;
}

// ---- flow-trace --------------------------------------------------------

Json flow_defaults() {
  return {{"seed", 0u},        {"runs", 1u},         {"d", 1u},
          {"n_samples", 64u},  {"population", false}, {"c", 0.5},
          {"beta1", 2.0},      {"beta2", 1.0},       {"step", 0.01},
          {"max_time", 200.0}, {"integrator", "rk4"}, {"record_every", 100u},
          {"init_std", 1.0},   {"methods", {"standard", "sign-in"}}};
}

ExperimentResult run_flow(const Json& cfg) {
  const std::uint64_t seed = get_uint(cfg, "seed");
  const std::size_t runs = get_uint(cfg, "runs");
  if (runs == 0) throw ConfigError("invalid value for key: runs (must be >= 1)");
  NeuronFlowConfig base;
  base.d = get_uint(cfg, "d");
  base.teacher = Teacher::canonical(base.d);
  if (get_bool(cfg, "population")) {
    base.n_samples.reset();
  } else {
    base.n_samples = get_uint(cfg, "n_samples");
  }
  base.population.c = get_double(cfg, "c");
  base.beta1 = get_double(cfg, "beta1");
  base.beta2 = get_double(cfg, "beta2");
  base.step = get_double(cfg, "step");
  base.max_time = get_double(cfg, "max_time");
  base.record_every = get_uint(cfg, "record_every");
  const double init_std = get_double(cfg, "init_std");
  try {
    base.integrator = parse_integrator(get_string(cfg, "integrator"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid value for key: integrator (") + e.what() + ")");
  }
  std::vector<FlowMethod> methods;
  for (const std::string& name : get_string_list(cfg, "methods")) {
    try {
      methods.push_back(parse_flow_method(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid value for key: methods (") + e.what() + ")");
    }
  }

  const std::size_t per_method = 4 * runs;
  std::vector<FlowTrace> traces(methods.size() * per_method);
  std::vector<std::uint64_t> seeds(per_method);
  for (std::size_t i = 0; i < per_method; ++i) seeds[i] = seed_spawn(seed, i);
  for_each_run(traces.size(), g_exec, [&](std::size_t k) {
    const std::size_t index = k % per_method;
    NeuronFlowConfig fc = base;
    fc.method = methods[k / per_method];
    fc.init = balanced_init(fc.d, kQuadrants[index / runs], seed_spawn(seeds[index], 1), init_std);
    fc.data_seed = seed_spawn(seeds[index], 0);
    traces[k] = flow_integrate(fc);
  });

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "method", "quadrant", "t", "a", "w1", "w_norm",
                       "loss", "outcome"});
  Json success = Json::object();
  Json outcomes = Json::object();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::string mname(to_string(methods[m]));
    Json srow = Json::object();
    Json orow = Json::object();
    for (std::size_t q = 0; q < 4; ++q) {
      std::map<std::string, std::size_t> counts;
      std::size_t wins = 0;
      for (std::size_t r = 0; r < runs; ++r) {
        const std::size_t index = q * runs + r;
        const FlowTrace& t = traces[m * per_method + index];
        const std::string outcome(to_string(t.outcome));
        ++counts[outcome];
        wins += t.outcome == Outcome::success;
        for (std::size_t s = 0; s < t.times.size(); ++s) {
          double wn = 0.0;
          for (double w : t.w[s]) wn += w * w;
          out.runs.add_row({num(index, 0), num(seeds[index]), mname,
                            std::string(to_string(kQuadrants[q])), num(t.times[s]), num(t.a[s]),
                            num(t.w[s][0]), num(std::sqrt(wn)), num(t.loss[s]), outcome});
        }
      }
      const std::string qname(to_string(kQuadrants[q]));
      srow[qname] = wins;
      orow[qname] = counts;
    }
    success[mname] = srow;
    outcomes[mname] = orow;
  }
  out.summary = {{"success_count", success}, {"outcomes", outcomes}, {"runs_per_quadrant", runs}};
  return out;
}

// ---- multi-neuron ------------------------------------------------------

Json multi_neuron_defaults() {
  return {{"seed", 0u},           {"runs", 5u},           {"k", 3u},
          {"d", 2u},              {"n_samples", 512u},    {"inputs", "sphere"},
          {"lr", 0.25},           {"epochs", 5000u},      {"beta", 2.0},
          {"beta_inner", 0.5},    {"init_std", 0.70710678118654752},
          {"sign_in_factors", false},
          {"cases", {"good:standard", "bad:standard", "bad:sign-in"}},
          {"cob_k", 20u},         {"cob_lr", 2.15},       {"record_every", 50u}};
}

ExperimentResult run_multi_neuron(const Json& cfg) {
  const std::uint64_t seed = get_uint(cfg, "seed");
  const std::size_t runs = get_uint(cfg, "runs");
  const std::size_t record_every = std::max<std::uint64_t>(1, get_uint(cfg, "record_every"));
  MultiNeuronConfig base;
  base.k_teacher = get_uint(cfg, "k");
  base.d = get_uint(cfg, "d");
  base.n_samples = get_uint(cfg, "n_samples");
  base.epochs = get_uint(cfg, "epochs");
  base.beta = get_double(cfg, "beta");
  base.beta_inner = get_double(cfg, "beta_inner");
  base.init_std = get_double(cfg, "init_std");
  base.sign_in_factors = get_bool(cfg, "sign_in_factors");
  try {
    base.inputs = parse_input_distribution(get_string(cfg, "inputs"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid value for key: inputs (") + e.what() + ")");
  }

  std::vector<MultiNeuronConfig> cases;
  const std::vector<std::string> names = get_string_list(cfg, "cases");
  for (const std::string& name : names) {
    const auto colon = name.find(':');
    if (colon == std::string::npos) throw ConfigError("invalid value for key: cases (" + name + ")");
    MultiNeuronConfig c = base;
    try {
      c.sign_mode = parse_sign_mode(name.substr(0, colon));
      c.method = parse_flow_method(name.substr(colon + 1));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid value for key: cases (") + e.what() + ")");
    }
    if (c.sign_mode == SignMode::cob) {
      c.k_student = get_uint(cfg, "cob_k");
      c.lr = get_double(cfg, "cob_lr");
    } else {
      c.k_student = c.k_teacher;
      c.lr = get_double(cfg, "lr");
    }
    cases.push_back(c);
  }

  std::vector<MultiNeuronResult> results(runs * cases.size());
  for_each_run(results.size(), g_exec, [&](std::size_t k) {
    MultiNeuronConfig c = cases[k % cases.size()];
    c.seed = seed_spawn(seed, k / cases.size());
    results[k] = multineuron_train(c);
  });

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "case", "epoch", "loss"});
  CsvTable neurons({"run_id", "seed", "case", "role", "neuron", "a", "coord", "w", "rep"});
  Json finals = Json::object();
  for (const std::string& name : names) finals[name] = Json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const std::size_t r = k / cases.size();
    const std::string& name = names[k % cases.size()];
    const std::string s = num(seed_spawn(seed, r));
    const MultiNeuronResult& res = results[k];
    const auto& curve = res.loss_curve;
    for (std::size_t e = 0; e < curve.size(); ++e) {
      if (e % record_every == 0 || e + 1 == curve.size()) {
        out.runs.add_row({num(r, 0), s, name, num(e, 0), num(curve[e])});
      }
    }
    auto emit = [&](const TwoLayerNet& net, const std::string& role) {
      const Tensor rep = neuron_representation(net);
      for (std::size_t i = 0; i < net.k(); ++i) {
        for (std::size_t j = 0; j < net.d(); ++j) {
          neurons.add_row({num(r, 0), s, name, role, num(i, 0), num(net.a[i]), num(j, 0),
                           num(net.w(i, j)), num(rep(i, j))});
        }
      }
    };
    emit(res.teacher, "teacher");
    emit(res.initial, "init");
    emit(res.student, "student");
    finals[name].push_back(res.final_loss);
  }
  out.extra_tables.emplace_back("neurons.csv", std::move(neurons));

  Json summary = {{"final_loss", finals}, {"runs", runs}};
  // Seeds where good/standard < 1e-3, bad/sign-in < 1e-3 and bad/standard >= 10x bad/sign-in.
  if (finals.contains("good:standard") && finals.contains("bad:standard") &&
      finals.contains("bad:sign-in")) {
    std::size_t meets = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const double good = finals["good:standard"][r];
      const double bad = finals["bad:standard"][r];
      const double si = finals["bad:sign-in"][r];
      meets += good < 1e-3 && si < 1e-3 && bad >= 10.0 * si;
    }
    summary["seeds_meeting_all"] = meets;
  }
  out.summary = summary;
  return out;
}

// ---- sparse-train ------------------------------------------------------

Json sparse_defaults() {
  return {{"seed", 0u},          {"runs", 5u},              {"sparsity", 0.9},
          {"widths", {2u, 64u, 64u, 2u}},                    {"n_train", 2000u},
          {"n_test", 1000u},     {"noise", 0.1},            {"generator", "random-balanced"},
          {"lr", 0.1},           {"epochs", 30u},           {"batch_size", 32u},
          {"weight_decay", 1e-4}, {"frobenius_decay", 1e-4}, {"beta", 1.0},
          {"rescale_period", 1u}, {"rescale_stop", 15u},    {"warmup_epoch", 3u},
          {"sharpness_every", 0u}, {"sharpness_samples", 512u}};
}

StudyConfig study_from(const Json& cfg) {
  StudyConfig sc;
  sc.seed = get_uint(cfg, "seed");
  sc.runs = get_uint(cfg, "runs");
  sc.sparsity = get_double(cfg, "sparsity");
  sc.widths = get_size_list(cfg, "widths");
  sc.n_train = get_uint(cfg, "n_train");
  sc.n_test = get_uint(cfg, "n_test");
  sc.noise = get_double(cfg, "noise");
  try {
    sc.generator = parse_mask_generator(get_string(cfg, "generator"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid value for key: generator (") + e.what() + ")");
  }
  TrainConfig& t = sc.train;
  t.lr = get_double(cfg, "lr");
  t.epochs = static_cast<int>(get_uint(cfg, "epochs"));
  t.batch_size = get_uint(cfg, "batch_size");
  t.weight_decay = get_double(cfg, "weight_decay");
  t.frobenius_decay = get_double(cfg, "frobenius_decay");
  t.schedule.beta = get_double(cfg, "beta");
  t.schedule.period = static_cast<int>(get_uint(cfg, "rescale_period"));
  t.schedule.stop_epoch = static_cast<int>(get_uint(cfg, "rescale_stop"));
  t.warmup_epoch = static_cast<int>(get_uint(cfg, "warmup_epoch"));
  t.sharpness_every = static_cast<int>(get_uint(cfg, "sharpness_every"));
  t.sharpness_samples = get_uint(cfg, "sharpness_samples");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  if (!(sc.sparsity >= 0.0 && sc.sparsity < 1.0)) {
    throw ConfigError("invalid value for key: sparsity (must be in [0, 1))");
  }
  return sc;
}

const char* kArms[] = {"plain", "sign-in", "reinit-signs", "reinit-magnitude", "reinit-random"};

ExperimentResult run_sparse(const Json& cfg) {
  const StudyConfig sc = study_from(cfg);
  const std::vector<StudyRun> runs = sparse_study(sc, g_exec);

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "epoch", "split", "loss", "accuracy", "flip_frac_cum",
                       "flips_epoch", "sharpness", "sparsity"});
  std::vector<double> acc[5];
  std::vector<double> sharp[2];
  std::vector<double> i2w[2], w2f[2], i2f[2];
  for (const StudyRun& run : runs) {
    const TrainResult* arms[] = {&run.plain, &run.sign_in, &run.reinit_signs,
                                 &run.reinit_magnitude, &run.reinit_random};
    for (std::size_t a = 0; a < 5; ++a) {
      const TrainResult& tr = *arms[a];
      const std::string id = num(run.run_id * 5 + a, 0);
      for (const EpochMetrics& m : tr.history) {
        const std::string sh = m.sharpness ? num(*m.sharpness) : "";
        out.runs.add_row({id, num(run.seed), num(static_cast<std::size_t>(m.epoch), 0), "train",
                          num(m.train_loss), num(m.train_accuracy), num(m.flip_frac_cum),
                          num(m.flips_epoch, 0), sh, num(run.sparsity)});
        out.runs.add_row({id, num(run.seed), num(static_cast<std::size_t>(m.epoch), 0), "test",
                          num(m.test_loss), num(m.test_accuracy), num(m.flip_frac_cum),
                          num(m.flips_epoch, 0), sh, num(run.sparsity)});
      }
      acc[a].push_back(tr.history.back().test_accuracy);
      if (a < 2) {
        sharp[a].push_back(tr.history.back().sharpness.value_or(std::nan("")));
        i2w[a].push_back(tr.flips.init_to_warmup());
        w2f[a].push_back(tr.flips.warmup_to_final());
        i2f[a].push_back(tr.flips.init_to_final());
      }
    }
  }
  const StudySummary s = summarize(runs);
  const std::size_t warm = static_cast<std::size_t>(sc.train.warmup_epoch);
  bool flips_after_warmup = true;
  for (std::size_t e = warm; e < s.plain_flip_cum.size(); ++e) {
    flips_after_warmup = flips_after_warmup && s.sign_in_flip_cum[e] > s.plain_flip_cum[e];
  }
  Json arms = Json::object();
  for (std::size_t a = 0; a < 5; ++a) arms[kArms[a]] = {{"test_accuracy", mean_std(acc[a])}};
  for (std::size_t a = 0; a < 2; ++a) {
    arms[kArms[a]]["sharpness"] = mean_std(sharp[a]);
    arms[kArms[a]]["flips_init_to_warmup"] = mean_std(i2w[a]);
    arms[kArms[a]]["flips_warmup_to_final"] = mean_std(w2f[a]);
    arms[kArms[a]]["flips_init_to_final"] = mean_std(i2f[a]);
  }
  arms["plain"]["flip_frac_cum_by_epoch"] = s.plain_flip_cum;
  arms["sign-in"]["flip_frac_cum_by_epoch"] = s.sign_in_flip_cum;
  out.summary = {
      {"arms", arms},
      {"arm_order", {kArms[0], kArms[1], kArms[2], kArms[3], kArms[4]}},
      {"directional",
       {{"accuracy_sign_in_ge_plain", s.sign_in_accuracy >= s.plain_accuracy},
        {"flips_sign_in_gt_plain_after_warmup", flips_after_warmup},
        {"sharpness_sign_in_le_plain", s.sign_in_sharpness <= s.plain_sharpness},
        {"reinit_signs_gt_random", s.reinit_signs_accuracy > s.reinit_random_accuracy}}},
      {"runs", sc.runs}};
  return out;
}

// ---- sharpness ---------------------------------------------------------

Json sharpness_defaults() {
  Json j = sparse_defaults();
  j["runs"] = 3u;
  j["widths"] = {2u, 16u, 16u, 2u};
  j["n_train"] = 500u;
  j["n_test"] = 200u;
  j["sparsity"] = 0.5;
  j["epochs"] = 20u;
  j["rescale_stop"] = 10u;
  j["warmup_epoch"] = 2u;
  j["sharpness_every"] = 2u;
  j["sharpness_samples"] = 256u;
  return j;
}

ExperimentResult run_sharpness(const Json& cfg) {
  const StudyConfig sc = study_from(cfg);
  if (sc.train.sharpness_every == 0) {
    throw ConfigError("invalid value for key: sharpness_every (must be >= 1)");
  }
  std::vector<TrainResult> results(2 * sc.runs);
  std::vector<std::uint64_t> seeds(sc.runs);
  for (std::size_t r = 0; r < sc.runs; ++r) seeds[r] = seed_spawn(sc.seed, r);
  for_each_run(results.size(), g_exec, [&](std::size_t k) {
    const std::uint64_t rs = seeds[k / 2];
    const DataSplit data = two_moons_split(sc.n_train, sc.n_test, sc.noise, seed_spawn(rs, 0));
    const SmallNet init = make_mlp(sc.widths, true, LossKind::cross_entropy, seed_spawn(rs, 1));
    const MaskSpec mask = random_balanced_mask(weight_sizes(init), sc.sparsity, seed_spawn(rs, 2));
    TrainConfig t = sc.train;
    t.seed = seed_spawn(rs, 3);
    results[k] = train_sparse(init, mask, data, t, k % 2 == 1);
  });
  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "arm", "epoch", "sharpness", "train_loss"});
  std::vector<double> finals[2];
  for (std::size_t k = 0; k < results.size(); ++k) {
    for (const EpochMetrics& m : results[k].history) {
      if (!m.sharpness) continue;
      out.runs.add_row({num(k / 2, 0), num(seeds[k / 2]), kArms[k % 2],
                        num(static_cast<std::size_t>(m.epoch), 0), num(*m.sharpness),
                        num(m.train_loss)});
    }
    finals[k % 2].push_back(results[k].history.back().sharpness.value_or(std::nan("")));
  }
  out.summary = {{"final_sharpness", {{"plain", mean_std(finals[0])}, {"sign-in", mean_std(finals[1])}}},
                 {"runs", sc.runs}};
  return out;
}

// ---- masks -------------------------------------------------------------

Json masks_defaults() {
  return {{"seed", 0u},         {"runs", 3u},      {"widths", {2u, 64u, 64u, 2u}},
          {"sparsity", 0.9},    {"n_train", 2000u}, {"noise", 0.1},
          {"snip_batch", 256u}, {"synflow_rounds", 100u},
          {"generators", {"random-balanced", "snip", "synflow"}}};
}

ExperimentResult run_masks(const Json& cfg) {
  const std::uint64_t seed = get_uint(cfg, "seed");
  const std::size_t runs = get_uint(cfg, "runs");
  const std::vector<std::size_t> widths = get_size_list(cfg, "widths");
  const double sparsity = get_double(cfg, "sparsity");
  const std::size_t n_train = get_uint(cfg, "n_train");
  const double noise = get_double(cfg, "noise");
  const std::size_t snip_batch = get_uint(cfg, "snip_batch");
  const std::size_t rounds = get_uint(cfg, "synflow_rounds");
  std::vector<MaskGenerator> gens;
  for (const std::string& g : get_string_list(cfg, "generators")) {
    try {
      gens.push_back(parse_mask_generator(g));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid value for key: generators (") + e.what() + ")");
    }
  }
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ConfigError("invalid value for key: sparsity (must be in [0, 1))");
  }

  std::vector<MaskSpec> masks(runs * gens.size());
  for_each_run(masks.size(), g_exec, [&](std::size_t k) {
    const std::uint64_t rs = seed_spawn(seed, k / gens.size());
    const SmallNet net = make_mlp(widths, true, LossKind::cross_entropy, seed_spawn(rs, 1));
    switch (gens[k % gens.size()]) {
      case MaskGenerator::random_balanced:
        masks[k] = random_balanced_mask(weight_sizes(net), sparsity, seed_spawn(rs, 2));
        break;
      case MaskGenerator::snip: {
        const Dataset batch = take_rows(two_moons(n_train, noise, seed_spawn(rs, 0)), snip_batch);
        masks[k] = snip_mask(net, batch.x, batch.y, sparsity);
        break;
      }
      case MaskGenerator::synflow:
        masks[k] = synflow_mask(net, sparsity, rounds);
        break;
    }
  });

  ExperimentResult out;
  out.runs = CsvTable({"run_id", "seed", "generator", "layer", "size", "kept", "density"});
  Json kept = Json::object();
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const std::size_t r = k / gens.size();
    const std::string g(to_string(gens[k % gens.size()]));
    const auto per_layer = masks[k].kept_per_layer();
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
      const std::size_t size = masks[k].layers[l].size();
      out.runs.add_row({num(r, 0), num(seed_spawn(seed, r)), g, num(l, 0), num(size, 0),
                        num(per_layer[l], 0),
                        num(static_cast<double>(per_layer[l]) / static_cast<double>(size))});
    }
    if (!kept.contains(g)) kept[g] = Json::array();
    kept[g].push_back(per_layer);
  }
  out.summary = {{"kept_per_layer", kept}, {"sparsity", sparsity}, {"runs", runs}};
  return out;
}

// ---- flops -------------------------------------------------------------

Json flops_defaults() {
  auto conv = [](unsigned h, unsigned c_out, unsigned k, unsigned c_in) {
    return Json{{"type", "conv"}, {"h_out", h}, {"w_out", h}, {"c_out", c_out},
                {"k", k}, {"c_in", c_in}};
  };
  return {{"seed", 0u},
          {"layers",
           {conv(32, 16, 3, 3), conv(32, 16, 3, 16), conv(16, 32, 3, 32), conv(8, 64, 3, 64),
            Json{{"type", "linear"}, {"m", 64u}, {"n", 10u}}}}};
}

LayerShape parse_layer(const Json& j, std::size_t index) {
  const std::string where = "layers[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ConfigError("invalid value for key: " + where + " (needs a type)");
  }
  const std::string type = j["type"];
  const std::vector<std::string> keys = type == "conv"
      ? std::vector<std::string>{"h_out", "w_out", "c_out", "k", "c_in"}
      : std::vector<std::string>{"m", "n"};
  if (type != "conv" && type != "linear") {
    throw ConfigError("invalid value for key: " + where + ".type (" + type + ")");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "type" && std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw ConfigError("unknown key: " + where + "." + it.key());
    }
  }
  std::vector<std::uint64_t> v;
  for (const std::string& k : keys) {
    if (!j.contains(k)) throw ConfigError("missing key: " + where + "." + k);
    const Json& x = j[k];
    if (!x.is_number_integer() || x.get<std::int64_t>() <= 0) {
      throw ConfigError("invalid value for key: " + where + "." + k);
    }
    v.push_back(x.get<std::uint64_t>());
  }
  if (type == "conv") return ConvShape{v[0], v[1], v[2], v[3], v[4]};
  return LinearShape{v[0], v[1]};
}

ExperimentResult run_flops(const Json& cfg) {
  const Json& layers = cfg.at("layers");
  if (!layers.is_array()) throw ConfigError("invalid value for key: layers");
  ExperimentResult out;
  out.runs = CsvTable({"layer", "type", "plain", "sign_in_training", "inference"});
  std::uint64_t totals[3] = {0, 0, 0};
  const FlopMode modes[3] = {FlopMode::plain, FlopMode::sign_in_training, FlopMode::inference};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerShape shape = parse_layer(layers[i], i);
    std::vector<std::string> row{num(i, 0), std::holds_alternative<ConvShape>(shape) ? "conv" : "linear"};
    for (std::size_t m = 0; m < 3; ++m) {
      const std::uint64_t f = flop_count(shape, modes[m]);
      totals[m] += f;
      row.push_back(num(f));
    }
    out.runs.add_row(std::move(row));
  }
  out.summary = {{"total", {{"plain", totals[0]}, {"sign_in_training", totals[1]}, {"inference", totals[2]}}},
                 {"training_overhead", totals[0] ? static_cast<double>(totals[1] - totals[0]) / static_cast<double>(totals[0]) : 0.0}};
  return out;
}

// ------------------------------------------------------------------------

using Runner = ExperimentResult (*)(const Json&);

struct Entry {
  ExperimentInfo info;
  Runner run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"quadrant-sweep", "success fraction per initial sign quadrant for four training methods", quadrant_defaults()}, run_quadrant},
      {{"multi-input", "sign recovery of a negative outer weight at d > 1", multi_input_defaults()}, run_multi_input},
      {{"flow-trace", "single-neuron gradient-flow trajectories per quadrant", flow_defaults()}, run_flow},
      {{"multi-neuron", "student-teacher network with k neurons, good and bad sign inits", multi_neuron_defaults()}, run_multi_neuron},
      {{"sparse-train", "two-moons MLP under a fixed mask, plain vs sign-in, re-init study", sparse_defaults()}, run_sparse},
      {{"sharpness", "top Hessian eigenvalue during sparse training", sharpness_defaults()}, run_sharpness},
      {{"masks", "kept counts of the mask generators", masks_defaults()}, run_masks},
      {{"flops", "per-layer FLOPs with and without the m*w product", flops_defaults()}, run_flops},
  };
  return table;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> v;
    for (const Entry& e : entries()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const ExperimentInfo& info : experiment_registry()) {
    if (info.name == name) return info;
  }
  std::string names;
  for (const ExperimentInfo& info : experiment_registry()) {
    names += names.empty() ? info.name : ", " + info.name;
  }
  throw ConfigError("unknown experiment: " + name + " (valid: " + names + ")");
}

ExperimentResult execute_experiment(const std::string& name, const Json& resolved,
                                    Execution exec) {
  find_experiment(name);
  g_exec = exec;
  for (const Entry& e : entries()) {
    if (e.info.name != name) continue;
    ExperimentResult r = e.run(resolved);
    r.summary["experiment"] = name;
    r.summary["digest"] = config_digest(resolved);
    return r;
  }
  throw ConfigError("unknown experiment: " + name);
}

ExperimentOutput run_experiment(const std::string& name, const Json& user,
                                const std::filesystem::path& out_root, Execution exec) {
  const ExperimentInfo& info = find_experiment(name);
  const Json resolved = resolve_config(info.defaults, user);
  ExperimentOutput out;
  out.digest = config_digest(resolved);
  out.result = execute_experiment(name, resolved, exec);
  out.dir = out_root / name / out.digest;
  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out.dir.string() + ": " + ec.message());
  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed: " + p.string());
  };
  write_text(out.dir / "config.json", resolved.dump(2) + "\n");
  out.result.runs.write(out.dir / "runs.csv");
  for (const auto& [file, table] : out.result.extra_tables) table.write(out.dir / file);
  write_text(out.dir / "summary.json", out.result.summary.dump(2) + "\n");
  return out;
}

}  // namespace signlab
