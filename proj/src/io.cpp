#include "grwarm/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <set>

#include "grwarm/errors.hpp"

namespace grwarm {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

void reject_unknown(const json& obj, const std::string& prefix,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) fail(prefix + key, "unknown field");
  }
}

double get_number(const json& obj, const std::string& key, const std::string& path,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

std::int64_t get_int(const json& obj, const std::string& key, const std::string& path,
                     std::int64_t fallback, std::int64_t min_value) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < min_value) fail(path, "must be >= " + std::to_string(min_value));
  return i;
}

std::uint64_t get_seed(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path, "required (all randomness must be seeded explicitly)");
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    fail(path, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

ModelSpec parse_model(const json& doc) {
  ModelSpec spec;
  if (!doc.contains("model")) fail("model", "required");
  const json& m = doc.at("model");
  json obj;
  if (m.is_string()) {
    obj = json{{"kind", m.get<std::string>()}};
  } else if (m.is_object()) {
    obj = m;
  } else {
    fail("model", "expected a string or an object");
  }
  const std::string kind = get_string(obj, "kind", "model.kind", "");
  if (kind == "quadratic") {
    reject_unknown(obj, "model.", {"kind", "dim", "eig_min", "eig_max", "init_scale"});
    spec.kind = ModelKind::quadratic;
    spec.dim = static_cast<std::size_t>(get_int(obj, "dim", "model.dim", 10, 1));
    spec.eig_min = get_number(obj, "eig_min", "model.eig_min", spec.eig_min);
    spec.eig_max = get_number(obj, "eig_max", "model.eig_max", spec.eig_max);
    spec.init_scale = get_number(obj, "init_scale", "model.init_scale", spec.init_scale);
    if (!(spec.eig_min > 0.0)) fail("model.eig_min", "must be > 0");
    if (spec.eig_max < spec.eig_min) fail("model.eig_max", "must be >= eig_min");
    if (!(spec.init_scale > 0.0)) fail("model.init_scale", "must be > 0");
  } else if (kind == "mlp") {
    reject_unknown(obj, "model.", {"kind", "hidden", "activation"});
    spec.kind = ModelKind::mlp;
    if (obj.contains("hidden")) {
      const auto& h = obj.at("hidden");
      if (!h.is_array()) fail("model.hidden", "expected an array of positive integers");
      spec.hidden.clear();
      for (const auto& w : h) {
        if (!w.is_number_integer() || w.get<std::int64_t>() < 1) {
          fail("model.hidden", "expected an array of positive integers");
        }
        spec.hidden.push_back(w.get<std::size_t>());
      }
    }
    try {
      spec.activation = parse_activation(get_string(obj, "activation", "model.activation", "tanh"));
    } catch (const ParameterError& e) {
      fail("model.activation", e.what());
    }
  } else {
    fail("model.kind", "expected 'quadratic' or 'mlp'");
  }
  return spec;
}

DatasetSpec parse_dataset(const json& doc) {
  if (!doc.contains("dataset")) fail("dataset", "required");
  const json& d = doc.at("dataset");
  if (!d.is_object()) fail("dataset", "expected an object");
  reject_unknown(d, "dataset.", {"kind", "n", "classes", "seed"});
  DatasetSpec spec;
  try {
    spec.kind = parse_dataset_kind(get_string(d, "kind", "dataset.kind", "blobs"));
  } catch (const ParameterError& e) {
    fail("dataset.kind", e.what());
  }
  spec.classes = static_cast<std::size_t>(get_int(d, "classes", "dataset.classes", 2, 2));
  if (!d.contains("n")) fail("dataset.n", "required");
  spec.n = static_cast<std::size_t>(get_int(d, "n", "dataset.n", 0, 1));
  if (spec.n < spec.classes) fail("dataset.n", "must be >= dataset.classes");
  spec.seed = get_seed(d, "seed", "dataset.seed");
  return spec;
}

OptimizerHyper parse_optimizer(const json& doc) {
  if (!doc.contains("optimizer")) return AdamHyper{};
  const json& o = doc.at("optimizer");
  if (o.is_string()) return parse_optimizer(json{{"optimizer", {{"kind", o}}}});
  if (!o.is_object()) fail("optimizer", "expected a string or an object");
  const std::string kind = get_string(o, "kind", "optimizer.kind", "adam");
  if (kind == "adam") {
    reject_unknown(o, "optimizer.", {"kind", "beta1", "beta2", "eps"});
    AdamHyper h;
    h.beta1 = get_number(o, "beta1", "optimizer.beta1", h.beta1);
    h.beta2 = get_number(o, "beta2", "optimizer.beta2", h.beta2);
    h.eps = get_number(o, "eps", "optimizer.eps", h.eps);
    if (!(h.beta1 >= 0.0 && h.beta1 < 1.0)) fail("optimizer.beta1", "must lie in [0, 1)");
    if (!(h.beta2 >= 0.0 && h.beta2 < 1.0)) fail("optimizer.beta2", "must lie in [0, 1)");
    if (!(h.eps > 0.0)) fail("optimizer.eps", "must be > 0");
    return h;
  }
  if (kind == "rmsprop") {
    reject_unknown(o, "optimizer.", {"kind", "decay", "eps"});
    RmsPropHyper h;
    h.decay = get_number(o, "decay", "optimizer.decay", h.decay);
    h.eps = get_number(o, "eps", "optimizer.eps", h.eps);
    if (!(h.decay >= 0.0 && h.decay < 1.0)) fail("optimizer.decay", "must lie in [0, 1)");
    if (!(h.eps > 0.0)) fail("optimizer.eps", "must be > 0");
    return h;
  }
  fail("optimizer.kind", "expected 'adam' or 'rmsprop'");
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  reject_unknown(doc, "",
                 {"model", "dataset", "optimizer", "lr", "warmup_steps", "policy", "lambda0", "r0",
                  "epochs", "batch_size", "clip_norm", "seed", "eval_every"});
  RunConfig cfg;
  cfg.model = parse_model(doc);
  cfg.dataset = parse_dataset(doc);

  TrainConfig& t = cfg.train;
  t.optimizer = parse_optimizer(doc);
  auto& s = t.schedule;
  s.eta0 = get_number(doc, "lr", "lr", s.eta0);
  if (!(s.eta0 > 0.0)) fail("lr", "must be > 0");
  s.warmup_steps = get_int(doc, "warmup_steps", "warmup_steps", s.warmup_steps, 1);
  try {
    s.policy = parse_warmup_policy(get_string(doc, "policy", "policy", "none"));
  } catch (const ParameterError& e) {
    fail("policy", e.what());
  }
  s.gr.lambda0 = get_number(doc, "lambda0", "lambda0", s.gr.lambda0);
  s.gr.r0 = get_number(doc, "r0", "r0", s.gr.r0);
  if (s.gr.lambda0 < 0.0) fail("lambda0", "must be >= 0");
  if (!(s.gr.r0 > 0.0)) fail("r0", "must be > 0");
  t.epochs = get_int(doc, "epochs", "epochs", t.epochs, 1);
  t.batch_size = static_cast<std::size_t>(
      get_int(doc, "batch_size", "batch_size", static_cast<std::int64_t>(t.batch_size), 1));
  if (doc.contains("clip_norm")) {
    const auto& c = doc.at("clip_norm");
    if (c.is_null() || (c.is_boolean() && !c.get<bool>())) {
      t.clip_norm.reset();
    } else if (c.is_number()) {
      t.clip_norm = c.get<double>();
      if (!(*t.clip_norm > 0.0) || !std::isfinite(*t.clip_norm)) {
        fail("clip_norm", "must be > 0 (or null/false to disable)");
      }
    } else {
      fail("clip_norm", "expected a number, null or false");
    }
  }
  t.seed = get_seed(doc, "seed", "seed");
  t.eval_every = get_int(doc, "eval_every", "eval_every", t.eval_every, 0);
  t.validate();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json model;
  if (cfg.model.kind == ModelKind::quadratic) {
    model = {{"kind", "quadratic"},
             {"dim", cfg.model.dim},
             {"eig_min", cfg.model.eig_min},
             {"eig_max", cfg.model.eig_max},
             {"init_scale", cfg.model.init_scale}};
  } else {
    model = {{"kind", "mlp"},
             {"hidden", cfg.model.hidden},
             {"activation", std::string(to_string(cfg.model.activation))}};
  }
  json optimizer;
  if (const auto* a = std::get_if<AdamHyper>(&cfg.train.optimizer)) {
    optimizer = {{"kind", "adam"}, {"beta1", a->beta1}, {"beta2", a->beta2}, {"eps", a->eps}};
  } else {
    const auto& r = std::get<RmsPropHyper>(cfg.train.optimizer);
    optimizer = {{"kind", "rmsprop"}, {"decay", r.decay}, {"eps", r.eps}};
  }
  const auto& t = cfg.train;
  return {{"model", model},
          {"dataset",
           {{"kind", std::string(to_string(cfg.dataset.kind))},
            {"n", cfg.dataset.n},
            {"classes", cfg.dataset.classes},
            {"seed", cfg.dataset.seed}}},
          {"optimizer", optimizer},
          {"lr", t.schedule.eta0},
          {"warmup_steps", t.schedule.warmup_steps},
          {"policy", std::string(to_string(t.schedule.policy))},
          {"lambda0", t.schedule.gr.lambda0},
          {"r0", t.schedule.gr.r0},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"clip_norm", t.clip_norm ? json(*t.clip_norm) : json(nullptr)},
          {"seed", t.seed},
          {"eval_every", t.eval_every}};
}

Experiment make_experiment(const RunConfig& cfg) {
  Experiment ex;
  ex.data = synth_dataset(cfg.dataset.kind, cfg.dataset.n, cfg.dataset.classes, cfg.dataset.seed);
  const std::uint64_t seed = cfg.train.seed;
  if (cfg.model.kind == ModelKind::quadratic) {
    auto q = std::make_unique<QuadraticObjective>(
        QuadraticObjective::random(cfg.model.dim, cfg.model.eig_min, cfg.model.eig_max, seed));
    // Starting point: uniform in [-init_scale, init_scale]^dim from its own stream.
    Rng rng(seed, 0x7468657461ull);
    RealVector theta(cfg.model.dim);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] = cfg.model.init_scale * (2.0 * rng.uniform() - 1.0);
    }
    ex.objective = std::move(q);
    ex.theta0 = std::move(theta);
  } else {
    std::vector<std::size_t> widths{ex.data.num_features};
    widths.insert(widths.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
    widths.push_back(ex.data.num_classes);
    auto mlp = std::make_unique<MlpClassifier>(std::move(widths), cfg.model.activation);
    ex.theta0 = mlp->init_params(seed);
    ex.objective = std::move(mlp);
  }
  return ex;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_record(const TrainRecord& rec) {
  std::string line = "{\"step\":" + std::to_string(rec.step) +
                     ",\"epoch\":" + std::to_string(rec.epoch) +
                     ",\"loss\":" + format_number(rec.loss) +
                     ",\"grad_norm\":" + format_number(rec.grad_norm) +
                     ",\"mixed_grad_norm\":" + format_number(rec.mixed_grad_norm) +
                     ",\"lr\":" + format_number(rec.lr) +
                     ",\"lambda_t\":" + format_number(rec.lambda_t) +
                     ",\"r_t\":" + format_number(rec.r_t);
  if (rec.eval_error) line += ",\"eval_error\":" + format_number(*rec.eval_error);
  line += '}';
  return line;
}

TrainRecord parse_record(std::string_view line) {
  const json j = json::parse(line);
  auto number = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  TrainRecord rec;
  rec.step = j.at("step").get<std::int64_t>();
  rec.epoch = j.at("epoch").get<std::int64_t>();
  rec.loss = number("loss");
  rec.grad_norm = number("grad_norm");
  rec.mixed_grad_norm = number("mixed_grad_norm");
  rec.lr = number("lr");
  rec.lambda_t = number("lambda_t");
  rec.r_t = number("r_t");
  if (j.contains("eval_error")) rec.eval_error = number("eval_error");
  return rec;
}

void write_trace(std::ostream& out, const std::vector<TrainRecord>& records) {
  for (const auto& rec : records) out << format_record(rec) << '\n';
}

std::vector<TrainRecord> read_trace(std::istream& in) {
  std::vector<TrainRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(parse_record(line));
  }
  return records;
}

}  // namespace grwarm
