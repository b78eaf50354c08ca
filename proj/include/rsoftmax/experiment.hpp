#pragma once

// Experiment configuration, the multi-label training loop, and run reports.

#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsoftmax/checkpoint.hpp"
#include "rsoftmax/data.hpp"
#include "rsoftmax/error.hpp"
#include "rsoftmax/json_util.hpp"
#include "rsoftmax/metrics.hpp"
#include "rsoftmax/nn.hpp"

namespace rsoftmax {

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> grid{0.05, 0.10, 0.15, 0.20, 0.30};
  return grid;
}

struct ExperimentConfig {
  Method method = Method::RSoftmax;
  // softmax only
  std::vector<double> thresholds = default_thresholds();
  // rsoftmax only
  RGradMode rate_grad = RGradMode::Full;
  double count_weight = 1.0;
  // tsoftmax only
  double initial_temperature = 1.0;

  // Exactly one data source.
  std::optional<SynthConfig> synth = SynthConfig{};
  std::optional<std::string> dataset_path;

  std::size_t epochs = 150;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t hidden_dim = 64;
  std::uint64_t seed = 0;
  bool record_wall_time = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline json to_json(const SynthConfig& c) {
  return {{"n_samples", c.n_samples},         {"n_features", c.n_features},
          {"n_classes", c.n_classes},         {"mean_labels", c.mean_labels},
          {"mean_doc_length", c.mean_doc_length}, {"max_labels", c.max_labels},
          {"seed", c.seed}};
}


inline SynthConfig synth_from_json(const json& j, std::uint64_t default_seed) {
  detail::reject_unknown(j, {"n_samples", "n_features", "n_classes", "mean_labels", "mean_doc_length", "max_labels",
                             "seed"},
                         "data");
  SynthConfig c;
  c.n_samples = detail::read_field<std::size_t>(j, "n_samples", c.n_samples);
  c.n_features = detail::read_field<std::size_t>(j, "n_features", c.n_features);
  c.n_classes = detail::read_field<std::size_t>(j, "n_classes", c.n_classes);
  c.mean_labels = detail::read_field<double>(j, "mean_labels", static_cast<double>(c.n_classes) / 2.0);
  c.mean_doc_length = detail::read_field<double>(j, "mean_doc_length", c.mean_doc_length);
  c.max_labels = detail::read_field<std::size_t>(j, "max_labels", c.max_labels);
  c.seed = detail::read_field<std::uint64_t>(j, "seed", default_seed);
  validate(c);
  return c;
}

// Effective configuration; mapping-specific fields appear only for their mapping.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["mapping"] = std::string(to_string(c.method));
  if (c.method == Method::Softmax) j["thresholds"] = c.thresholds;
  if (c.method == Method::RSoftmax) {
    j["rate_grad"] = std::string(to_string(c.rate_grad));
    j["count_weight"] = c.count_weight;
  }
  if (c.method == Method::TSoftmax) j["initial_temperature"] = c.initial_temperature;
  if (c.synth) j["data"] = to_json(*c.synth);
  if (c.dataset_path) j["dataset"] = *c.dataset_path;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["hidden_dim"] = c.hidden_dim;
  j["seed"] = c.seed;
  j["record_wall_time"] = c.record_wall_time;
  return j;
}

inline ExperimentConfig experiment_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"mapping", "thresholds", "rate_grad", "count_weight", "initial_temperature", "data",
                          "dataset", "epochs", "learning_rate", "batch_size", "hidden_dim", "seed",
                          "record_wall_time"},
                         "experiment config");
  ExperimentConfig c;
  c.method = parse_method(detail::read_field<std::string>(j, "mapping", "rsoftmax"));
  auto only_for = [&](const char* key, Method m) {
    if (j.contains(key) && c.method != m) {
      throw ConfigError(std::string("field '") + key + "' is only valid for mapping " + std::string(to_string(m)));
    }
  };
  only_for("thresholds", Method::Softmax);
  only_for("rate_grad", Method::RSoftmax);
  only_for("count_weight", Method::RSoftmax);
  only_for("initial_temperature", Method::TSoftmax);

  c.thresholds = detail::read_field<std::vector<double>>(j, "thresholds", c.thresholds);
  if (c.thresholds.empty()) throw ConfigError("thresholds must not be empty");
  for (double t : c.thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in (0, 1]");
  }
  c.rate_grad = parse_rate_grad(detail::read_field<std::string>(j, "rate_grad", "full"));
  c.count_weight = detail::read_field<double>(j, "count_weight", c.count_weight);
  if (!(c.count_weight >= 0.0)) throw ConfigError("count_weight must be nonnegative");
  c.initial_temperature = detail::read_field<double>(j, "initial_temperature", c.initial_temperature);
  if (!(c.initial_temperature > SoftplusTemperature::kFloor)) throw ConfigError("initial_temperature must exceed 1e-4");

  c.epochs = detail::read_field<std::size_t>(j, "epochs", c.epochs);
  c.learning_rate = detail::read_field<double>(j, "learning_rate", c.learning_rate);
  c.batch_size = detail::read_field<std::size_t>(j, "batch_size", c.batch_size);
  c.hidden_dim = detail::read_field<std::size_t>(j, "hidden_dim", c.hidden_dim);
  c.seed = detail::read_field<std::uint64_t>(j, "seed", c.seed);
  c.record_wall_time = detail::read_field<bool>(j, "record_wall_time", c.record_wall_time);
  if (c.epochs == 0) throw ConfigError("epochs must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");

  const bool has_data = j.contains("data");
  const bool has_path = j.contains("dataset");
  if (has_data && has_path) throw ConfigError("give exactly one of 'data' and 'dataset'");
  if (has_path) {
    c.synth.reset();
    c.dataset_path = detail::read_field<std::string>(j, "dataset", "");
  } else {
    c.synth = synth_from_json(has_data ? j.at("data") : json::object(), c.seed);
  }
  return c;
}

// Decision rule evaluated on the validation split: one per threshold for
// softmax, a single nonzero rule otherwise.
struct RuleHistory {
  std::string name;
  std::optional<double> p0;
  std::vector<F1Triple> f1;                // per epoch
  std::vector<double> mean_predicted;      // per epoch, labels per sample
  std::size_t best_epoch = 0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<double> train_loss;  // per epoch
  std::vector<RuleHistory> rules;
  std::size_t headline_rule = 0;
  double mean_true_labels = 0.0;
  // Fraction of validation samples whose predicted label count equals the
  // count-head argmax at the headline epoch (rsoftmax only).
  std::optional<double> count_head_agreement;
  std::optional<double> wall_time_s;

  const RuleHistory& headline() const { return rules.at(headline_rule); }
  F1Triple best_f1() const { return headline().f1.at(headline().best_epoch); }
};

inline std::string rule_name(Method m, std::optional<double> p0) {
  std::string name(to_string(m));
  if (p0) {
    std::ostringstream os;
    os << name << "@p0=" << *p0;
    name = os.str();
  }
  return name;
}

inline MultiLabelDataset load_or_generate(const ExperimentConfig& cfg) {
  if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
  return generate(*cfg.synth);
}

inline ModelSpec model_spec(const ExperimentConfig& cfg, const MultiLabelDataset& ds) {
  ModelSpec spec;
  spec.input_dim = ds.n_features();
  spec.hidden_dim = cfg.hidden_dim;
  spec.n_classes = ds.n_classes();
  spec.method = cfg.method;
  spec.rate_grad = cfg.rate_grad;
  spec.count_weight = cfg.count_weight;
  spec.initial_temperature = cfg.initial_temperature;
  return spec;
}

// Trains with Adam on the 80% split, evaluating every rule on the validation
// split after each epoch. The best epoch of a rule maximizes micro-F1 (first
// maximum wins). `final_model` receives the trained parameters when given.
inline RunReport run_experiment(const ExperimentConfig& cfg, const MultiLabelDataset& ds,
                                std::optional<MultiLabelModel>* final_model = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.method == Method::RSoftmax && ds.n_classes() < 2) throw ConfigError("rsoftmax needs at least 2 classes");
  MultiLabelModel model(model_spec(cfg, ds), cfg.seed);
  AdamState adam;
  adam.config.learning_rate = cfg.learning_rate;
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);

  std::vector<std::vector<double>> features(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) features[i] = ds.features(i);
  std::vector<std::size_t> train = ds.train_indices();
  const std::vector<std::size_t> valid = ds.validation_indices();
  if (train.empty() || valid.empty()) throw ConfigError("dataset split leaves an empty partition");

  std::vector<LabelSet> truth;
  double true_total = 0.0;
  for (std::size_t i : valid) {
    truth.push_back(label_set(ds.label_row(i)));
    true_total += static_cast<double>(truth.back().size());
  }

  RunReport report;
  report.config = cfg;
  report.mean_true_labels = true_total / static_cast<double>(valid.size());
  if (cfg.method == Method::Softmax) {
    for (double p0 : cfg.thresholds) report.rules.push_back({rule_name(cfg.method, p0), p0, {}, {}, 0});
  } else {
    report.rules.push_back({rule_name(cfg.method, std::nullopt), std::nullopt, {}, {}, 0});
  }
  std::vector<double> agreement_per_epoch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, train.size());
      const double inv = 1.0 / static_cast<double>(end - begin);
      ParamGrads grads = model.zero_grads();
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t i = train[s];
        const ForwardCache cache = model.forward(features[i]);
        SampleLoss loss = training_loss(model, cache, ds.label_row(i));
        loss_sum += loss.value;
        for (double& g : loss.grad_logits) g *= inv;
        for (double& g : loss.grad_count) g *= inv;
        model.backward(cache, loss.grad_logits, loss.grad_count, loss.grad_temperature * inv, grads);
      }
      auto params = model.parameters();
      adam_step(adam, params, grads);
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(train.size()));

    std::vector<std::vector<LabelSet>> predictions(report.rules.size());
    std::size_t agree = 0;
    for (std::size_t i : valid) {
      const ForwardCache cache = model.forward(features[i]);
      for (std::size_t r = 0; r < report.rules.size(); ++r) {
        predictions[r].push_back(predict_labels(model, cache, report.rules[r].p0.value_or(0.0)));
      }
      if (model.has_count_head()) agree += predictions[0].back().size() == predicted_count(cache.count_logits);
    }
    agreement_per_epoch.push_back(static_cast<double>(agree) / static_cast<double>(valid.size()));
    for (std::size_t r = 0; r < report.rules.size(); ++r) {
      auto& rule = report.rules[r];
      rule.f1.push_back(f1_all(predictions[r], truth, ds.n_classes()));
      double predicted_total = 0.0;
      for (const auto& p : predictions[r]) predicted_total += static_cast<double>(p.size());
      rule.mean_predicted.push_back(predicted_total / static_cast<double>(valid.size()));
      if (rule.f1.back().micro > rule.f1[rule.best_epoch].micro) rule.best_epoch = epoch;
    }
  }

  for (std::size_t r = 1; r < report.rules.size(); ++r) {
    const auto& best = report.rules[report.headline_rule];
    if (report.rules[r].f1[report.rules[r].best_epoch].micro > best.f1[best.best_epoch].micro) {
      report.headline_rule = r;
    }
  }
  if (model.has_count_head()) report.count_head_agreement = agreement_per_epoch[report.headline().best_epoch];
  if (cfg.record_wall_time) {
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  if (final_model) final_model->emplace(std::move(model));
  return report;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, load_or_generate(cfg));
}

inline constexpr const char* kReportSchema = "rsoftmax.run_report";
inline constexpr int kReportSchemaVersion = 1;

inline json f1_json(const F1Triple& f) { return {{"micro", f.micro}, {"macro", f.macro}, {"sample", f.per_sample}}; }

inline json to_json(const RunReport& r) {
  json j;
  j["schema"] = kReportSchema;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["epochs_run"] = r.train_loss.size();
  j["train_loss"] = r.train_loss;
  json rules = json::array();
  for (const auto& rule : r.rules) {
    json jr;
    jr["name"] = rule.name;
    jr["p0"] = rule.p0 ? json(*rule.p0) : json(nullptr);
    json per_epoch = json::array();
    for (std::size_t e = 0; e < rule.f1.size(); ++e) {
      json row = f1_json(rule.f1[e]);
      row["epoch"] = e;
      row["mean_predicted_labels"] = rule.mean_predicted[e];
      per_epoch.push_back(std::move(row));
    }
    jr["validation"] = std::move(per_epoch);
    jr["best"] = f1_json(rule.f1[rule.best_epoch]);
    jr["best"]["epoch"] = rule.best_epoch;
    rules.push_back(std::move(jr));
  }
  j["rules"] = std::move(rules);
  const auto& h = r.headline();
  j["headline"] = f1_json(h.f1[h.best_epoch]);
  j["headline"]["rule"] = h.name;
  j["headline"]["epoch"] = h.best_epoch;
  j["label_counts"] = {{"mean_true", r.mean_true_labels},
                       {"mean_predicted", h.mean_predicted[h.best_epoch]},
                       {"count_head_agreement",
                        r.count_head_agreement ? json(*r.count_head_agreement) : json(nullptr)}};
  if (r.wall_time_s) j["wall_time_s"] = *r.wall_time_s;
  return j;
}

// Structural check of a report against the published schema
// (schemas/run_report.schema.json). Returns the violations found.
inline std::vector<std::string> report_schema_errors(const json& j) {
  std::vector<std::string> errors;
  auto need = [&](const json& obj, const char* key, auto pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      errors.push_back(std::string("missing '") + key + "'");
      return false;
    }
    if (!pred(obj.at(key))) {
      errors.push_back(std::string("'") + key + "' must be " + what);
      return false;
    }
    return true;
  };
  auto is_unit = [](const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };
  auto is_count = [](const json& v) { return v.is_number_unsigned(); };
  auto is_f1 = [&](const json& v) {
    return v.is_object() && v.contains("micro") && v.contains("macro") && v.contains("sample") &&
           is_unit(v["micro"]) && is_unit(v["macro"]) && is_unit(v["sample"]);
  };

  if (!j.is_object()) return {"report must be an object"};
  need(j, "schema", [](const json& v) { return v == kReportSchema; }, "\"rsoftmax.run_report\"");
  need(j, "schema_version", [](const json& v) { return v == kReportSchemaVersion; }, "1");
  if (need(j, "config", [](const json& v) { return v.is_object(); }, "an object")) {
    try {
      experiment_from_json(j["config"]);
    } catch (const Error& e) {
      errors.push_back(std::string("config does not re-parse: ") + e.what());
    }
  }
  need(j, "seed", is_count, "an unsigned integer");
  const bool epochs_ok = need(j, "epochs_run", is_count, "an unsigned integer");
  if (need(j, "train_loss", [](const json& v) { return v.is_array(); }, "an array") && epochs_ok &&
      j["train_loss"].size() != j["epochs_run"].get<std::size_t>()) {
    errors.push_back("train_loss length differs from epochs_run");
  }
  if (need(j, "rules", [](const json& v) { return v.is_array() && !v.empty(); }, "a non-empty array")) {
    for (const auto& rule : j["rules"]) {
      need(rule, "name", [](const json& v) { return v.is_string(); }, "a string");
      need(rule, "p0", [](const json& v) { return v.is_null() || v.is_number(); }, "null or a number");
      need(rule, "best", [&](const json& v) { return is_f1(v) && v.contains("epoch") && is_count(v["epoch"]); },
           "an F1 record with epoch");
      if (need(rule, "validation", [](const json& v) { return v.is_array(); }, "an array")) {
        if (epochs_ok && rule["validation"].size() != j["epochs_run"].get<std::size_t>()) {
          errors.push_back("validation length differs from epochs_run");
        }
        for (const auto& row : rule["validation"]) {
          if (!is_f1(row) || !row.contains("epoch") || !row.contains("mean_predicted_labels")) {
            errors.push_back("malformed validation row");
            break;
          }
        }
      }
    }
  }
  need(j, "headline",
       [&](const json& v) { return is_f1(v) && v.contains("rule") && v["rule"].is_string() && v.contains("epoch"); },
       "an F1 record with rule and epoch");
  need(j, "label_counts",
       [&](const json& v) {
         return v.is_object() && v.contains("mean_true") && v["mean_true"].is_number() &&
                v.contains("mean_predicted") && v["mean_predicted"].is_number() &&
                v.contains("count_head_agreement") &&
                (v["count_head_agreement"].is_null() || is_unit(v["count_head_agreement"]));
       },
       "a label-count record");
  if (j.contains("wall_time_s") && !j["wall_time_s"].is_number()) errors.push_back("'wall_time_s' must be a number");
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"schema", "schema_version", "config", "seed", "epochs_run", "train_loss",
                                  "rules", "headline", "label_counts", "wall_time_s"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      errors.push_back("unexpected field '" + key + "'");
    }
  }
  return errors;
}

// Per-epoch metrics: one row per (epoch, rule).
inline std::string metrics_csv(const RunReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,rule,p0,train_loss,micro_f1,macro_f1,sample_f1,mean_predicted_labels\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    for (const auto& rule : r.rules) {
      os << e << ',' << rule.name << ',';
      if (rule.p0) os << *rule.p0;
      os << ',' << r.train_loss[e] << ',' << rule.f1[e].micro << ',' << rule.f1[e].macro << ','
         << rule.f1[e].per_sample << ',' << rule.mean_predicted[e] << '\n';
    }
  }
  return os.str();
}

}  // namespace rsoftmax
