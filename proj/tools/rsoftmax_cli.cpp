// rsoftmax: command-line harness for dataset generation, training runs,
// sweeps and the toy attention experiment.
//
// Exit codes: 0 success, 2 invalid configuration or command line,
// 3 runtime failure (I/O, corrupt files, numerical errors).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsoftmax/rsoftmax.hpp"

namespace fs = std::filesystem;
using rsoftmax::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flag that overrides one dotted key of the JSON config when given.
struct Override {
  CLI::Option* option;
  std::string key;
  std::function<json()> value;
};

class Overrides {
 public:
  explicit Overrides(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& flag, const std::string& key, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *holder, help);
    items_.push_back({opt, key, [holder] { return json(*holder); }});
    return opt;
  }

  CLI::Option* add_switch(const std::string& flag, const std::string& key, const std::string& help) {
    auto holder = std::make_shared<bool>(false);
    CLI::Option* opt = app_->add_flag(flag, *holder, help);
    items_.push_back({opt, key, [holder] { return json(*holder); }});
    return opt;
  }

  bool given(const std::string& key) const {
    for (const auto& o : items_) {
      if (o.key == key && o.option->count() > 0) return true;
    }
    return false;
  }

  void apply(json& config) const {
    for (const auto& o : items_) {
      if (o.option->count() > 0) rsoftmax::set_dotted(config, o.key, o.value());
    }
  }

 private:
  CLI::App* app_;
  std::vector<Override> items_;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rsoftmax::ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw rsoftmax::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw rsoftmax::Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw rsoftmax::Error("failed writing '" + path.string() + "'");
}

fs::path output_dir() {
  const char* env = std::getenv("RSOFTMAX_OUTPUT_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve_output(const std::string& given, const char* fallback_name) {
  return given.empty() ? output_dir() / fallback_name : fs::path(given);
}

void add_synth_overrides(Overrides& ov, const std::string& prefix) {
  ov.add<std::size_t>("--n-samples", prefix + "n_samples", "Number of samples");
  ov.add<std::size_t>("--n-features", prefix + "n_features", "Number of features (vocabulary size)");
  ov.add<std::size_t>("--n-classes", prefix + "n_classes", "Number of classes");
  ov.add<double>("--mean-labels", prefix + "mean_labels", "Poisson mean of the label count");
  ov.add<double>("--mean-doc-length", prefix + "mean_doc_length", "Poisson mean of the document length");
  ov.add<std::size_t>("--max-labels", prefix + "max_labels", "Largest accepted label count (0 = n_classes)");
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string config_path;
  std::string output;
  std::unique_ptr<Overrides> overrides;
};

int run_gen(const GenArgs& a) {
  json config = a.config_path.empty() ? json::object() : read_json_file(a.config_path);
  a.overrides->apply(config);
  const std::uint64_t seed = rsoftmax::detail::read_field<std::uint64_t>(config, "seed", 0);
  const rsoftmax::SynthConfig synth = rsoftmax::synth_from_json(config, seed);
  const fs::path path = resolve_output(a.output, "dataset.bin");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());

  const auto ds = rsoftmax::generate(synth);
  rsoftmax::save_dataset(ds, path.string());

  double labels = 0.0;
  for (auto v : ds.labels) labels += v;
  json echo;
  echo["dataset"] = path.string();
  echo["config"] = rsoftmax::to_json(synth);
  echo["n_train"] = ds.train_indices().size();
  echo["n_validation"] = ds.validation_indices().size();
  echo["mean_labels_observed"] = labels / static_cast<double>(ds.n_samples());
  std::cout << echo.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config_path;
  std::string output;
  std::string checkpoint;
  bool dry_run = false;
  std::unique_ptr<Overrides> overrides;
};

json merged_train_config(const TrainArgs& a) {
  json config = a.config_path.empty() ? json::object() : read_json_file(a.config_path);
  if (!config.is_object()) throw rsoftmax::ConfigError("config file must hold a JSON object");
  // Switching the mapping on the command line discards the file's fields
  // that belong to the old mapping; explicit flags are applied afterwards.
  if (a.overrides->given("mapping")) {
    json probe = json::object();
    a.overrides->apply(probe);
    if (config.value("mapping", std::string("rsoftmax")) != probe.at("mapping").get<std::string>()) {
      for (const char* key : {"thresholds", "rate_grad", "count_weight", "initial_temperature"}) config.erase(key);
    }
  }
  if (a.overrides->given("dataset")) config.erase("data");
  a.overrides->apply(config);
  return config;
}

int run_train(const TrainArgs& a) {
  const rsoftmax::ExperimentConfig cfg = rsoftmax::experiment_from_json(merged_train_config(a));
  if (a.dry_run) {
    std::cout << rsoftmax::to_json(cfg).dump(2) << '\n';
    return 0;
  }
  const fs::path prefix = resolve_output(a.output, "run");
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());

  std::cerr << "training " << rsoftmax::to_string(cfg.method) << " for " << cfg.epochs << " epochs\n";
  const auto ds = rsoftmax::load_or_generate(cfg);
  std::optional<rsoftmax::MultiLabelModel> model;
  const rsoftmax::RunReport report = rsoftmax::run_experiment(cfg, ds, &model);
  const json j = rsoftmax::to_json(report);

  write_file(fs::path(prefix.string() + ".json"), j.dump(2) + "\n");
  write_file(fs::path(prefix.string() + ".csv"), rsoftmax::metrics_csv(report));
  if (!a.checkpoint.empty()) {
    const fs::path ck(a.checkpoint);
    if (ck.has_parent_path()) fs::create_directories(ck.parent_path());
    rsoftmax::save_checkpoint(*model, cfg.seed, ck.string());
  }
  const auto& h = j.at("headline");
  std::cout << "best " << h.at("rule").get<std::string>() << " epoch " << h.at("epoch").get<std::size_t>()
            << ": micro-F1 " << h.at("micro").get<double>() << ", macro-F1 " << h.at("macro").get<double>()
            << ", sample-F1 " << h.at("sample").get<double>() << '\n'
            << "report: " << prefix.string() << ".json\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string grid_path;
  std::string output;
  std::size_t jobs = 1;
};

int run_sweep_cmd(const SweepArgs& a) {
  const rsoftmax::SweepSpec spec = rsoftmax::sweep_from_json(read_json_file(a.grid_path));
  const fs::path dir = resolve_output(a.output, "sweep");
  std::cerr << "sweep with " << rsoftmax::cell_count(spec) << " cells, " << a.jobs << " job(s)\n";
  const auto result = rsoftmax::run_sweep(spec, dir, a.jobs);
  std::size_t failed = 0, resumed = 0;
  for (const auto& c : result.cells) {
    failed += !c.ok;
    resumed += c.resumed;
  }
  std::cout << result.cells.size() << " cells (" << resumed << " resumed, " << failed << " failed)\n"
            << "table: " << (dir / "results.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- attn

struct AttnArgs {
  std::string config_path;
  std::string output;
  std::string mapping = "all";
  std::string rate_grad = "full";
  std::unique_ptr<Overrides> overrides;
};

int run_attn(const AttnArgs& a) {
  json config = a.config_path.empty() ? json::object() : read_json_file(a.config_path);
  a.overrides->apply(config);
  const rsoftmax::ToyTaskConfig cfg = rsoftmax::toy_config_from_json(config);
  const rsoftmax::RGradMode mode = rsoftmax::parse_rate_grad(a.rate_grad);
  std::vector<std::string> names;
  if (a.mapping == "all") {
    names = {"softmax", "sparsemax", "rsoftmax", "tsoftmax"};
  } else {
    names = {a.mapping};
  }
  for (const auto& n : names) rsoftmax::toy_mapping(n, cfg, mode);

  json report;
  report["schema"] = "rsoftmax.attn_report";
  report["schema_version"] = 1;
  report["config"] = rsoftmax::to_json(cfg);
  report["rate_grad"] = a.rate_grad;
  report["runs"] = json::array();
  for (const auto& n : names) {
    std::cerr << "attention run: " << n << '\n';
    const auto result = rsoftmax::run_toy(cfg, rsoftmax::toy_mapping(n, cfg, mode));
    report["runs"].push_back(rsoftmax::to_json(result, n, cfg));
    std::cout << n << ": accuracy " << result.final_accuracy << ", zeros per row " << result.min_zeros_per_row
              << ".." << result.max_zeros_per_row << ", final r " << result.final_rate << '\n';
  }
  const fs::path prefix = resolve_output(a.output, "attn");
  write_file(fs::path(prefix.string() + ".json"), report.dump(2) + "\n");
  std::cout << "report: " << prefix.string() << ".json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse probability mappings: data generation, training, sweeps and attention experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rsoftmax 1.0.0");

  // gen
  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic multi-label dataset file");
  gen_cmd->add_option("-c,--config", gen.config_path, "JSON file with data-generation fields");
  gen_cmd->add_option("-o,--output", gen.output, "Dataset file (default $RSOFTMAX_OUTPUT_DIR/dataset.bin)");
  gen.overrides = std::make_unique<Overrides>(gen_cmd);
  add_synth_overrides(*gen.overrides, "");
  gen.overrides->add<std::uint64_t>("--seed", "seed", "Random seed");

  // train
  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one configuration and write its report");
  train_cmd->add_option("-c,--config", train.config_path, "JSON experiment config");
  train_cmd->add_option("-o,--output", train.output,
                        "Output prefix; writes <prefix>.json and <prefix>.csv (default $RSOFTMAX_OUTPUT_DIR/run)");
  train_cmd->add_option("--checkpoint", train.checkpoint, "Write the final model to this JSON file");
  train_cmd->add_flag("--dry-run", train.dry_run, "Print the merged config and exit");
  train.overrides = std::make_unique<Overrides>(train_cmd);
  auto& tov = *train.overrides;
  tov.add<std::string>("-m,--mapping", "mapping",
                       "softmax | sparsemax_huber | sparsemax_hinge | rsoftmax | tsoftmax");
  tov.add<std::vector<double>>("--thresholds", "thresholds", "Softmax p0 grid, comma separated")->delimiter(',');
  tov.add<std::string>("--rate-grad", "rate_grad", "rsoftmax threshold gradient: full | detached");
  tov.add<double>("--count-weight", "count_weight", "Weight of the count-head cross-entropy");
  tov.add<double>("--initial-temperature", "initial_temperature", "Starting temperature for tsoftmax");
  tov.add<std::string>("--dataset", "dataset", "Dataset file instead of synthetic generation");
  add_synth_overrides(tov, "data.");
  tov.add<std::uint64_t>("--data-seed", "data.seed", "Seed of the synthetic data (default: --seed)");
  tov.add<std::size_t>("-e,--epochs", "epochs", "Training epochs");
  tov.add<double>("--learning-rate", "learning_rate", "Adam step size");
  tov.add<std::size_t>("--batch-size", "batch_size", "Minibatch size");
  tov.add<std::size_t>("--hidden-dim", "hidden_dim", "Width of both hidden layers");
  tov.add<std::uint64_t>("-s,--seed", "seed", "Random seed");
  tov.add_switch("--record-wall-time", "record_wall_time", "Include wall time in the report");

  // sweep
  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a grid of training configurations");
  sweep_cmd->add_option("-g,--grid", sweep.grid_path, "JSON grid spec")->required();
  sweep_cmd->add_option("-o,--output", sweep.output, "Output directory (default $RSOFTMAX_OUTPUT_DIR/sweep)");
  sweep_cmd->add_option("-j,--jobs", sweep.jobs, "Cells run in parallel")->check(CLI::PositiveNumber);

  // attn
  AttnArgs attn;
  CLI::App* attn_cmd = app.add_subcommand("attn", "Toy sequence task with sparse attention rows");
  attn_cmd->add_option("-c,--config", attn.config_path, "JSON attention config");
  attn_cmd->add_option("-o,--output", attn.output,
                       "Output prefix; writes <prefix>.json (default $RSOFTMAX_OUTPUT_DIR/attn)");
  attn_cmd->add_option("-m,--mapping", attn.mapping, "softmax | sparsemax | rsoftmax | tsoftmax | all")
      ->check(CLI::IsMember({"softmax", "sparsemax", "rsoftmax", "tsoftmax", "all"}));
  attn_cmd->add_option("--rate-grad", attn.rate_grad, "rsoftmax threshold gradient: full | detached");
  attn.overrides = std::make_unique<Overrides>(attn_cmd);
  auto& aov = *attn.overrides;
  aov.add<std::size_t>("--seq-len", "seq_len", "Tokens per sequence");
  aov.add<std::size_t>("--d-model", "d_model", "Token dimension");
  aov.add<std::size_t>("--d-k", "d_k", "Projection dimension");
  aov.add<std::size_t>("--n-classes", "n_classes", "Number of classes");
  aov.add<std::size_t>("--n-train", "n_train", "Training sequences");
  aov.add<std::size_t>("--n-test", "n_test", "Test sequences");
  aov.add<std::size_t>("-e,--epochs", "epochs", "Training epochs");
  aov.add<std::size_t>("--batch-size", "batch_size", "Minibatch size");
  aov.add<double>("--learning-rate", "learning_rate", "Adam step size");
  aov.add<double>("--signal", "signal", "Scale of the class signature tokens");
  aov.add<double>("--target-r", "target_r", "Final rsoftmax sparsity rate");
  aov.add<double>("--warmup-fraction", "warmup_fraction", "Share of steps spent ramping the rate");
  aov.add<double>("--temperature", "temperature", "tsoftmax temperature");
  aov.add<std::uint64_t>("-s,--seed", "seed", "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (train_cmd->parsed()) return run_train(train);
    if (sweep_cmd->parsed()) return run_sweep_cmd(sweep);
    if (attn_cmd->parsed()) return run_attn(attn);
  } catch (const rsoftmax::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rsoftmax::InvalidParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
