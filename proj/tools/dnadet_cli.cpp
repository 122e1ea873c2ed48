// dnadet: command-line front end for dataset generation, training, evaluation
// and figures. Every command writes <out>/run.json; `dnadet replay` re-runs it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dnadet/eval/attacks.hpp"
#include "dnadet/eval/metrics.hpp"
#include "dnadet/eval/study.hpp"
#include "dnadet/synth_zoo/zoo.hpp"
#include "dnadet/trainer/trainer.hpp"
#include "dnadet/transforms/naturals.hpp"
#include "dnadet/transforms/pretrain_data.hpp"
#include "dnadet/viz/figures.hpp"

namespace fs = std::filesystem;
using namespace dnadet;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kDivergence = 5 };

/// Options shared by every command plus one override flag per config key.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string init;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> flags;
};

/// What a command produced, recorded in run.json.
struct RunRecord {
  std::vector<fs::path> artifacts;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json summary = nlohmann::json::object();
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  c.out = default_out;
  cmd->add_option("--config", c.config_path, "Experiment config (key = value lines)");
  cmd->add_option("--seed", c.seed, "Overrides rng_seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--init", c.init, "Initial checkpoint (sets init_checkpoint)");
  for (const auto& [key, value] : ExperimentConfig{}.to_map()) {
    (void)value;
    if (key == "rng_seed" || key == "init_checkpoint") continue;
    c.flags[key] = cmd->add_option("--" + key, c.values[key], "Config override")->group("Config overrides");
  }
}

fs::path absolute_or_empty(const std::string& p) { return p.empty() ? fs::path() : fs::absolute(p); }

/// Config file, then flags; paths are made absolute so the resolved text does
/// not depend on the working directory.
ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  for (const auto& [key, opt] : c.flags) {
    if (opt->count() > 0) cfg.set(key, c.values.at(key));
  }
  if (c.seed) cfg.rng_seed = *c.seed;
  if (!c.init.empty()) cfg.init_checkpoint = c.init;
  for (auto* p : {&cfg.train_manifest, &cfg.val_manifest, &cfg.test_manifest, &cfg.init_checkpoint}) {
    if (!p->empty()) *p = absolute_or_empty(*p).string();
  }
  cfg.validate();
  return cfg;
}

DatasetManifest require_manifest(const std::string& path, const LabelSpace& labels, const char* key) {
  if (path.empty()) throw ConfigError(std::string("config key '") + key + "' is required");
  return load_manifest(path, labels);
}

/// Progress lines: iteration, lr, losses, weights; epochs add val accuracy.
trainer::TrainOptions progress_options(const fs::path& out, const std::string& tag, int every) {
  trainer::TrainOptions opt;
  opt.out_dir = out;
  opt.tag = tag;
  opt.on_iteration = [every](const trainer::IterationRecord& r) {
    if (every <= 0 || r.iteration % every != 0) return;
    std::printf("it %lld lr %.3g l_con %.5g l_ce %.5g w1 %.4g w2 %.4g\n", r.iteration, r.lr, r.objective.l_con,
                r.objective.l_ce, r.objective.w_con, r.objective.w_ce);
    std::fflush(stdout);
  };
  opt.on_epoch = [](const trainer::EpochRecord& e) {
    std::printf("epoch %d it %lld l_con %.5g l_ce %.5g train_acc %.4f val_acc %.4f\n", e.epoch, e.iteration, e.l_con,
                e.l_ce, e.train_accuracy, e.val_accuracy);
    std::fflush(stdout);
  };
  return opt;
}

std::vector<fs::path> training_artifacts(const fs::path& out, const trainer::TrainResult& r) {
  std::vector<fs::path> a = {r.final_checkpoint, out / "history.csv", out / "iterations.csv"};
  for (const auto& e : r.history) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", e.epoch);
    a.push_back(out / name);
  }
  return a;
}

std::pair<trainer::TrainSet, trainer::TrainSet> load_train_val(const ExperimentConfig& cfg) {
  const auto train_file = require_manifest(cfg.train_manifest, cfg.labels, "train_manifest");
  std::optional<DatasetManifest> val_file;
  if (!cfg.val_manifest.empty()) val_file = load_manifest(cfg.val_manifest, cfg.labels);
  const auto [train, val] = trainer::train_val_split(train_file, cfg, val_file);
  return {trainer::load_set(train, cfg.labels, cfg.source), trainer::load_set(val, cfg.labels, cfg.source)};
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

nlohmann::json report_summary(const eval::EvalReport& r) {
  return {{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"total", r.total}};
}

void write_named_reports(const std::map<std::string, eval::EvalReport>& reports, const fs::path& out,
                         RunRecord& rec) {
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [name, r] : reports) {
    const auto rp = out / ("report_" + name + ".json");
    const auto cp = out / ("confusion_" + name + ".csv");
    eval::write_report(r, rp);
    eval::write_confusion_csv(r, cp);
    rec.artifacts.push_back(rp);
    rec.artifacts.push_back(cp);
    summary[name] = report_summary(r);
  }
  write_json(summary, out / "summary.json");
  rec.artifacts.push_back(out / "summary.json");
  rec.summary = summary;
}

// ---- commands ------------------------------------------------------------------

struct GenTransformsArgs {
  int per_class = 8;
  std::string naturals;
  int natural_count = 300;
  int natural_size = 128;
};

RunRecord gen_transforms(const ExperimentConfig& cfg, const fs::path& out, const GenTransformsArgs& a) {
  const auto bank = transforms::build_bank();
  RunRecord rec;
  DatasetManifest m;
  if (!a.naturals.empty()) {
    m = transforms::generate_pretrain_dataset(load_manifest(a.naturals, LabelSpace{}), bank, out, a.per_class,
                                              cfg.rng_seed);
  } else {
    const auto seed = stream_seed(cfg.rng_seed, "naturals");
    m = transforms::generate_pretrain_dataset(transforms::dead_leaves_images(a.natural_count, a.natural_size, seed),
                                              bank, out, a.per_class, cfg.rng_seed);
    rec.seeds["naturals"] = seed;
  }
  std::ofstream table(out / "bank.tsv");
  transforms::write_bank_table(bank, table);
  rec.artifacts = {out / "manifest.csv", out / "bank.tsv", out / "images"};
  rec.summary = {{"classes", bank.size()}, {"images", m.size()}};
  return rec;
}

struct GenZooArgs {
  int seeds = 3;
  int n = 100;
  int n_test = 0;
  int resolution = 64;
  std::vector<std::string> archs;
  double val_fraction = 0.1;
};

RunRecord gen_zoo(const ExperimentConfig& cfg, const fs::path& out, const GenZooArgs& a) {
  auto specs = zoo::builtin_specs(a.resolution);
  if (!a.archs.empty()) {
    std::vector<zoo::GeneratorSpec> chosen;
    for (const auto& name : a.archs) chosen.push_back(zoo::find_spec(specs, name));
    specs = chosen;
  }
  const auto m = zoo::make_zoo_dataset(specs, a.seeds, a.n, out, cfg.rng_seed, a.val_fraction, a.n_test);
  std::ofstream desc(out / "generators.txt");
  zoo::describe(specs, desc);
  RunRecord rec;
  rec.artifacts = {out / "manifest.csv", out / "generators.txt", out / "images"};
  rec.seeds["latent_base"] = cfg.rng_seed;
  rec.summary = {{"generators", specs.size() * a.seeds}, {"images", m.size()}};
  return rec;
}

RunRecord pretrain(ExperimentConfig cfg, const fs::path& out, int log_every) {
  const auto bank_labels = transforms::build_bank().label_space();
  if (cfg.labels.size() == 0) cfg.labels = bank_labels;
  const auto [train, val] = load_train_val(cfg);
  const auto r = trainer::pretrain_transforms(train, val, cfg.labels, cfg, progress_options(out, "PT", log_every));
  RunRecord rec;
  rec.artifacts = training_artifacts(out, r);
  rec.summary = {{"selected_epoch", r.selected_epoch}, {"final_val_accuracy", r.history.back().val_accuracy}};
  return rec;
}

RunRecord train(const ExperimentConfig& cfg, const fs::path& out, int log_every) {
  auto model = trainer::init_architecture_model(cfg);
  const auto [train, val] = load_train_val(cfg);
  const auto tag = trainer::ablation_tag(cfg);
  const auto r = trainer::run_step(std::move(model), train, val, cfg, progress_options(out, tag, log_every));
  RunRecord rec;
  rec.artifacts = training_artifacts(out, r);
  rec.summary = {{"tag", tag}, {"selected_epoch", r.selected_epoch}};
  if (!cfg.test_manifest.empty()) {
    auto m = r.model;
    const auto report = eval::evaluate(m, load_manifest(cfg.test_manifest, cfg.labels), cfg.labels, cfg.source,
                                       sampler::PatchPlan::from_config(cfg), "test");
    eval::write_report(report, out / "report_test.json");
    rec.artifacts.push_back(out / "report_test.json");
    rec.summary["test"] = report_summary(report);
  }
  return rec;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string features;
};

model::ModelState<float> checked_model(const std::string& path, ExperimentConfig& cfg) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  auto m = model::load_checkpoint<float>(path);
  if (cfg.labels.size() == 0) cfg.labels = m.labels;
  return m;
}

RunRecord evaluate(ExperimentConfig cfg, const fs::path& out, const EvalArgs& a) {
  auto m = checked_model(a.checkpoint, cfg);
  const auto manifest =
      require_manifest(a.manifest.empty() ? cfg.test_manifest : a.manifest, cfg.labels, "test_manifest");
  const auto plan = sampler::PatchPlan::from_config(cfg);
  const auto report = eval::evaluate(m, manifest, cfg.labels, cfg.source, plan, a.split);
  RunRecord rec;
  eval::write_report(report, out / "report.json");
  eval::write_confusion_csv(report, out / "confusion.csv");
  rec.artifacts = {out / "report.json", out / "confusion.csv"};
  if (!a.features.empty()) {
    const fs::path fp = fs::path(a.features).is_absolute() ? fs::path(a.features) : out / a.features;
    viz::write_feature_table(viz::extract_features(m, manifest, cfg.source, plan), fp);
    rec.artifacts.push_back(fp);
  }
  rec.summary = report_summary(report);
  return rec;
}

RunRecord cross_test(ExperimentConfig cfg, const fs::path& out, const EvalArgs& a) {
  auto m = checked_model(a.checkpoint, cfg);
  const auto zoo_manifest =
      require_manifest(a.manifest.empty() ? cfg.test_manifest : a.manifest, cfg.labels, "test_manifest");
  const auto suite = eval::zoo_suite(zoo_manifest);
  if (suite.empty()) throw ManifestError("cross-test: manifest has no closed-set or cross-seed records");
  RunRecord rec;
  write_named_reports(
      eval::cross_test_suite(m, suite, cfg.labels, cfg.source, sampler::PatchPlan::from_config(cfg)), out, rec);
  return rec;
}

struct StudyArgs {
  std::string task = "architecture";
  int position = 1;
  int resolution = 64;
  int train_per_class = 1000;
  int test_per_class = 200;
  std::string weight_spec = "ProGAN";
  std::optional<std::uint64_t> data_seed;
};

RunRecord patch_study(ExperimentConfig cfg, const fs::path& out, const StudyArgs& a, int log_every) {
  const auto task = eval::parse_task(a.task);
  if (cfg.pretrain && cfg.init_checkpoint.empty()) {
    throw ConfigError("config key 'init_checkpoint' is required when pretrain = true");
  }
  if (!cfg.pretrain) cfg.init_checkpoint.clear();
  eval::StudyConfig sc;
  sc.train = cfg;
  sc.resolution = a.resolution;
  sc.train_per_class = a.train_per_class;
  sc.test_per_class = a.test_per_class;
  sc.weight_spec = a.weight_spec;
  sc.data_seed = a.data_seed.value_or(cfg.rng_seed);
  const auto r = eval::patch_position_study(task, a.position, sc, progress_options(out / "train", "", log_every));
  const auto report = eval::to_report(r);
  eval::write_report(report, out / "report.json");
  RunRecord rec;
  rec.artifacts = {out / "report.json", out / "train" / "final.ckpt", out / "train" / "history.csv"};
  rec.seeds["data_seed"] = sc.data_seed;
  rec.summary = {{"on_position", r.on_position()}, {"mean_off_position", r.mean_off_position()}, {"min", r.min()}};
  return rec;
}

struct AttackArgs {
  EvalArgs eval;
  std::vector<std::string> attacks = {"none", "noise", "blur", "crop", "jpeg", "relight", "combination"};
};

RunRecord attack_eval(ExperimentConfig cfg, const fs::path& out, const AttackArgs& a) {
  auto m = checked_model(a.eval.checkpoint, cfg);
  const auto manifest =
      require_manifest(a.eval.manifest.empty() ? cfg.test_manifest : a.eval.manifest, cfg.labels, "test_manifest");
  std::vector<eval::AttackKind> kinds;
  for (const auto& s : a.attacks) kinds.push_back(eval::parse_attack(s));
  const auto seed = stream_seed(cfg.rng_seed, "attacks");
  RunRecord rec;
  write_named_reports(
      eval::robustness_eval(m, manifest, cfg.labels, kinds, seed, cfg.source, sampler::PatchPlan::from_config(cfg)),
      out, rec);
  rec.seeds["attacks"] = seed;
  return rec;
}

struct VizArgs {
  std::string kind;
  std::vector<std::string> inputs;
  std::string file;
  int max_images = 8;
  int layer = 4;
  int resize = 128;
};

RunRecord visualize(const ExperimentConfig& cfg, const fs::path& out, const VizArgs& a) {
  viz::FigureRequest req;
  req.kind = viz::parse_figure_kind(a.kind);
  for (const auto& p : a.inputs) req.inputs.push_back(fs::absolute(p));
  req.out_path = out / (a.file.empty() ? a.kind + ".png" : a.file);
  req.seed = cfg.rng_seed;
  req.max_images = a.max_images;
  req.layer = a.layer;
  req.resize_size = a.resize;
  const auto s = viz::emit_figure(req);
  RunRecord rec;
  rec.artifacts = {s.path};
  rec.seeds["tsne"] = cfg.rng_seed;
  rec.summary = {{"width", s.width}, {"height", s.height}, {"series_points", s.series_points}};
  return rec;
}

// ---- run manifest ----------------------------------------------------------------

void write_run_manifest(const std::string& command, const std::vector<std::string>& args, const ExperimentConfig& cfg,
                        const fs::path& out, const RunRecord& rec) {
  nlohmann::json j;
  j["command"] = command;
  j["args"] = args;
  j["cwd"] = fs::current_path().string();
  j["code_version"] = DNADET_VERSION;
  j["config_hash"] = std::to_string(cfg.hash());
  j["config"] = cfg.to_text();
  auto seeds = rec.seeds;
  seeds["rng_seed"] = cfg.rng_seed;
  j["seeds"] = seeds;
  std::vector<std::string> artifacts;
  for (const auto& p : rec.artifacts) artifacts.push_back(p.string());
  j["artifacts"] = artifacts;
  j["summary"] = rec.summary;
  write_json(j, out / "run.json");
}

/// Rebuilds the argument list of a recorded run against a new output directory,
/// reading the resolved config instead of the original one.
std::vector<std::string> replay_args(const nlohmann::json& run, const fs::path& out) {
  fs::create_directories(out);
  const auto cfg_path = out / "config.resolved";
  std::ofstream(cfg_path) << run.at("config").get<std::string>();
  std::vector<std::string> args = {run.at("command").get<std::string>()};
  const auto old = run.at("args").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < old.size(); ++i) {
    const auto& t = old[i];
    if (t == "--config" || t == "--out") {
      ++i;
    } else if (t.rfind("--config=", 0) == 0 || t.rfind("--out=", 0) == 0) {
    } else {
      args.push_back(t);
    }
  }
  args.insert(args.end(), {"--config", cfg_path.string(), "--out", out.string()});
  return args;
}

int run(std::vector<std::string> args);

int run(std::vector<std::string> args) {
  CLI::App app{"Generator architecture attribution: datasets, training, evaluation, figures", "dnadet"};
  app.set_version_flag("--version", DNADET_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  int log_every = 10;
  app.add_option("--log-every", log_every, "Print progress every N iterations (0: epochs only)");

  std::map<std::string, Common> common;
  std::map<std::string, CLI::App*> cmds;
  auto add = [&](const std::string& name, const std::string& help, const std::string& default_out) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common[name], default_out);
    cmds[name] = cmd;
    return cmd;
  };

  GenTransformsArgs gt;
  auto* c = add("gen-transforms", "Write the 170-class transform dataset", "transforms");
  c->add_option("--per-class", gt.per_class, "Images per transform class")->capture_default_str();
  c->add_option("--naturals", gt.naturals, "Manifest of natural images (default: synthetic dead leaves)");
  c->add_option("--natural-count", gt.natural_count, "Synthetic naturals to draw")->capture_default_str();
  c->add_option("--natural-size", gt.natural_size, "Side of synthetic naturals")->capture_default_str();

  GenZooArgs gz;
  c = add("gen-zoo", "Sample the random-weight generator zoo", "zoo");
  c->add_option("--seeds", gz.seeds, "Weight seeds per architecture")->capture_default_str();
  c->add_option("--n", gz.n, "Images per generator")->capture_default_str();
  c->add_option("--n-test", gz.n_test, "Images per seed >= 1 generator (0: same as --n)")->capture_default_str();
  c->add_option("--resolution", gz.resolution, "Output side (64 or 128)")->capture_default_str();
  c->add_option("--archs", gz.archs, "Architectures (default: all four)");
  c->add_option("--val-fraction", gz.val_fraction, "Seed-0 hold-out fraction")->capture_default_str();

  add("pretrain", "Step 1: transform classification over the bank", "pretrain");
  add("train", "Step 2: architecture attribution", "train");

  EvalArgs ev;
  c = add("eval", "Full-image evaluation of a checkpoint", "eval");
  c->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  c->add_option("--manifest", ev.manifest, "Manifest to evaluate (default: test_manifest)");
  c->add_option("--split", ev.split, "Split name stored in the report")->capture_default_str();
  c->add_option("--features", ev.features, "Also write pooled encoder features to this CSV");

  EvalArgs xt;
  c = add("cross-test", "Closed-set and cross-seed reports on a zoo manifest", "cross_test");
  c->add_option("--checkpoint", xt.checkpoint, "Model checkpoint")->required();
  c->add_option("--manifest", xt.manifest, "Zoo manifest (default: test_manifest)");

  StudyArgs st;
  c = add("patch-study", "Train on one grid position, test on all 16", "patch_study");
  c->add_option("--task", st.task, "architecture | weight")->capture_default_str();
  c->add_option("--train-position", st.position, "Grid position 1..16")->capture_default_str();
  c->add_option("--resolution", st.resolution, "Zoo image side")->capture_default_str();
  c->add_option("--train-per-class", st.train_per_class, "Training images per class")->capture_default_str();
  c->add_option("--test-per-class", st.test_per_class, "Test images per class")->capture_default_str();
  c->add_option("--weight-spec", st.weight_spec, "Architecture of the weight task")->capture_default_str();
  c->add_option("--data-seed", st.data_seed, "Latent seed of the study images (default: rng_seed)");

  AttackArgs at;
  c = add("attack-eval", "Per-attack evaluation", "attack_eval");
  c->add_option("--checkpoint", at.eval.checkpoint, "Model checkpoint")->required();
  c->add_option("--manifest", at.eval.manifest, "Manifest to attack (default: test_manifest)");
  c->add_option("--attacks", at.attacks, "Attack kinds")->capture_default_str();

  VizArgs vz;
  c = add("visualize", "Render a figure from saved artifacts", "figures");
  c->add_option("--kind", vz.kind, "gradcam_panel | tsne | curves | confusion_heatmap | position_grid")->required();
  c->add_option("--input", vz.inputs, "Input artifact(s), in the order the kind expects")->required();
  c->add_option("--file", vz.file, "Image name inside --out (default: <kind>.png)");
  c->add_option("--max-images", vz.max_images, "gradcam_panel columns")->capture_default_str();
  c->add_option("--layer", vz.layer, "gradcam_panel encoder block")->capture_default_str();
  c->add_option("--resize", vz.resize, "gradcam_panel view size")->capture_default_str();

  std::string run_json, replay_out;
  auto* rp = app.add_subcommand("replay", "Re-run a recorded run.json into a new directory");
  rp->add_option("run", run_json, "run.json of an earlier command")->required();
  rp->add_option("--out", replay_out, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  }

  if (rp->parsed()) {
    std::ifstream in(run_json);
    if (!in) throw IoError("cannot read run manifest: " + run_json);
    const auto j = nlohmann::json::parse(in);
    const auto out = fs::absolute(replay_out);
    auto next = replay_args(j, out);
    fs::current_path(j.at("cwd").get<std::string>());
    return run(next);
  }

  for (auto& [name, cmd] : cmds) {
    if (!cmd->parsed()) continue;
    const auto& co = common.at(name);
    const auto cfg = resolve_config(co);
    const fs::path out = fs::absolute(co.out);
    fs::create_directories(out);
    RunRecord rec;
    if (name == "gen-transforms") rec = gen_transforms(cfg, out, gt);
    else if (name == "gen-zoo") rec = gen_zoo(cfg, out, gz);
    else if (name == "pretrain") rec = pretrain(cfg, out, log_every);
    else if (name == "train") rec = train(cfg, out, log_every);
    else if (name == "eval") rec = evaluate(cfg, out, ev);
    else if (name == "cross-test") rec = cross_test(cfg, out, xt);
    else if (name == "patch-study") rec = patch_study(cfg, out, st, log_every);
    else if (name == "attack-eval") rec = attack_eval(cfg, out, at);
    else if (name == "visualize") rec = visualize(cfg, out, vz);
    std::vector<std::string> rest;
    bool seen = false;
    for (const auto& t : args) {
      if (!seen && t == name) seen = true;
      else rest.push_back(t);
    }
    write_run_manifest(name, rest, cfg, out, rec);
    std::printf("%s: wrote %s\n", name.c_str(), (out / "run.json").string().c_str());
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const CLI::ParseError& e) {
    std::cerr << "dnadet: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "dnadet: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const SchemaError& e) {
    std::cerr << "dnadet: schema error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "dnadet: missing file: " << e.what() << '\n';
    return kIo;
  } catch (const ManifestError& e) {
    std::cerr << "dnadet: manifest error: " << e.what() << '\n';
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "dnadet: divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "dnadet: error: " << e.what() << '\n';
    return kFailure;
  }
}
