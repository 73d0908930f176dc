#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "ctin/dataio.hpp"
#include "ctin/errors.hpp"
#include "ctin/gradcheck_suite.hpp"
#include "ctin/metrics.hpp"
#include "ctin/model.hpp"
#include "ctin/reportgen.hpp"
#include "ctin/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctin;

namespace {

json read_json(const fs::path& path, bool is_config) {
  std::ifstream in(path);
  if (!in) {
    const std::string msg = "cannot open " + path.string();
    if (is_config) throw ConfigError(msg);
    throw DataError(msg);
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    const std::string msg = path.string() + ": " + e.what();
    if (is_config) throw ConfigError(msg);
    throw FormatError(msg);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_filename(out.stem().string() + suffix);
  return p;
}

std::vector<NamedSequence> load_nonempty(const fs::path& dir) {
  auto data = load_dataset(dir);
  if (data.empty()) throw DataError("no sequences in " + dir.string());
  return data;
}

// Sequences named in a checkpoint's test split, or all of them.
std::vector<const NamedSequence*> select(const std::vector<NamedSequence>& data,
                                         const std::optional<json>& split) {
  std::vector<const NamedSequence*> out;
  if (!split) {
    for (const auto& ns : data) out.push_back(&ns);
    return out;
  }
  std::set<std::string> wanted;
  for (const auto& n : split->at("test")) wanted.insert(n.get<std::string>());
  for (const auto& ns : data) {
    if (wanted.count(ns.name)) out.push_back(&ns);
  }
  if (out.size() != wanted.size()) {
    throw DataError("data directory lacks some test sequences named in the checkpoint");
  }
  return out;
}

std::string dataset_name(const std::vector<NamedSequence>& data, const std::string& override_name) {
  return override_name.empty() ? data.front().seq.meta.dataset_kind : override_name;
}

MetricConfig metric_config(double t_rte_s, double d_rte_m, const std::string& norm) {
  MetricConfig cfg;
  cfg.t_rte_seconds = t_rte_s;
  cfg.d_rte_meters = d_rte_m;
  if (norm == "squared") {
    cfg.norm = RmseNorm::kSquared;
  } else if (norm == "unsquared") {
    cfg.norm = RmseNorm::kUnsquared;
  } else {
    throw ConfigError("unknown norm '" + norm + "'");
  }
  return cfg;
}

void print_summary(const MetricReport& r) {
  const SequenceMetrics a = r.aggregate();
  std::cout << r.method << " on " << r.sequences.size() << " sequences: ate " << a.ate
            << " t_rte " << a.t_rte << " d_rte " << a.d_rte << " pde " << a.pde << " vel_mse "
            << a.vel_mse << "\n";
}

int cmd_gen(const fs::path& spec_path, const fs::path& out_dir) {
  const auto specs = generation_plan_from_json(read_json(spec_path, true));
  fs::create_directories(out_dir);
  std::set<std::string> names;
  for (const auto& s : specs) {
    if (!names.insert(s.subject).second) throw ConfigError("duplicate subject " + s.subject);
  }
  for (const auto& s : specs) save_sequence(gen_synthetic(s), out_dir / (s.subject + ".csv"));
  std::cout << "wrote " << specs.size() << " sequences to " << out_dir << "\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& model_cfg_path,
              const fs::path& train_cfg_path, const fs::path& out) {
  const ModelConfig mc = model_config_from_json(read_json(model_cfg_path, true));
  const TrainConfig tc = train_config_from_json(read_json(train_cfg_path, true));
  const auto data = load_nonempty(data_dir);
  const DatasetSplit split = split_dataset(data.size(), tc.split, tc.rng_seed);
  std::vector<const ImuSequence*> train_seqs, val_seqs;
  for (auto i : split.train) train_seqs.push_back(&data[i].seq);
  for (auto i : split.validation) val_seqs.push_back(&data[i].seq);

  TrainHooks hooks;
  hooks.on_epoch = [](int epoch, const EpochRecord& r) {
    std::cerr << "epoch " << epoch << " train " << r.train_loss << " val " << r.val_loss << " ("
              << r.wall_time_s << " s)\n";
  };
  const TrainResult res = train(mc, tc, train_seqs, val_seqs, hooks);

  json ckpt = checkpoint_json(*res.model);
  ckpt["loss_parameters"] = res.loss_params.to_json().at("parameters");
  ckpt["train_config"] = to_json(tc);
  auto names = [&](const std::vector<std::size_t>& idx) {
    json arr = json::array();
    for (auto i : idx) arr.push_back(data[i].name);
    return arr;
  };
  ckpt["split"] = {{"train", names(split.train)},
                   {"validation", names(split.validation)},
                   {"test", names(split.test)}};
  write_json(out, ckpt);
  write_json(sibling(out, ".history.json"), to_json(res.history));
  write_json(sibling(out, ".timing.json"), to_json(res.history, true));
  std::cout << "best epoch " << res.history.best_epoch << " val " << res.history.best_val_loss()
            << " (" << res.history.stop_reason << ")\n";
  return 0;
}

int cmd_eval(const fs::path& data_dir, const fs::path& ckpt_path, const fs::path& out,
             const std::string& cdf_dir, bool all_sequences, const MetricConfig& metric_cfg,
             int eval_step, const std::string& dataset) {
  const json ckpt = read_json(ckpt_path, false);
  CtinModel model = model_from_checkpoint(ckpt);
  const auto data = load_nonempty(data_dir);
  std::optional<json> split;
  if (!all_sequences && ckpt.contains("split")) split = ckpt.at("split");
  const auto seqs = select(data, split);
  if (seqs.empty()) throw DataError("no sequences to evaluate");
  MetricReport report = evaluate(model, seqs, metric_cfg, static_cast<std::size_t>(eval_step));
  report.dataset = dataset_name(data, dataset);
  write_json(out, to_json(report));
  if (!cdf_dir.empty()) write_cdf_csvs(report, cdf_dir);
  print_summary(report);
  return 0;
}

int cmd_baseline(const fs::path& data_dir, const std::string& method, const fs::path& out,
                 const std::vector<double>& gyro_bias, const std::string& orientation,
                 const std::string& split_from, double stride, const MetricConfig& metric_cfg,
                 const std::string& dataset, const std::string& cdf_dir) {
  BaselineOptions opts;
  if (!gyro_bias.empty()) {
    if (gyro_bias.size() != 3) throw ConfigError("--gyro-bias takes three values");
    opts.gyro_bias = Vec3(gyro_bias[0], gyro_bias[1], gyro_bias[2]);
  }
  if (!orientation.empty()) opts.orientation = parse_orientation_source(orientation);
  opts.stride_m = stride;
  const auto data = load_nonempty(data_dir);
  std::optional<json> split;
  if (!split_from.empty()) split = read_json(split_from, false).at("split");
  const auto seqs = select(data, split);
  if (seqs.empty()) throw DataError("no sequences to evaluate");
  MetricReport report = evaluate_baseline(seqs, parse_baseline_method(method), opts, metric_cfg);
  report.dataset = dataset_name(data, dataset);
  write_json(out, to_json(report));
  if (!cdf_dir.empty()) write_cdf_csvs(report, cdf_dir);
  print_summary(report);
  return 0;
}

int cmd_gradcheck(int shapes, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& c : run_gradcheck_suite(shapes, seed)) {
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << " max_rel_error " << c.max_rel_error
              << " (raw " << c.max_raw_rel_error << ") checked " << c.checked << " excluded " << c.excluded << "\n";
    ok = ok && c.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (ok ? "all passed" : "failures") << " in " << secs << " s\n";
  return ok ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& inputs, const fs::path& out,
               const std::string& ours, const std::string& csv) {
  std::vector<MetricReport> reports;
  for (const auto& path : inputs) {
    try {
      reports.push_back(metric_report_from_json(read_json(path, false)));
    } catch (const json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  const ComparisonTable table = build_table(reports, ours);
  write_text(out, table.to_markdown());
  if (!csv.empty()) write_text(csv, table.to_csv());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inertial odometry with a contextual transformer"};
  app.require_subcommand(1);

  std::string spec, out, data, model_cfg, train_cfg, ckpt, cdf_dir, method, orientation,
      split_from, dataset, norm = "squared", ours = "ctin", csv;
  std::vector<std::string> inputs;
  std::vector<double> gyro_bias;
  double t_rte = 60.0, d_rte = 1.0, stride = 0.67;
  int eval_step = 0, shapes = 10;
  std::uint64_t seed = 0;
  bool all_sequences = false;

  auto* gen = app.add_subcommand("gen", "synthesize IMU sequences");
  gen->add_option("--spec", spec, "generation spec JSON")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", data, "sequence directory")->required();
  tr->add_option("--model-config", model_cfg, "model config JSON")->required();
  tr->add_option("--train-config", train_cfg, "training config JSON")->required();
  tr->add_option("--out", out, "checkpoint path")->required();

  auto add_metric_opts = [&](CLI::App* c) {
    c->add_option("--t-rte", t_rte, "T-RTE interval in seconds");
    c->add_option("--d-rte", d_rte, "D-RTE distance in meters");
    c->add_option("--norm", norm, "squared or unsquared RMSE");
    c->add_option("--dataset", dataset, "dataset label in the report");
    c->add_option("--cdf-dir", cdf_dir, "directory for per-metric CDF CSVs");
  };

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--data", data, "sequence directory")->required();
  ev->add_option("--ckpt", ckpt, "checkpoint JSON")->required();
  ev->add_option("--out", out, "report JSON")->required();
  ev->add_option("--eval-step", eval_step, "window step (0: non-overlapping)");
  ev->add_flag("--all-sequences", all_sequences, "ignore the checkpoint's test split");
  add_metric_opts(ev);

  auto* bl = app.add_subcommand("baseline", "run a non-learned baseline");
  bl->add_option("--data", data, "sequence directory")->required();
  bl->add_option("--method", method, "sins or pdr")->required();
  bl->add_option("--out", out, "report JSON")->required();
  bl->add_option("--gyro-bias", gyro_bias, "gyro bias added before integration (x y z)")
      ->expected(3);
  bl->add_option("--orientation", orientation, "gt, device or imu");
  bl->add_option("--split-from", split_from, "restrict to a checkpoint's test split");
  bl->add_option("--stride", stride, "PDR stride length in meters");
  add_metric_opts(bl);

  auto* gc = app.add_subcommand("gradcheck", "run the autodiff oracle suite");
  gc->add_option("--shapes", shapes, "random shapes per case");
  gc->add_option("--seed", seed, "suite seed");

  auto* rp = app.add_subcommand("report", "build a comparison table");
  rp->add_option("--inputs", inputs, "report JSON files")->required();
  rp->add_option("--out", out, "markdown table")->required();
  rp->add_option("--ours", ours, "method the improvement columns refer to");
  rp->add_option("--csv", csv, "optional CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*gen) return cmd_gen(spec, out);
    if (*tr) return cmd_train(data, model_cfg, train_cfg, out);
    const MetricConfig mcfg = metric_config(t_rte, d_rte, norm);
    if (*ev) return cmd_eval(data, ckpt, out, cdf_dir, all_sequences, mcfg, eval_step, dataset);
    if (*bl) {
      return cmd_baseline(data, method, out, gyro_bias, orientation, split_from, stride, mcfg,
                          dataset, cdf_dir);
    }
    if (*gc) return cmd_gradcheck(shapes, seed);
    if (*rp) return cmd_report(inputs, out, ours, csv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return 0;
}
