#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcl/baselines.hpp"
#include "tcl/checkpoint.hpp"
#include "tcl/evaluation.hpp"
#include "tcl/ingest.hpp"
#include "tcl/objective.hpp"
#include "tcl/synthetic.hpp"

namespace tcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataOptions {
  std::string path;
  std::string delimiter = "auto";
  bool skip_header = false;
  bool bipartite = false;
  std::size_t source_col = 0;
  std::size_t target_col = 1;
  std::size_t time_col = 2;
  std::string split = "60/20/20";
};

struct ModelOptions {
  int depth = 5;
  int dim = 64;
  int heads = 16;
  int blocks = 1;
  int max_seq_len = 0;
  double dropout = 0.6;
  bool full_width_heads = false;
  std::vector<std::string> ablation;
};

struct TrainOptions {
  double lr = 0.0005;
  int batch = 512;
  int epochs = 20;
  int negatives = 5;
  double clip = 5.0;
  std::uint64_t seed = 0;
  std::string checkpoint = "tcl-model.json";
  std::string loss_out;
  bool skip_validation = false;
};

struct EvalOptionsCli {
  std::string checkpoint;
  std::string metrics_out;
  bool no_cache = false;
  bool baselines = false;
};

struct StatsOptions {
  double units_per_day = 86400.0;
};

struct SynthOptions {
  std::string kind = "planted";
  std::uint64_t seed = 0;
  std::size_t events = 1000;
  int nodes = 50;
  std::string out;
};

void add_data_flags(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Interaction file (source target timestamp per line)")->required();
  cmd->add_option("--split", d.split, "Chronological train/val/test split")->capture_default_str();
  cmd->add_option("--delimiter", d.delimiter, "auto, tab, comma, space or a single character")
      ->capture_default_str();
  cmd->add_flag("--skip-header", d.skip_header, "Ignore the first line");
  cmd->add_flag("--bipartite", d.bipartite, "Sources and targets are disjoint node sets");
  cmd->add_option("--source-col", d.source_col)->capture_default_str();
  cmd->add_option("--target-col", d.target_col)->capture_default_str();
  cmd->add_option("--time-col", d.time_col)->capture_default_str();
}

void add_model_flags(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--depth", m.depth, "Sub-graph depth k")->capture_default_str();
  cmd->add_option("--dim", m.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--blocks", m.blocks, "Graph transformer blocks")->capture_default_str();
  cmd->add_option("--max-seq-len", m.max_seq_len, "Sequence truncation, 0 for the full tree")
      ->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "Input dropout rate")->capture_default_str();
  cmd->add_flag("--full-width-heads", m.full_width_heads, "Per-head d x d projections");
  cmd->add_option("--ablation", m.ablation, "Disable a component: no-te, no-de, no-ca")
      ->check(CLI::IsMember({"no-te", "no-de", "no-ca"}));
}

ColumnSpec column_spec(const DataOptions& d) {
  ColumnSpec spec;
  spec.source = d.source_col;
  spec.target = d.target_col;
  spec.timestamp = d.time_col;
  spec.skip_header = d.skip_header;
  spec.bipartite = d.bipartite;
  if (d.delimiter == "auto") {
    spec.delimiter = 0;
  } else if (d.delimiter == "tab") {
    spec.delimiter = '\t';
  } else if (d.delimiter == "comma") {
    spec.delimiter = ',';
  } else if (d.delimiter == "space") {
    spec.delimiter = ' ';
  } else if (d.delimiter.size() == 1) {
    spec.delimiter = d.delimiter[0];
  } else {
    throw std::invalid_argument("unsupported --delimiter '" + d.delimiter + "'");
  }
  return spec;
}

InteractionLog load_data(const DataOptions& d) {
  if (!fs::exists(d.path)) throw std::runtime_error("data file not found: " + d.path);
  return load_interactions(d.path, column_spec(d));
}

EncoderConfig encoder_config(const ModelOptions& m, std::uint64_t seed) {
  EncoderConfig c;
  c.depth = m.depth;
  c.dim = m.dim;
  c.heads = m.heads;
  c.blocks = m.blocks;
  c.max_seq_len = m.max_seq_len;
  c.dropout = m.dropout;
  c.full_width_heads = m.full_width_heads;
  c.seed = seed;
  for (const auto& a : m.ablation) {
    if (a == "no-te") c.ablation.no_te = true;
    if (a == "no-de") c.ablation.no_de = true;
    if (a == "no-ca") c.ablation.no_ca = true;
  }
  c.validate();
  return c;
}

json config_json(const EncoderConfig& c) {
  json ablation = json::array();
  if (c.ablation.no_te) ablation.push_back("no-te");
  if (c.ablation.no_de) ablation.push_back("no-de");
  if (c.ablation.no_ca) ablation.push_back("no-ca");
  return {{"dim", c.dim},
          {"heads", c.heads},
          {"blocks", c.blocks},
          {"depth", c.depth},
          {"max_seq_len", c.depth_config().max_seq_len},
          {"dropout", c.dropout},
          {"full_width_heads", c.full_width_heads},
          {"ablation", ablation}};
}

fs::path epoch_checkpoint_path(const fs::path& final_path, int epoch) {
  std::ostringstream suffix;
  suffix << ".epoch" << std::setw(3) << std::setfill('0') << epoch;
  fs::path p = final_path;
  const auto ext = p.extension().string();
  p.replace_extension();
  return fs::path(p.string() + suffix.str() + (ext.empty() ? ".json" : ext));
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_train(const DataOptions& data, const ModelOptions& model, const TrainOptions& opts, std::ostream& out) {
  const InteractionLog log = load_data(data);
  const Splits splits = chronological_split(log, SplitSpec::parse(data.split));
  const EncoderConfig enc = encoder_config(model, opts.seed);
  ModelParams params(enc, log.vocabulary().table_size());

  TrainConfig tc;
  tc.lr = opts.lr;
  tc.batch = opts.batch;
  tc.epochs = opts.epochs;
  tc.negatives = opts.negatives;
  tc.clip_norm = opts.clip;
  tc.seed = opts.seed;
  tc.validate();

  const fs::path ckpt_path = opts.checkpoint;
  const fs::path loss_path = opts.loss_out.empty() ? fs::path(opts.checkpoint + ".loss.jsonl") : fs::path(opts.loss_out);
  ensure_parent(ckpt_path);
  ensure_parent(loss_path);
  std::ofstream loss_file(loss_path, std::ios::trunc);
  if (!loss_file) throw std::runtime_error("cannot write loss trace " + loss_path.string());

  out << "train: " << splits.train.size() << " events, val " << splits.val.size() << ", test " << splits.test.size()
      << ", " << log.vocabulary().node_count() << " nodes\n";

  TrainHooks hooks;
  hooks.on_step = [&](const LossRecord& r) {
    loss_file << json{{"epoch", r.epoch}, {"step", r.step}, {"loss", r.loss}}.dump() << '\n';
  };
  hooks.on_epoch_end = [&](int epoch, const Tdig& graph, const TrainResult& so_far) {
    loss_file.flush();
    save_checkpoint(epoch_checkpoint_path(ckpt_path, epoch), make_checkpoint(params, log.vocabulary()));
    out << "epoch " << epoch << " loss " << so_far.epoch_mean_loss.back();
    if (!opts.skip_validation && !splits.val.empty()) {
      const auto targets = log.target_vocab();
      Evaluator evaluator(params, graph, std::vector<NodeId>(targets.begin(), targets.end()));
      const Metrics m = evaluator.evaluate(splits.val.events());
      out << " val_mr " << m.mean_rank << " val_hit_at_10 " << m.hit_at_10;
    }
    out << '\n' << std::flush;
  };
  const TrainResult result = train(splits.train, params, tc, hooks);
  save_checkpoint(ckpt_path, make_checkpoint(params, log.vocabulary()));
  out << "optimizer steps " << result.optimizer_steps << ", checkpoint " << ckpt_path.string() << '\n';
  return 0;
}

int cmd_eval(DataOptions data, const EvalOptionsCli& opts, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  data.bipartite = ckpt.bipartite;
  const InteractionLog log = load_data(data);
  if (log.vocabulary().names() != ckpt.vocabulary) {
    throw CheckpointError("checkpoint vocabulary (" + std::to_string(ckpt.vocabulary.size()) +
                          " nodes) does not match the data (" + std::to_string(log.vocabulary().node_count()) +
                          " nodes)");
  }
  ModelParams params = model_from_checkpoint(ckpt);
  const Splits splits = chronological_split(log, SplitSpec::parse(data.split));
  const InteractionLog history = splits.train.concat(splits.val);
  const Metrics m = evaluate(params, history, splits.test, EvalOptions{!opts.no_cache});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json record = {{"mr", m.mean_rank},
                 {"hit_at_10", m.hit_at_10},
                 {"n_events", m.n_events},
                 {"config", config_json(ckpt.config)},
                 {"seed", ckpt.config.seed},
                 {"wall_time_s", wall}};
  record["config"]["data"] = data.path;
  record["config"]["split"] = data.split;
  record["config"]["checkpoint"] = opts.checkpoint;
  if (opts.baselines) {
    const Metrics global = popularity_baseline(history, splits.test, PopularityKind::global);
    const Metrics personal = popularity_baseline(history, splits.test, PopularityKind::per_source);
    record["baselines"] = {{"popularity", {{"mr", global.mean_rank}, {"hit_at_10", global.hit_at_10}}},
                           {"user_popularity", {{"mr", personal.mean_rank}, {"hit_at_10", personal.hit_at_10}}}};
  }
  const std::string text = record.dump(2);
  if (opts.metrics_out.empty()) {
    out << text << '\n';
  } else {
    ensure_parent(opts.metrics_out);
    std::ofstream file(opts.metrics_out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write metrics " + opts.metrics_out);
    file << text << '\n';
    out << "MR " << m.mean_rank << "  Hit@10 " << m.hit_at_10 << "  (" << m.n_events << " events) -> "
        << opts.metrics_out << '\n';
  }
  return 0;
}

int cmd_stats(const DataOptions& data, const StatsOptions& opts, std::ostream& out) {
  const InteractionLog log = load_data(data);
  const Splits splits = chronological_split(log, SplitSpec::parse(data.split));
  const DatasetStats s = dataset_stats(splits.train, splits.test, log, opts.units_per_day);
  out << std::left << std::setw(22) << "dataset" << fs::path(data.path).filename().string() << '\n'
      << std::setw(22) << "#sources" << s.n_sources << '\n'
      << std::setw(22) << "#targets" << s.n_targets << '\n'
      << std::setw(22) << "#interactions" << s.n_interactions << '\n'
      << std::setw(22) << "repetition density" << std::fixed << std::setprecision(4) << s.repetition_density << '\n'
      << std::setw(22) << "duration (days)" << std::setprecision(1) << s.duration_days << '\n';
  return 0;
}

int cmd_synth(const SynthOptions& opts, std::ostream& out) {
  InteractionLog log;
  if (opts.kind == "planted") {
    PlantedConfig c;
    c.seed = opts.seed;
    log = planted_log(c);
  } else if (opts.kind == "drift") {
    DriftConfig c;
    c.seed = opts.seed;
    log = cross_correlated_log(c);
  } else {
    std::mt19937_64 rng(opts.seed);
    log = random_log(rng, opts.events, opts.nodes);
  }
  ensure_parent(opts.out);
  std::ofstream file(opts.out, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + opts.out);
  file << std::setprecision(17);
  const Vocabulary& v = log.vocabulary();
  for (const auto& ev : log.events()) file << v.name(ev.source) << '\t' << v.name(ev.target) << '\t' << ev.timestamp << '\n';
  out << "wrote " << log.size() << " interactions to " << opts.out << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal graph transformer with contrastive learning", "tcl"};
  app.require_subcommand(1);

  DataOptions train_data, eval_data, stats_data;
  ModelOptions model;
  TrainOptions train_opts;
  EvalOptionsCli eval_opts;
  StatsOptions stats_opts;
  SynthOptions synth_opts;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints plus a loss trace");
  add_data_flags(train_cmd, train_data);
  add_model_flags(train_cmd, model);
  train_cmd->add_option("--lr", train_opts.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", train_opts.batch, "Events per optimizer step")->capture_default_str();
  train_cmd->add_option("--epochs", train_opts.epochs)->capture_default_str();
  train_cmd->add_option("--neg", train_opts.negatives, "Negative samples per event")->capture_default_str();
  train_cmd->add_option("--clip", train_opts.clip, "Global gradient-norm clip, 0 disables")->capture_default_str();
  train_cmd->add_option("--seed", train_opts.seed)->capture_default_str();
  train_cmd->add_option("--checkpoint", train_opts.checkpoint, "Final checkpoint path")->capture_default_str();
  train_cmd->add_option("--loss-out", train_opts.loss_out, "Loss trace path (default <checkpoint>.loss.jsonl)");
  train_cmd->add_flag("--no-val", train_opts.skip_validation, "Skip per-epoch validation ranking");

  auto* eval_cmd = app.add_subcommand("eval", "Rank the test split with a trained checkpoint");
  add_data_flags(eval_cmd, eval_data);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint written by train")->required();
  eval_cmd->add_option("--metrics-out", eval_opts.metrics_out, "Metrics file (default stdout)");
  eval_cmd->add_flag("--no-cache", eval_opts.no_cache, "Recompute every candidate embedding per event");
  eval_cmd->add_flag("--baselines", eval_opts.baselines, "Also report popularity baselines");

  auto* stats_cmd = app.add_subcommand("stats", "Print dataset statistics");
  add_data_flags(stats_cmd, stats_data);
  stats_cmd->add_option("--units-per-day", stats_opts.units_per_day, "Timestamp units in one day")
      ->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic interaction file");
  synth_cmd->add_option("--kind", synth_opts.kind)->check(CLI::IsMember({"planted", "drift", "random"}))
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_opts.seed)->capture_default_str();
  synth_cmd->add_option("--events", synth_opts.events, "Event count for --kind random")->capture_default_str();
  synth_cmd->add_option("--nodes", synth_opts.nodes, "Node count for --kind random")->capture_default_str();
  synth_cmd->add_option("--out", synth_opts.out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) return cmd_train(train_data, model, train_opts, out);
    if (*eval_cmd) return cmd_eval(eval_data, eval_opts, out);
    if (*stats_cmd) return cmd_stats(stats_data, stats_opts, out);
    if (*synth_cmd) return cmd_synth(synth_opts, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace tcl::cli
