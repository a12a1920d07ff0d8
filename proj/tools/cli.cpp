// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "groc/adaptation.hpp"
#include "groc/checkpoint.hpp"
#include "groc/corpus.hpp"
#include "groc/errors.hpp"
#include "groc/evaluation.hpp"
#include "groc/lexicon.hpp"
#include "groc/model.hpp"
#include "groc/synthetic.hpp"
#include "groc/training.hpp"

#ifndef GROC_VERSION
#define GROC_VERSION "0.0.0"
#endif

namespace groc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

fs::path resolve_input(const std::string& path) {
  if (path.empty()) throw InputError("missing input path");
  const fs::path p(path);
  if (fs::exists(p)) return p;
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kDataDirEnv); dir && *dir) {
      fs::path q = fs::path(dir) / p;
      if (fs::exists(q)) return q;
    }
  }
  throw InputError("cannot find " + path + " (relative paths are also looked up under $" +
                   kDataDirEnv + ")");
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

json to_json(const RunConfig& c) {
  return {{"model", groc::to_json(c.model)}, {"train", groc::to_json(c.train)}};
}

// {"model": {...}, "train": {...}}; either section may be omitted.
RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  json j;
  try {
    j = json::parse(read_file(resolve_input(path)));
  } catch (const json::parse_error& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config " + path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      c.model = model_config_from_json(value);
    } else if (key == "train") {
      c.train = train_config_from_json(value);
    } else {
      throw InputError("config " + path + ": unknown section '" + key + "'");
    }
  }
  return c;
}

/// One command's output directory and its manifest.json.
class Run {
 public:
  Run(std::string command, std::vector<std::string> args, fs::path out)
      : command_(std::move(command)), args_(std::move(args)), out_(std::move(out)),
        started_(utc_now()) {
    fs::create_directories(out_);
  }

  void set_config(const std::string& path, const json& resolved) {
    config_path_ = path;
    config_ = resolved;
  }
  void set_seed(std::optional<std::uint64_t> seed) { seed_ = seed; }

  /// Path of an artifact inside the run directory, recorded for the manifest.
  fs::path file(const std::string& name) {
    artifacts_.push_back(name);
    return out_ / name;
  }

  void finish(int status) const {
    json m;
    m["command"] = command_;
    m["args"] = args_;
    m["version"] = GROC_VERSION;
    m["config_path"] = config_path_;
    m["config"] = config_;
    m["config_hash"] = config_.is_null() ? json() : json(hex64(fnv1a(config_.dump())));
    m["seed"] = seed_ ? json(*seed_) : json();
    m["out"] = out_.string();
    m["started"] = started_;
    m["finished"] = utc_now();
    m["status"] = status;
    json arts = json::array();
    for (const auto& name : artifacts_) {
      const fs::path p = out_ / name;
      if (!fs::exists(p)) continue;
      const std::string bytes = read_file(p);
      arts.push_back({{"path", name}, {"bytes", bytes.size()}, {"fnv1a", hex64(fnv1a(bytes))}});
    }
    m["artifacts"] = arts;
    write_json(out_ / "manifest.json", m);
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  fs::path out_;
  std::string started_;
  std::string config_path_;
  json config_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> artifacts_;
};

std::vector<std::string> load_tokens(const std::string& path) {
  return read_corpus_tokens(resolve_input(path));
}

// Tokens outside `vocab` become <unk>.
TokenStream encode_closed(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          const std::string& source) {
  const auto unk = vocab.find(kUnk);
  TokenStream stream;
  stream.source = source;
  stream.ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto id = vocab.find(t)) {
      stream.ids.push_back(*id);
    } else if (unk) {
      stream.ids.push_back(*unk);
    } else {
      throw InputError(source + ": token '" + t + "' is outside the training vocabulary, which has no " +
                       kUnk + "; evaluate with --vocab union");
    }
  }
  return stream;
}

// The training vocabulary always reserves <unk> so closed-vocabulary
// baselines can score held-out text.
Vocabulary training_vocab(const std::vector<std::string>& tokens) {
  Vocabulary v = build_vocab(tokens);
  v.add(kUnk, 0);
  return v;
}

Vocabulary vocab_from_header(const json& header) {
  Vocabulary v;
  const auto& tokens = header.at("vocab").at("tokens");
  const auto& freqs = header.at("vocab").at("freqs");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    v.add(tokens[i].get<std::string>(), freqs[i].get<std::uint64_t>());
  }
  return v;
}

struct EvalData {
  Vocabulary vocab;
  TokenStream stream;
};

EvalData eval_data(const Vocabulary& train_vocab, const std::vector<std::string>& tokens,
                   VocabMode mode, const std::string& source) {
  if (mode == VocabMode::closed) return {train_vocab, encode_closed(tokens, train_vocab, source)};
  Vocabulary v = union_vocab(train_vocab, build_vocab(tokens));
  TokenStream s = encode(tokens, v, source);
  return {std::move(v), std::move(s)};
}

std::shared_ptr<const Lexicon> maybe_lexicon(const std::string& path, const ModelConfig& cfg) {
  if (path.empty()) return {};
  return std::make_shared<Lexicon>(load_lexicon(resolve_input(path), cfg.rel_limit, cfg.def_limit));
}

struct Loaded {
  Checkpoint ckpt;
  LanguageModel model;
};

Loaded load_model(const std::string& ckpt_path, const std::string& lexicon_path) {
  Checkpoint ckpt = read_checkpoint(resolve_input(ckpt_path));
  const ModelConfig cfg = model_config_from_json(ckpt.header.at("model"));
  LanguageModel model = LanguageModel::from_checkpoint(ckpt, maybe_lexicon(lexicon_path, cfg));
  return {std::move(ckpt), std::move(model)};
}

// Training settings stored by `train` next to the model, if any.
TrainConfig stored_train_config(const Checkpoint& ckpt) {
  if (ckpt.header.contains("cli") && ckpt.header["cli"].contains("train")) {
    return train_config_from_json(ckpt.header["cli"]["train"]);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Flags shared by several subcommands.

struct Common {
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;
  std::string out;

  std::optional<std::uint64_t> seed_override() const {
    return seed_opt && seed_opt->count() ? std::optional(seed) : std::nullopt;
  }
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  c.seed_opt = cmd->add_option("--seed", c.seed,
                               "Seed for every random draw; overrides the config's model and train seeds");
  auto* out = cmd->add_option("--out", c.out, "Run directory for artifacts and manifest.json");
  if (out_required) out->required();
}

struct EvalFlags {
  std::string vocab = "closed";
  std::string cache = "none";
  CacheConfig cache_config;
  bool smooth = false;
  double uniform_eps = 1e-4;
  std::size_t bptt = 35;

  EvalOptions options(std::string corpus) const {
    EvalOptions o;
    o.corpus = std::move(corpus);
    o.mode = parse_vocab_mode(vocab);
    o.cache = parse_cache_kind(cache);
    o.cache_config = cache_config;
    o.cache_config.validate();
    o.smooth = smooth;
    o.uniform_eps = uniform_eps;
    if (!(uniform_eps >= 0.0 && uniform_eps <= 1.0)) {
      throw InputError("--uniform-eps must lie in [0, 1]");
    }
    o.bptt = bptt;
    return o;
  }
};

void add_vocab_flag(CLI::App* cmd, std::string& vocab) {
  cmd->add_option("--vocab", vocab, "Evaluation vocabulary: training vocabulary or its union with the data")
      ->check(CLI::IsMember({"closed", "union"}));
}

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
  add_vocab_flag(cmd, f.vocab);
  cmd->add_option("--cache", f.cache, "Evaluation-time cache")
      ->check(CLI::IsMember({"none", "unigram", "neural"}));
  cmd->add_option("--lambda", f.cache_config.lambda, "Interpolation weight on the model distribution");
  cmd->add_option("--theta", f.cache_config.theta, "Neural cache flatness");
  cmd->add_option("--capacity", f.cache_config.capacity, "Neural cache size");
  cmd->add_option("--dw", f.cache_config.dw, "Multiplier on training-unseen words before a cache");
  cmd->add_flag("--downweight-always", f.cache_config.downweight_without_cache,
                "Downweight unseen words even without a cache");
  cmd->add_flag("--smooth", f.smooth, "Mix a uniform distribution into the model distribution");
  cmd->add_option("--uniform-eps", f.uniform_eps, "Uniform mixture weight used by --smooth");
  cmd->add_option("--bptt", f.bptt, "Evaluation window length");
}

// ---------------------------------------------------------------------------
// Commands.

struct TrainInputs {
  std::string data;
  std::string dev;
  std::string lexicon;
};

void add_train_inputs(CLI::App* cmd, TrainInputs& in, bool data_required) {
  auto* data = cmd->add_option("--data", in.data, "Training corpus, one sentence per line");
  if (data_required) data->required();
  cmd->add_option("--dev", in.dev, "Development corpus for the schedule (default: the training corpus)");
  cmd->add_option("--lexicon", in.lexicon, "Lexicon JSONL (required by the groc head)");
}

void print_epoch(std::ostream& err, const EpochRecord& r) {
  char line[200];
  std::snprintf(line, sizeof line,
                "epoch %zu  train_loss %.4f  dev_ppl %.2f  lr %g  %.1f s  full %zu/%zu%s\n", r.epoch,
                r.train_loss, r.dev_ppl, r.lr, r.seconds, r.gate_hits, r.steps,
                r.improved ? "  *" : "");
  err << line << std::flush;
}

int train_into(Run& run, const RunConfig& cfg, const TrainInputs& in, std::ostream& out,
               std::ostream& err) {
  const auto tokens = load_tokens(in.data);
  const Vocabulary vocab = training_vocab(tokens);
  const TokenStream train_stream = encode(tokens, vocab, in.data);
  const TokenStream dev_stream =
      in.dev.empty() ? train_stream : encode_closed(load_tokens(in.dev), vocab, in.dev);
  auto lexicon = maybe_lexicon(in.lexicon, cfg.model);
  if (!lexicon && cfg.model.compositional()) throw InputError("the groc head needs --lexicon");

  LanguageModel model(cfg.model, vocab, lexicon);
  err << "train: " << head_name(cfg.model.head) << " head, " << model.parameter_count()
      << " parameters, " << train_stream.size() << " tokens, |V| = " << vocab.size() << '\n';
  TrainResult result = train(model, train_stream, dev_stream, cfg.train,
                             [&](const EpochRecord& r, const LanguageModel&) { print_epoch(err, r); });

  const double final_lr = result.log.epochs.empty() ? cfg.train.lr : result.log.epochs.back().lr;
  result.best.header["cli"] = {{"train", groc::to_json(cfg.train)}, {"final_lr", final_lr}};
  write_checkpoint(run.file("best.ckpt"), result.best);
  vocab.write(run.file("vocab.txt"));
  {
    std::ofstream log(run.file("train_log.jsonl"));
    result.log.write_jsonl(log);
  }
  json summary = {{"head", head_name(cfg.model.head)},
                  {"parameters", model.parameter_count()},
                  {"epochs", result.log.epochs.size()},
                  {"best_dev_ppl", result.best_dev_ppl},
                  {"stop_reason", result.log.stop_reason}};
  write_json(run.file("summary.json"), summary);
  out << summary.dump() << '\n';
  if (result.diverged) {
    err << "train: loss diverged; best.ckpt holds the last good parameters\n";
    return kNumericFailure;
  }
  return kOk;
}

struct TrainCmd {
  Common common;
  TrainInputs in;
  std::string config;
  std::size_t epochs = TrainConfig{}.max_epochs;
  CLI::Option* epochs_opt = nullptr;
  double p = 1.0;
  CLI::Option* p_opt = nullptr;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config with optional \"model\" and \"train\" sections");
    add_train_inputs(cmd, in, true);
    epochs_opt = cmd->add_option("--epochs", epochs, "Override train.max_epochs");
    p_opt = cmd->add_option("--sparse-p", p, "Override train.p, the probability of a full output-side update")
                ->check(CLI::Range(0.0, 1.0));
    add_common(cmd, common, true);
    cmd->footer("Config defaults:\n" + to_json(RunConfig{}).dump(2));
  }

  RunConfig resolve() const {
    RunConfig c = load_config(config);
    if (auto s = common.seed_override()) c.model.seed = c.train.seed = *s;
    if (epochs_opt->count()) c.train.max_epochs = epochs;
    if (p_opt->count()) c.train.p = p;
    c.model.validate();
    c.train.validate();
    return c;
  }
};

struct EvalCmd {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string lexicon;
  std::string losses;
  EvalFlags flags;

  void add(CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    cmd->add_option("--data", data, "Evaluation corpus")->required();
    cmd->add_option("--lexicon", lexicon, "Lexicon JSONL replacing the one stored in the checkpoint");
    cmd->add_option("--losses", losses, "Per-token loss sidecar path (default: <out>/losses.bin)");
    add_eval_flags(cmd, flags);
    add_common(cmd, common, false);
  }
};

EvalReport evaluate(const LanguageModel& model, const std::vector<std::string>& tokens,
                    const EvalOptions& opts) {
  const EvalData d = eval_data(model.vocab(), tokens, opts.mode, opts.corpus);
  return perplexity(model, d.stream, d.vocab, opts);
}

int run_eval(const EvalCmd& c, Run* run, std::ostream& out) {
  const EvalOptions opts = c.flags.options(c.data);
  auto loaded = load_model(c.checkpoint, c.lexicon);
  const EvalReport report = evaluate(loaded.model, load_tokens(c.data), opts);
  json j = report.to_json();
  j["checkpoint"] = c.checkpoint;
  j["head"] = head_name(loaded.model.config().head);
  if (run) {
    run->set_config(c.checkpoint, loaded.ckpt.header.at("model"));
    write_json(run->file("report.json"), j);
  }
  if (!c.losses.empty()) {
    write_losses(c.losses, report.losses);
  } else if (run) {
    write_losses(run->file("losses.bin"), report.losses);
  }
  out << j.dump() << '\n';
  return kOk;
}

struct FinetuneCmd {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string dev;
  std::string config;
  std::size_t epochs = 3;
  double lr = 1e-3;
  CLI::Option* lr_opt = nullptr;
  double p = 1.0;
  CLI::Option* p_opt = nullptr;

  void add(CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
    cmd->add_option("--data", data, "Target-domain training corpus")->required();
    cmd->add_option("--dev", dev, "Target-domain development corpus");
    cmd->add_option("--config", config, "JSON config whose \"train\" section replaces the stored one");
    cmd->add_option("--epochs", epochs, "Finetuning epochs")->check(CLI::PositiveNumber);
    lr_opt = cmd->add_option("--lr", lr, "Learning rate (default: the final rate of the original run)");
    p_opt = cmd->add_option("--sparse-p", p, "Probability of a full output-side update")
                ->check(CLI::Range(0.0, 1.0));
    add_common(cmd, common, true);
  }
};

int run_finetune(const FinetuneCmd& c, Run& run, std::ostream& out, std::ostream& err) {
  auto loaded = load_model(c.checkpoint, "");
  LanguageModel& model = loaded.model;
  TrainConfig tc = c.config.empty() ? stored_train_config(loaded.ckpt) : load_config(c.config).train;
  if (c.lr_opt->count()) {
    tc.lr = c.lr;
  } else if (loaded.ckpt.header.contains("cli") && loaded.ckpt.header["cli"].contains("final_lr")) {
    tc.lr = loaded.ckpt.header["cli"]["final_lr"].get<double>();
  }
  if (c.p_opt->count()) tc.p = c.p;
  if (auto s = c.common.seed_override()) tc.seed = *s;
  tc.validate();
  run.set_config(c.config.empty() ? c.checkpoint : c.config,
                 {{"model", loaded.ckpt.header.at("model")}, {"train", groc::to_json(tc)}});

  const auto target_tokens = load_tokens(c.data);
  Vocabulary target_vocab = union_vocab(model.vocab(), build_vocab(target_tokens));
  std::vector<std::string> dev_tokens;
  if (!c.dev.empty()) {
    dev_tokens = load_tokens(c.dev);
    target_vocab = union_vocab(target_vocab, build_vocab(dev_tokens));
  }
  const std::size_t before = model.parameter_count();
  const TokenStream target = encode(target_tokens, target_vocab, c.data);
  const TokenStream dev_stream = encode(dev_tokens, target_vocab, c.dev);
  err << "finetune: " << head_name(model.config().head) << " head, |V| " << model.vocab().size()
      << " -> " << target_vocab.size() << ", lr " << tc.lr << '\n';
  const TrainLog log = finetune(model, target_vocab, target, dev_stream, tc, c.epochs);
  for (const auto& r : log.epochs) print_epoch(err, r);

  Checkpoint ckpt = model.to_checkpoint();
  ckpt.header["cli"] = {{"train", groc::to_json(tc)}, {"final_lr", tc.lr}};
  write_checkpoint(run.file("finetuned.ckpt"), ckpt);
  model.vocab().write(run.file("vocab.txt"));
  {
    std::ofstream f(run.file("finetune_log.jsonl"));
    log.write_jsonl(f);
  }
  json summary = {{"head", head_name(model.config().head)},
                  {"parameters_before", before},
                  {"parameters_after", model.parameter_count()},
                  {"vocab_before", loaded.ckpt.header.at("vocab").at("tokens").size()},
                  {"vocab_after", model.vocab().size()},
                  {"epochs", log.epochs.size()}};
  write_json(run.file("summary.json"), summary);
  out << summary.dump() << '\n';
  return kOk;
}

struct BinsCmd {
  Common common;
  std::string loss_a;
  std::string loss_b;
  std::string checkpoint;
  std::string data;
  std::string vocab = "closed";
  std::vector<std::uint64_t> edges = kDefaultBinEdges;

  void add(CLI::App* cmd) {
    cmd->add_option("--loss-a", loss_a, "Per-token losses of model A (e.g. a baseline)")->required();
    cmd->add_option("--loss-b", loss_b, "Per-token losses of model B (e.g. GroC) on the same data")->required();
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint whose training frequencies define the bins")
        ->required();
    cmd->add_option("--data", data, "Corpus both loss files were computed on")->required();
    add_vocab_flag(cmd, vocab);
    cmd->add_option("--edges", edges, "Lower frequency edge of every bin, ascending")->delimiter(',');
    add_common(cmd, common, false);
  }
};

int run_bins(const BinsCmd& c, Run* run, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(resolve_input(c.checkpoint));
  const Vocabulary train_vocab = vocab_from_header(ckpt.header);
  const EvalData d = eval_data(train_vocab, load_tokens(c.data), parse_vocab_mode(c.vocab), c.data);
  const auto a = read_losses(resolve_input(c.loss_a));
  const auto b = read_losses(resolve_input(c.loss_b));
  const auto targets = targets_of(d.stream);
  if (a.size() != targets.size() || b.size() != targets.size()) {
    throw InputError("analyze-bins: " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " losses for " + std::to_string(targets.size()) + " targets; were both computed on " +
                     c.data + " with --vocab " + c.vocab + "?");
  }
  if (c.edges.empty() || !std::is_sorted(c.edges.begin(), c.edges.end()) ||
      std::adjacent_find(c.edges.begin(), c.edges.end()) != c.edges.end()) {
    throw InputError("analyze-bins: --edges must be strictly ascending");
  }
  const BinReport report = median_loss_diff_by_bin(a, b, targets, d.vocab, c.edges);
  json j = report.to_json();
  j["loss_a"] = c.loss_a;
  j["loss_b"] = c.loss_b;
  if (run) write_json(run->file("bins.json"), j);
  out << j.dump() << '\n';
  return kOk;
}

struct SweepCmd {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string lexicon;
  std::string mode = "inference";
  std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  TrainInputs retrain;
  std::string config;
  EvalFlags flags;

  void add(CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Pretrained model (inference) or config source (retrain)")
        ->required();
    cmd->add_option("--data", data, "Evaluation corpus")->required();
    cmd->add_option("--lexicon", lexicon, "Full lexicon to mask (default: the checkpoint's)");
    cmd->add_option("--mode", mode, "Mask a pretrained model, or train a fresh one per fraction")
        ->check(CLI::IsMember({"inference", "retrain"}));
    cmd->add_option("--fractions", fractions, "Shares of covered words kept")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--train-data", retrain.data, "Training corpus for retrain mode");
    cmd->add_option("--dev", retrain.dev, "Development corpus for retrain mode");
    cmd->add_option("--config", config, "Config for retrain mode (default: the checkpoint's)");
    add_eval_flags(cmd, flags);
    add_common(cmd, common, false);
  }
};

int run_sweep(const SweepCmd& c, Run* run, std::ostream& out, std::ostream& err) {
  auto loaded = load_model(c.checkpoint, c.lexicon);
  LanguageModel& model = loaded.model;
  if (!model.config().compositional()) throw InputError("coverage-sweep: the checkpoint is not a groc model");
  const Lexicon full = model.lexicon();
  const EvalOptions opts = c.flags.options(c.data);
  const SweepMode mode = parse_sweep_mode(c.mode);
  const auto tokens = load_tokens(c.data);
  const std::uint64_t seed = c.common.seed_override().value_or(1);

  RunConfig rc;
  rc.model = model.config();
  rc.train = stored_train_config(loaded.ckpt);
  if (!c.config.empty()) rc = load_config(c.config);
  if (auto s = c.common.seed_override()) rc.model.seed = rc.train.seed = *s;
  if (run) run->set_config(c.config.empty() ? c.checkpoint : c.config, to_json(rc));

  std::vector<double> coverage_pct;
  std::function<EvalReport(const Lexicon&)> evaluate_fn;
  std::optional<TokenStream> train_stream, dev_stream;
  if (mode == SweepMode::inference) {
    evaluate_fn = [&](const Lexicon& lex) {
      coverage_pct.push_back(coverage(lex, model.vocab()).any_pct());
      model.set_lexicon(lex);
      return evaluate(model, tokens, opts);
    };
  } else {
    if (c.retrain.data.empty()) throw InputError("coverage-sweep: retrain mode needs --train-data");
    const auto train_tokens = load_tokens(c.retrain.data);
    if (train_tokens.empty()) throw InputError("coverage-sweep: empty training corpus");
    const Vocabulary vocab = training_vocab(train_tokens);
    train_stream = encode(train_tokens, vocab, c.retrain.data);
    dev_stream = c.retrain.dev.empty() ? *train_stream
                                       : encode_closed(load_tokens(c.retrain.dev), vocab, c.retrain.dev);
    evaluate_fn = [&, vocab](const Lexicon& lex) {
      coverage_pct.push_back(coverage(lex, vocab).any_pct());
      LanguageModel fresh(rc.model, vocab, std::make_shared<Lexicon>(lex));
      err << "coverage-sweep: retraining at " << coverage_pct.back() << "% coverage\n";
      train(fresh, *train_stream, *dev_stream, rc.train,
            [&](const EpochRecord& r, const LanguageModel&) { print_epoch(err, r); });
      return evaluate(fresh, tokens, opts);
    };
  }

  const auto points = coverage_sweep(full, c.fractions, seed, evaluate_fn);
  model.set_lexicon(full);
  json rows = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    rows.push_back({{"fraction", p.fraction},
                    {"covered_words", p.covered_words},
                    {"coverage_pct", coverage_pct[i]},
                    {"report", p.report.to_json()}});
  }
  json j = {{"mode", c.mode}, {"seed", seed}, {"points", rows}};
  if (run) write_json(run->file("sweep.json"), j);
  out << j.dump() << '\n';
  return kOk;
}

struct AblateCmd {
  Common common;
  std::string config;
  std::string forms = "all";
  std::string output_net = "on";
  TrainInputs in;
  std::string test;
  EvalFlags flags;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Base JSON config");
    cmd->add_option("--forms", forms, "Word forms kept in the grounded embeddings")
        ->check(CLI::IsMember({"surface", "surface+rel", "surface+def", "all"}));
    cmd->add_option("--output-net", output_net,
                    "Residual output network: off sets depth 0, on keeps the config depth (at least 1)")
        ->check(CLI::IsMember({"on", "off"}));
    add_train_inputs(cmd, in, false);
    cmd->add_option("--test", test, "Corpus to evaluate the trained variant on");
    add_eval_flags(cmd, flags);
    add_common(cmd, common, true);
  }
};

RunConfig ablated(const AblateCmd& c) {
  RunConfig rc = load_config(c.config);
  if (!rc.model.compositional()) throw InputError("ablate: applies to the groc head only");
  if (auto s = c.common.seed_override()) rc.model.seed = rc.train.seed = *s;
  rc.model.encoder.use_relations = c.forms == "surface+rel" || c.forms == "all";
  rc.model.encoder.use_definitions = c.forms == "surface+def" || c.forms == "all";
  if (c.output_net == "off") {
    rc.model.out_layers = 0;
  } else if (rc.model.out_layers == 0) {
    rc.model.out_layers = 1;
  }
  rc.model.validate();
  return rc;
}

int run_ablate(const AblateCmd& c, Run& run, std::ostream& out, std::ostream& err) {
  const RunConfig rc = ablated(c);
  const json cfg = to_json(rc);
  run.set_config(c.config, cfg);
  write_json(run.file("config.json"), cfg);
  if (c.in.data.empty()) {
    if (!c.test.empty()) throw InputError("ablate: --test needs --data to train on");
    out << cfg.dump() << '\n';
    return kOk;
  }
  const int status = train_into(run, rc, c.in, out, err);
  if (status != kOk || c.test.empty()) return status;
  auto loaded = load_model((fs::path(run.file("best.ckpt"))).string(), "");
  const EvalReport report = evaluate(loaded.model, load_tokens(c.test), c.flags.options(c.test));
  json j = report.to_json();
  j["forms"] = c.forms;
  j["output_net"] = c.output_net;
  write_json(run.file("report.json"), j);
  write_losses(run.file("losses.bin"), report.losses);
  out << j.dump() << '\n';
  return kOk;
}

struct SynthCmd {
  Common common;
  SyntheticSpec spec;

  void add(CLI::App* cmd) {
    cmd->add_option("--train-tokens", spec.train_tokens, "Training tokens");
    cmd->add_option("--valid-tokens", spec.valid_tokens, "Validation tokens");
    cmd->add_option("--test-tokens", spec.test_tokens, "Test tokens");
    cmd->add_option("--classes", spec.classes, "Latent word classes");
    cmd->add_option("--types", spec.types, "Word types across all classes");
    cmd->add_option("--coverage", spec.coverage, "Share of content words with lexicon entries")
        ->check(CLI::Range(0.0, 1.0));
    add_common(cmd, common, true);
  }
};

int run_synth(SynthCmd c, Run& run, std::ostream& out) {
  if (auto s = c.common.seed_override()) c.spec.seed = *s;
  const SyntheticCorpus corpus = make_synthetic(c.spec);
  write_synthetic(corpus, c.common.out);
  for (const char* name : {"train.txt", "valid.txt", "test.txt", "test_open.txt", "lexicon.jsonl"}) {
    run.file(name);
  }
  json j = {{"out", c.common.out}, {"lexicon_entries", corpus.lexicon.size()}};
  out << j.dump() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language models with grounded compositional input and output embeddings", "groc"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", GROC_VERSION);

  TrainCmd train_c;
  EvalCmd eval_c;
  FinetuneCmd finetune_c;
  BinsCmd bins_c;
  SweepCmd sweep_c;
  AblateCmd ablate_c;
  SynthCmd synth_c;
  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best-dev checkpoint");
  auto* eval_cmd = app.add_subcommand("eval", "Perplexity of a checkpoint, optionally with caches");
  auto* finetune_cmd = app.add_subcommand("finetune", "Continue training on a target domain");
  auto* bins_cmd = app.add_subcommand("analyze-bins", "Median loss differences by training frequency");
  auto* sweep_cmd = app.add_subcommand("coverage-sweep", "Perplexity as lexicon coverage shrinks");
  auto* ablate_cmd = app.add_subcommand("ablate", "Derive (and optionally train) an ablated config");
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus and lexicon");
  train_c.add(train_cmd);
  eval_c.add(eval_cmd);
  finetune_c.add(finetune_cmd);
  bins_c.add(bins_cmd);
  sweep_c.add(sweep_cmd);
  ablate_c.add(ablate_cmd);
  synth_c.add(synth_cmd);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::vector<std::string> cmd_args(args.begin() + 1, args.end());
  std::optional<Run> run;
  int status = kOk;
  try {
    Common* common = nullptr;
    for (auto [sub, c] : {std::pair{train_cmd, &train_c.common}, {eval_cmd, &eval_c.common},
                          {finetune_cmd, &finetune_c.common}, {bins_cmd, &bins_c.common},
                          {sweep_cmd, &sweep_c.common}, {ablate_cmd, &ablate_c.common},
                          {synth_cmd, &synth_c.common}}) {
      if (sub == cmd) common = c;
    }
    if (!common->out.empty()) {
      run.emplace(cmd->get_name(), cmd_args, common->out);
      run->set_seed(common->seed_override());
    }
    Run* r = run ? &*run : nullptr;
    if (cmd == train_cmd) {
      const RunConfig rc = train_c.resolve();
      run->set_config(train_c.config, to_json(rc));
      status = train_into(*run, rc, train_c.in, out, err);
    } else if (cmd == eval_cmd) {
      status = run_eval(eval_c, r, out);
    } else if (cmd == finetune_cmd) {
      status = run_finetune(finetune_c, *run, out, err);
    } else if (cmd == bins_cmd) {
      status = run_bins(bins_c, r, out);
    } else if (cmd == sweep_cmd) {
      status = run_sweep(sweep_c, r, out, err);
    } else if (cmd == ablate_cmd) {
      status = run_ablate(ablate_c, *run, out, err);
    } else {
      status = run_synth(synth_c, *run, out);
    }
  } catch (const NumericError& e) {
    err << "groc " << cmd->get_name() << ": numeric failure: " << e.what() << '\n';
    status = kNumericFailure;
  } catch (const InputError& e) {
    err << "groc " << cmd->get_name() << ": " << e.what() << '\n';
    status = kDataError;
  } catch (const DimensionError& e) {
    err << "groc " << cmd->get_name() << ": " << e.what() << '\n';
    status = kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "groc " << cmd->get_name() << ": " << e.what() << '\n';
    status = kDataError;
  } catch (const json::exception& e) {
    err << "groc " << cmd->get_name() << ": malformed JSON: " << e.what() << '\n';
    status = kDataError;
  } catch (const ContractError& e) {
    err << "groc " << cmd->get_name() << ": " << e.what() << '\n';
    status = kUsage;
  }
  if (run) {
    try {
      run->finish(status);
    } catch (const std::exception& e) {
      err << "groc " << cmd->get_name() << ": manifest: " << e.what() << '\n';
      if (status == kOk) status = kDataError;
    }
  }
  return status;
}

}  // namespace groc::cli
