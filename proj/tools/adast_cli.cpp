// Copyright 2026 The AdaST-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: gen-data, train, decode, eval, probe, params,
// gradcheck. Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adast/checkpoint.hpp"
#include "adast/decoding.hpp"
#include "adast/errors.hpp"
#include "adast/gradcheck.hpp"
#include "adast/metrics.hpp"
#include "adast/probe.hpp"
#include "adast/run_config.hpp"
#include "adast/synthdata.hpp"
#include "adast/text.hpp"
#include "adast/training.hpp"

namespace fs = std::filesystem;
using namespace adast;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

// Layers the shared `--config` / `--set` handling and the per-command
// shorthand flags over a base RunConfig.
class CommandConfig {
 public:
  explicit CommandConfig(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", file_, "File of 'key = value' lines");
    cmd->add_option("--set", sets_, "Override one key, KEY=VALUE (repeatable)");
    cmd->add_flag("--print-config", print_, "Print the resolved configuration before running");
  }

  CommandConfig& option(const std::string& flag, const std::string& key, const std::string& help) {
    auto& b = bindings_.emplace_back(Binding{key, "", false});
    cmd_->add_option(flag, b.value, help + " [" + key + "]");
    return *this;
  }

  CommandConfig& toggle(const std::string& flag, const std::string& key, const std::string& value,
                        const std::string& help) {
    auto& b = bindings_.emplace_back(Binding{key, value, true});
    const std::string description = help + " [" + key + " = " + value + "]";
    b.option = cmd_->add_flag(flag, description);
    return *this;
  }

  RunConfig resolve(RunConfig config, const fs::path& base_file = {}) const {
    if (!base_file.empty()) apply_config_file(config, base_file);
    if (!file_.empty()) apply_config_file(config, file_);
    for (const auto& s : sets_) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      set_run_config_value(config, std::string(text::trim(s.substr(0, eq))), s.substr(eq + 1));
    }
    for (const auto& b : bindings_) {
      if (b.is_toggle) {
        if (b.option->count() > 0) set_run_config_value(config, b.key, b.value);
      } else if (!b.value.empty()) {
        set_run_config_value(config, b.key, b.value);
      }
    }
    if (print_) std::cout << format_run_config(config);
    return config;
  }

 private:
  struct Binding {
    std::string key;
    std::string value;
    bool is_toggle = false;
    CLI::Option* option = nullptr;
  };
  CLI::App* cmd_;
  std::string file_;
  std::vector<std::string> sets_;
  bool print_ = false;
  std::deque<Binding> bindings_;
};

void require_path(const fs::path& p, const std::string& key) {
  if (p.empty()) throw ConfigError("'" + key + "' is required for this command");
}

std::vector<Utterance> read_split(const RunConfig& c) {
  require_path(c.data_dir, "data_dir");
  return read_corpus(c.data_dir / c.split);
}

// Accepts a checkpoint directory or a run directory holding best/.
fs::path resolve_checkpoint(const fs::path& p) {
  if (fs::exists(p / "manifest.txt")) return p;
  if (fs::exists(p / "best" / "manifest.txt")) return p / "best";
  throw IoError("no checkpoint at " + p.string());
}

// Model width and vocabulary always follow the corpus.
void adopt_corpus_shape(RunConfig& c) {
  require_path(c.data_dir, "data_dir");
  const SyntheticSpec spec = read_corpus_spec(c.data_dir);
  c.model.vocab_size = spec.vocab_size;
  c.model.feature_dim = spec.feature_dim;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& c) {
  require_path(c.out, "out");
  validate_run_config(c);
  SyntheticSpec spec = c.data;
  spec.seed = c.seed;
  const SyntheticCorpora corpora = generate(spec);
  write_corpora(corpora, spec, c.out);
  std::cout << "wrote " << corpora.train.size() << " train, " << corpora.dev.size() << " dev, "
            << corpora.test.size() << " test utterances (" << task_mode_name(spec.mode) << ") to " << c.out.string()
            << "\n";
  return 0;
}

template <typename T>
int train_with(RunConfig c, const fs::path& resume_from) {
  const auto train_set = read_corpus(c.data_dir / "train");
  const auto dev_set = read_corpus(c.data_dir / "dev");
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  TrainOutputs outputs;
  outputs.run_dir = c.run_dir;
  outputs.on_log = [](std::size_t step, const std::string& split, double loss, double acc) {
    std::cout << "step " << step << " " << split << " loss " << fixed(loss, 4) << " token_acc " << fixed(acc, 4)
              << "\n"
              << std::flush;
  };
  TrainResult r;
  if (!resume_from.empty()) {
    Model<T> model(read_checkpoint_config(resume_from), c.seed);
    r = resume_training(model, resume_from, train_set, dev_set, tc, outputs);
  } else {
    Model<T> model(c.model, c.seed);
    r = train(model, train_set, dev_set, tc, outputs);
  }
  std::cout << "final_step " << r.final_step << "\nbest_step " << r.best_step << "\nbest_dev_token_acc "
            << fixed(r.best_dev_accuracy, 4) << "\nrun_dir " << c.run_dir.string() << "\n";
  return 0;
}

int cmd_train(RunConfig c, const fs::path& resume_dir) {
  fs::path resume_from;
  if (!resume_dir.empty()) {
    resume_from = resume_dir / "last";
    if (!fs::exists(resume_from / "manifest.txt")) throw IoError("no resumable checkpoint at " + resume_from.string());
    c.run_dir = resume_dir;
  } else {
    adopt_corpus_shape(c);
    if (c.run_dir.empty()) c.run_dir = default_run_dir(c.seed, std::chrono::system_clock::now());
    if (fs::exists(c.run_dir / "train_log.csv")) {
      throw ConfigError("run directory " + c.run_dir.string() + " already holds a run; pass --resume to continue it");
    }
  }
  validate_run_config(c);
  require_path(c.data_dir, "data_dir");
  fs::create_directories(c.run_dir);
  {
    // The stored copy omits run-local paths so equal runs write equal files.
    RunConfig stored = c;
    stored.run_dir.clear();
    std::ofstream out(c.run_dir / "config.conf", std::ios::binary | std::ios::trunc);
    out << format_run_config(stored);
  }
  return c.precision == Precision::kFloat64 ? train_with<double>(c, resume_from) : train_with<float>(c, resume_from);
}

template <typename T>
std::vector<std::vector<int>> decode_with(const RunConfig& c, const std::vector<Utterance>& corpus) {
  const Model<T> model = load_checkpoint<T>(resolve_checkpoint(c.checkpoint));
  return decode_corpus(model, corpus, c.decode);
}

std::vector<std::vector<int>> decode_split(const RunConfig& c, const std::vector<Utterance>& corpus) {
  require_path(c.checkpoint, "checkpoint");
  validate_run_config(c);
  return c.precision == Precision::kFloat64 ? decode_with<double>(c, corpus) : decode_with<float>(c, corpus);
}

int cmd_decode(const RunConfig& c) {
  require_path(c.out, "out");
  const auto corpus = read_split(c);
  const auto hyps = decode_split(c, corpus);
  if (c.out.has_parent_path()) fs::create_directories(c.out.parent_path());
  write_decode_file(c.out, corpus, hyps);
  std::cout << "decoded " << corpus.size() << " utterances (" << decode_mode_name(c.decode.mode) << ", beam "
            << c.decode.beam << ") to " << c.out.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& c) {
  const auto corpus = read_split(c);
  std::vector<std::vector<int>> hyps;
  if (!c.hypotheses.empty()) {
    std::map<std::string, std::vector<int>> by_id;
    for (auto& [id, toks] : read_decode_file(c.hypotheses)) by_id[id] = std::move(toks);
    for (const auto& u : corpus) {
      const auto it = by_id.find(u.id);
      if (it == by_id.end()) throw ValidationError("no hypothesis for utterance " + u.id);
      hyps.push_back(it->second);
    }
  } else if (!c.checkpoint.empty()) {
    hyps = decode_split(c, corpus);
  } else {
    throw ConfigError("eval needs 'hypotheses' or 'checkpoint'");
  }
  std::vector<std::vector<int>> refs;
  for (const auto& u : corpus) refs.push_back(u.target);
  std::cout << "split " << c.split << "\nutterances " << corpus.size() << "\nbleu " << fixed(corpus_bleu(hyps, refs), 2)
            << "\ntoken_acc " << fixed(token_accuracy(hyps, refs), 4) << "\n";
  return 0;
}

int cmd_probe(RunConfig c) {
  require_path(c.data_dir, "data_dir");
  SyntheticCorpora data;
  data.train = read_corpus(c.data_dir / "train");
  data.dev = read_corpus(c.data_dir / "dev");
  data.test = read_corpus(c.data_dir / "test");
  ProbeConfig pc = c.probe;
  pc.seed = c.seed;
  ProbeResult r;
  if (c.checkpoint.empty()) {
    // Randomly initialized encoder from the configured shape.
    adopt_corpus_shape(c);
    validate_run_config(c);
    r = run_probe(Model<float>(c.model, c.seed), data, pc);
  } else {
    validate_run_config(c);
    r = run_probe(resolve_checkpoint(c.checkpoint), data, pc);
  }
  const std::string csv = probe_csv_header() + "\n" + probe_csv_row(r) + "\n";
  std::cout << csv;
  if (!c.out.empty()) {
    std::ofstream out(c.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + c.out.string());
    out << csv;
  }
  return 0;
}

int cmd_params(const RunConfig& c) {
  validate_run_config(c);
  ModelConfig base = c.model;
  base.variant = Variant::kBaseline;
  const ParamCount pb = param_count(base);
  const ParamCount pv = param_count(c.model);
  const std::string name = variant_name(c.model.variant);
  std::printf("%-12s %12s %12s\n", "component", "baseline", name.c_str());
  for (std::size_t i = 0; i < pb.components.size(); ++i) {
    std::printf("%-12s %12zu %12zu\n", pb.components[i].first.c_str(), pb.components[i].second,
                pv.components[i].second);
  }
  std::printf("%-12s %12zu %12zu\n", "total", pb.total, pv.total);
  std::printf("%-12s %12s %+12lld\n", "delta", "",
              static_cast<long long>(pv.total) - static_cast<long long>(pb.total));
  return 0;
}

int cmd_gradcheck(const RunConfig& c) {
  validate_run_config(c);
  const ModelConfig& mc = c.model;
  Model<double> m(mc, c.seed);
  Rng rng = Rng::derive(c.seed, 11);
  // Non-zero biases so every parameter carries a generic gradient.
  for (auto& p : m.parameters()) {
    if (p.name.find("bias") != std::string::npos) {
      for (auto& x : p.tensor.mutable_data()) x = rng.uniform(-0.1, 0.1);
    }
  }
  const std::size_t frames = 14;
  std::vector<double> fv(2 * frames * mc.feature_dim);
  for (auto& x : fv) x = rng.uniform(-1.0, 1.0);
  const Tensor<double> features({2, frames, mc.feature_dim}, std::move(fv));
  std::vector<PadList> fpad{PadList(frames, false), PadList(frames, false)};
  fpad[1][frames - 1] = fpad[1][frames - 2] = true;
  auto tok = [&] { return static_cast<int>(rng.uniform_int(kFirstRealToken, static_cast<int>(mc.vocab_size) - 1)); };
  const TokenBatch tgt_in{{kBosId, tok(), tok()}, {kBosId, tok(), kPadId}};
  const TokenBatch tgt_out{{tgt_in[0][1], tgt_in[0][2], kEosId}, {tgt_in[1][1], kEosId, kPadId}};
  const std::vector<PadList> tpad{PadList(3, false), {false, false, true}};
  std::vector<Tensor<double>> params;
  for (const auto& p : m.parameters()) params.push_back(p.tensor);
  const auto loss = [&] {
    return cross_entropy(m.decode_train(m.encode(features, fpad), tgt_in, tpad), tgt_out, tpad, 0.0);
  };
  const GradReport r = gradient_check(loss, params);
  const bool ok = r.max_rel_err < 1e-4;
  std::cout << "variant " << variant_name(mc.variant) << "\nchecked " << r.checked << "\nmax_abs_err " << r.max_abs_err
            << "\nmax_rel_err " << r.max_rel_err << "\nstatus " << (ok ? "pass" : "fail") << "\n";
  return ok ? 0 : kExitRuntime;
}

RunConfig gradcheck_defaults() {
  RunConfig c;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.d_ff = 32;
  c.model.n_enc_layers = 2;
  c.model.n_dec_layers = 2;
  c.model.vocab_size = 11;
  c.model.feature_dim = 8;
  c.model.subsampler_channels = 4;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaST speech translation toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  CommandConfig gen_cfg(gen);
  gen_cfg.option("--seed", "seed", "Random seed")
      .option("--mode", "data.mode", "Task mode: asr_like, mt_like or st_like")
      .option("--out", "out", "Output directory")
      .option("--n-train", "data.n_train", "Training utterances")
      .option("--n-dev", "data.n_dev", "Dev utterances")
      .option("--n-test", "data.n_test", "Test utterances")
      .option("--noise", "data.noise_std", "Feature noise standard deviation")
      .option("--n-classes", "data.n_classes", "Pseudo-speaker classes (0: none)");

  auto* tr = app.add_subcommand("train", "Train a model");
  CommandConfig tr_cfg(tr);
  std::string resume;
  tr->add_option("--resume", resume, "Continue the run in this directory from its last/ checkpoint");
  tr_cfg.option("--seed", "seed", "Random seed")
      .option("--precision", "precision", "float32 or float64")
      .option("--variant", "model.variant", "baseline, adast or static_ablation")
      .option("--data", "data_dir", "Corpus directory")
      .option("--steps", "train.steps", "Optimizer steps")
      .option("--batch-size", "train.batch_size", "Utterances per batch")
      .option("--lr", "train.lr", "Peak learning rate")
      .option("--d-model", "model.d_model", "Model width")
      .option("--run-dir", "run_dir", "Output directory (default: runs/<time>-seed<seed>)");

  auto* dec = app.add_subcommand("decode", "Decode a corpus split");
  CommandConfig dec_cfg(dec);
  dec_cfg.option("--checkpoint", "checkpoint", "Checkpoint or run directory")
      .option("--precision", "precision", "float32 or float64")
      .option("--data", "data_dir", "Corpus directory")
      .option("--split", "split", "train, dev or test")
      .option("--out", "out", "Hypothesis file")
      .option("--beam", "decode.beam", "Beam width (1: greedy)")
      .option("--max-len", "decode.max_len", "Length cap (0: 2S+16)")
      .option("--length-penalty", "decode.length_penalty", "Length normalization exponent")
      .toggle("--incremental", "decode.mode", "incremental", "Cached incremental decoding")
      .toggle("--full", "decode.mode", "full", "Recompute the full prefix each step");

  auto* ev = app.add_subcommand("eval", "Score hypotheses (BLEU, token accuracy)");
  CommandConfig ev_cfg(ev);
  ev_cfg.option("--data", "data_dir", "Corpus directory")
      .option("--split", "split", "train, dev or test")
      .option("--hyp", "hypotheses", "Hypothesis file written by decode")
      .option("--checkpoint", "checkpoint", "Decode with this checkpoint instead of reading --hyp")
      .option("--beam", "decode.beam", "Beam width when decoding");

  auto* pr = app.add_subcommand("probe", "Linear class probe on a frozen encoder");
  CommandConfig pr_cfg(pr);
  pr_cfg.option("--seed", "seed", "Random seed")
      .option("--checkpoint", "checkpoint", "Checkpoint or run directory (default: random encoder)")
      .option("--data", "data_dir", "Corpus directory with class labels")
      .option("--pooling", "probe.pooling", "mean or max")
      .option("--steps", "probe.steps", "Classifier steps")
      .option("--out", "out", "Also write the CSV here")
      .toggle("--shuffle-labels", "probe.shuffle_labels", "true", "Replace labels with random draws");

  auto* par = app.add_subcommand("params", "Per-component parameter counts");
  CommandConfig par_cfg(par);
  par_cfg.option("--variant", "model.variant", "baseline, adast or static_ablation")
      .option("--d-model", "model.d_model", "Model width")
      .option("--n-heads", "model.n_heads", "Attention heads")
      .option("--enc-layers", "model.n_enc_layers", "Encoder layers")
      .option("--dec-layers", "model.n_dec_layers", "Decoder layers");

  auto* gc = app.add_subcommand("gradcheck", "Central-difference gradient check of a small model at 64-bit");
  CommandConfig gc_cfg(gc);
  gc_cfg.option("--seed", "seed", "Random seed")
      .option("--variant", "model.variant", "baseline, adast or static_ablation")
      .option("--d-model", "model.d_model", "Model width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_cfg.resolve({}));
    if (tr->parsed()) {
      const fs::path base = resume.empty() ? fs::path() : fs::path(resume) / "config.conf";
      return cmd_train(tr_cfg.resolve({}, base), resume);
    }
    if (dec->parsed()) return cmd_decode(dec_cfg.resolve({}));
    if (ev->parsed()) return cmd_eval(ev_cfg.resolve({}));
    if (pr->parsed()) return cmd_probe(pr_cfg.resolve({}));
    if (par->parsed()) return cmd_params(par_cfg.resolve({}));
    if (gc->parsed()) return cmd_gradcheck(gc_cfg.resolve(gradcheck_defaults()));
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
