// Copyright 2026 The semiasr Authors
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

#include "semiasr/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "semiasr/errors.hpp"
#include "semiasr/rng.hpp"

namespace semiasr {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  corpus.validate();
  objective.validate();
  adadelta.validate();
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (shared_layers < 1 || shared_layers > 4)
    throw ConfigError("shared encoder layers must be between 1 and 4");
  if (decoder_layers == 0) throw ConfigError("decoder layers must be positive");
  if (subsample == 0) throw ConfigError("subsampling factor must be positive");
  if (lm_hidden == 0) throw ConfigError("LM hidden size must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip norm must be non-negative");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch size must be positive");
  if (initial_epochs == 0 || retrain_epochs == 0 || lm_epochs == 0)
    throw ConfigError("epoch counts must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (decode.beam_width == 0) throw ConfigError("beam width must be at least 1");
  if (!(decode.max_len_factor > 0.0)) throw ConfigError("max length factor must be positive");
  if (!(decode.lm_weight >= 0.0)) throw ConfigError("LM weight must be non-negative");
  for (double b : sweep_betas)
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("sweep betas must lie in [0, 1]");
  for (Variant v : sweep_variants)
    if (v == Variant::kInitial) throw ConfigError("the sweep cannot retrain the Initial variant");
  if (workers == 0) throw ConfigError("worker count must be positive");
}

ArchConfig ExperimentConfig::arch(std::size_t feat_dim, std::size_t vocab_size) const {
  ArchConfig a;
  a.feat_dim = feat_dim;
  a.hidden = hidden;
  a.shared_layers = shared_layers;
  a.decoder_layers = decoder_layers;
  a.vocab_size = vocab_size;
  a.subsample = subsample;
  a.validate();
  return a;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Endless stream over a split, reshuffled on every pass.
template <typename T>
class Cycler {
 public:
  explicit Cycler(std::function<std::vector<T>(std::uint64_t)> make) : make_(std::move(make)) {}
  const T& next() {
    if (pos_ == current_.size()) {
      current_ = make_(++pass_);
      pos_ = 0;
      if (current_.empty()) throw DataError("batch stream is empty");
    }
    return current_[pos_++];
  }

 private:
  std::function<std::vector<T>(std::uint64_t)> make_;
  std::vector<T> current_;
  std::size_t pos_ = 0;
  std::uint64_t pass_ = 0;
};

struct StepOutcome {
  double total;
  std::map<std::string, double> components;
  std::size_t empty_hypotheses;
};

StepOutcome train_step(ModelParams& params, OptimizerState& opt, const ExperimentConfig& cfg,
                       const ObjectiveConfig& objective, const PairedBatch* paired,
                       const FeatureBatch* speech, const LabelBatch* text) {
  Graph g;
  Network net(g, params);
  ObjectiveTerms terms = combined_objective(net, objective, paired, speech, text);
  g.backward(terms.total);
  ParamMap grads = g.parameter_grads();
  clip_gradients(grads, cfg.clip_norm);
  adadelta_step(params.tensors(), grads, opt, cfg.adadelta);
  return {terms.breakdown.total, std::move(terms.breakdown.components),
          terms.cycle.empty_hypotheses};
}

struct EpochAccumulator {
  EpochRecord record;
  void add(const StepOutcome& s) {
    ++record.steps;
    record.loss += s.total;
    for (const auto& [k, v] : s.components) record.components[k] += v;
    record.empty_hypotheses += s.empty_hypotheses;
  }
  EpochRecord finish() {
    const double n = static_cast<double>(std::max<std::size_t>(1, record.steps));
    record.loss /= n;
    for (auto& [k, v] : record.components) v /= n;
    return record;
  }
};

// Tracks the best dev CER, saving its checkpoint, and decides early stopping.
class BestKeeper {
 public:
  BestKeeper(const TrainOptions& options, std::size_t patience)
      : options_(options), patience_(patience) {}

  // Returns true when training should stop.
  bool offer(const AsrCheckpoint& candidate, std::size_t epoch, double cer) {
    if (!has_best_ || cer < best_cer_) {
      has_best_ = true;
      best_cer_ = cer;
      best_epoch_ = epoch;
      best_ = candidate;
      if (!options_.checkpoint_path.empty()) save_asr(options_.checkpoint_path, best_);
      return false;
    }
    return epoch - best_epoch_ >= patience_;
  }

  // On divergence: keep the saved best, or fall back to the last good params.
  [[noreturn]] void abort(const AsrCheckpoint& last_good, std::size_t epoch,
                          const std::string& why) {
    std::string where;
    if (!options_.checkpoint_path.empty()) {
      if (!has_best_) {
        AsrCheckpoint c = last_good;
        c.info["diverged"] = "1";
        save_asr(options_.checkpoint_path, c);
      }
      where = "; last good checkpoint at " + options_.checkpoint_path.string();
    }
    throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + why +
                       where);
  }

  bool has_best() const { return has_best_; }
  const AsrCheckpoint& best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  const TrainOptions& options_;
  std::size_t patience_;
  bool has_best_ = false;
  double best_cer_ = 0.0;
  std::size_t best_epoch_ = 0;
  AsrCheckpoint best_;
};

AsrCheckpoint snapshot(const ModelParams& params, const OptimizerState& opt,
                       const Vocabulary& vocab, std::map<std::string, std::string> info,
                       std::size_t epoch, double cer) {
  AsrCheckpoint c{params, vocab, opt, std::move(info)};
  c.info["epoch"] = std::to_string(epoch);
  c.info["dev_cer"] = fmt(cer);
  return c;
}

}  // namespace

void TrainLog::write_csv(const fs::path& path, bool with_time) const {
  std::set<std::string> keys;
  for (const auto& e : epochs)
    for (const auto& [k, v] : e.components) keys.insert(k);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write training log " + path.string());
  out << "stage,variant,epoch,steps,loss";
  for (const auto& k : keys) out << ',' << k;
  out << ",dev_cer,empty_hypotheses";
  if (with_time) out << ",seconds";
  out << '\n';
  for (const auto& e : epochs) {
    out << stage << ',' << variant << ',' << e.epoch << ',' << e.steps << ',' << fmt(e.loss);
    for (const auto& k : keys) {
      out << ',';
      if (auto it = e.components.find(k); it != e.components.end()) out << fmt(it->second);
    }
    out << ',' << fmt(e.dev_cer) << ',' << e.empty_hypotheses;
    if (with_time) out << ',' << fmt(e.seconds);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DecodeRecord> greedy_transcribe(const ModelParams& params, const Dataset& data,
                                            Split split, std::size_t batch_size,
                                            double max_len_factor) {
  std::vector<DecodeRecord> out;
  for (const FeatureBatch& fb : speech_batches(data, split, batch_size, 0, 0, false)) {
    Graph g(false);
    Network net(g, params);
    EncodedBatch enc = EncodedBatch::from(net.encode_speech(fb));
    std::vector<Hypothesis> hyps = greedy_decode(params, enc, max_len_factor);
    for (std::size_t i = 0; i < hyps.size(); ++i)
      out.push_back({fb.ids[i], data.vocabulary().decode(hyps[i].labels), hyps[i].score});
  }
  return out;
}

double dev_cer(const ModelParams& params, const Dataset& data, std::size_t batch_size,
               double max_len_factor) {
  return score_corpus(data.references(Split::kDev),
                      greedy_transcribe(params, data, Split::kDev, batch_size, max_len_factor),
                      Unit::kChar)
      .rate();
}

std::vector<DecodeRecord> decode_split(const ModelParams& params, const Vocabulary& vocab,
                                       const Dataset& data, Split split,
                                       const DecodeConfig& cfg, const LmParams* lm,
                                       std::size_t batch_size) {
  BeamConfig beam;
  beam.width = cfg.beam_width;
  beam.max_len_factor = cfg.max_len_factor;
  beam.lm = lm;
  beam.lm_weight = lm ? cfg.lm_weight : 0.0;
  beam.validate();
  std::vector<DecodeRecord> out;
  for (const FeatureBatch& fb : speech_batches(data, split, batch_size, 0, 0, false)) {
    Graph g(false);
    Network net(g, params);
    EncodedBatch enc = EncodedBatch::from(net.encode_speech(fb));
    for (std::size_t i = 0; i < enc.batch; ++i) {
      std::vector<Hypothesis> hyps = beam_search(params, enc.utterance(i), beam);
      const Hypothesis& best = hyps.front();
      out.push_back({fb.ids[i], vocab.decode(best.labels), best.score});
    }
  }
  return out;
}

double mean_identity_loss(const ModelParams& params, const Dataset& data, Split split,
                          std::size_t batch_size) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const FeatureBatch& fb : speech_batches(data, split, batch_size, 0, 0, false)) {
    Graph g(false);
    Network net(g, params);
    SeqVars b = net.encode_speech(fb);
    const std::size_t n = b.total_frames();
    total += loss_idt(net, b).value().item() * static_cast<double>(n);
    frames += n;
  }
  if (frames == 0) throw DataError("split has no speech frames");
  return total / static_cast<double>(frames);
}

TrainResult train_initial(const ExperimentConfig& cfg, const Dataset& data,
                          const TrainOptions& options) {
  cfg.validate();
  if (data.utterances(Split::kPaired).empty()) throw DataError("paired split is empty");
  const Vocabulary& vocab = data.vocabulary();
  const ArchConfig arch = cfg.arch(data.feat_dim(), vocab.size());
  ModelParams params = ModelParams::initialize(arch, derive_seed(cfg.seed, "initial/params"));
  OptimizerState opt = OptimizerState::zeros_like(params.tensors());
  ObjectiveConfig objective = cfg.objective;
  objective.variant = Variant::kInitial;
  objective.alpha = 1.0;

  std::map<std::string, std::string> info{{"stage", "initial"},
                                          {"variant", "Initial"},
                                          {"paired_hash", data.paired_hash()},
                                          {"seed", std::to_string(cfg.seed)}};
  TrainResult result;
  result.log.stage = "initial";
  result.log.variant = "Initial";
  BestKeeper keeper(options, cfg.patience);
  const std::uint64_t stream = derive_seed(cfg.seed, "initial/batches");
  for (std::size_t epoch = 1; epoch <= cfg.initial_epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochAccumulator acc;
    acc.record.epoch = epoch;
    for (const PairedBatch& batch :
         paired_batches(data, Split::kPaired, cfg.batch_size, stream, epoch)) {
      try {
        acc.add(train_step(params, opt, cfg, objective, &batch, nullptr, nullptr));
      } catch (const NumericError& e) {
        keeper.abort(snapshot(params, opt, vocab, info, epoch - 1, NAN), epoch, e.what());
      }
    }
    EpochRecord rec = acc.finish();
    rec.dev_cer = dev_cer(params, data, cfg.eval_batch_size, cfg.decode.max_len_factor);
    rec.seconds = seconds_since(t0);
    result.log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (keeper.offer(snapshot(params, opt, vocab, info, epoch, rec.dev_cer), epoch,
                     rec.dev_cer))
      break;
  }
  result.best = keeper.best();
  result.best_epoch = keeper.best_epoch();
  return result;
}

TrainResult retrain(const AsrCheckpoint& initial, const ExperimentConfig& cfg,
                    const Dataset& data, const TrainOptions& options) {
  cfg.validate();
  const ObjectiveConfig& objective = cfg.objective;
  if (objective.variant == Variant::kInitial)
    throw ConfigError("retraining needs a semi-supervised variant, not Initial");
  if (!(initial.vocab == data.vocabulary()))
    throw DataError("checkpoint vocabulary differs from the corpus vocabulary");
  if (initial.params.arch().feat_dim != data.feat_dim())
    throw DataError("checkpoint feature dimension differs from the corpus");
  if (auto it = initial.info.find("paired_hash"); it != initial.info.end()) {
    if (it->second != data.paired_hash())
      throw DataError("paired split differs from the one the initial model was trained on");
  } else {
    throw DataError("initial checkpoint does not record its paired split");
  }

  const double alpha = objective.alpha, beta = objective.beta;
  const bool need_paired = alpha > 0.0;
  const bool need_speech = alpha < 1.0 && beta > 0.0;
  const bool need_text =
      alpha < 1.0 && (beta < 1.0 || (objective.variant == Variant::kBaseline && beta > 0.0));
  if (data.utterances(Split::kUnpairedSpeech).empty() && need_speech)
    throw DataError("unpaired_speech split is empty");
  if (data.utterances(Split::kUnpairedText).empty() && need_text)
    throw DataError("unpaired_text split is empty");

  ModelParams params = initial.params;
  OptimizerState opt = initial.optimizer.sq_grad.empty()
                           ? OptimizerState::zeros_like(params.tensors())
                           : initial.optimizer;
  const std::string vname(variant_name(objective.variant));
  std::map<std::string, std::string> info{{"stage", "retrain"},
                                          {"variant", vname},
                                          {"paired_hash", data.paired_hash()},
                                          {"seed", std::to_string(cfg.seed)},
                                          {"alpha", fmt(alpha)},
                                          {"beta", fmt(beta)}};

  Cycler<PairedBatch> paired_stream([&](std::uint64_t pass) {
    return paired_batches(data, Split::kPaired, cfg.batch_size,
                          derive_seed(cfg.seed, "retrain/paired"), pass);
  });
  Cycler<FeatureBatch> speech_stream([&](std::uint64_t pass) {
    return speech_batches(data, Split::kUnpairedSpeech, cfg.batch_size,
                          derive_seed(cfg.seed, "retrain/speech"), pass);
  });
  Cycler<LabelBatch> text_stream([&](std::uint64_t pass) {
    return text_batches(data, Split::kUnpairedText, cfg.batch_size,
                        derive_seed(cfg.seed, "retrain/text"), pass);
  });
  // An epoch is one pass over the unpaired speech.
  const std::size_t n_speech = data.utterances(Split::kUnpairedSpeech).size();
  const std::size_t steps = std::max<std::size_t>(
      1, (n_speech + cfg.batch_size - 1) / cfg.batch_size);

  TrainResult result;
  result.log.stage = "retrain";
  result.log.variant = vname;
  BestKeeper keeper(options, cfg.patience);
  for (std::size_t epoch = 1; epoch <= cfg.retrain_epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochAccumulator acc;
    acc.record.epoch = epoch;
    for (std::size_t s = 0; s < steps; ++s) {
      const PairedBatch* p = need_paired ? &paired_stream.next() : nullptr;
      const FeatureBatch* x = need_speech ? &speech_stream.next() : nullptr;
      const LabelBatch* y = need_text ? &text_stream.next() : nullptr;
      try {
        acc.add(train_step(params, opt, cfg, objective, p, x, y));
      } catch (const NumericError& e) {
        keeper.abort(snapshot(params, opt, initial.vocab, info, epoch - 1, NAN), epoch,
                     e.what());
      }
    }
    EpochRecord rec = acc.finish();
    rec.dev_cer = dev_cer(params, data, cfg.eval_batch_size, cfg.decode.max_len_factor);
    rec.seconds = seconds_since(t0);
    result.log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (keeper.offer(snapshot(params, opt, initial.vocab, info, epoch, rec.dev_cer), epoch,
                     rec.dev_cer))
      break;
  }
  result.best = keeper.best();
  result.best_epoch = keeper.best_epoch();
  return result;
}

LmTrainResult train_rnnlm(const ExperimentConfig& cfg, const Dataset& data,
                          const fs::path& checkpoint_path) {
  cfg.validate();
  const auto& text = data.utterances(Split::kUnpairedText);
  if (text.empty()) throw DataError("unpaired_text split is empty");
  std::vector<std::vector<int>> dev;
  for (const auto& u : data.utterances(Split::kDev)) dev.push_back(u.labels);
  if (dev.empty()) throw DataError("dev split is empty");

  LmArch arch{data.vocabulary().size(), cfg.lm_hidden};
  LmParams params = LmParams::initialize(arch, derive_seed(cfg.seed, "lm/params"));
  OptimizerState opt = OptimizerState::zeros_like(params.tensors());

  LmTrainResult result;
  auto keep = [&](std::size_t epoch, double ppl) {
    result.best.params = params;
    result.best.vocab = data.vocabulary();
    result.best.info = {{"stage", "lm"},
                        {"epoch", std::to_string(epoch)},
                        {"dev_perplexity", fmt(ppl)},
                        {"seed", std::to_string(cfg.seed)}};
    if (!checkpoint_path.empty()) save_lm(checkpoint_path, result.best);
  };
  double best = perplexity(params, dev);
  result.log.push_back({0, 0.0, best});
  keep(0, best);
  const std::uint64_t stream = derive_seed(cfg.seed, "lm/batches");
  for (std::size_t epoch = 1; epoch <= cfg.lm_epochs; ++epoch) {
    double nll = 0.0;
    std::size_t symbols = 0;
    for (const LabelBatch& batch :
         text_batches(data, Split::kUnpairedText, cfg.batch_size, stream, epoch)) {
      std::size_t n = 0;
      for (const auto& s : batch.sequences) n += s.size() + 1;
      Graph g;
      LmNetwork net(g, params);
      Var loss = scale(sum(net.log_likelihood(batch)), -1.0 / static_cast<double>(n));
      g.backward(loss);
      ParamMap grads = g.parameter_grads();
      clip_gradients(grads, cfg.clip_norm);
      adadelta_step(params.tensors(), grads, opt, cfg.adadelta);
      nll += loss.value().item() * static_cast<double>(n);
      symbols += n;
    }
    const double ppl = perplexity(params, dev);
    result.log.push_back({epoch, nll / static_cast<double>(symbols), ppl});
    if (ppl < best) {
      best = ppl;
      keep(epoch, ppl);
    }
  }
  return result;
}

void write_lm_log(const fs::path& path, const std::vector<LmEpochRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write LM log " + path.string());
  out << "epoch,train_nll,dev_perplexity\n";
  for (const auto& r : log)
    out << r.epoch << ',' << fmt(r.train_nll) << ',' << fmt(r.dev_perplexity) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SweepRow> sweep_beta(const AsrCheckpoint& initial, const ExperimentConfig& cfg,
                                 const Dataset& data, const LmParams* lm) {
  cfg.validate();
  std::vector<SweepRow> rows;
  for (Variant v : cfg.sweep_variants)
    for (double b : cfg.sweep_betas) rows.push_back({v, b, std::nullopt, std::nullopt, ""});
  const auto refs = data.references(Split::kEval);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      try {
        ExperimentConfig c = cfg;
        c.objective.variant = row.variant;
        c.objective.beta = row.beta;
        TrainResult r = retrain(initial, c, data);
        ScoreReport s = score_corpus(
            refs, decode_split(r.best.params, r.best.vocab, data, Split::kEval, c.decode, lm,
                               c.eval_batch_size));
        row.cer = s.cer();
        row.wer = s.wer();
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const std::size_t n = std::min(cfg.workers, rows.size());
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sweep report " + path.string());
  out << "variant,beta,cer,wer\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g", r.beta);
    out << variant_name(r.variant) << ',' << buf << ',';
    if (r.cer) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", *r.cer, *r.wer);
      out << buf;
    } else {
      out << "NA,NA";
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string unpaired_type(Variant variant, double alpha, double beta) {
  if (variant == Variant::kInitial || alpha >= 1.0) return "-";
  if (beta >= 1.0) return "Speech";
  if (beta <= 0.0) return "Text";
  return "Both";
}

}  // namespace semiasr
