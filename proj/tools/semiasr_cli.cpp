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

// Command-line driver for the training pipeline. Uses only the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semiasr/semiasr.h"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageExit = 64;

// Raised with a C API status; main turns it into the exit code.
struct Failure {
  sasr_status status;
  std::string message;
};

void check(sasr_status s) {
  if (s != SASR_OK) throw Failure{s, sasr_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<sasr_config, Deleter<sasr_config, sasr_config_free>>;
using CorpusPtr = std::unique_ptr<sasr_corpus, Deleter<sasr_corpus, sasr_corpus_free>>;
using ModelPtr = std::unique_ptr<sasr_model, Deleter<sasr_model, sasr_model_free>>;
using LmPtr = std::unique_ptr<sasr_lm, Deleter<sasr_lm, sasr_lm_free>>;
using ReportPtr = std::unique_ptr<sasr_report, Deleter<sasr_report, sasr_report_free>>;

struct Common {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  int verbosity = 0;
};

std::string config_value(const sasr_config* cfg, const char* key) {
  std::size_t needed = 0;
  check(sasr_config_get(cfg, key, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(sasr_config_get(cfg, key, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

ConfigPtr resolve_config(const Common& c,
                         const std::vector<std::pair<std::string, std::string>>& flags) {
  sasr_config* raw = nullptr;
  if (c.config_path.empty()) check(sasr_config_new(&raw));
  else check(sasr_config_load(c.config_path.c_str(), &raw));
  ConfigPtr cfg(raw);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos)
      throw Failure{SASR_ERR_CONFIG, "--set expects key=value, got '" + o + "'"};
    check(sasr_config_set(cfg.get(), o.substr(0, eq).c_str(), o.substr(eq + 1).c_str()));
  }
  for (const auto& [k, v] : flags) check(sasr_config_set(cfg.get(), k.c_str(), v.c_str()));
  if (c.seed) check(sasr_config_set(cfg.get(), "run.seed", std::to_string(*c.seed).c_str()));
  check(sasr_config_validate(cfg.get()));
  return cfg;
}

fs::path prepare_output(const Common& c, const sasr_config* cfg, const std::string& stage) {
  fs::path out(c.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Failure{SASR_ERR_IO, "cannot create output directory " + out.string()};
  check(sasr_config_save(cfg, (out / ("resolved-" + stage + ".ini")).string().c_str()));
  return out;
}

CorpusPtr load_corpus(const std::string& manifest, const fs::path& out) {
  const fs::path path = manifest.empty() ? out / "corpus" / "manifest.jsonl" : fs::path(manifest);
  sasr_corpus* raw = nullptr;
  check(sasr_corpus_load(path.string().c_str(), &raw));
  return CorpusPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  if (!fs::exists(path)) throw Failure{SASR_ERR_IO, "checkpoint not found: " + path};
  sasr_model* raw = nullptr;
  check(sasr_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

LmPtr load_lm(const std::string& path) {
  if (path.empty()) return nullptr;
  if (!fs::exists(path)) throw Failure{SASR_ERR_IO, "LM checkpoint not found: " + path};
  sasr_lm* raw = nullptr;
  check(sasr_lm_load(path.c_str(), &raw));
  return LmPtr(raw);
}

std::string model_info(const sasr_model* m, const char* key) {
  std::size_t needed = 0;
  if (sasr_model_info(m, key, nullptr, 0, &needed) != SASR_OK) return "";
  std::string buf(needed, '\0');
  check(sasr_model_info(m, key, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string variant_file(std::string v) {
  for (char& ch : v)
    if (ch == '+') ch = '_';
  return v;
}

void print_progress(const char* line, void* user) {
  if (*static_cast<int*>(user) >= 0) std::fprintf(stderr, "%s\n", line);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised end-to-end speech recognition on a synthetic corpus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sasr_version()));

  Common common;
  const char* env_root = std::getenv("SEMIASR_OUTPUT_ROOT");
  common.output_dir = env_root && *env_root ? env_root : "runs";
  app.add_option("-c,--config", common.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("-o,--output", common.output_dir,
                 "Output directory (default: $SEMIASR_OUTPUT_ROOT or ./runs)");
  app.add_option("--seed", common.seed, "Override run.seed");
  app.add_option("--set", common.overrides, "Override a config key: section.key=value");
  app.add_flag("-v,--verbose", common.verbosity, "Print per-epoch progress");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress");

  std::string manifest;
  auto manifest_opt = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest,
                    "Corpus manifest (default: <output>/corpus/manifest.jsonl)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus under <output>/corpus");

  auto* init = app.add_subcommand("train-initial", "Supervised training on the paired split");
  manifest_opt(init);

  std::string init_ckpt, variant, lm_path;
  std::optional<double> alpha, beta, lm_weight;
  auto* re = app.add_subcommand("retrain", "Semi-supervised retraining of an initial model");
  manifest_opt(re);
  re->add_option("--init-checkpoint", init_ckpt, "Initial model checkpoint")->required();
  re->add_option("--variant", variant,
                 "Baseline, Retrain-idt, Retrain-cyc or Retrain-cyc+idt");
  re->add_option("--alpha", alpha, "Paired weight");
  re->add_option("--beta", beta, "Speech-to-text ratio");

  auto* lm = app.add_subcommand("train-lm", "Character RNN language model on unpaired text");
  manifest_opt(lm);

  std::string ckpt, split = "eval", out_file;
  bool greedy = false;
  std::optional<std::size_t> beam;
  auto* dec = app.add_subcommand("decode", "Transcribe a split");
  manifest_opt(dec);
  dec->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  dec->add_option("--lm", lm_path, "Language model checkpoint for shallow fusion");
  dec->add_option("--lm-weight", lm_weight, "Shallow fusion weight");
  dec->add_option("--beam", beam, "Beam width");
  dec->add_flag("--greedy", greedy, "Greedy decoding instead of beam search");
  dec->add_option("--split", split, "Split to decode")->capture_default_str();
  dec->add_option("--out", out_file, "Output file (default: <output>/decode-<split>.txt)");

  std::string hyp, csv, model_tag = "model", type_tag = "-", lm_tag = "No";
  auto* sc = app.add_subcommand("score", "CER/WER of a decode file against a split");
  manifest_opt(sc);
  sc->add_option("--hyp", hyp, "Decode output to score")->required()->check(CLI::ExistingFile);
  sc->add_option("--split", split, "Reference split")->capture_default_str();
  sc->add_option("--csv", csv, "Also write the per-utterance report here");
  sc->add_option("--model", model_tag, "Model column")->capture_default_str();
  sc->add_option("--type", type_tag, "Type column")->capture_default_str();
  sc->add_option("--lm-tag", lm_tag, "LM column")->capture_default_str();

  std::string betas, variants;
  std::optional<std::size_t> workers;
  auto* sw = app.add_subcommand("sweep-beta", "Retrain every variant over a list of betas");
  manifest_opt(sw);
  sw->add_option("--init-checkpoint", init_ckpt, "Initial model checkpoint")->required();
  sw->add_option("--lm", lm_path, "Language model checkpoint for evaluation decoding");
  sw->add_option("--betas", betas, "Comma-separated betas");
  sw->add_option("--variants", variants, "Comma-separated variants");
  sw->add_option("--workers", workers, "Parallel cells");
  sw->add_option("--out", out_file, "CSV path (default: <output>/sweep.csv)");

  bool speech_only = false, text_only = false, projection = false;
  auto* ex = app.add_subcommand("export-embeddings", "Dump inter-domain embeddings as CSV");
  manifest_opt(ex);
  ex->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  ex->add_option("--split", split, "Split to export")->capture_default_str();
  ex->add_flag("--speech-only", speech_only, "Export speech embeddings only");
  ex->add_flag("--text-only", text_only, "Export text embeddings only");
  ex->add_flag("--projection", projection, "Append a two-component linear projection");
  ex->add_option("--out", out_file, "CSV path (default: <output>/embeddings-<split>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "semiasr: usage error: %s\n", e.what());
    std::fprintf(stderr, "Run with --help for usage.\n");
    return kUsageExit;
  }

  int progress_level = quiet ? -1 : common.verbosity;
  sasr_set_progress_callback(print_progress, &progress_level);
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  try {
    std::vector<std::pair<std::string, std::string>> flags;
    if (name == "retrain") {
      if (!variant.empty()) flags.emplace_back("objective.variant", variant);
      if (alpha) flags.emplace_back("objective.alpha", std::to_string(*alpha));
      if (beta) flags.emplace_back("objective.beta", std::to_string(*beta));
    } else if (name == "decode") {
      if (lm_weight) flags.emplace_back("decode.lm_weight", std::to_string(*lm_weight));
      if (beam) flags.emplace_back("decode.beam_width", std::to_string(*beam));
    } else if (name == "sweep-beta") {
      if (!betas.empty()) flags.emplace_back("sweep.betas", betas);
      if (!variants.empty()) flags.emplace_back("sweep.variants", variants);
      if (workers) flags.emplace_back("sweep.workers", std::to_string(*workers));
    }
    if (name == "export-embeddings" && speech_only && text_only)
      throw Failure{SASR_ERR_INVALID_ARGUMENT, "--speech-only and --text-only are exclusive"};
    if ((name == "retrain" || name == "sweep-beta") && !fs::exists(init_ckpt))
      throw Failure{SASR_ERR_IO, "initial checkpoint not found: " + init_ckpt};
    if ((name == "decode" || name == "export-embeddings") && !fs::exists(ckpt))
      throw Failure{SASR_ERR_IO, "checkpoint not found: " + ckpt};

    ConfigPtr cfg = resolve_config(common, flags);
    const fs::path out = prepare_output(common, cfg.get(), name);

    if (sub == gen) {
      const fs::path dir = out / "corpus";
      check(sasr_generate_corpus(cfg.get(), dir.string().c_str()));
      std::printf("corpus written to %s\n", (dir / "manifest.jsonl").string().c_str());
    } else if (sub == init) {
      CorpusPtr corpus = load_corpus(manifest, out);
      const fs::path path = out / "initial.ckpt";
      sasr_model* raw = nullptr;
      check(sasr_train_initial(cfg.get(), corpus.get(), path.string().c_str(),
                               (out / "initial-log.csv").string().c_str(), &raw));
      ModelPtr model(raw);
      std::printf("initial model: %s (epoch %s, dev CER %.2f%%)\n", path.string().c_str(),
                  model_info(model.get(), "epoch").c_str(),
                  100.0 * std::atof(model_info(model.get(), "dev_cer").c_str()));
    } else if (sub == re) {
      ModelPtr initial = load_model(init_ckpt);
      CorpusPtr corpus = load_corpus(manifest, out);
      const std::string v = variant_file(config_value(cfg.get(), "objective.variant"));
      const fs::path path = out / (v + ".ckpt");
      sasr_model* raw = nullptr;
      check(sasr_retrain(cfg.get(), corpus.get(), initial.get(), path.string().c_str(),
                         (out / (v + "-log.csv")).string().c_str(), &raw));
      ModelPtr model(raw);
      std::printf("retrained model: %s (epoch %s, dev CER %.2f%%)\n", path.string().c_str(),
                  model_info(model.get(), "epoch").c_str(),
                  100.0 * std::atof(model_info(model.get(), "dev_cer").c_str()));
    } else if (sub == lm) {
      CorpusPtr corpus = load_corpus(manifest, out);
      const fs::path path = out / "lm.ckpt";
      check(sasr_train_lm(cfg.get(), corpus.get(), path.string().c_str(),
                          (out / "lm-log.csv").string().c_str(), nullptr));
      std::printf("language model: %s\n", path.string().c_str());
    } else if (sub == dec) {
      ModelPtr model = load_model(ckpt);
      LmPtr lmodel = load_lm(lm_path);
      CorpusPtr corpus = load_corpus(manifest, out);
      const fs::path path = out_file.empty() ? out / ("decode-" + split + ".txt") : fs::path(out_file);
      check(sasr_decode(cfg.get(), model.get(), lmodel.get(), corpus.get(), split.c_str(),
                        greedy ? 1 : 0, path.string().c_str()));
      std::printf("hypotheses written to %s\n", path.string().c_str());
    } else if (sub == sc) {
      CorpusPtr corpus = load_corpus(manifest, out);
      sasr_report* raw = nullptr;
      check(sasr_score(corpus.get(), split.c_str(), hyp.c_str(), model_tag.c_str(),
                       type_tag.c_str(), lm_tag.c_str(), &raw));
      ReportPtr report(raw);
      if (!csv.empty()) check(sasr_report_write_csv(report.get(), csv.c_str()));
      const sasr_report* list[] = {report.get()};
      std::size_t needed = 0;
      check(sasr_report_table(list, 1, nullptr, 0, &needed));
      std::string table(needed, '\0');
      check(sasr_report_table(list, 1, table.data(), table.size(), &needed));
      std::fputs(table.c_str(), stdout);
      std::printf("CER %.2f WER %.2f\n", 100.0 * sasr_report_cer(report.get()),
                  100.0 * sasr_report_wer(report.get()));
    } else if (sub == sw) {
      ModelPtr initial = load_model(init_ckpt);
      LmPtr lmodel = load_lm(lm_path);
      CorpusPtr corpus = load_corpus(manifest, out);
      const fs::path path = out_file.empty() ? out / "sweep.csv" : fs::path(out_file);
      std::size_t failed = 0;
      check(sasr_sweep_beta(cfg.get(), corpus.get(), initial.get(), lmodel.get(),
                            path.string().c_str(), &failed));
      std::printf("sweep written to %s\n", path.string().c_str());
      if (failed > 0) {
        std::fprintf(stderr, "semiasr sweep-beta: %zu cell(s) failed\n", failed);
        return static_cast<int>(SASR_ERR_DATA);
      }
    } else if (sub == ex) {
      ModelPtr model = load_model(ckpt);
      CorpusPtr corpus = load_corpus(manifest, out);
      const fs::path path =
          out_file.empty() ? out / ("embeddings-" + split + ".csv") : fs::path(out_file);
      std::size_t rows = 0;
      check(sasr_export_embeddings(model.get(), corpus.get(), split.c_str(), !text_only,
                                   !speech_only, projection ? 1 : 0, path.string().c_str(),
                                   &rows));
      std::printf("%zu embedding rows written to %s\n", rows, path.string().c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "semiasr %s: %s: %s\n", name.c_str(), sasr_status_string(f.status),
                 f.message.c_str());
    return static_cast<int>(f.status);
  }
  return 0;
}
