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

#include "semiasr/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "semiasr/errors.hpp"
#include "semiasr/rng.hpp"

namespace semiasr {

const std::vector<Config::Key>& Config::schema() {
  static const std::vector<Key> keys = {
      {"run.seed", "1", "root seed; every stage derives its own stream from it"},
      {"corpus.alphabet", "abcdefg ", "transcript characters (quote to keep a space)"},
      {"corpus.speech_utterances", "1000", "paired plus unpaired speech utterances"},
      {"corpus.paired_fraction", "0.2", "share of speech utterances that keep transcripts"},
      {"corpus.text_utterances", "800", "unpaired text transcripts"},
      {"corpus.dev_utterances", "100", ""},
      {"corpus.eval_utterances", "100", ""},
      {"corpus.min_length", "3", "transcript length range, characters"},
      {"corpus.max_length", "10", ""},
      {"corpus.min_duration", "2", "frames per character range"},
      {"corpus.max_duration", "5", ""},
      {"corpus.noise_std", "0.3", ""},
      {"corpus.feat_dim", "16", ""},
      {"corpus.shift_bias", "", "comma-separated bias; empty draws one with shift_std"},
      {"corpus.shift_std", "0.25", ""},
      {"corpus.shift_scale", "1.0", ""},
      {"model.hidden", "32", ""},
      {"model.shared_layers", "1", "shared encoder depth, 1-4"},
      {"model.decoder_layers", "1", ""},
      {"model.subsample", "2", "front-end frame subsampling"},
      {"lm.hidden", "32", ""},
      {"lm.epochs", "8", ""},
      {"train.batch_size", "16", ""},
      {"train.initial_epochs", "15", ""},
      {"train.retrain_epochs", "10", ""},
      {"train.patience", "3", "early stopping on dev CER"},
      {"train.rho", "0.95", "adadelta decay"},
      {"train.epsilon", "1e-6", "adadelta epsilon"},
      {"train.clip_norm", "5", "global gradient norm cap, 0 disables"},
      {"train.eval_batch_size", "50", ""},
      {"objective.variant", "Retrain-cyc+idt", ""},
      {"objective.alpha", "0.5", "paired weight"},
      {"objective.beta", "0.4", "speech-to-text ratio"},
      {"objective.ctc_weight", "0.3", "CTC share of the paired loss"},
      {"objective.mmd_sigma", "auto", "RBF bandwidth or auto (median heuristic)"},
      {"objective.mmd_estimator", "biased", "biased or unbiased"},
      {"objective.max_len_factor", "1.5", "hypothesis cap for the cycle loss, times U"},
      {"decode.beam_width", "5", ""},
      {"decode.max_len_factor", "1.5", ""},
      {"decode.lm_weight", "0.3", "shallow fusion weight when an LM is given"},
      {"sweep.betas", "0,0.2,0.4,0.6,0.8,1", ""},
      {"sweep.variants", "Baseline,Retrain-idt,Retrain-cyc,Retrain-cyc+idt", ""},
      {"sweep.workers", "1", ""},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : schema()) values_[k.name] = k.default_value;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool needs_quotes(const std::string& v) {
  if (v.empty()) return false;
  return std::isspace(static_cast<unsigned char>(v.front())) ||
         std::isspace(static_cast<unsigned char>(v.back())) ||
         v.find_first_of("#;\"") != std::string::npos;
}

template <typename F>
auto typed(const std::string& key, const std::string& value, const char* what, F&& f) {
  try {
    std::size_t used = 0;
    auto v = f(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected " + what + ", got '" + value + "'");
  }
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config c;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string rest = trim(std::string_view(line).substr(eq + 1));
    std::string value;
    if (!rest.empty() && rest[0] == '"') {
      const auto close = rest.find('"', 1);
      if (close == std::string::npos) throw ConfigError(where + "unterminated quoted value");
      value = rest.substr(1, close - 1);
      const std::string tail = trim(std::string_view(rest).substr(close + 1));
      if (!tail.empty() && tail[0] != '#' && tail[0] != ';')
        throw ConfigError(where + "unexpected text after quoted value");
    } else {
      const auto hash = rest.find_first_of("#;");
      value = trim(std::string_view(rest).substr(0, hash == std::string::npos ? rest.size() : hash));
    }
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
    try {
      c.set(section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string section;
  for (const auto& k : schema()) {
    const auto dot = k.name.find('.');
    const std::string s = k.name.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << '[' << s << "]\n";
      section = s;
    }
    const std::string& v = values_.at(k.name);
    out << k.name.substr(dot + 1) << " = " << (needs_quotes(v) ? "\"" + v + "\"" : v);
    if (!k.help.empty()) out << "  # " << k.help;
    out << '\n';
  }
  return out.str();
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path.string());
  out << dump();
  if (!out) throw IoError("failed writing " + path.string());
}

ExperimentConfig Config::experiment() const {
  auto size = [&](const std::string& k) {
    return typed(k, get(k), "a non-negative integer", [](const std::string& s, std::size_t* u) {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
      return static_cast<std::size_t>(std::stoull(s, u));
    });
  };
  auto real = [&](const std::string& k) {
    return typed(k, get(k), "a number", [](const std::string& s, std::size_t* u) {
      return std::stod(s, u);
    });
  };
  auto list = [&](const std::string& k) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(get(k));
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  };
  auto reals = [&](const std::string& k) {
    std::vector<double> out;
    for (const auto& s : list(k))
      out.push_back(typed(k, s, "a list of numbers", [](const std::string& x, std::size_t* u) {
        return std::stod(x, u);
      }));
    return out;
  };
  auto wrap = [](const std::string& k, auto&& f) {
    try {
      return f();
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + k + "': " + e.what());
    }
  };

  ExperimentConfig e;
  const std::string& seed = get("run.seed");
  e.seed = typed("run.seed", seed, "an unsigned 64-bit integer",
                 [](const std::string& s, std::size_t* u) {
                   if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
                   return static_cast<std::uint64_t>(std::stoull(s, u));
                 });
  CorpusConfig& c = e.corpus;
  c.alphabet = get("corpus.alphabet");
  c.speech_utterances = size("corpus.speech_utterances");
  c.paired_fraction = real("corpus.paired_fraction");
  c.text_utterances = size("corpus.text_utterances");
  c.dev_utterances = size("corpus.dev_utterances");
  c.eval_utterances = size("corpus.eval_utterances");
  c.min_length = size("corpus.min_length");
  c.max_length = size("corpus.max_length");
  c.min_duration = size("corpus.min_duration");
  c.max_duration = size("corpus.max_duration");
  c.noise_std = real("corpus.noise_std");
  c.feat_dim = size("corpus.feat_dim");
  c.shift_bias = reals("corpus.shift_bias");
  c.shift_std = real("corpus.shift_std");
  c.shift_scale = real("corpus.shift_scale");
  c.seed = derive_seed(e.seed, "corpus");

  e.hidden = size("model.hidden");
  e.shared_layers = size("model.shared_layers");
  e.decoder_layers = size("model.decoder_layers");
  e.subsample = size("model.subsample");
  e.lm_hidden = size("lm.hidden");
  e.lm_epochs = size("lm.epochs");
  e.batch_size = size("train.batch_size");
  e.initial_epochs = size("train.initial_epochs");
  e.retrain_epochs = size("train.retrain_epochs");
  e.patience = size("train.patience");
  e.adadelta.rho = real("train.rho");
  e.adadelta.epsilon = real("train.epsilon");
  e.clip_norm = real("train.clip_norm");
  e.eval_batch_size = size("train.eval_batch_size");

  ObjectiveConfig& o = e.objective;
  o.variant = wrap("objective.variant", [&] { return parse_variant(get("objective.variant")); });
  o.alpha = real("objective.alpha");
  o.beta = real("objective.beta");
  o.ctc_weight = real("objective.ctc_weight");
  if (get("objective.mmd_sigma") != "auto") o.kernel.sigma = real("objective.mmd_sigma");
  const std::string& est = get("objective.mmd_estimator");
  if (est == "biased") o.kernel.estimator = MmdEstimator::kBiased;
  else if (est == "unbiased") o.kernel.estimator = MmdEstimator::kUnbiased;
  else throw ConfigError("config key 'objective.mmd_estimator': expected biased or unbiased");
  o.max_len_factor = real("objective.max_len_factor");

  e.decode.beam_width = size("decode.beam_width");
  e.decode.max_len_factor = real("decode.max_len_factor");
  e.decode.lm_weight = real("decode.lm_weight");

  e.sweep_betas = reals("sweep.betas");
  e.sweep_variants.clear();
  for (const auto& v : list("sweep.variants"))
    e.sweep_variants.push_back(wrap("sweep.variants", [&] { return parse_variant(v); }));
  e.workers = size("sweep.workers");
  e.validate();
  return e;
}

}  // namespace semiasr
