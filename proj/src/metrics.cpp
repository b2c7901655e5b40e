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

#include "semiasr/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "semiasr/errors.hpp"

namespace semiasr {

double EditCounts::rate() const {
  const std::size_t n = ref_length();
  if (n == 0) return edits() == 0 ? 0.0 : 1.0;
  return static_cast<double>(edits()) / static_cast<double>(n);
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  hits += o.hits;
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  return *this;
}

namespace {

enum class Move : unsigned char { kNone, kDiag, kDel, kIns };

// Lexicographic cost: edits, then fewer hits loses, then substitutions.
using Cost = std::tuple<std::size_t, std::ptrdiff_t, std::size_t>;

}  // namespace

AlignmentResult align(const std::vector<Token>& ref, const std::vector<Token>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<Cost> cost((n + 1) * w);
  std::vector<Move> move((n + 1) * w, Move::kNone);
  for (std::size_t i = 1; i <= n; ++i) {
    cost[i * w] = {i, 0, 0};
    move[i * w] = Move::kDel;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    cost[j] = {j, 0, 0};
    move[j] = Move::kIns;
  }
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      auto [e, h, s] = cost[(i - 1) * w + j - 1];
      const bool hit = ref[i - 1] == hyp[j - 1];
      Cost best = hit ? Cost{e, h - 1, s} : Cost{e + 1, h, s + 1};
      Move choice = Move::kDiag;
      auto [de, dh, ds] = cost[(i - 1) * w + j];
      if (Cost c{de + 1, dh, ds}; c < best) best = c, choice = Move::kDel;
      auto [ie, ih, is] = cost[i * w + j - 1];
      if (Cost c{ie + 1, ih, is}; c < best) best = c, choice = Move::kIns;
      cost[i * w + j] = best;
      move[i * w + j] = choice;
    }

  AlignmentResult out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (move[i * w + j]) {
      case Move::kDiag:
        if (ref[i - 1] == hyp[j - 1]) ++out.counts.hits;
        else ++out.counts.substitutions;
        out.pairs.push_back({ref[i - 1], hyp[j - 1]});
        --i, --j;
        break;
      case Move::kDel:
        ++out.counts.deletions;
        out.pairs.push_back({ref[i - 1], std::nullopt});
        --i;
        break;
      case Move::kIns:
        ++out.counts.insertions;
        out.pairs.push_back({std::nullopt, hyp[j - 1]});
        --j;
        break;
      case Move::kNone:
        throw Error("alignment backtrace failed");
    }
  }
  std::reverse(out.pairs.begin(), out.pairs.end());
  return out;
}

std::vector<Token> tokenize(std::string_view text, Unit unit) {
  std::vector<Token> out;
  if (unit == Unit::kChar) {
    for (char c : text) out.emplace_back(1, c);
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_decode_output(const std::filesystem::path& path,
                         const std::vector<DecodeRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write decode output " + path.string());
  char buf[64];
  for (const auto& r : records) {
    if (r.id.find_first_of("\t\n") != std::string::npos ||
        r.text.find_first_of("\t\n") != std::string::npos)
      throw DataError("decode record '" + r.id + "' contains a tab or newline");
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.id << '\t' << r.text << '\t' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DecodeRecord> read_decode_output(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read decode output " + path.string());
  std::vector<DecodeRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected id<TAB>text<TAB>score");
    DecodeRecord r;
    r.id = line.substr(0, a);
    r.text = line.substr(a + 1, b - a - 1);
    try {
      std::size_t used = 0;
      const std::string s = line.substr(b + 1);
      r.score = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad score");
    }
    out.push_back(std::move(r));
  }
  return out;
}

ScoreReport score_corpus(const std::vector<std::pair<std::string, std::string>>& refs,
                         const std::vector<DecodeRecord>& hyps) {
  std::unordered_map<std::string, const DecodeRecord*> by_id;
  std::vector<std::string> duplicate;
  for (const auto& h : hyps)
    if (!by_id.emplace(h.id, &h).second) duplicate.push_back(h.id);
  if (!duplicate.empty()) {
    std::string msg = "duplicate hypothesis ids:";
    for (const auto& id : duplicate) msg += " " + id;
    throw DataError(msg);
  }
  std::vector<std::string> missing, unknown;
  std::unordered_map<std::string, bool> known;
  for (const auto& [id, text] : refs) {
    known[id] = true;
    if (!by_id.count(id)) missing.push_back(id);
  }
  for (const auto& h : hyps)
    if (!known.count(h.id)) unknown.push_back(h.id);
  if (!missing.empty() || !unknown.empty()) {
    std::string msg;
    if (!missing.empty()) {
      msg += "utterances without a hypothesis:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (!unknown.empty()) {
      if (!msg.empty()) msg += "; ";
      msg += "hypotheses for unknown utterances:";
      for (const auto& id : unknown) msg += " " + id;
    }
    throw DataError(msg);
  }

  ScoreReport report;
  for (const auto& [id, ref] : refs) {
    const std::string& hyp = by_id.at(id)->text;
    UtteranceScore u{id, ref, hyp, {}, {}};
    u.chars = align(tokenize(ref, Unit::kChar), tokenize(hyp, Unit::kChar)).counts;
    u.words = align(tokenize(ref, Unit::kWord), tokenize(hyp, Unit::kWord)).counts;
    report.chars += u.chars;
    report.words += u.words;
    report.utterances.push_back(std::move(u));
  }
  return report;
}

EditCounts score_corpus(const std::vector<std::pair<std::string, std::string>>& refs,
                        const std::vector<DecodeRecord>& hyps, Unit unit) {
  ScoreReport r = score_corpus(refs, hyps);
  return unit == Unit::kChar ? r.chars : r.words;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_counts(std::ostream& out, const ScoreReport& r, const std::string& id,
                  const char* unit, const EditCounts& c) {
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.6f", c.rate());
  out << csv_field(r.model) << ',' << csv_field(r.type) << ',' << csv_field(r.lm) << ','
      << csv_field(id) << ',' << unit << ',' << c.ref_length() << ',' << c.hits << ','
      << c.substitutions << ',' << c.deletions << ',' << c.insertions << ',' << rate
      << '\n';
}

}  // namespace

void write_score_csv(const std::filesystem::path& path, const ScoreReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write score report " + path.string());
  out << "model,type,lm,id,unit,ref_len,hits,substitutions,deletions,insertions,rate\n";
  write_counts(out, report, "*", "char", report.chars);
  write_counts(out, report, "*", "word", report.words);
  for (const auto& u : report.utterances) {
    write_counts(out, report, u.id, "char", u.chars);
    write_counts(out, report, u.id, "word", u.words);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_score_table(const std::vector<ScoreReport>& reports) {
  std::vector<std::array<std::string, 5>> rows{{"Model", "Type", "LM", "CER", "WER"}};
  char buf[32];
  for (const auto& r : reports) {
    std::array<std::string, 5> row{r.model, r.type, r.lm, "", ""};
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.cer());
    row[3] = buf;
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.wer());
    row[4] = buf;
    rows.push_back(std::move(row));
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : rows)
    for (std::size_t k = 0; k < 5; ++k) width[k] = std::max(width[k], row[k].size());
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < 5; ++k) {
      if (k) out << " | ";
      const std::string& cell = rows[r][k];
      const std::string pad(width[k] - cell.size(), ' ');
      out << (k >= 3 ? pad + cell : cell + (k == 4 ? "" : pad));
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t k = 0; k < 5; ++k) out << (k ? "-+-" : "") << std::string(width[k], '-');
      out << '\n';
    }
  }
  return out.str();
}

Tensor principal_directions(const Tensor& rows) {
  const auto n = static_cast<Eigen::Index>(rows.rows());
  const auto d = static_cast<Eigen::Index>(rows.cols());
  if (n == 0 || d == 0) throw DataError("cannot fit a projection to no rows");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      rows.data(), n, d);
  Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centred.transpose() * centred;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("eigen decomposition failed");
  Tensor out = Tensor::zeros({rows.cols(), 2});
  for (Eigen::Index k = 0; k < 2; ++k) {
    // Eigenvalues come in increasing order.
    const Eigen::Index col = d - 1 - k;
    if (col < 0) break;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (Eigen::Index i = 0; i < d; ++i) out.at(i, k) = v(i);
  }
  return out;
}

std::size_t export_embeddings(const ModelParams& params, const EmbeddingExport& what,
                              const std::filesystem::path& path) {
  struct Block {
    std::string id;
    const char* source;
    Tensor vectors;
  };
  std::vector<Block> blocks;
  for (const auto& x : what.speech)
    blocks.push_back({x.id, "speech", encode_speech(params, x).vectors});
  for (const auto& [id, y] : what.text)
    blocks.push_back({id, "text", embed_text(params, y).vectors});
  if (blocks.empty()) throw DataError("nothing to export");

  const std::size_t h = params.arch().hidden;
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.vectors.rows();
  Tensor proj;
  Eigen::RowVectorXd centre;
  if (what.projection) {
    Tensor pooled = Tensor::zeros({total, h});
    std::size_t r = 0;
    for (const auto& b : blocks)
      for (std::size_t i = 0; i < b.vectors.rows(); ++i, ++r)
        for (std::size_t k = 0; k < h; ++k) pooled.at(r, k) = b.vectors.at(i, k);
    proj = principal_directions(pooled);
    centre = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(h));
    for (std::size_t i = 0; i < total; ++i)
      for (std::size_t k = 0; k < h; ++k) centre(k) += pooled.at(i, k);
    centre /= static_cast<double>(total);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings " + path.string());
  out << "utt_id,source,frame";
  for (std::size_t k = 0; k < h; ++k) out << ",e" << k;
  if (what.projection) out << ",pc1,pc2";
  out << '\n';
  char buf[40];
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.vectors.rows(); ++i) {
      out << csv_field(b.id) << ',' << b.source << ',' << i;
      for (std::size_t k = 0; k < h; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", b.vectors.at(i, k));
        out << ',' << buf;
      }
      if (what.projection)
        for (std::size_t c = 0; c < 2; ++c) {
          double s = 0.0;
          for (std::size_t k = 0; k < h; ++k)
            s += (b.vectors.at(i, k) - centre(k)) * proj.at(k, c);
          std::snprintf(buf, sizeof buf, "%.17g", s);
          out << ',' << buf;
        }
      out << '\n';
    }
  if (!out) throw IoError("failed writing " + path.string());
  return total;
}

}  // namespace semiasr
