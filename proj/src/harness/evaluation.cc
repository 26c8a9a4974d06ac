// harness/evaluation.cc

// Copyright 2026  The musa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "musa/harness/harness.hpp"
#include "musa/io/files.hpp"

namespace musa::harness {

Scenario parse_scenario(const std::string& name) {
  if (name == "ignorant") return Scenario::kIgnorant;
  if (name == "lazy-informed") return Scenario::kLazyInformed;
  throw std::invalid_argument("unknown scenario '" + name + "' (expected ignorant or lazy-informed)");
}

std::string scenario_name(Scenario s) { return s == Scenario::kIgnorant ? "ignorant" : "lazy-informed"; }

std::vector<TrialKey> parse_trial_list(const std::string& text) {
  std::vector<TrialKey> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, '\t');) f.push_back(tok);
    if (f.size() != 3 || (f[2] != "target" && f[2] != "nontarget")) {
      throw std::invalid_argument("trial list line " + std::to_string(line_no) +
                                  ": expected enroll<TAB>test<TAB>target|nontarget");
    }
    out.push_back({f[0], f[1], f[2] == "target"});
  }
  return out;
}

std::vector<TrialKey> read_trial_list(const fs::path& path) { return parse_trial_list(io::read_text(path)); }

nlohmann::ordered_json ScenarioResult::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["eer"] = eer.eer;
  j["threshold"] = eer.threshold;
  j["num_target"] = num_target;
  j["num_nontarget"] = num_nontarget;
  return j;
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const std::vector<TrialKey>& trials,
                            const std::vector<train::ManifestEntry>& manifest, const fs::path& out_dir) {
  if (trials.empty()) throw std::invalid_argument("run_scenario: empty trial list");
  if (spec.scenario == Scenario::kLazyInformed && spec.enrollment_checkpoint.empty())
    throw std::invalid_argument("run_scenario: lazy-informed needs a second checkpoint for the enrollment side");
  std::map<std::string, fs::path> wav;
  for (const auto& e : manifest) wav[e.utt_id] = e.wav_path;
  auto audio = [&](const std::string& id) {
    auto it = wav.find(id);
    if (it == wav.end()) throw std::invalid_argument("run_scenario: utterance '" + id + "' is not in the manifest");
    return dsp::load_waveform(it->second);
  };
  std::unique_ptr<anon::Model> evaluated, attacker;
  if (!spec.checkpoint.empty()) evaluated = train::model_from_checkpoint(train::load_checkpoint(spec.checkpoint));
  if (spec.scenario == Scenario::kLazyInformed)
    attacker = train::model_from_checkpoint(train::load_checkpoint(spec.enrollment_checkpoint));
  auto provider = make_provider(spec.scorer, evaluated ? evaluated.get() : attacker.get());

  std::map<std::string, Eigen::VectorXd> enroll, test;
  for (const auto& t : trials) {
    if (!enroll.count(t.enroll_id)) {
      auto w = audio(t.enroll_id);
      enroll[t.enroll_id] = provider->embed(attacker ? anon::anonymize(*attacker, w, spec.alpha) : w);
    }
    if (!test.count(t.test_id)) {
      auto w = audio(t.test_id);
      test[t.test_id] = provider->embed(evaluated ? anon::anonymize(*evaluated, w, spec.alpha) : w);
    }
  }
  std::vector<Eigen::VectorXd> all;
  for (const auto& [id, e] : enroll) all.push_back(e);
  for (const auto& [id, e] : test) all.push_back(e);
  provider->fit(all);

  ScenarioResult r;
  r.scenario = scenario_name(spec.scenario);
  for (const auto& t : trials) {
    r.scores.push_back({t.enroll_id, t.test_id, provider->score(enroll[t.enroll_id], test[t.test_id]), t.is_target});
    (t.is_target ? r.num_target : r.num_nontarget) += 1;
  }
  r.eer = metrics::compute_eer(r.scores);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    io::write_text_atomic(out_dir / kScenarioFile, r.to_json().dump(2) + "\n");
    metrics::write_trials(r.scores, out_dir / kScoresFile);
  }
  return r;
}

// ------------------------------------------------------------------ voice distinctiveness

nlohmann::ordered_json VoiceDistinctiveness::to_json() const {
  nlohmann::ordered_json j;
  j["speakers"] = oo.speakers;
  j["d_oo"] = metrics::diag_dominance(oo);
  j["d_aa"] = metrics::diag_dominance(aa);
  j["gvd"] = gvd;
  return j;
}

VoiceDistinctiveness voice_distinctiveness(const std::vector<std::string>& speakers,
                                           const std::vector<std::vector<dsp::Waveform>>& original,
                                           const std::vector<std::vector<dsp::Waveform>>& anonymized,
                                           ScoreProvider& provider) {
  if (original.size() != speakers.size() || anonymized.size() != speakers.size())
    throw std::invalid_argument("voice_distinctiveness: group count does not match the speaker list");
  using Groups = std::vector<std::vector<Eigen::VectorXd>>;
  Groups o(speakers.size()), a(speakers.size());
  std::vector<Eigen::VectorXd> all;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (original[i].size() != anonymized[i].size())
      throw std::invalid_argument("voice_distinctiveness: speaker " + speakers[i] + " has unpaired utterances");
    for (const auto& w : original[i]) all.push_back(o[i].emplace_back(provider.embed(w)));
    for (const auto& w : anonymized[i]) all.push_back(a[i].emplace_back(provider.embed(w)));
  }
  provider.fit(all);
  metrics::ScoreFn<Eigen::VectorXd> score = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return provider.score(x, y);
  };
  VoiceDistinctiveness vd;
  vd.oo = metrics::similarity_matrix(speakers, o, o, score);
  vd.oa = metrics::similarity_matrix(speakers, o, a, score);
  vd.ao = metrics::similarity_matrix(speakers, a, o, score);
  vd.aa = metrics::similarity_matrix(speakers, a, a, score);
  vd.gvd = metrics::gvd(vd.oo, vd.aa);
  return vd;
}

void write_voice_distinctiveness(const VoiceDistinctiveness& vd, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  io::write_text_atomic(out_dir / "m_oo.csv", metrics::to_csv(vd.oo));
  io::write_text_atomic(out_dir / "m_oa.csv", metrics::to_csv(vd.oa));
  io::write_text_atomic(out_dir / "m_ao.csv", metrics::to_csv(vd.ao));
  io::write_text_atomic(out_dir / "m_aa.csv", metrics::to_csv(vd.aa));
  io::write_text_atomic(out_dir / kGvdFile, vd.to_json().dump(2) + "\n");
}

VoiceDistinctiveness read_voice_distinctiveness(const fs::path& dir) {
  VoiceDistinctiveness vd;
  vd.oo = metrics::parse_csv(io::read_text(dir / "m_oo.csv"));
  vd.oa = metrics::parse_csv(io::read_text(dir / "m_oa.csv"));
  vd.ao = metrics::parse_csv(io::read_text(dir / "m_ao.csv"));
  vd.aa = metrics::parse_csv(io::read_text(dir / "m_aa.csv"));
  vd.gvd = metrics::gvd(vd.oo, vd.aa);
  return vd;
}

// ------------------------------------------------------------------ text metrics

std::map<std::string, std::string> read_transcripts(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(io::read_text(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    const auto end = line.find_first_of(" \t", start);
    const std::string id = line.substr(start, end - start);
    std::string text = end == std::string::npos ? "" : line.substr(end + 1);
    if (!out.emplace(id, std::move(text)).second) throw std::invalid_argument(path.string() + ": duplicate id " + id);
  }
  return out;
}

metrics::WerResult corpus_wer(const std::map<std::string, std::string>& ref,
                              const std::map<std::string, std::string>& hyp, bool characters) {
  auto split = characters ? metrics::split_chars : metrics::split_words;
  metrics::WerResult total;
  for (const auto& [id, text] : ref) {
    const auto r = split(text);
    if (r.empty()) continue;
    auto it = hyp.find(id);
    auto w = metrics::compute_wer(r, it == hyp.end() ? std::vector<std::string>{} : split(it->second));
    total.substitutions += w.substitutions;
    total.deletions += w.deletions;
    total.insertions += w.insertions;
    total.ref_length += w.ref_length;
  }
  if (total.ref_length == 0) throw metrics::MetricError("corpus_wer: reference is empty");
  total.wer = static_cast<double>(total.errors()) / total.ref_length;
  return total;
}

double pitch_correlation_files(const fs::path& a, const fs::path& b) {
  auto pa = dsp::extract_pitch(dsp::load_waveform(a));
  auto pb = dsp::extract_pitch(dsp::load_waveform(b));
  const auto n = std::min(pa.size(), pb.size());
  pa.f0.conservativeResize(n);
  pa.voiced.resize(static_cast<std::size_t>(n));
  pb.f0.conservativeResize(n);
  pb.voiced.resize(static_cast<std::size_t>(n));
  return metrics::pitch_correlation(pa, pb);
}

// ------------------------------------------------------------------ plots

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string gvd_matrix_svg(const VoiceDistinctiveness& vd) {
  const auto n = vd.oo.values.rows();
  Eigen::MatrixXd big(2 * n, 2 * n);
  big << vd.oo.values, vd.oa.values, vd.ao.values, vd.aa.values;
  const double lo = big.minCoeff(), hi = big.maxCoeff();
  const int cell = std::max(12, static_cast<int>(360 / std::max<Eigen::Index>(1, 2 * n)));
  const int margin = 90, size = cell * static_cast<int>(2 * n);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + margin + 20 << "\" height=\"" << size + margin + 40
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << margin << "\" y=\"16\">voice similarity, G_vd = " << fmt("%.2f", vd.gvd) << " dB</text>\n";
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    for (Eigen::Index j = 0; j < 2 * n; ++j) {
      const double t = hi > lo ? (big(i, j) - lo) / (hi - lo) : 0.5;
      const int r = static_cast<int>(255 - 225 * t), g = static_cast<int>(255 - 170 * t), b = static_cast<int>(255 - 80 * t);
      s << "<rect x=\"" << margin + j * cell << "\" y=\"" << margin + i * cell << "\" width=\"" << cell << "\" height=\""
        << cell << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\"><title>" << fmt("%.4f", big(i, j))
        << "</title></rect>\n";
    }
  }
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const std::string label = (i < n ? "O:" : "A:") + xml_escape(vd.oo.speakers[static_cast<std::size_t>(i % n)]);
    s << "<text x=\"" << margin - 4 << "\" y=\"" << margin + i * cell + cell * 0.7 << "\" text-anchor=\"end\">" << label
      << "</text>\n";
    s << "<text transform=\"translate(" << margin + i * cell + cell * 0.7 << "," << margin - 4
      << ") rotate(-90)\">" << label << "</text>\n";
  }
  s << "<line x1=\"" << margin + n * cell << "\" y1=\"" << margin << "\" x2=\"" << margin + n * cell << "\" y2=\""
    << margin + size << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << margin << "\" y1=\"" << margin + n * cell << "\" x2=\"" << margin + size << "\" y2=\""
    << margin + n * cell << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << margin << "\" y=\"" << margin + size + 20 << "\">range " << fmt("%.3f", lo) << " (light) to "
    << fmt("%.3f", hi) << " (dark)</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string loss_curve_svg(const std::vector<train::StepLog>& log, const std::vector<std::string>& terms) {
  const int w = 640, h = 360, left = 60, right = 120, top = 20, bottom = 40;
  double max_step = 1, lo = INFINITY, hi = -INFINITY;
  std::vector<std::vector<std::pair<double, double>>> series(terms.size());
  for (const auto& s : log) {
    max_step = std::max(max_step, static_cast<double>(s.step));
    for (std::size_t k = 0; k < terms.size(); ++k) {
      for (const auto& [name, v] : s.values) {
        if (name == terms[k] && v > 0.0 && std::isfinite(v)) {
          series[k].emplace_back(static_cast<double>(s.step), std::log10(v));
          lo = std::min(lo, std::log10(v));
          hi = std::max(hi, std::log10(v));
        }
      }
    }
  }
  if (!(hi >= lo)) lo = 0, hi = 1;
  if (hi == lo) hi = lo + 1;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const double pw = w - left - right, ph = h - top - bottom;
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left << "\" y=\"" << h - 10 << "\">step (max " << static_cast<long>(max_step)
    << "), log10 value " << fmt("%.2f", lo) << " .. " << fmt("%.2f", hi) << "</text>\n";
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const char* color = colors[k % 7];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (auto [x, y] : series[k])
      s << fmt("%.1f", left + pw * x / max_step) << "," << fmt("%.1f", top + ph * (1 - (y - lo) / (hi - lo))) << " ";
    s << "\"/>\n";
    s << "<text x=\"" << w - right + 8 << "\" y=\"" << top + 14 * (k + 1) << "\" fill=\"" << color << "\">"
      << xml_escape(terms[k]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace musa::harness
