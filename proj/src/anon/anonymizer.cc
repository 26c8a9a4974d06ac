// anon/anonymizer.cc

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

#include "musa/anon/anonymizer.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "json.hpp"
#include "musa/io/files.hpp"

namespace musa::anon {

void anonymize_file(const Model& m, const AnonymizationRequest& req) {
  auto w = dsp::load_waveform(req.input);
  dsp::save_waveform(anonymize(m, w, req.alpha), req.output);
}

std::size_t CorpusReport::succeeded() const {
  return static_cast<std::size_t>(std::count_if(files.begin(), files.end(), [](const auto& f) { return f.status == "ok"; }));
}

std::size_t CorpusReport::failed() const { return files.size() - succeeded(); }

std::string CorpusReport::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    nlohmann::ordered_json j;
    j["utt_id"] = f.utt_id;
    j["status"] = f.status;
    j["out_path"] = f.out_path.string();
    j["alpha"] = f.alpha;
    if (!f.error.empty()) j["error"] = f.error;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

CorpusReport anonymize_corpus(const Model& m, const std::vector<train::ManifestEntry>& manifest, double alpha,
                              const std::filesystem::path& out_dir, int jobs) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("anonymize_corpus: alpha must be in [0, 1]");
  std::filesystem::create_directories(out_dir);
  CorpusReport report;
  report.files.resize(manifest.size());
  // utt_ids name the outputs, so a repeated id would overwrite another file.
  std::set<std::string> seen;
  std::vector<bool> duplicate(manifest.size(), false);
  for (std::size_t i = 0; i < manifest.size(); ++i) duplicate[i] = !seen.insert(manifest[i].utt_id).second;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.size(); i = next++) {
      const auto& e = manifest[i];
      auto& r = report.files[i];
      r.utt_id = e.utt_id;
      r.alpha = alpha;
      r.out_path = out_dir / (e.utt_id + ".wav");
      try {
        if (duplicate[i]) throw std::runtime_error("duplicate utt_id " + e.utt_id);
        anonymize_file(m, {e.wav_path, alpha, r.out_path});
        r.status = "ok";
      } catch (const std::exception& ex) {
        r.status = "failed";
        r.error = ex.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(manifest.size())));
  std::vector<std::thread> workers;
  for (int t = 1; t < n; ++t) workers.emplace_back(worker);
  worker();
  for (auto& t : workers) t.join();
  io::write_text_atomic(out_dir / "report.json", report.to_json());
  return report;
}

}  // namespace musa::anon
