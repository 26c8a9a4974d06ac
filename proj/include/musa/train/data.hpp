// musa/train/data.hpp

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

#ifndef MUSA_TRAIN_DATA_HPP_
#define MUSA_TRAIN_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "musa/dsp/audio.hpp"

namespace musa::train {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One `utt_id<TAB>speaker<TAB>wav_path` record. Relative paths are resolved
/// against the manifest's directory.
struct ManifestEntry {
  std::string utt_id;
  std::string speaker;
  std::filesystem::path wav_path;
};

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
/// Throws ManifestError on malformed lines or an empty manifest.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Speaker name -> dense label, in sorted name order.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::vector<std::string> speakers);
  static LabelTable from_manifest(const std::vector<ManifestEntry>& entries);

  int label(const std::string& speaker) const;
  const std::vector<std::string>& speakers() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }
  /// crc32 of the newline-joined names, as 8 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

struct Utterance {
  std::string utt_id;
  int label = 0;
  dsp::Waveform audio;
  std::vector<int> tokens;  // teacher tokens, 50 per second
};

}  // namespace musa::train

#endif  // MUSA_TRAIN_DATA_HPP_
