// train/data.cc

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

#include "musa/train/data.hpp"

#include <algorithm>
#include <sstream>

#include "musa/io/files.hpp"

namespace musa::train {

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ManifestError("manifest line " + std::to_string(line_no) +
                          ": expected utt_id<TAB>speaker<TAB>wav_path");
    }
    std::filesystem::path p = fields[2];
    if (p.is_relative()) p = base_dir / p;
    out.push_back({fields[0], fields[1], p.lexically_normal()});
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ManifestError(e.what());
  }
  auto entries = parse_manifest(text, path.parent_path());
  if (entries.empty()) throw ManifestError("manifest " + path.string() + " has no entries");
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) text += e.utt_id + "\t" + e.speaker + "\t" + e.wav_path.generic_string() + "\n";
  io::write_text_atomic(path, text);
}

LabelTable::LabelTable(std::vector<std::string> speakers) : names_(std::move(speakers)) {
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<int>(i);
}

LabelTable LabelTable::from_manifest(const std::vector<ManifestEntry>& entries) {
  std::vector<std::string> names;
  for (const auto& e : entries) names.push_back(e.speaker);
  return LabelTable(std::move(names));
}

int LabelTable::label(const std::string& speaker) const {
  auto it = index_.find(speaker);
  if (it == index_.end()) throw std::out_of_range("unknown speaker " + speaker);
  return it->second;
}

std::string LabelTable::hash() const {
  std::string joined;
  for (const auto& n : names_) joined += n + "\n";
  return io::hex32(io::crc32(std::span<const char>(joined.data(), joined.size())));
}

}  // namespace musa::train
