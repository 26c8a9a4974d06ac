// io/sealed.cc

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

#include <cstring>

#include "musa/io/matrix_io.hpp"

namespace musa::io {

std::vector<char> seal(std::string_view magic, std::uint32_t version, const std::vector<char>& payload) {
  ByteWriter w;
  w.raw(std::span<const char>(magic.data(), magic.size()));
  w.u32(version);
  w.u64(payload.size());
  w.raw(payload);
  w.u32(crc32(payload));
  return std::move(w.buffer());
}

std::vector<char> unseal(std::string_view magic, std::uint32_t version, const std::vector<char>& bytes,
                         const std::string& what) {
  if (bytes.size() < magic.size() + 16 || std::memcmp(bytes.data(), magic.data(), magic.size()) != 0)
    throw FormatError(what + ": not a " + std::string(magic) + " file");
  ByteReader r(bytes);
  r.raw(magic.size());
  const std::uint32_t found = r.u32();
  if (found != version) {
    throw VersionError(what + ": format version " + std::to_string(found) + ", this build reads version " +
                       std::to_string(version));
  }
  const std::uint64_t n = r.u64();
  if (n + 4 != r.remaining()) throw FormatError(what + ": truncated or padded file");
  auto span = r.raw(n);
  std::vector<char> payload(span.begin(), span.end());
  if (r.u32() != crc32(payload)) throw FormatError(what + ": checksum mismatch (file is corrupt)");
  return payload;
}

}  // namespace musa::io
