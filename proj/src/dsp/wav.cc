// dsp/wav.cc

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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "musa/dsp/audio.hpp"
#include "musa/dsp/stft.hpp"
#include "musa/io/files.hpp"

namespace musa::dsp {

namespace {

std::uint32_t le32(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return u[0] | (u[1] << 8) | (u[2] << 16) | (static_cast<std::uint32_t>(u[3]) << 24);
}

std::uint16_t le16(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return static_cast<std::uint16_t>(u[0] | (u[1] << 8));
}

void put32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform Waveform::from_samples(Eigen::VectorXd samples) {
  if (samples.size() == 0) throw AudioError("empty audio");
  if (!samples.allFinite()) throw AudioError("non-finite sample values");
  Waveform w;
  w.samples = std::move(samples);
  return w;
}

WavData parse_wav(const std::vector<char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw AudioError("not a RIFF/WAVE file");
  }
  int format = -1, channels = 0, rate = 0, bits = 0;
  const char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = bytes.data() + pos;
    const std::size_t size = le32(id + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (avail < 16) throw AudioError("truncated fmt chunk");
      const char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = static_cast<int>(le32(f + 4));
      bits = le16(f + 14);
      if (format == 0xFFFE) {
        if (avail < 26) throw AudioError("truncated extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the sub-format GUID
      }
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (format < 0) throw AudioError("missing fmt chunk");
  if (data == nullptr) throw AudioError("missing data chunk");
  if (format != 1) throw AudioError("unsupported encoding: format tag " + std::to_string(format));
  if (bits != 8 && bits != 16 && bits != 24) {
    throw AudioError("unsupported encoding: " + std::to_string(bits) + "-bit PCM");
  }
  if (channels <= 0 || rate <= 0) throw AudioError("invalid channel count or sample rate");

  const int width = bits / 8;
  const std::size_t frames = data_size / (static_cast<std::size_t>(width) * channels);
  if (frames == 0) throw AudioError("empty audio");
  WavData out;
  out.sample_rate = rate;
  out.bits_per_sample = bits;
  out.channels.resize(channels, static_cast<Eigen::Index>(frames));
  const auto* u = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = u + (i * channels + c) * width;
      double v = 0.0;
      if (bits == 8) {
        v = (static_cast<int>(s[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(s[0] | (s[1] << 8)) / 32768.0;
      } else {
        std::int32_t x = s[0] | (s[1] << 8) | (s[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      }
      out.channels(c, static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const AudioError& e) {
    throw AudioError(path.string() + ": " + e.what());
  }
}

void peak_normalize(Eigen::VectorXd& x, double peak) {
  const double m = x.cwiseAbs().maxCoeff();
  if (m > 0.0) x *= peak / m;
}

Waveform ingest(const WavData& wav) {
  Eigen::VectorXd mono = wav.channels.colwise().mean().transpose();
  if (wav.sample_rate != kSampleRate) mono = resample(mono, wav.sample_rate, kSampleRate);
  peak_normalize(mono);
  return Waveform::from_samples(std::move(mono));
}

Waveform load_waveform(const std::filesystem::path& path) { return ingest(read_wav(path)); }

std::vector<char> encode_wav16(const Eigen::VectorXd& samples, int sample_rate) {
  const auto n = static_cast<std::uint32_t>(samples.size());
  std::vector<char> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 2 * n);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double v = std::clamp(samples(i), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
    put16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void save_waveform(const Waveform& w, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_wav16(w.samples, w.sample_rate));
}

Eigen::VectorXd resample(const Eigen::VectorXd& x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw AudioError("invalid sample rate");
  if (from_rate == to_rate) return x;
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const auto n_out = static_cast<Eigen::Index>(std::llround(static_cast<double>(x.size()) * ratio));
  const double cutoff = std::min(1.0, ratio);
  const double half_width = 32.0 / cutoff;  // in input samples
  Eigen::VectorXd y(n_out);
  const Eigen::Index n_in = x.size();
  for (Eigen::Index j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = static_cast<Eigen::Index>(std::ceil(t - half_width));
    const auto hi = static_cast<Eigen::Index>(std::floor(t + half_width));
    double acc = 0.0;
    for (Eigen::Index i = std::max<Eigen::Index>(lo, 0); i <= std::min(hi, n_in - 1); ++i) {
      const double d = static_cast<double>(i) - t;
      const double arg = kPi * cutoff * d;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double win = 0.5 * (1.0 + std::cos(kPi * d / half_width));
      acc += x(i) * cutoff * sinc * win;
    }
    y(j) = acc;
  }
  return y;
}

}  // namespace musa::dsp
