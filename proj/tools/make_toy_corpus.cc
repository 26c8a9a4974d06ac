
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

// tools/make_toy_corpus.cc
//
// Writes the small synthetic two-speaker corpus used by the toy training
// profile: vowel/fricative sequences from a glottal pulse train through a
// cascade of formant resonators. Speakers differ in vocal-tract length,
// pitch range and spectral tilt.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "musa/dsp/audio.hpp"
#include "musa/train/data.hpp"

namespace {

constexpr double kRate = 16000.0;
constexpr double kPi = 3.14159265358979323846;

struct Voice {
  std::string name;
  double f0_low, f0_high;   // Hz
  double tract_scale;       // multiplies all formants
  double tilt;              // one-pole lowpass coefficient on the source
  double breath;            // aspiration noise level
};

struct Vowel {
  double f[4];
};

// Rough adult formant targets (Hz).
const std::vector<Vowel> kVowels = {
    {{730, 1090, 2440, 3400}},  // a
    {{530, 1840, 2480, 3500}},  // e
    {{270, 2290, 3010, 3700}},  // i
    {{570, 840, 2410, 3300}},   // o
    {{300, 870, 2240, 3300}},   // u
    {{660, 1720, 2410, 3400}},  // ae
};

// Two-pole resonator with unit gain at DC-ish normalisation.
struct Resonator {
  double y1 = 0, y2 = 0;
  double step(double x, double freq, double bw) {
    const double r = std::exp(-kPi * bw / kRate);
    const double c = 2.0 * r * std::cos(2.0 * kPi * freq / kRate);
    const double g = 1.0 - c + r * r;
    const double y = g * x + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

Eigen::VectorXd synthesize(const Voice& v, std::mt19937_64& rng, double seconds) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto total = static_cast<Eigen::Index>(seconds * kRate);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(total);

  // Segment plan: voiced vowels, short fricatives and pauses.
  struct Segment {
    int kind;  // 0 vowel, 1 fricative, 2 pause
    int vowel;
    Eigen::Index length;
  };
  std::vector<Segment> plan;
  Eigen::Index planned = static_cast<Eigen::Index>(0.08 * kRate);
  plan.push_back({2, 0, planned});
  while (planned < total) {
    const double r = u(rng);
    Segment s{};
    if (r < 0.7) {
      s = {0, static_cast<int>(u(rng) * kVowels.size()), static_cast<Eigen::Index>((0.12 + 0.2 * u(rng)) * kRate)};
    } else if (r < 0.88) {
      s = {1, 0, static_cast<Eigen::Index>((0.05 + 0.07 * u(rng)) * kRate)};
    } else {
      s = {2, 0, static_cast<Eigen::Index>((0.04 + 0.08 * u(rng)) * kRate)};
    }
    plan.push_back(s);
    planned += s.length;
  }

  Resonator res[4], fric[2];
  double phase = 0.0, source_lp = 0.0, amp = 0.0;
  double formant[4] = {500, 1500, 2500, 3500};
  const double f0_start = v.f0_low + (v.f0_high - v.f0_low) * (0.5 + 0.5 * u(rng));
  const double f0_end = v.f0_low + (v.f0_high - v.f0_low) * 0.3 * u(rng);
  const double vibrato_rate = 4.0 + 2.0 * u(rng);
  Eigen::Index t = 0;
  for (const auto& seg : plan) {
    const double target_amp = seg.kind == 2 ? 0.0 : (seg.kind == 1 ? 0.25 : 1.0);
    const Vowel& vw = kVowels[static_cast<std::size_t>(seg.vowel)];
    const double fric_centre = 3500.0 + 2500.0 * u(rng);
    for (Eigen::Index i = 0; i < seg.length && t < total; ++i, ++t) {
      const double time = static_cast<double>(t) / kRate;
      const double f0 = (f0_start + (f0_end - f0_start) * time / seconds) *
                        (1.0 + 0.02 * std::sin(2.0 * kPi * vibrato_rate * time));
      amp += (target_amp - amp) * 0.004;
      if (seg.kind == 0) {
        for (int k = 0; k < 4; ++k) formant[k] += (vw.f[k] * v.tract_scale - formant[k]) * 0.003;
      }
      phase += f0 / kRate;
      if (phase >= 1.0) phase -= 1.0;
      // Rosenberg-style glottal pulse: open phase 60%, then closed.
      double pulse = 0.0;
      if (phase < 0.4) {
        pulse = 0.5 * (1.0 - std::cos(kPi * phase / 0.4));
      } else if (phase < 0.6) {
        pulse = std::cos(0.5 * kPi * (phase - 0.4) / 0.2);
      }
      const double source = pulse - 0.3 + v.breath * n(rng);
      source_lp = v.tilt * source_lp + (1.0 - v.tilt) * source;
      double y = 0.0;
      if (seg.kind == 0) {
        double x = source_lp;
        for (int k = 0; k < 4; ++k) x = res[k].step(x, formant[k], 60.0 + 20.0 * k);
        y = x;
      } else if (seg.kind == 1) {
        const double noise = n(rng);
        y = 0.3 * fric[1].step(fric[0].step(noise, fric_centre, 900.0), fric_centre * 1.1, 1200.0);
      }
      out(t) = amp * y;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic two-speaker toy corpus"};
  std::string out_dir = "data/toy";
  std::uint64_t seed = 20260611;
  int per_speaker = 5;
  double seconds = 2.5;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--per-speaker", per_speaker, "Utterances per speaker");
  app.add_option("--seconds", seconds, "Utterance duration");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Voice> voices = {
      {"spk_a", 105.0, 175.0, 1.0, 0.55, 0.02},
      {"spk_b", 150.0, 240.0, 1.22, 0.25, 0.06},
  };
  std::filesystem::create_directories(out_dir);
  std::vector<musa::train::ManifestEntry> manifest;
  std::mt19937_64 rng(seed);
  for (const auto& v : voices) {
    for (int i = 0; i < per_speaker; ++i) {
      auto samples = synthesize(v, rng, seconds);
      musa::dsp::peak_normalize(samples, 0.9);
      const std::string id = v.name + "_" + std::to_string(i);
      musa::dsp::save_waveform(musa::dsp::Waveform::from_samples(samples), std::filesystem::path(out_dir) / (id + ".wav"));
      manifest.push_back({id, v.name, id + ".wav"});
    }
  }
  musa::train::write_manifest(std::filesystem::path(out_dir) / "manifest.tsv", manifest);
  std::printf("wrote %zu utterances to %s\n", manifest.size(), out_dir.c_str());
  return 0;
}
