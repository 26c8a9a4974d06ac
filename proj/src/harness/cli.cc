// harness/cli.cc

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

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "musa/harness/harness.hpp"
#include "musa/io/files.hpp"

namespace musa::harness {

namespace {

// Options every subcommand understands.
struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;

  void attach(CLI::App* app, bool out_required, const std::string& out_default = ".") {
    app->add_option("--config", config, "INI config file ([train], [model], [teacher] sections)")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one config entry, section.key=value (repeatable)");
    auto* o = app->add_option("--out", out, "output directory");
    if (out_required) {
      o->required();
    } else {
      out = out_default;
      o->capture_default_str();
    }
  }

  train::TrainingConfig load() const {
    return load_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), overrides);
  }
};

RunInfo run_info(const std::string& command, int argc, const char* const* argv, const train::TrainingConfig& cfg) {
  RunInfo r;
  r.command = command;
  for (int i = 1; i < argc; ++i) r.args.emplace_back(argv[i]);
  r.config_hash = config_hash(cfg);
  r.seed = cfg.seed;
  return r;
}

std::string hash_if(const std::string& path) { return path.empty() ? "" : io::file_hash(path); }

std::unique_ptr<anon::Model> load_model(const std::string& ckpt) {
  return train::model_from_checkpoint(train::load_checkpoint(ckpt));
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"musa: speaker anonymization by disentangled speech coding"};
  app.name("musa");
  app.require_subcommand(1);

  // train
  Common train_c;
  std::string train_manifest;
  bool resume = false;
  int log_every = 50;
  std::int64_t train_steps = -1;
  auto* train_cmd = app.add_subcommand("train", "train the codec on a manifest");
  train_c.attach(train_cmd, true);
  train_cmd->add_option("--manifest", train_manifest, "utt_id<TAB>speaker<TAB>wav_path records")->required();
  train_cmd->add_flag("--resume", resume, "continue from OUT/checkpoint.ckpt when it exists");
  train_cmd->add_option("--log-every", log_every, "progress line interval in steps (stderr)");
  train_cmd->add_option("--steps", train_steps, "total steps, also when resuming (default: train.total_steps)")
      ->check(CLI::NonNegativeNumber);

  // tokenizer-train
  Common tok_c;
  std::string tok_features, tok_manifest;
  int tok_size = 0, tok_steps = 0;
  auto* tok_cmd = app.add_subcommand("tokenizer-train", "train the semantic feature tokenizer");
  tok_c.attach(tok_cmd, true);
  auto* tf = tok_cmd->add_option("--features", tok_features, "directory of precomputed teacher features");
  auto* tm = tok_cmd->add_option("--manifest", tok_manifest, "audio manifest (synthetic teacher features)");
  tf->excludes(tm);
  tok_cmd->add_option("--codebook-size", tok_size, "codes (default: model.codebook_size)");
  tok_cmd->add_option("--steps", tok_steps, "training steps (default: teacher.tokenizer_steps)");

  // anonymize
  Common anon_c;
  std::string anon_ckpt, anon_manifest;
  double alpha = 0.0;
  int jobs = 1;
  auto* anon_cmd = app.add_subcommand("anonymize", "anonymize every utterance of a manifest");
  anon_c.attach(anon_cmd, true);
  anon_cmd->add_option("--ckpt", anon_ckpt, "trained checkpoint")->required()->check(CLI::ExistingFile);
  anon_cmd->add_option("--manifest", anon_manifest, "input manifest")->required();
  anon_cmd->add_option("--alpha", alpha, "weight of the original speaker vector, 0 = fully anonymized")
      ->check(CLI::Range(0.0, 1.0));
  anon_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluation metrics");
  eval_cmd->require_subcommand(1);
  Common eer_c, wer_c, pitch_c, gvd_c;
  std::string trials_path;
  auto* eer_cmd = eval_cmd->add_subcommand("eer", "equal error rate of a scored trial list");
  eer_c.attach(eer_cmd, false);
  eer_cmd->add_option("--trials", trials_path, "enroll<TAB>test<TAB>score<TAB>target|nontarget")->required();
  std::string ref_path, hyp_path, unit = "word";
  auto* wer_cmd = eval_cmd->add_subcommand("wer", "word (or character) error rate");
  wer_c.attach(wer_cmd, false);
  wer_cmd->add_option("--ref", ref_path, "reference text, utt_id words...")->required();
  wer_cmd->add_option("--hyp", hyp_path, "hypothesis text, utt_id words...")->required();
  wer_cmd->add_option("--unit", unit, "word or char")->check(CLI::IsMember({"word", "char"}));
  std::string pitch_a, pitch_b, pitch_manifest, pitch_dir;
  auto* pitch_cmd = eval_cmd->add_subcommand("pitch", "pitch correlation between original and processed audio");
  pitch_c.attach(pitch_cmd, false);
  auto* pa = pitch_cmd->add_option("--a", pitch_a, "first wav");
  auto* pb = pitch_cmd->add_option("--b", pitch_b, "second wav");
  auto* pm = pitch_cmd->add_option("--manifest", pitch_manifest, "originals");
  auto* pd = pitch_cmd->add_option("--anon-dir", pitch_dir, "directory of <utt_id>.wav outputs");
  pa->needs(pb);
  pb->needs(pa);
  pm->needs(pd);
  pd->needs(pm);
  pa->excludes(pm);
  std::string gvd_oo, gvd_aa, gvd_ckpt, gvd_manifest, gvd_scorer = "probe";
  double gvd_alpha = 0.0;
  auto* gvd_cmd = eval_cmd->add_subcommand("gvd", "gain of voice distinctiveness");
  gvd_c.attach(gvd_cmd, false);
  auto* go = gvd_cmd->add_option("--oo", gvd_oo, "original/original similarity csv");
  auto* ga = gvd_cmd->add_option("--aa", gvd_aa, "anonymized/anonymized similarity csv");
  auto* gc = gvd_cmd->add_option("--ckpt", gvd_ckpt, "checkpoint to anonymize with");
  auto* gm = gvd_cmd->add_option("--manifest", gvd_manifest, "utterances grouped by speaker");
  gvd_cmd->add_option("--alpha", gvd_alpha, "blend weight")->check(CLI::Range(0.0, 1.0));
  gvd_cmd->add_option("--scorer", gvd_scorer, "probe or encoder")->check(CLI::IsMember({"probe", "encoder"}));
  go->needs(ga);
  ga->needs(go);
  gc->needs(gm);
  gm->needs(gc);
  go->excludes(gc);

  // run-scenario
  Common sc_c;
  std::string sc_name = "ignorant", sc_trials, sc_manifest, sc_ckpt, sc_enroll, sc_scorer = "probe";
  double sc_alpha = 0.0;
  auto* sc_cmd = app.add_subcommand("run-scenario", "attacker scenario EER");
  sc_c.attach(sc_cmd, true);
  sc_cmd->add_option("--scenario", sc_name, "ignorant or lazy-informed")->check(CLI::IsMember({"ignorant", "lazy-informed"}));
  sc_cmd->add_option("--trials", sc_trials, "enroll<TAB>test<TAB>target|nontarget")->required();
  sc_cmd->add_option("--manifest", sc_manifest, "audio of every utterance in the trial list")->required();
  sc_cmd->add_option("--ckpt", sc_ckpt, "checkpoint under evaluation (omit to score unprocessed audio)");
  sc_cmd->add_option("--enroll-ckpt", sc_enroll, "lazy-informed: checkpoint the attacker anonymizes enrollment with");
  sc_cmd->add_option("--alpha", sc_alpha, "blend weight")->check(CLI::Range(0.0, 1.0));
  sc_cmd->add_option("--scorer", sc_scorer, "probe or encoder")->check(CLI::IsMember({"probe", "encoder"}));

  // export-codes
  Common ex_c;
  std::string ex_ckpt, ex_manifest;
  auto* ex_cmd = app.add_subcommand("export-codes", "write <utt_id>.codes for every utterance");
  ex_c.attach(ex_cmd, true);
  ex_cmd->add_option("--ckpt", ex_ckpt, "trained checkpoint")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("--manifest", ex_manifest, "input manifest")->required();

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "SVG figures");
  plot_cmd->require_subcommand(1);
  Common pg_c, pl_c;
  std::string pg_dir, pl_log;
  std::vector<std::string> pl_terms{"total", "rec", "mel"};
  auto* pg_cmd = plot_cmd->add_subcommand("gvd-matrix", "four-block original/anonymized similarity heat map");
  pg_c.attach(pg_cmd, true);
  pg_cmd->add_option("--dir", pg_dir, "directory written by eval gvd")->required();
  auto* pl_cmd = plot_cmd->add_subcommand("loss", "loss curves from loss.csv");
  pl_c.attach(pl_cmd, true);
  pl_cmd->add_option("--log", pl_log, "loss.csv written by train")->required();
  pl_cmd->add_option("--terms", pl_terms, "terms to draw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) {
      auto cfg = train_c.load();
      TrainOptions opts;
      opts.resume = resume;
      opts.log_every = log_every;
      opts.progress = &err;
      if (train_steps >= 0) opts.total_steps = train_steps;
      auto c = train_to_dir(cfg, train::read_manifest(train_manifest), train_c.out, opts);
      auto info = run_info("train", argc, argv, c.config());
      info.checkpoint_hash = io::file_hash(fs::path(train_c.out) / kCheckpointFile);
      info.results["steps"] = c.step;
      write_run_json(train_c.out, info);
      out << "trained " << c.step << " steps, checkpoint " << (fs::path(train_c.out) / kCheckpointFile).string() << "\n";
    } else if (tok_cmd->parsed()) {
      auto cfg = tok_c.load();
      if (tok_features.empty() && tok_manifest.empty()) throw CLI::RequiredError("--features or --manifest");
      teacher::TokenizerConfig tc;
      tc.codebook_size = tok_size > 0 ? tok_size : cfg.model.codebook_size;
      tc.steps = tok_steps > 0 ? tok_steps : cfg.tokenizer_steps;
      tc.seed = cfg.seed;
      teacher::TokenizerReport report;
      auto state = train_tokenizer_from(tok_features.empty() ? std::nullopt : std::optional<fs::path>(tok_features),
                                        tok_manifest.empty() ? std::nullopt : std::optional<fs::path>(tok_manifest), tc,
                                        &report);
      fs::create_directories(tok_c.out);
      teacher::save_tokenizer(state, fs::path(tok_c.out) / kTokenizerFile);
      auto info = run_info("tokenizer-train", argc, argv, cfg);
      info.results["codebook_size"] = tc.codebook_size;
      info.results["initial_mse"] = report.initial_validation_mse;
      info.results["best_mse"] = report.best_validation_mse;
      write_run_json(tok_c.out, info);
      out << "tokenizer mse " << report.best_validation_mse << ", written to " << (fs::path(tok_c.out) / kTokenizerFile).string() << "\n";
    } else if (anon_cmd->parsed()) {
      auto cfg = anon_c.load();
      auto m = load_model(anon_ckpt);
      auto report = anon::anonymize_corpus(*m, train::read_manifest(anon_manifest), alpha, anon_c.out, jobs);
      auto info = run_info("anonymize", argc, argv, cfg);
      info.checkpoint_hash = hash_if(anon_ckpt);
      info.results["succeeded"] = report.succeeded();
      info.results["failed"] = report.failed();
      write_run_json(anon_c.out, info);
      out << report.succeeded() << " anonymized, " << report.failed() << " failed\n";
      if (report.failed() > 0) {
        for (const auto& f : report.files)
          if (f.status != "ok") err << "musa: " << f.utt_id << ": " << f.error << "\n";
        return 1;
      }
    } else if (eer_cmd->parsed()) {
      auto cfg = eer_c.load();
      auto r = metrics::compute_eer(metrics::read_trials(trials_path));
      auto info = run_info("eval eer", argc, argv, cfg);
      info.results["eer"] = r.eer;
      info.results["threshold"] = r.threshold;
      write_run_json(eer_c.out, info);
      out << "EER " << r.eer << " threshold " << r.threshold << "\n";
    } else if (wer_cmd->parsed()) {
      auto cfg = wer_c.load();
      auto r = corpus_wer(read_transcripts(ref_path), read_transcripts(hyp_path), unit == "char");
      auto info = run_info("eval wer", argc, argv, cfg);
      info.results["wer"] = r.wer;
      info.results["substitutions"] = r.substitutions;
      info.results["deletions"] = r.deletions;
      info.results["insertions"] = r.insertions;
      info.results["ref_length"] = r.ref_length;
      write_run_json(wer_c.out, info);
      out << (unit == "char" ? "CER " : "WER ") << r.wer << " (S=" << r.substitutions << " D=" << r.deletions
          << " I=" << r.insertions << " N=" << r.ref_length << ")\n";
    } else if (pitch_cmd->parsed()) {
      auto cfg = pitch_c.load();
      auto info = run_info("eval pitch", argc, argv, cfg);
      double value = 0.0;
      if (!pitch_a.empty()) {
        value = pitch_correlation_files(pitch_a, pitch_b);
      } else if (!pitch_manifest.empty()) {
        const auto manifest = train::read_manifest(pitch_manifest);
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto& e : manifest) {
          const double r = pitch_correlation_files(e.wav_path, fs::path(pitch_dir) / (e.utt_id + ".wav"));
          per[e.utt_id] = r;
          value += r;
        }
        value /= static_cast<double>(manifest.size());
        info.results["per_utterance"] = per;
      } else {
        throw CLI::RequiredError("--a/--b or --manifest/--anon-dir");
      }
      info.results["pitch_correlation"] = value;
      write_run_json(pitch_c.out, info);
      out << "pitch correlation " << value << "\n";
    } else if (gvd_cmd->parsed()) {
      auto cfg = gvd_c.load();
      auto info = run_info("eval gvd", argc, argv, cfg);
      double value = 0.0;
      if (!gvd_oo.empty()) {
        value = metrics::gvd(metrics::parse_csv(io::read_text(gvd_oo)), metrics::parse_csv(io::read_text(gvd_aa)));
      } else if (!gvd_ckpt.empty()) {
        auto m = load_model(gvd_ckpt);
        info.checkpoint_hash = hash_if(gvd_ckpt);
        const auto manifest = train::read_manifest(gvd_manifest);
        const auto labels = train::LabelTable::from_manifest(manifest);
        std::vector<std::vector<dsp::Waveform>> orig(static_cast<std::size_t>(labels.size())), anonz = orig;
        for (const auto& e : manifest) {
          const auto k = static_cast<std::size_t>(labels.label(e.speaker));
          auto w = dsp::load_waveform(e.wav_path);
          anonz[k].push_back(anon::anonymize(*m, w, gvd_alpha));
          orig[k].push_back(std::move(w));
        }
        auto provider = make_provider(gvd_scorer, m.get());
        auto vd = voice_distinctiveness(labels.speakers(), orig, anonz, *provider);
        write_voice_distinctiveness(vd, gvd_c.out);
        value = vd.gvd;
      } else {
        throw CLI::RequiredError("--oo/--aa or --ckpt/--manifest");
      }
      info.results["gvd"] = value;
      write_run_json(gvd_c.out, info);
      out << "G_vd " << value << " dB\n";
    } else if (sc_cmd->parsed()) {
      auto cfg = sc_c.load();
      ScenarioSpec spec;
      spec.scenario = parse_scenario(sc_name);
      spec.checkpoint = sc_ckpt;
      spec.enrollment_checkpoint = sc_enroll;
      spec.alpha = sc_alpha;
      spec.scorer = sc_scorer;
      auto r = run_scenario(spec, read_trial_list(sc_trials), train::read_manifest(sc_manifest), sc_c.out);
      auto info = run_info("run-scenario", argc, argv, cfg);
      info.checkpoint_hash = hash_if(sc_ckpt);
      info.results = r.to_json();
      write_run_json(sc_c.out, info);
      out << r.scenario << " EER " << r.eer.eer << "\n";
    } else if (ex_cmd->parsed()) {
      auto cfg = ex_c.load();
      const auto manifest = train::read_manifest(ex_manifest);
      export_codes(*load_model(ex_ckpt), manifest, ex_c.out);
      auto info = run_info("export-codes", argc, argv, cfg);
      info.checkpoint_hash = hash_if(ex_ckpt);
      info.results["files"] = manifest.size();
      write_run_json(ex_c.out, info);
      out << manifest.size() << " code files written\n";
    } else if (pg_cmd->parsed()) {
      auto cfg = pg_c.load();
      fs::create_directories(pg_c.out);
      const auto path = fs::path(pg_c.out) / "gvd_matrix.svg";
      io::write_text_atomic(path, gvd_matrix_svg(read_voice_distinctiveness(pg_dir)));
      write_run_json(pg_c.out, run_info("plot gvd-matrix", argc, argv, cfg));
      out << "wrote " << path.string() << "\n";
    } else if (pl_cmd->parsed()) {
      auto cfg = pl_c.load();
      fs::create_directories(pl_c.out);
      const auto path = fs::path(pl_c.out) / "loss.svg";
      io::write_text_atomic(path, loss_curve_svg(train::read_loss_log(pl_log), pl_terms));
      write_run_json(pl_c.out, run_info("plot loss", argc, argv, cfg));
      out << "wrote " << path.string() << "\n";
    }
  } catch (const CLI::ParseError& e) {
    err << "musa: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "musa: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace musa::harness
