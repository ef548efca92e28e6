#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "guidecap/formats.hpp"
#include "guidecap/run_config.hpp"
#include "guidecap/trainer.hpp"

namespace guidecap {

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;
}

namespace detail_cmd {

inline std::uint64_t effective_seed(const RunConfig& cfg) {
  if (const char* env = std::getenv("GUIDECAP_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("GUIDECAP_SEED is not an unsigned integer: '" + std::string(env) + "'");
    }
  }
  return cfg.seed;
}

inline std::vector<CaptionRecord> load_dataset_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("dataset file not found: '" + path + "'");
  return read_dataset(is);
}

inline DatasetSplit load_or_synthesize(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.synth.present) {
    SynthConfig sc;
    sc.concepts = cfg.synth.concepts;
    sc.annot_dim = cfg.synth.annot_dim;
    sc.annot_count = cfg.synth.annot_count;
    sc.train_records = cfg.synth.train_records;
    sc.val_records = cfg.synth.val_records;
    sc.test_records = cfg.synth.test_records;
    sc.captions_per_record = cfg.synth.captions_per_record;
    sc.noise = cfg.synth.noise;
    return synth_generate(sc, seed);
  }
  if (!cfg.data.present)
    throw ConfigError("config needs either a [synth] or a [data] section");
  DatasetSplit split;
  split.train = load_dataset_file(cfg.data.train);
  split.val = load_dataset_file(cfg.data.val);
  split.test = load_dataset_file(cfg.data.test);
  return split;
}

struct PreparedCorpus {
  Corpus corpus;
  std::optional<AttributePredictor> predictor;
  AttributeMode mode = AttributeMode::kOracle;
};

inline PreparedCorpus prepare_corpus(const RunConfig& cfg, std::uint64_t seed) {
  PreparedCorpus out;
  out.mode = attribute_mode_from(cfg.train.attribute_mode);
  out.corpus = build_corpus(load_or_synthesize(cfg, seed), cfg.corpus.min_count,
                            cfg.corpus.frequent_words);
  if (out.mode == AttributeMode::kPredicted) {
    const auto& train = out.corpus.data.train;
    if (train.empty()) throw DataError("attribute predictor: empty training split");
    const std::size_t annot_dim = train.front().annotations.annots.front().size();
    AttributePredictor predictor(annot_dim, out.corpus.fws.size(), seed);
    std::vector<const CaptionRecord*> recs;
    for (const CaptionRecord& r : train) recs.push_back(&r);
    AttributePredictor::TrainSettings settings;
    settings.epochs = cfg.train.attr_epochs;
    settings.seed = seed;
    predictor.train(recs, out.corpus.fws, settings);
    out.predictor = std::move(predictor);
  }
  apply_attribute_mode(out.corpus, out.mode,
                       out.predictor ? &*out.predictor : nullptr);
  return out;
}

inline ModelConfig model_config_from(const RunConfig& cfg) {
  ModelConfig mc;
  mc.embed_dim = cfg.model.embed;
  mc.hidden_dim = cfg.model.hidden;
  mc.variant = variant_from(cfg.variant);
  mc.review_steps = cfg.model.review_steps;
  mc.share_review_params = cfg.model.share_review_params;
  mc.use_guiding = cfg.model.use_guiding;
  return mc;  // data-derived dims are filled in by train()
}

inline TrainConfig train_config_from(const RunConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.lr = cfg.train.lr;
  tc.weight_decay = cfg.train.weight_decay;
  tc.lambda1 = cfg.train.lambda1;
  tc.lambda2 = cfg.train.lambda2;
  tc.max_epochs = cfg.train.max_epochs;
  tc.patience = cfg.train.patience;
  tc.batch_size = cfg.train.batch_size;
  tc.seed = seed;
  tc.attribute_mode = attribute_mode_from(cfg.train.attribute_mode);
  tc.masks.annotations = cfg.train.mask_annotations;
  tc.masks.attributes = cfg.train.mask_attributes;
  tc.decode_max_len = cfg.decode.max_len;
  return tc;
}

inline void encode_records(std::vector<CaptionRecord>& records, const Vocabulary& vocab) {
  for (CaptionRecord& rec : records) {
    rec.captions.clear();
    for (const std::string& raw : rec.raw_captions) {
      auto toks = preprocess_caption(raw);
      if (!toks.empty()) rec.captions.push_back(vocab.encode(toks));
    }
  }
}

inline std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail_cmd

/// train: build (or load) the dataset, train the configured variant, write
/// checkpoint + report (+ attribute model when predicted).
inline int cmd_train(const std::string& config_path) {
  try {
    const RunConfig cfg = load_run_config(config_path);
    const std::uint64_t seed = detail_cmd::effective_seed(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    detail_cmd::PreparedCorpus prepared = detail_cmd::prepare_corpus(cfg, seed);
    if (prepared.corpus.dropped_captions > 0)
      std::cout << "note: dropped " << prepared.corpus.dropped_captions
                << " captions that were empty after preprocessing\n";
    const TrainOutcome outcome =
        train(prepared.corpus, detail_cmd::model_config_from(cfg),
              detail_cmd::train_config_from(cfg, seed));
    const std::string checkpoint_path = cfg.out_dir + "/checkpoint.txt";
    save_model_file(checkpoint_path, outcome.model);
    {
      std::ofstream os(cfg.out_dir + "/train_report.txt");
      if (!os) throw DataError("cannot write train report in '" + cfg.out_dir + "'");
      write_train_report(os, outcome.report);
    }
    if (prepared.predictor) {
      std::ofstream os(cfg.out_dir + "/attributes.txt");
      if (!os) throw DataError("cannot write attribute model in '" + cfg.out_dir + "'");
      save_attributes(os, *prepared.predictor,
                      outcome.model.cfg.annot_dim, prepared.corpus.fws.size());
    }
    std::cout << "trained " << cfg.variant << " model: best epoch "
              << outcome.report.best_epoch << ", validation cider "
              << std::setprecision(6)
              << outcome.report.epochs[outcome.report.best_epoch - 1].val_cider << '\n';
    std::cout << "checkpoint: " << checkpoint_path << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

struct CaptionArgs {
  std::vector<std::string> checkpoints;
  std::string dataset;
  std::string out_path;
  bool greedy = false;
  std::size_t beam_width = 3;
  std::size_t max_len = 30;
  bool length_normalize = false;
  std::string attributes_path;  // needed when the model uses predicted attributes
};

/// caption: decode every record of a dataset file with one checkpoint or an
/// ensemble of checkpoints.
inline int cmd_caption(const CaptionArgs& args) {
  try {
    if (args.checkpoints.empty()) throw ConfigError("caption: no checkpoint given");
    std::vector<Model> models;
    for (const std::string& path : args.checkpoints)
      models.push_back(load_model_file(path));
    for (const Model& m : models) {
      if (!(m.vocab == models.front().vocab) || !(m.cfg == models.front().cfg))
        throw DataError("caption: ensemble members differ in vocabulary or dimensions");
    }
    Model& head = models.front();
    std::optional<AttributePredictor> predictor;
    if (head.attribute_mode == AttributeMode::kPredicted) {
      if (args.attributes_path.empty())
        throw ConfigError("caption: model uses predicted attributes, pass --attributes");
      predictor = load_attributes_file(args.attributes_path);
    }
    std::vector<CaptionRecord> records = detail_cmd::load_dataset_file(args.dataset);
    detail_cmd::encode_records(records, head.vocab);
    for (CaptionRecord& rec : records) {
      if (rec.annotations.annots.empty() ||
          rec.annotations.annots.front().size() != head.cfg.annot_dim)
        throw DataError("caption: record '" + rec.image_id +
                        "' does not match the checkpoint's annotation dimensions");
      rec.annotations.attrs = attribute_vector(rec, head.fws, head.attribute_mode,
                                               predictor ? &*predictor : nullptr);
    }
    std::vector<const Model*> views;
    for (const Model& m : models) views.push_back(&m);
    const EnsembleStepper stepper(views);
    BeamConfig bc;
    bc.width = args.beam_width;
    bc.max_len = args.max_len;
    bc.length_normalize = args.length_normalize;
    std::vector<std::pair<std::string, std::string>> captions;
    for (const CaptionRecord& rec : records) {
      std::vector<int> tokens;
      if (args.greedy) {
        tokens = greedy_decode(stepper, rec.annotations, args.max_len);
      } else {
        const auto ranked = beam_decode(stepper, rec.annotations, bc);
        if (!ranked.empty()) tokens = ranked.front().tokens;
      }
      captions.emplace_back(rec.image_id, detokenize(head.vocab, tokens));
    }
    std::ofstream os(args.out_path);
    if (!os) throw DataError("cannot write captions to '" + args.out_path + "'");
    write_captions(os, captions);
    std::cout << "captioned " << captions.size() << " records -> " << args.out_path << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "caption: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

struct EvaluateArgs {
  std::string captions;
  std::string dataset;
  std::string out_path;
};

/// evaluate: score a caption file against the reference captions of a
/// dataset file.
inline int cmd_evaluate(const EvaluateArgs& args) {
  try {
    std::ifstream cap_is(args.captions);
    if (!cap_is) throw DataError("caption file not found: '" + args.captions + "'");
    const auto captions = read_captions(cap_is);
    if (captions.empty()) throw DataError("caption file is empty: '" + args.captions + "'");
    const std::vector<CaptionRecord> records = detail_cmd::load_dataset_file(args.dataset);
    std::map<std::string, const CaptionRecord*> by_id;
    for (const CaptionRecord& rec : records) by_id.emplace(rec.image_id, &rec);
    std::vector<std::string> unmatched;
    EvalInput input;
    for (const auto& [id, text] : captions) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        unmatched.push_back(id);
        continue;
      }
      std::vector<std::vector<std::string>> refs;
      for (const std::string& raw : it->second->raw_captions) {
        auto toks = preprocess_caption(raw);
        if (!toks.empty()) refs.push_back(std::move(toks));
      }
      input.image_ids.push_back(id);
      input.candidates.push_back(detail_cmd::whitespace_tokens(text));
      input.references.push_back(std::move(refs));
    }
    if (!unmatched.empty()) {
      std::string list;
      for (const std::string& id : unmatched) list += ' ' + id;
      throw DataError("evaluate: image ids missing from references:" + list);
    }
    const EvalReport report = evaluate_all(input);
    if (!args.out_path.empty()) {
      std::ofstream os(args.out_path);
      if (!os) throw DataError("cannot write report to '" + args.out_path + "'");
      write_report(os, report);
    }
    write_report(std::cout, report);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "evaluate: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

/// gradcheck: taped backward vs finite differences for both variants at tiny
/// dimensions. Exit 0 iff every tensor is within tolerance.
inline int cmd_gradcheck(const std::string& config_path, double tolerance_override = -1.0) {
  try {
    const RunConfig cfg = load_run_config(config_path);
    const std::uint64_t seed = detail_cmd::effective_seed(cfg);
    const GradcheckSection& g = cfg.gradcheck;
    const double tol = tolerance_override > 0 ? tolerance_override : g.tolerance;
    bool all_ok = true;
    std::cout << std::setprecision(3);
    for (const Variant variant : {Variant::kSoftAttention, Variant::kReviewNet}) {
      GradCheckConfig gc;
      gc.model.vocab_size = g.vocab;
      gc.model.embed_dim = g.embed;
      gc.model.hidden_dim = g.hidden;
      gc.model.annot_dim = g.annot_dim;
      gc.model.annot_count = g.annot_count;
      gc.model.frequent = g.frequent;
      gc.model.review_steps = g.review_steps;
      gc.model.variant = variant;
      gc.seed = seed;
      gc.step = g.step;
      const std::size_t scalars = make_param_store(gc.model).scalar_count();
      if (scalars > 10000)
        throw ConfigError("gradcheck: " + std::string(variant_name(variant)) + " model has " +
                          std::to_string(scalars) +
                          " scalars; finite differences are only tractable up to 10000");
      const GradCheckReport report = grad_check(gc);
      std::cout << "variant " << variant_name(variant) << " (" << scalars << " scalars)\n";
      for (const GradCheckRow& row : report.rows) {
        const bool ok = row.max_rel_err <= tol;
        all_ok = all_ok && ok;
        std::cout << "  " << (ok ? "ok  " : "FAIL") << ' ' << row.tensor << ' '
                  << row.max_rel_err << '\n';
      }
    }
    std::cout << (all_ok ? "gradcheck passed" : "gradcheck FAILED") << " at tolerance " << tol
              << '\n';
    if (!all_ok) return 3;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gradcheck: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

/// ablate: train the four guiding-input arms (and an optional lambda sweep)
/// over several seeds, reporting mean validation nll and CIDEr per arm.
inline int cmd_ablate(const std::string& config_path) {
  try {
    const RunConfig cfg = load_run_config(config_path);
    const std::uint64_t seed = detail_cmd::effective_seed(cfg);
    if (cfg.ablate.seeds < 1) throw ConfigError("ablate: seeds must be >= 1");
    if (cfg.ablate.epochs < 1) throw ConfigError("ablate: epochs must be >= 1");
    std::filesystem::create_directories(cfg.out_dir);
    detail_cmd::PreparedCorpus prepared = detail_cmd::prepare_corpus(cfg, seed);

    struct Arm {
      std::string name;
      GuideMasks masks;
      double lambda;
    };
    std::vector<Arm> arms;
    const double base_lambda = cfg.train.lambda1;
    arms.push_back({"keep_both", {false, false}, base_lambda});
    arms.push_back({"keep_attributes", {true, false}, base_lambda});
    arms.push_back({"keep_annotations", {false, true}, base_lambda});
    arms.push_back({"keep_none", {true, true}, base_lambda});
    for (double lambda : cfg.ablate.lambda_sweep)
      arms.push_back({"sweep_lambda", {false, false}, lambda});

    std::ostringstream table;
    table << "# arm lambda seeds mean_val_nll mean_val_cider\n";
    for (const Arm& arm : arms) {
      double nll_sum = 0.0, cider_sum = 0.0;
      for (std::size_t s = 0; s < cfg.ablate.seeds; ++s) {
        TrainConfig tc = detail_cmd::train_config_from(cfg, seed + s);
        tc.masks = arm.masks;
        tc.lambda1 = arm.lambda;
        tc.lambda2 = arm.lambda;
        tc.max_epochs = cfg.ablate.epochs;
        tc.patience = cfg.ablate.epochs + 1;  // equal-epoch comparison, no early stop
        const TrainOutcome outcome =
            train(prepared.corpus, detail_cmd::model_config_from(cfg), tc);
        const EpochStats& last = outcome.report.epochs.back();
        nll_sum += last.val_token_nll;
        cider_sum += last.val_cider;
      }
      const double inv = 1.0 / static_cast<double>(cfg.ablate.seeds);
      table << arm.name << ' ' << arm.lambda << ' ' << cfg.ablate.seeds << ' '
            << std::setprecision(12) << nll_sum * inv << ' ' << cider_sum * inv << '\n';
    }
    const std::string table_path = cfg.out_dir + "/ablate.txt";
    std::ofstream os(table_path);
    if (!os) throw DataError("cannot write ablation table to '" + table_path + "'");
    os << table.str();
    std::cout << table.str();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ablate: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace guidecap
