#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "examples.hpp"
#include "fixtures.hpp"
#include "lexicon.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "tokenizer.hpp"
#include "train.hpp"

#ifndef LMGC_VERSION
#define LMGC_VERSION "0.0.0"
#endif

namespace lmgc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string file_digest(const fs::path& p) {
  if (fs::is_directory(p)) {
    // digest of "name\tsha\n" lines over the sorted regular files
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) listing += f.filename().string() + "\t" + sha256_hex(read_file(f.string())) + "\n";
    return sha256_hex(listing);
  }
  return sha256_hex(read_file(p.string()));
}

inline json stats_json(const CorpusStats& s) {
  return {{"noun", s.noun},
          {"verb", s.verb},
          {"adj", s.adj},
          {"adv", s.adv},
          {"total", s.total},
          {"positive_pairs", s.positive_pairs},
          {"negative_pairs", s.negative_pairs},
          {"unresolvable", s.unresolvable}};
}

/// A directory is read as a WordNet dict/ tree, anything else as TSV.
inline GlossLexicon load_lexicon(const std::string& path) {
  if (fs::is_directory(path)) return import_wordnet(WordNetFiles::from_dir(path));
  return import_tsv_lexicon(path);
}

/// Labeled sequences for downstream fine-tuning, one JSON object per line:
/// {"ids": [...], "segments": [...], "label": x}.
inline std::vector<LabeledSequence> load_labeled(const std::string& path) {
  std::vector<LabeledSequence> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      LabeledSequence ls;
      ls.sequence.ids = j.at("ids").get<std::vector<TokenId>>();
      ls.sequence.segments = j.at("segments").get<std::vector<std::uint8_t>>();
      ls.label = j.at("label").get<double>();
      if (ls.sequence.ids.size() != ls.sequence.segments.size()) throw Error(ErrorKind::SchemaError, "ids/segments length");
      out.push_back(std::move(ls));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaError, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Options shared by every subcommand plus per-run bookkeeping.
struct Context {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  std::size_t jobs = 1;
  std::vector<std::string> argv;
  std::vector<std::string> inputs;
  json effective_config = json::object();

  fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }

  json config_file() const {
    if (config_path.empty()) return json::object();
    try {
      return json::parse(read_file(config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, config_path + ": " + e.what());
    }
  }

  void write_manifest(const std::string& subcommand) const {
    json digests = json::object();
    for (const auto& p : inputs)
      if (!p.empty() && fs::exists(p)) digests[p] = file_digest(p);
    const std::string cfg = effective_config.dump();
    json m = {{"version", LMGC_VERSION},
              {"checkpoint_format", kCheckpointVersion},
              {"subcommand", subcommand},
              {"command_line", argv},
              {"seed", seed},
              {"config", effective_config},
              {"config_sha256", sha256_hex(cfg)},
              {"inputs", digests}};
    write_file(out("manifest." + subcommand + ".json").string(), m.dump(2) + "\n");
  }
};

struct ModelFlags {
  std::optional<std::size_t> layers, hidden, heads, ff, max_len;
  std::optional<double> dropout;

  void add(CLI::App* app) {
    app->add_option("--layers", layers, "encoder layers");
    app->add_option("--hidden", hidden, "hidden width H");
    app->add_option("--heads", heads, "attention heads");
    app->add_option("--ff", ff, "feed-forward width");
    app->add_option("--dropout", dropout, "dropout probability");
    app->add_option("--max-len", max_len, "maximum sequence length");
  }

  ModelConfig resolve(ModelConfig c) const {
    if (layers) c.layers = *layers;
    if (hidden) c.hidden = *hidden;
    if (heads) c.heads = *heads;
    if (ff) c.ff = *ff;
    if (dropout) c.dropout = *dropout;
    if (max_len) c.max_positions = *max_len;
    return c;
  }
};

struct TrainFlags {
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, weight_decay;
  std::optional<std::string> validation_split;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch-size", batch_size, "examples per optimizer step");
    app->add_option("--lr", lr, "AdamW learning rate");
    app->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay");
    app->add_option("--validation-split", validation_split, "name recorded for the validation set");
  }

  /// Config file keys first, then explicit flags, then the global seed.
  TrainConfig resolve(const json& file, std::uint64_t seed) const {
    json tj = file;
    tj.erase("model");
    tj.erase("builder");
    TrainConfig c = tj.get<TrainConfig>();
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (lr) c.lr = *lr;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (validation_split) c.validation_split = *validation_split;
    c.seed = seed;
    c.validate();
    return c;
  }
};

inline BuilderConfig builder_config(const json& file, std::optional<std::size_t> max_len, std::optional<double> mask_prob,
                                    std::uint64_t seed) {
  BuilderConfig b;
  if (file.contains("builder")) {
    const json& j = file.at("builder");
    b.max_len = j.value("max_len", b.max_len);
    b.mask_prob = j.value("mask_prob", b.mask_prob);
    b.mask_token_share = j.value("mask_token_share", b.mask_token_share);
    b.random_token_share = j.value("random_token_share", b.random_token_share);
    b.keep_share = j.value("keep_share", b.keep_share);
  }
  if (max_len) b.max_len = *max_len;
  if (mask_prob) b.mask_prob = *mask_prob;
  b.seed = seed;
  b.validate();
  return b;
}

inline json builder_json(const BuilderConfig& b) {
  return {{"max_len", b.max_len},
          {"mask_prob", b.mask_prob},
          {"mask_token_share", b.mask_token_share},
          {"random_token_share", b.random_token_share},
          {"keep_share", b.keep_share},
          {"seed", b.seed}};
}

inline std::vector<MaskedGroup> mask_all(std::span<const CandidateGroup> groups, const BuilderConfig& b,
                                         std::size_t vocab_size) {
  std::vector<MaskedGroup> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(apply_masking(g, b, vocab_size));
  return out;
}

inline int run(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"Gloss-classification word sense disambiguation toolkit", "lmgc"};
  app.require_subcommand(1);
  Context ctx;
  ctx.argv = args;
  app.add_option("--seed", ctx.seed, "seed for every random stream")->capture_default_str();
  app.add_option("--config", ctx.config_path, "JSON config: TrainConfig fields, optional \"model\" and \"builder\"");
  app.add_option("--out-dir", ctx.out_dir, "directory for every artifact")->capture_default_str();
  app.add_option("--jobs", ctx.jobs, "worker bound")->check(CLI::PositiveNumber)->capture_default_str();
  app.set_version_flag("--version", std::string("lmgc ") + LMGC_VERSION + " (checkpoint format " +
                                        std::to_string(kCheckpointVersion) + ")");

  auto sub = [&](const char* name, const char* desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };
  std::string xml, keys, lexicon_path, vocab_path, groups_path, val_groups_path, checkpoint, predictions_out, input;
  std::vector<std::string> xmls, key_files, pred_files, names;
  std::string mode = "lmgc-multichoice", format = "markdown", head = "classification", system = "F1";
  std::size_t min_freq = 1, samples = 500, classes = 2;
  std::optional<std::size_t> max_vocab, max_len;
  std::optional<double> mask_prob;
  double epsilon = 1e-5;
  ModelFlags mf;
  TrainFlags tf;

  // import-lexicon
  std::string wordnet_dir, tsv;
  auto* c_import = sub("import-lexicon", "WordNet dict/ or TSV -> lexicon.tsv");
  auto* wn_opt = c_import->add_option("--wordnet-dir", wordnet_dir, "WordNet 3.0 dict directory");
  c_import->add_option("--tsv", tsv, "TSV lexicon")->excludes(wn_opt);

  auto* c_stats = sub("corpus-stats", "instance and pair counts as JSON");
  c_stats->add_option("--xml", xml, "framework .data.xml")->required();
  c_stats->add_option("--keys", keys, "gold key file")->required();
  c_stats->add_option("--lexicon", lexicon_path, "TSV lexicon or WordNet dict dir")->required();

  auto* c_build = sub("build-examples", "compile candidate groups (JSON lines)");
  c_build->add_option("--xml", xml, "framework .data.xml")->required();
  c_build->add_option("--keys", keys, "gold key file")->required();
  c_build->add_option("--lexicon", lexicon_path, "TSV lexicon or WordNet dict dir")->required();
  c_build->add_option("--vocab", vocab_path, "vocabulary JSON; built from corpus and glosses if absent");
  c_build->add_option("--min-freq", min_freq, "minimum token frequency when building the vocabulary");
  c_build->add_option("--max-vocab", max_vocab, "cap on regular tokens");
  c_build->add_option("--max-len", max_len, "sequence budget");

  auto* c_train = sub("train", "LMGC or LMGC-M training; writes a run directory");
  c_train->add_option("--mode", mode, "lmgc-binary | lmgc-multichoice | lmgc-m")->capture_default_str();
  c_train->add_option("--groups", groups_path, "training groups")->required();
  c_train->add_option("--val-groups", val_groups_path, "validation groups")->required();
  c_train->add_option("--vocab", vocab_path, "vocabulary JSON")->required();
  c_train->add_option("--mask-prob", mask_prob, "LMGC-M masking probability");
  mf.add(c_train);
  tf.add(c_train);

  auto* c_finetune = sub("finetune", "continue a checkpoint: mask-free LMGC or a downstream head");
  c_finetune->add_option("--checkpoint", checkpoint, "starting checkpoint")->required();
  c_finetune->add_option("--mode", mode, "lmgc-binary | lmgc-multichoice | downstream")->capture_default_str();
  c_finetune->add_option("--groups", groups_path, "training groups, or labeled sequences for downstream")->required();
  c_finetune->add_option("--val-groups", val_groups_path, "validation set")->required();
  c_finetune->add_option("--head", head, "classification | regression")->capture_default_str();
  c_finetune->add_option("--classes", classes, "downstream classes K")->capture_default_str();
  mf.add(c_finetune);
  tf.add(c_finetune);

  auto* c_predict = sub("predict", "one 'instance_id sense_key' line per instance");
  c_predict->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  c_predict->add_option("--vocab", vocab_path, "vocabulary JSON")->required();
  c_predict->add_option("--xml", xml, "framework .data.xml")->required();
  c_predict->add_option("--lexicon", lexicon_path, "TSV lexicon or WordNet dict dir")->required();
  c_predict->add_option("--out", predictions_out, "file name under out-dir (default predictions.txt)");
  c_predict->add_option("--max-len", max_len, "sequence budget");

  auto* c_score = sub("score", "P/R/F1 per dataset and POS");
  c_score->add_option("--xml", xmls, "framework .data.xml (repeatable)")->required();
  c_score->add_option("--keys", key_files, "gold key file per --xml")->required();
  c_score->add_option("--predictions", pred_files, "prediction file per --xml")->required();
  c_score->add_option("--name", names, "dataset name per --xml (default: file stem)");

  auto* c_mfs = sub("mfs", "rank-1 sense baseline");
  c_mfs->add_option("--xml", xml, "framework .data.xml")->required();
  c_mfs->add_option("--lexicon", lexicon_path, "TSV lexicon or WordNet dict dir")->required();
  c_mfs->add_option("--keys", keys, "gold keys; adds a score report");
  c_mfs->add_option("--out", predictions_out, "file name under out-dir (default mfs.txt)");

  auto* c_grad = sub("gradcheck", "analytic vs central-difference gradients");
  c_grad->add_option("--mode", mode, "lmgc-multichoice | lmgc-m")->capture_default_str();
  c_grad->add_option("--samples", samples, "sampled coordinates")->capture_default_str();
  c_grad->add_option("--epsilon", epsilon, "finite-difference step")->capture_default_str();
  c_grad->add_option("--groups", groups_path, "groups to use (default: a synthetic group)");
  c_grad->add_option("--vocab", vocab_path, "vocabulary JSON for --groups");
  mf.add(c_grad);

  auto* c_report = sub("report", "render a score report");
  c_report->add_option("--input", input, "report.json from score")->required();
  c_report->add_option("--format", format, "markdown | json")->capture_default_str();
  c_report->add_option("--system", system, "row label")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    io.out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    io.out << e.what() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    fs::create_directories(ctx.out_dir);
    const json file_cfg = ctx.config_file();
    if (!ctx.config_path.empty()) ctx.inputs.push_back(ctx.config_path);
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();

    if (chosen == c_import) {
      if (wordnet_dir.empty() == tsv.empty()) throw Error(ErrorKind::InvalidConfig, "give exactly one of --wordnet-dir, --tsv");
      const GlossLexicon lex = wordnet_dir.empty() ? import_tsv_lexicon(tsv) : import_wordnet(WordNetFiles::from_dir(wordnet_dir));
      ctx.inputs.push_back(wordnet_dir.empty() ? tsv : wordnet_dir);
      write_file(ctx.out("lexicon.tsv").string(), export_tsv_lexicon(lex));
      io.out << json{{"senses", lex.size()}, {"lemma_pos_groups", lex.groups().size()}}.dump() << "\n";
    } else if (chosen == c_stats) {
      ctx.inputs = {xml, keys, lexicon_path};
      const CorpusStats s = compute_stats(load_framework_xml(xml), load_gold_keys(keys), load_lexicon(lexicon_path));
      const json j = stats_json(s);
      write_file(ctx.out("stats.json").string(), j.dump(2) + "\n");
      io.out << j.dump() << "\n";
    } else if (chosen == c_build) {
      ctx.inputs = {xml, keys, lexicon_path, vocab_path};
      const WsdCorpus corpus = load_framework_xml(xml);
      const GoldKeys gold = load_gold_keys(keys);
      const GlossLexicon lex = load_lexicon(lexicon_path);
      const BuilderConfig b = builder_config(file_cfg, max_len, std::nullopt, ctx.seed);
      ctx.effective_config = {{"builder", builder_json(b)}, {"min_freq", min_freq}};
      Vocabulary vocab;
      if (!vocab_path.empty() && fs::exists(vocab_path)) {
        vocab = load_vocab(vocab_path);
      } else {
        vocab = build_vocab(std::span<const WsdCorpus>(&corpus, 1), &lex, min_freq, max_vocab);
        save_vocab(vocab, (vocab_path.empty() ? ctx.out("vocab.json") : fs::path(vocab_path)).string());
      }
      const GroupBuildResult r = build_groups(corpus, gold, lex, vocab, b);
      export_groups(r.groups, ctx.out(corpus.name() + ".groups.jsonl").string());
      io.out << json{{"groups", r.groups.size()},
                     {"skipped", r.skipped.size()},
                     {"pairs", r.pairs},
                     {"pairs_within_budget", r.pairs_within_budget},
                     {"fit_fraction", r.pairs ? static_cast<double>(r.pairs_within_budget) / static_cast<double>(r.pairs) : 1.0},
                     {"vocab_size", vocab.size()}}
                    .dump()
             << "\n";
    } else if (chosen == c_train) {
      ctx.inputs = {groups_path, val_groups_path, vocab_path};
      const Vocabulary vocab = load_vocab(vocab_path);
      TrainConfig tc = tf.resolve(file_cfg, ctx.seed);
      tc.mode = parse_train_mode(mode);
      ModelConfig mc = file_cfg.contains("model") ? file_cfg.at("model").get<ModelConfig>() : ModelConfig{};
      mc = mf.resolve(mc);
      mc.vocab = vocab.size();
      mc.seed = ctx.seed;
      mc.validate();
      const BuilderConfig b = builder_config(file_cfg, mc.max_positions, mask_prob, ctx.seed);
      json eff = tc;
      eff["model"] = mc;
      eff["builder"] = builder_json(b);
      ctx.effective_config = eff;
      const auto tr = import_groups(groups_path);
      const auto va = import_groups(val_groups_path);
      const Model init = init_params(mc);
      const RunDir run_dir(ctx.out_dir);
      TrainResult res;
      if (tc.mode == TrainMode::LmgcM) {
        const auto mtr = mask_all(tr, b, vocab.size());
        const auto mva = mask_all(va, b, vocab.size());
        res = pretrain_lmgc_m(mtr, mva, init, tc, &run_dir);
      } else if (tc.mode == TrainMode::Downstream) {
        throw Error(ErrorKind::InvalidConfig, "use finetune for downstream heads");
      } else {
        res = train_lmgc(tr, va, init, tc, &run_dir);
      }
      json rep = to_json(res.report);
      rep.erase("wall_seconds");
      io.err << "trained in " << res.report.wall_seconds << " s\n";
      io.out << rep.dump() << "\n";
    } else if (chosen == c_finetune) {
      ctx.inputs = {checkpoint, groups_path, val_groups_path};
      const Model start = load_checkpoint(checkpoint);
      TrainConfig tc = tf.resolve(file_cfg, ctx.seed);
      const ModelConfig expected = mf.resolve(start.config);
      json eff = tc;
      eff["model"] = expected;
      const RunDir run_dir(ctx.out_dir);
      TrainResult res;
      if (parse_train_mode(mode) == TrainMode::Downstream) {
        HeadSpec hs;
        if (head == "regression")
          hs = {HeadKind::Regression, 1};
        else if (head == "classification")
          hs = {HeadKind::Classification, classes};
        else
          throw Error(ErrorKind::InvalidConfig, "--head must be classification or regression");
        eff["head"] = head;
        eff["classes"] = hs.classes;
        ctx.effective_config = eff;
        res = finetune_downstream(start, load_labeled(groups_path), load_labeled(val_groups_path), hs, tc, &run_dir);
      } else {
        ctx.effective_config = eff;
        tc.mode = parse_train_mode(mode);
        const auto tr = import_groups(groups_path);
        const auto va = import_groups(val_groups_path);
        if (tc.mode == TrainMode::LmgcBinary) {
          if (!start.config.same_shape(expected)) throw Error(ErrorKind::CheckpointIncompatible, checkpoint);
          res = train_lmgc(tr, va, start, tc, &run_dir);
        } else {
          res = finetune_without_masks(start, expected, tr, va, tc, &run_dir);
        }
      }
      json rep = to_json(res.report);
      rep.erase("wall_seconds");
      io.out << rep.dump() << "\n";
    } else if (chosen == c_predict) {
      ctx.inputs = {checkpoint, vocab_path, xml, lexicon_path};
      const Model model = load_checkpoint(checkpoint);
      const Vocabulary vocab = load_vocab(vocab_path);
      const BuilderConfig b = builder_config(file_cfg, max_len.value_or(model.config.max_positions), std::nullopt, ctx.seed);
      ctx.effective_config = {{"builder", builder_json(b)}};
      const PredictionResult r = predict(model, load_framework_xml(xml), load_lexicon(lexicon_path), vocab, b);
      write_file(ctx.out(predictions_out.empty() ? "predictions.txt" : predictions_out).string(),
                 format_predictions(r.predictions));
      io.out << json{{"predicted", r.predictions.size()}, {"skipped", r.skipped.size()}}.dump() << "\n";
    } else if (chosen == c_score) {
      if (key_files.size() != xmls.size() || pred_files.size() != xmls.size() || (!names.empty() && names.size() != xmls.size()))
        throw Error(ErrorKind::InvalidConfig, "--xml, --keys, --predictions (and --name) must repeat equally often");
      std::vector<WsdCorpus> corpora;
      std::vector<GoldKeys> golds;
      std::vector<std::vector<Prediction>> preds;
      for (std::size_t i = 0; i < xmls.size(); ++i) {
        corpora.push_back(load_framework_xml(xmls[i]));
        golds.push_back(load_gold_keys(key_files[i]));
        preds.push_back(parse_predictions(read_file(pred_files[i]), pred_files[i]));
        ctx.inputs.insert(ctx.inputs.end(), {xmls[i], key_files[i], pred_files[i]});
      }
      std::vector<DatasetInput> in;
      for (std::size_t i = 0; i < xmls.size(); ++i)
        in.push_back({names.empty() ? corpora[i].name() : names[i], &corpora[i], &golds[i], preds[i]});
      const ScoreReport rep = score_datasets(in);
      const std::string text = emit_report(rep, ReportFormat::Json);
      write_file(ctx.out("report.json").string(), text);
      io.out << text;
    } else if (chosen == c_mfs) {
      ctx.inputs = {xml, lexicon_path, keys};
      const WsdCorpus corpus = load_framework_xml(xml);
      const PredictionResult r = mfs_baseline(corpus, load_lexicon(lexicon_path));
      write_file(ctx.out(predictions_out.empty() ? "mfs.txt" : predictions_out).string(), format_predictions(r.predictions));
      if (!keys.empty()) {
        const GoldKeys gold = load_gold_keys(keys);
        const DatasetInput in{corpus.name(), &corpus, &gold, r.predictions};
        const std::string text = emit_report(score_datasets(std::span<const DatasetInput>(&in, 1)), ReportFormat::Json);
        write_file(ctx.out("mfs_report.json").string(), text);
        io.out << text;
      } else {
        io.out << json{{"predicted", r.predictions.size()}, {"skipped", r.skipped.size()}}.dump() << "\n";
      }
    } else if (chosen == c_grad) {
      const TrainMode gm = parse_train_mode(mode);
      if (gm != TrainMode::LmgcMultichoice && gm != TrainMode::LmgcM)
        throw Error(ErrorKind::InvalidConfig, "gradcheck supports lmgc-multichoice and lmgc-m");
      std::vector<CandidateGroup> groups;
      std::size_t vsize = 0;
      if (!groups_path.empty()) {
        if (vocab_path.empty()) throw Error(ErrorKind::InvalidConfig, "--groups needs --vocab");
        ctx.inputs = {groups_path, vocab_path};
        groups = import_groups(groups_path);
        vsize = load_vocab(vocab_path).size();
        if (groups.empty()) throw Error(ErrorKind::EmptyDataset, groups_path);
      } else {
        SyntheticSpec spec;
        spec.n_lemmas = 2;
        spec.n_sentences = 1;
        spec.senses_per_lemma = 3;
        spec.vocab_size = 20;
        spec.seed = ctx.seed;
        const SyntheticData d = generate(spec);
        const Vocabulary v = build_vocab(std::span<const WsdCorpus>(&d.corpus, 1), &d.lexicon);
        const BuilderConfig b = builder_config(json::object(), std::size_t{32}, 0.3, ctx.seed);
        groups = build_groups(d.corpus, d.gold, d.lexicon, v, b).groups;
        vsize = v.size();
      }
      ModelConfig mc;
      mc.hidden = 16;
      mc.ff = 32;
      mc = mf.resolve(mc);
      mc.vocab = vsize;
      mc.dropout = 0.0;
      mc.seed = ctx.seed;
      std::size_t longest = 0;
      for (const auto& p : groups.front().pairs) longest = std::max(longest, p.sequence.ids.size());
      mc.max_positions = std::max(mc.max_positions, longest);
      mc.validate();
      Model model = init_params(mc);
      const CandidateGroup& g = groups.front();
      const auto seqs = group_sequences(g);
      BuilderConfig mb;
      mb.mask_prob = 0.3;
      mb.seed = ctx.seed;
      const MaskedGroup masked = apply_masking(g, mb, vsize);
      LossClosure f;
      if (gm == TrainMode::LmgcM)
        f = [&](const Model& m, Model* gr) { return group_lmgc_m_loss(m, masked, gr).scalar; };
      else
        f = [&](const Model& m, Model* gr) { return group_multichoice_loss(m, seqs, g.primary_gold, gr); };
      ctx.effective_config = {{"model", mc}, {"mode", to_string(gm)}, {"samples", samples}, {"epsilon", epsilon}};
      const GradcheckReport rep = gradcheck(model, f, epsilon, samples, ctx.seed);
      json j = rep.to_json();
      j["mode"] = to_string(gm);
      write_file(ctx.out("gradcheck.json").string(), j.dump(2) + "\n");
      io.out << j.dump() << "\n";
    } else if (chosen == c_report) {
      ctx.inputs = {input};
      ReportFormat f;
      if (format == "markdown" || format == "md")
        f = ReportFormat::Markdown;
      else if (format == "json")
        f = ReportFormat::Json;
      else
        throw Error(ErrorKind::InvalidConfig, "--format must be markdown or json");
      json j;
      try {
        j = json::parse(read_file(input));
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, input + ": " + e.what());
      }
      const std::string text = emit_report(report_from_json(j), f, system);
      write_file(ctx.out(f == ReportFormat::Json ? "report.rendered.json" : "report.md").string(), text);
      io.out << text;
    }
    ctx.write_manifest(name);
    return 0;
  } catch (const Error& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    io.err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

inline int run(int argc, const char* const* argv, Streams io = {std::cout, std::cerr}) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, io);
}

}  // namespace lmgc::cli
