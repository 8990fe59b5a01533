#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kbe/analysis.hpp"
#include "kbe/checkpoint.hpp"
#include "kbe/errors.hpp"
#include "kbe/evaluator.hpp"
#include "kbe/pretrained.hpp"
#include "kbe/relation_categories.hpp"
#include "kbe/trainer.hpp"

namespace fs = std::filesystem;

namespace kbe::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kTrainFile = "train.txt";
constexpr const char* kValidFile = "valid.txt";
constexpr const char* kTestFile = "test.txt";
constexpr const char* kEntitiesFile = "entities.tsv";
constexpr const char* kRelationsFile = "relations.tsv";

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Fills options that were not given on the command line from a flat
/// "key = value" file. Blank lines and lines starting with '#' or ';' are ignored.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path, lineno, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config") continue;
    auto* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;  // command line wins
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      std::stringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = item.substr(1, item.size() - 2);
        if (!item.empty()) opt->add_result(item);
      }
    } else {
      opt->add_result(value);
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Writes every option of `sub`, with its resolved value, as a replayable config file.
void echo_config(const CLI::App& sub, const fs::path& path) {
  std::string text = "# resolved configuration for '" + sub.get_name() + "'\n" + sub.config_to_str(true, false);
  write_text(path, text);
}

struct DataOptions {
  std::string dir;
};

void add_data_option(CLI::App* sub, DataOptions& d) {
  sub->add_option("--data", d.dir,
                  "Dataset directory with train.txt, valid.txt, test.txt (and entities.tsv/relations.tsv from prepare)")
      ->required();
}

TripletStore load_data_dir(const std::string& dir) {
  const fs::path root(dir);
  const auto train = (root / kTrainFile).string();
  const auto valid = (root / kValidFile).string();
  const auto test = (root / kTestFile).string();
  if (fs::exists(root / kEntitiesFile) && fs::exists(root / kRelationsFile)) {
    Vocabulary vocab{load_name_index((root / kEntitiesFile).string()), load_name_index((root / kRelationsFile).string())};
    return load_store(train, valid, test, std::move(vocab));
  }
  return load_store(train, valid, test);
}

std::string stats_report(const TripletStore& store, double threshold) {
  std::ostringstream os;
  os << "entities\t" << store.entity_count() << '\n'
     << "relations\t" << store.relation_count() << '\n'
     << "triplets\t" << store.size() << '\n'
     << "train\t" << store.train().size() << '\n'
     << "valid\t" << store.valid().size() << '\n'
     << "test\t" << store.test().size() << '\n';

  const auto n = static_cast<std::size_t>(store.relation_count());
  std::vector<std::array<std::int64_t, 3>> counts(n, {0, 0, 0});
  for (int s = 0; s < 3; ++s) {
    for (const auto& t : store.split(static_cast<Split>(s))) ++counts[static_cast<std::size_t>(t.relation)][s];
  }
  std::optional<RelationCategoryTable> categories;
  if (store.size() > 0) categories = classify_relations(store, threshold);

  os << "#relation\ttrain\tvalid\ttest\tcategory\tobjects_per_subject\tsubjects_per_object\n";
  for (std::size_t r = 0; r < n; ++r) {
    const auto rid = static_cast<RelationId>(r);
    os << store.vocab().relations.name(rid) << '\t' << counts[r][0] << '\t' << counts[r][1] << '\t' << counts[r][2];
    if (categories) {
      const auto& info = (*categories)[rid];
      os << '\t' << category_name(info.category) << '\t' << info.mean_objects_per_subject << '\t'
         << info.mean_subjects_per_object;
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  std::string train, valid, test, out;
  std::int64_t min_relation_count = 0;
  double category_threshold = kDefaultCategoryThreshold;
};

int cmd_prepare(const CLI::App& sub, const PrepareOptions& o, std::ostream& out) {
  if (o.min_relation_count < 0) throw UsageError("--min-relation-count must be >= 0");
  auto store = load_store(o.train, o.valid, o.test);
  if (o.min_relation_count > 0) store = filter_frequent_relations(store, o.min_relation_count);
  const auto report = stats_report(store, o.category_threshold);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_triplets(store.train(), store.vocab(), (dir / kTrainFile).string());
  save_triplets(store.valid(), store.vocab(), (dir / kValidFile).string());
  save_triplets(store.test(), store.vocab(), (dir / kTestFile).string());
  save_name_index(store.vocab().entities, (dir / kEntitiesFile).string());
  save_name_index(store.vocab().relations, (dir / kRelationsFile).string());
  write_text(dir / "stats.tsv", report);
  echo_config(sub, dir / "prepare.cfg");
  out << report;
  return kOk;
}

// ---------------------------------------------------------------- stats

struct StatsOptions {
  DataOptions data;
  double category_threshold = kDefaultCategoryThreshold;
};

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  out << stats_report(load_data_dir(o.data.dir), o.category_threshold);
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  DataOptions data;
  std::string model = "distmult";
  std::string out;
  Hyperparams hyper;
  std::int32_t relation_dim = 0;
  TrainConfig config;
  bool no_shuffle = false;
  std::string entity_vectors, entity_token_map, word_vectors, entity_text_map;
};

int cmd_train(const CLI::App& sub, TrainOptions o, std::ostream& out) {
  const auto spec = parse_model_spec(o.model);
  o.hyper.activation = spec.activation;
  o.hyper.relation_dim = o.relation_dim > 0 ? o.relation_dim : default_relation_dim(spec.kind, o.hyper.entity_dim);
  o.config.shuffle = !o.no_shuffle;
  if (!o.entity_vectors.empty() && !o.word_vectors.empty()) {
    throw UsageError("--init-entity-vectors and --init-word-vectors are mutually exclusive");
  }
  const fs::path dir(o.out);
  if (o.config.checkpoint_every > 0) o.config.checkpoint_dir = (dir / "checkpoints").string();
  o.hyper.validate();
  o.config.validate();

  const auto store = load_data_dir(o.data.dir);
  auto params = init_random(spec.kind, o.hyper, store.entity_count(), store.relation_count());
  if (!o.entity_vectors.empty()) {
    const auto vectors = load_pretrained_vectors(o.entity_vectors);
    const auto tokens = o.entity_token_map.empty() ? TokenMap{} : load_token_map(o.entity_token_map);
    const auto count = init_from_pretrained_entity_vectors(params, store.vocab().entities, vectors, tokens);
    out << "initialized " << count << " of " << store.entity_count() << " entities from " << o.entity_vectors << '\n';
  }
  if (!o.word_vectors.empty()) {
    const auto vectors = load_pretrained_vectors(o.word_vectors);
    const auto names = o.entity_text_map.empty() ? TokenMap{} : load_token_map(o.entity_text_map);
    const auto count = init_word_averaged(params, store.vocab().entities, vectors, names);
    out << "initialized " << count << " of " << store.entity_count() << " entities from word averages\n";
  }

  fs::create_directories(dir);
  echo_config(sub, dir / "train.cfg");
  std::ofstream trace(dir / "loss_trace.txt");
  if (!trace) throw IoError("cannot write " + (dir / "loss_trace.txt").string());

  auto result = train(store, o.config, std::move(params), [&](const EpochStats& e, const ModelParams&) {
    const auto line = format_epoch(e);
    trace << line << '\n' << std::flush;
    out << line << '\n';
  });
  save_checkpoint(result.params, store.vocab().hash(), (dir / "model.ckpt").string());
  out << "wrote " << (dir / "model.ckpt").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  DataOptions data;
  std::string checkpoint, out, split = "test";
  std::vector<std::string> metrics{"mrr", "hits@10"};
  std::vector<std::int32_t> hits;
  bool raw = false, type_constrained = false, by_category = false;
  double category_threshold = kDefaultCategoryThreshold;
  std::int32_t workers = 0;
};

int cmd_eval(const CLI::App& sub, const EvalOptions& o, std::ostream& out) {
  EvalSetting setting;
  setting.filtered = !o.raw;
  setting.type_constrained = o.type_constrained;
  setting.workers = o.workers;
  setting.hits_k.clear();
  for (const auto& m : o.metrics) {
    if (m == "mrr") continue;
    if (m == "map") {
      setting.compute_map = true;
    } else if (m.rfind("hits@", 0) == 0) {
      try {
        setting.hits_k.push_back(std::stoi(m.substr(5)));
      } catch (const std::exception&) {
        throw UsageError("bad metric '" + m + "'");
      }
    } else {
      throw UsageError("unknown metric '" + m + "' (expected mrr, hits@K, map)");
    }
  }
  for (auto k : o.hits) setting.hits_k.push_back(k);
  if (o.by_category && setting.hits_k.empty()) setting.hits_k.push_back(10);
  try {
    setting.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (o.split != "test" && o.split != "valid") throw UsageError("--split must be test or valid");

  auto store = load_data_dir(o.data.dir);
  if (o.split == "valid") {
    store = TripletStore(store.vocab(), store.train(), store.test(), store.valid());
  }
  const auto params = load_checkpoint(o.checkpoint, store.vocab().hash());
  if (params.entity_count() != store.entity_count() || params.relation_count() != store.relation_count()) {
    throw CheckpointError("checkpoint shape does not match the dataset");
  }

  std::optional<RelationCategoryTable> categories;
  if (o.by_category) categories = classify_relations(store, o.category_threshold);
  std::optional<TypeConstraintIndex> types;
  if (setting.type_constrained || setting.compute_map) types.emplace(store);

  const CandidateScorer scorer(params);
  const auto report = evaluate(scorer, store, setting, categories ? &*categories : nullptr, types ? &*types : nullptr);
  const auto text = format_report_text(report);
  out << text;
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_text(dir / "report.txt", text);
    write_text(dir / "report.jsonl", format_report_records(report));
    echo_config(sub, dir / "eval.cfg");
  }
  return kOk;
}

// ---------------------------------------------------------------- nn / export

struct NnOptions {
  DataOptions data;
  std::string checkpoint;
  std::vector<std::string> relations;
  std::int32_t k = 3;
};

struct ModelWithVocab {
  Vocabulary vocab;
  ModelParams params;
};

ModelWithVocab load_model(const std::string& data_dir, const std::string& checkpoint) {
  auto store = load_data_dir(data_dir);
  auto params = load_checkpoint(checkpoint, store.vocab().hash());
  return {store.vocab(), std::move(params)};
}

int cmd_nn(const NnOptions& o, std::ostream& out, std::ostream& err) {
  if (o.k < 1) throw UsageError("--k must be >= 1");
  const auto model = load_model(o.data.dir, o.checkpoint);
  if (o.k >= model.params.relation_count()) {
    throw UsageError("--k must be smaller than the relation count (" + std::to_string(model.params.relation_count()) +
                     ")");
  }
  const auto kind = distance_kind(model.params.kind) == RelationDistanceKind::Euclidean ? "euclidean" : "frobenius";
  for (const auto& name : o.relations) {
    const auto id = model.vocab.relations.find(name);
    if (!id) {
      err << "unknown relation '" << name << "'";
      const auto close = close_matches(model.vocab.relations, name);
      if (!close.empty()) {
        err << "; did you mean:";
        for (const auto& c : close) err << "\n  " << c;
      }
      err << '\n';
      return kData;
    }
    out << "# " << name << " (" << kind << " distance)\n";
    for (const auto& nb : nearest_relations(model.params, model.vocab.relations, *id, o.k)) {
      out << nb.name << '\t' << std::setprecision(6) << nb.distance << '\n';
    }
  }
  return kOk;
}

struct ExportOptions {
  DataOptions data;
  std::string checkpoint, what = "relations", output;
};

int cmd_export(const ExportOptions& o, std::ostream& out) {
  ExportWhat what;
  if (o.what == "entities") {
    what = ExportWhat::Entities;
  } else if (o.what == "relations") {
    what = ExportWhat::Relations;
  } else {
    throw UsageError("--what must be entities or relations");
  }
  const auto model = load_model(o.data.dir, o.checkpoint);
  export_embeddings(model.params, model.vocab, o.output, what);
  out << "wrote " << (what == ExportWhat::Entities ? model.params.entity_count() : model.params.relation_count())
      << ' ' << o.what << " to " << o.output << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-base embedding toolkit: train and evaluate relation scoring models"};
  app.name("kbe");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat key = value file; command-line flags take precedence");
  };

  PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "Load raw splits, optionally filter rare relations, write a dataset");
  prepare->add_option("--train", prep.train, "Training triples (subject<TAB>relation<TAB>object)")->required();
  prepare->add_option("--valid", prep.valid, "Validation triples")->required();
  prepare->add_option("--test", prep.test, "Test triples")->required();
  prepare->add_option("--out", prep.out, "Output dataset directory")->required();
  prepare->add_option("--min-relation-count", prep.min_relation_count,
                      "Keep relations with at least this many training triples (0 keeps all)");
  prepare->add_option("--category-threshold", prep.category_threshold, "Relation category threshold");
  add_config(prepare);

  StatsOptions st;
  auto* stats = app.add_subcommand("stats", "Print dataset statistics");
  add_data_option(stats, st.data);
  stats->add_option("--category-threshold", st.category_threshold, "Relation category threshold");
  add_config(stats);

  TrainOptions tr;
  auto* trainc = app.add_subcommand("train", "Train a model with mini-batch AdaGrad on the margin ranking loss");
  add_data_option(trainc, tr.data);
  trainc->add_option("--model", tr.model,
                     "distance | single-layer | transe (distadd) | bilinear | distmult (bilinear-diag) | "
                     "bilinear-linear | ntn, optionally suffixed with -tanh");
  trainc->add_option("--out", tr.out, "Output directory")->required();
  trainc->add_option("--dim", tr.hyper.entity_dim, "Entity dimension n");
  trainc->add_option("--relation-dim", tr.relation_dim, "m for ntn/single-layer/distance/bilinear-linear (0 = model default)");
  trainc->add_option("--epochs", tr.hyper.epochs, "Training epochs");
  trainc->add_option("--lr", tr.hyper.learning_rate, "Initial AdaGrad learning rate");
  trainc->add_option("--reg", tr.hyper.l2_reg, "L2 regularization on relation parameters");
  trainc->add_option("--minibatches", tr.hyper.minibatch_count, "Mini-batches per epoch");
  trainc->add_option("--margin", tr.hyper.margin, "Ranking margin");
  trainc->add_option("--seed", tr.hyper.seed, "Random seed");
  trainc->add_option("--epsilon", tr.config.adagrad_epsilon, "AdaGrad epsilon");
  trainc->add_option("--max-negative-draws", tr.config.max_negative_draws, "Rejection-sampling bound per negative");
  trainc->add_flag("--no-shuffle", tr.no_shuffle, "Keep the file order of training triples");
  trainc->add_option("--checkpoint-every", tr.config.checkpoint_every, "Write a checkpoint every N epochs (0 = only final)");
  trainc->add_option("--init-entity-vectors", tr.entity_vectors, "Pre-trained entity vectors (text format)");
  trainc->add_option("--entity-token-map", tr.entity_token_map, "entity<TAB>token lookup for --init-entity-vectors");
  trainc->add_option("--init-word-vectors", tr.word_vectors, "Pre-trained word vectors; entities get word averages");
  trainc->add_option("--entity-text-map", tr.entity_text_map, "entity<TAB>surface name for --init-word-vectors");
  add_config(trainc);

  EvalOptions ev;
  auto* evalc = app.add_subcommand("eval", "Link-prediction evaluation");
  add_data_option(evalc, ev.data);
  evalc->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  evalc->add_option("--metrics", ev.metrics, "Comma-separated: mrr, hits@K, map")->delimiter(',');
  evalc->add_option("--hits", ev.hits, "Additional HITS@k cut-offs")->delimiter(',');
  evalc->add_flag("--raw", ev.raw, "Keep known positives among the candidates");
  evalc->add_flag("--type-constrained", ev.type_constrained, "Restrict candidates to each relation's observed types");
  evalc->add_flag("--by-category", ev.by_category, "Break HITS@k down by relation category and side");
  evalc->add_option("--category-threshold", ev.category_threshold, "Relation category threshold");
  evalc->add_option("--split", ev.split, "test | valid");
  evalc->add_option("--workers", ev.workers, "Worker threads (0 = all cores)");
  evalc->add_option("--out", ev.out, "Directory for report.txt, report.jsonl and the resolved config");
  add_config(evalc);

  NnOptions nn;
  auto* nnc = app.add_subcommand("nn", "Nearest relations in parameter space");
  add_data_option(nnc, nn.data);
  nnc->add_option("--checkpoint", nn.checkpoint, "Model checkpoint")->required();
  nnc->add_option("--relation", nn.relations, "Relation name (repeatable)")->required();
  nnc->add_option("--k", nn.k, "Neighbors per relation");
  add_config(nnc);

  ExportOptions ex;
  auto* exportc = app.add_subcommand("export", "Export embeddings as TSV for external visualization");
  add_data_option(exportc, ex.data);
  exportc->add_option("--checkpoint", ex.checkpoint, "Model checkpoint")->required();
  exportc->add_option("--what", ex.what, "entities | relations");
  exportc->add_option("--output", ex.output, "Output TSV path")->required();
  add_config(exportc);

  try {
    // Required options may come from the config file, so parse once without the
    // requirement check when --config is present.
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    const bool has_config = std::find(args.begin(), args.end(), "--config") != args.end() ||
                            std::any_of(args.begin(), args.end(), [](const std::string& a) { return a.rfind("--config=", 0) == 0; });
    std::vector<std::pair<CLI::App*, CLI::Option*>> relaxed;
    if (has_config) {
      for (auto* sub : app.get_subcommands({})) {
        for (auto* opt : sub->get_options()) {
          if (opt->get_required()) {
            opt->required(false);
            relaxed.emplace_back(sub, opt);
          }
        }
      }
    }
    app.parse(args);

    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(*sub, config_path);
    for (auto [owner, opt] : relaxed) {
      if (owner == sub && opt->count() == 0) throw UsageError(opt->get_name() + " is required");
    }

    if (sub == prepare) return cmd_prepare(*sub, prep, out);
    if (sub == stats) return cmd_stats(st, out);
    if (sub == trainc) return cmd_train(*sub, tr, out);
    if (sub == evalc) return cmd_eval(*sub, ev, out);
    if (sub == nnc) return cmd_nn(nn, out, err);
    if (sub == exportc) return cmd_export(ex, out);
    return kInternal;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace kbe::cli
