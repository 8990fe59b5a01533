// Acceptance runner: one PASS / FAIL / SKIP line per criterion.
// Exit status is nonzero only when some criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "fixtures.hpp"
#include "kbe/checkpoint.hpp"
#include "kbe/errors.hpp"
#include "kbe/evaluator.hpp"
#include "kbe/model_kind.hpp"
#include "kbe/pretrained.hpp"
#include "kbe/relation_categories.hpp"
#include "kbe/scoring.hpp"
#include "kbe/trainer.hpp"
#include "kbe/type_index.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace kbe;
using kbe::test::kAllKinds;
using kbe::test::random_params;
using kbe::test::random_store;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::Skip, std::move(d)}; }

Outcome verdict(bool ok, std::string d) { return ok ? pass(std::move(d)) : fail(std::move(d)); }

struct Options {
  std::string fb15k_dir;
  std::string wn_dir;
  std::string entity_vectors;
  std::string entity_token_map;
  bool long_runs = false;
  std::vector<int> only;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ------------------------------------------------------------------ 1

Outcome gradient_correctness() {
  double worst = 0.0;
  int instances = 0;
  for (auto kind : kAllKinds) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto act = seed % 2 == 0 ? Activation::Tanh : Activation::Identity;
      auto p = random_params(kind, 5, 2, 4, 3, 1000 + seed, act, 0.8);
      const Triplet t{static_cast<EntityId>(seed % 5), static_cast<RelationId>(seed % 2),
                      static_cast<EntityId>((seed * 3 + 1) % 5)};
      const auto g = score_gradients(p, t);
      const auto f = [&] { return score(p, t); };

      std::vector<double> analytic, numeric;
      for (Eigen::Index j = 0; j < p.dim(); ++j) {
        const double gs = g.subject_row(j) + (t.subject == t.object ? g.object_row(j) : 0.0);
        analytic.push_back(gs);
        numeric.push_back(oracle::central_difference(f, p.entities(t.subject, j)));
        if (t.subject != t.object) {
          analytic.push_back(g.object_row(j));
          numeric.push_back(oracle::central_difference(f, p.entities(t.object, j)));
        }
      }
      worst = std::max(worst, oracle::relative_error(analytic, numeric));

      const auto pb = blocks(p.relations[static_cast<std::size_t>(t.relation)]);
      const auto gb = blocks(g.relation);
      for (std::size_t b = 0; b < pb.size(); ++b) {
        std::vector<double> a(gb[b].begin(), gb[b].end()), num;
        for (auto& x : pb[b]) num.push_back(oracle::central_difference(f, x));
        worst = std::max(worst, oracle::relative_error(a, num));
      }
      ++instances;
    }
  }
  return verdict(worst < 1e-4, std::to_string(instances) + " instances, max relative error " + fmt(worst, 3));
}

// ------------------------------------------------------------------ 2

Outcome algebraic_equivalences() {
  double worst_transe = 0.0, worst_diag = 0.0, worst_ntn = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::int32_t>(2 + trial % 9);
    const auto seed = static_cast<std::uint64_t>(5000 + trial);

    auto te = random_params(ModelKind::TransE, 2, 1, n, 1, seed);
    for (Eigen::Index i = 0; i < 2; ++i) te.entities.row(i).normalize();
    const Eigen::VectorXd y1 = te.entities.row(0).transpose(), y2 = te.entities.row(1).transpose();
    const auto& v = std::get<TranslationVector>(te.relations[0]).v;
    const double framework = 2.0 * v.dot(y1 - y2) - 2.0 * y1.dot(y2) + v.squaredNorm();
    worst_transe = std::max(worst_transe, std::abs(-score(te, {0, 0, 1}) - 2.0 - framework));

    auto diag = random_params(ModelKind::BilinearDiag, 2, 1, n, 1, seed);
    auto full = random_params(ModelKind::Bilinear, 2, 1, n, 1, seed);
    full.entities = diag.entities;
    std::get<FullBilinear>(full.relations[0]).m = std::get<DiagonalBilinear>(diag.relations[0]).d.asDiagonal();
    worst_diag = std::max(worst_diag, std::abs(score(diag, {0, 0, 1}) - score(full, {0, 0, 1})));

    const auto ntn = random_params(ModelKind::NTN, 2, 1, n, 1, seed);
    auto bl = random_params(ModelKind::BilinearLinear, 2, 1, n, 1, seed);
    bl.entities = ntn.entities;
    bl.relations = ntn.relations;
    const Eigen::VectorXd a = ntn.entities.row(0).transpose(), b = ntn.entities.row(1).transpose();
    const double ntn_identity =
        tensor_layer_score(std::get<TensorPlusLinear>(ntn.relations[0]), a, b, Activation::Identity);
    worst_ntn = std::max(worst_ntn, std::abs(ntn_identity - score(bl, {0, 0, 1})));
  }
  const bool ok = worst_transe <= 1e-9 && worst_diag <= 1e-12 && worst_ntn <= 1e-12;
  return verdict(ok, "100 instances each; max |diff| transe " + fmt(worst_transe, 2) + ", diag " +
                         fmt(worst_diag, 2) + ", ntn " + fmt(worst_ntn, 2));
}

// ------------------------------------------------------------------ 3

Outcome ranking_oracle() {
  int kbs = 0;
  std::int64_t rank_mismatches = 0, rank_checks = 0;
  double worst_metric = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto entities = static_cast<std::int32_t>(8 + seed);  // 9..18
    const auto store = random_store(entities, 3, 12 * static_cast<std::size_t>(entities), 300 + seed);
    const auto kind = kAllKinds[seed % kAllKinds.size()];
    const auto p = random_params(kind, entities, 3, 4, 2, seed);
    const CandidateScorer scorer(p);
    const TypeConstraintIndex types(store);
    for (bool filtered : {false, true}) {
      for (bool typed : {false, true}) {
        EvalSetting s;
        s.filtered = filtered;
        s.type_constrained = typed;
        s.compute_map = true;
        s.hits_k = {1, 3, 10};
        const auto report = evaluate(scorer, store, s, nullptr, &types);
        std::size_t q = 0;
        for (const auto& t : store.test()) {
          for (Side side : {Side::Subject, Side::Object}) {
            ++rank_checks;
            if (report.queries[q++].rank != oracle::full_sort_rank(p, store, t, side, filtered, typed)) ++rank_mismatches;
          }
        }
        const auto want = oracle::full_sort_metrics(p, store, filtered, typed, {1, 3, 10});
        worst_metric = std::max(worst_metric, std::abs(report.mrr - want.mrr));
        for (int k : {1, 3, 10}) worst_metric = std::max(worst_metric, std::abs(report.hits(k) - want.hits.at(k)));
        worst_metric = std::max(worst_metric, std::abs(report.map->map_percent - want.map));
      }
    }
    ++kbs;
  }
  return verdict(rank_mismatches == 0 && worst_metric < 1e-12,
                 std::to_string(kbs) + " KBs x 4 settings, " + std::to_string(rank_checks) + " ranks, " +
                     std::to_string(rank_mismatches) + " mismatches, max metric diff " + fmt(worst_metric, 2));
}

// ------------------------------------------------------------------ 4

/// 50 entities in 10 blocks of 5; relation k links every ordered pair inside
/// blocks k and k + 5, self-pairs included. Held-out triples join two distinct
/// entities and their reverse stays in training.
TripletStore planted_store() {
  Vocabulary vocab;
  for (int e = 0; e < 50; ++e) vocab.entities.intern("e" + std::to_string(e));
  for (int r = 0; r < 5; ++r) vocab.relations.intern("block" + std::to_string(r));
  std::vector<Triplet> all;
  for (int r = 0; r < 5; ++r) {
    for (int block : {r, r + 5}) {
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) all.push_back({block * 5 + i, r, block * 5 + j});
      }
    }
  }
  std::mt19937_64 gen(4);
  std::shuffle(all.begin(), all.end(), gen);
  std::vector<Triplet> train, valid, test;
  TripletSet held;
  for (const auto& t : all) {
    const bool eligible = t.subject != t.object && !held.contains({t.object, t.relation, t.subject});
    if (eligible && test.size() < 25) {
      test.push_back(t);
      held.insert(t);
    } else if (eligible && valid.size() < 10) {
      valid.push_back(t);
      held.insert(t);
    } else {
      train.push_back(t);
    }
  }
  return TripletStore(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

Outcome training_sanity() {
  const auto store = planted_store();
  Hyperparams h;
  h.entity_dim = 20;
  h.epochs = 200;
  h.seed = 11;
  const auto init = init_random(ModelKind::BilinearDiag, h, store.entity_count(), store.relation_count());

  EvalSetting s;
  s.filtered = true;
  s.hits_k = {1};
  const double before = evaluate(CandidateScorer(init), store, s).hits(1);
  const auto trained = train(store, {}, init);
  const double after = evaluate(CandidateScorer(trained.params), store, s).hits(1);
  return verdict(after >= 90.0 && before <= 10.0,
                 "filtered HITS@1 on " + std::to_string(2 * store.test().size()) + " held-out queries: untrained " +
                     fmt(before) + "%, trained " + fmt(after) + "%");
}

// ------------------------------------------------------------------ 5

bool same_learned(const ModelParams& a, const ModelParams& b) {
  if (a.entities != b.entities) return false;
  for (std::size_t r = 0; r < a.relations.size(); ++r) {
    const auto x = blocks(a.relations[r]);
    const auto y = blocks(b.relations[r]);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!std::equal(x[k].begin(), x[k].end(), y[k].begin(), y[k].end())) return false;
    }
  }
  return true;
}

Outcome invariant_suite() {
  std::vector<std::string> failures;
  const auto store = random_store(30, 4, 250, 77);
  kbe::test::TempDir dir;

  // Unit-norm entity rows after every epoch, every kind.
  for (auto kind : kAllKinds) {
    Hyperparams h;
    h.entity_dim = 6;
    h.relation_dim = 2;
    h.epochs = 3;
    double worst = 0.0;
    train(store, {}, init_random(kind, h, store.entity_count(), store.relation_count()),
          [&](const EpochStats&, const ModelParams& p) {
            for (Eigen::Index i = 0; i < p.entities.rows(); ++i) worst = std::max(worst, std::abs(p.entities.row(i).norm() - 1.0));
          });
    if (worst > 1e-6) failures.push_back(std::string("unit norm (") + std::string(model_kind_name(kind)) + ")");
  }

  // A satisfied hinge moves nothing.
  {
    auto p = random_params(ModelKind::BilinearDiag, 3, 1, 2, 1, 1);
    p.entities.row(0) << 1, 0;
    p.entities.row(1) << 0, 1;
    p.entities.row(2) << 1, 0;
    std::get<DiagonalBilinear>(p.relations[0]).d << 5, 0;
    const std::vector<Triplet> pos{{0, 0, 2}};
    const std::vector<NegativePair> neg{{{1, 0, 2}, {0, 0, 1}}};
    GradientBuffer g;
    accumulate_hinge_gradient(p, pos, neg, g);
    const auto before = p;
    apply_gradient(p, g, 1e-8);
    if (!g.entity_rows.empty() || !g.relations.empty() || !same_learned(before, p)) failures.push_back("inactive hinge");
  }

  // L2 reaches an unused relation but not an unused entity.
  {
    auto p = random_params(ModelKind::BilinearDiag, 4, 2, 3, 1, 3);
    p.hyper.l2_reg = 0.1;
    const std::vector<Triplet> pos{{0, 0, 1}};
    const std::vector<NegativePair> neg{{{2, 0, 1}, {0, 0, 2}}};
    GradientBuffer g;
    accumulate_hinge_gradient(p, pos, neg, g);
    accumulate_l2_gradient(p, g);
    const Eigen::RowVectorXd unused_entity = p.entities.row(3);
    const Eigen::VectorXd unused_rel = std::get<DiagonalBilinear>(p.relations[1]).d;
    apply_gradient(p, g, 1e-8);
    const Eigen::VectorXd after = std::get<DiagonalBilinear>(p.relations[1]).d;
    bool decayed = true;
    for (Eigen::Index i = 0; i < after.size(); ++i) decayed &= std::abs(after(i)) < std::abs(unused_rel(i));
    if (p.entities.row(3) != unused_entity || !decayed || g.entity_rows.count(3) != 0) failures.push_back("L2 scope");
  }

  // Seed determinism and checkpoint round-trip.
  for (auto kind : kAllKinds) {
    Hyperparams h;
    h.entity_dim = 5;
    h.relation_dim = 2;
    h.epochs = 2;
    h.seed = 21;
    const auto init = init_random(kind, h, store.entity_count(), store.relation_count());
    const auto a = train(store, {}, init);
    const auto b = train(store, {}, init);
    const auto pa = dir.file("a.ckpt"), pb = dir.file("b.ckpt");
    save_checkpoint(a.params, store.vocab().hash(), pa);
    save_checkpoint(b.params, store.vocab().hash(), pb);
    if (kbe::test::read_file(pa) != kbe::test::read_file(pb)) failures.push_back("determinism");
    const auto loaded = load_checkpoint(pa, store.vocab().hash());
    save_checkpoint(loaded, store.vocab().hash(), pb);
    if (!same_learned(loaded, a.params) || loaded.entity_accum != a.params.entity_accum ||
        kbe::test::read_file(pa) != kbe::test::read_file(pb)) {
      failures.push_back(std::string("round-trip (") + std::string(model_kind_name(kind)) + ")");
    }
  }

  if (failures.empty()) {
    return pass("unit norm, inactive hinge, L2 scope, determinism and round-trip hold for all 7 kinds");
  }
  std::string d = "violated:";
  for (const auto& f : failures) d += " " + f;
  return fail(d);
}

// ------------------------------------------------------------------ datasets

std::optional<std::array<std::string, 3>> find_splits(const std::string& dir, const std::string& prefix) {
  const fs::path root(dir);
  for (const auto& stem : {prefix, std::string()}) {
    std::array<std::string, 3> paths;
    bool ok = true;
    int i = 0;
    for (const char* split : {"train", "valid", "test"}) {
      const auto p = root / (stem.empty() ? std::string(split) + ".txt" : stem + "-" + split + ".txt");
      ok &= fs::exists(p);
      paths[static_cast<std::size_t>(i++)] = p.string();
    }
    if (ok) return paths;
  }
  return std::nullopt;
}

TripletStore load_fb15k401(const Options& o) {
  const auto paths = find_splits(o.fb15k_dir, "freebase_mtr100_mte100");
  if (!paths) throw IoError("no FB15k splits under " + o.fb15k_dir);
  return filter_frequent_relations(load_store((*paths)[0], (*paths)[1], (*paths)[2]), 100);
}

Outcome data_pipeline(const Options& o) {
  if (o.fb15k_dir.empty()) return skip("FB15k not supplied (pass --fb15k DIR)");
  const auto paths = find_splits(o.fb15k_dir, "freebase_mtr100_mte100");
  if (!paths) return skip("no FB15k split files found under " + o.fb15k_dir);
  const auto store = filter_frequent_relations(load_store((*paths)[0], (*paths)[1], (*paths)[2]), 100);
  const bool ok = store.size() == 560209 && store.entity_count() == 14541 && store.relation_count() == 401;
  return verdict(ok, "filtered FB15k: " + std::to_string(store.size()) + " triplets, " +
                         std::to_string(store.entity_count()) + " entities, " + std::to_string(store.relation_count()) +
                         " relations (expected 560209 / 14541 / 401; relation counts use the training split)");
}

EvalReport train_and_eval(const TripletStore& store, ModelKind kind, Activation act, std::int32_t epochs,
                          const RelationCategoryTable* categories = nullptr,
                          const std::function<void(ModelParams&)>& init_hook = {}) {
  Hyperparams h;
  h.entity_dim = 100;
  h.relation_dim = default_relation_dim(kind, 100);
  h.epochs = epochs;
  h.activation = act;
  auto init = init_random(kind, h, store.entity_count(), store.relation_count());
  if (init_hook) init_hook(init);
  const auto result = train(store, {}, std::move(init), [&](const EpochStats& e, const ModelParams&) {
    std::cerr << "  " << model_kind_name(kind) << (act == Activation::Tanh ? "-tanh " : " ") << format_epoch(e) << '\n';
  });
  EvalSetting s;
  s.hits_k = {10};
  return evaluate(CandidateScorer(result.params), store, s, categories);
}

Outcome wn_reproduction(const Options& o) {
  if (o.wn_dir.empty()) return skip("WN not supplied (pass --wn DIR --long)");
  if (!o.long_runs) return skip("hours-long run; pass --long to enable");
  const auto paths = find_splits(o.wn_dir, "wordnet-mlj12");
  if (!paths) return skip("no WN split files found under " + o.wn_dir);
  const auto store = load_store((*paths)[0], (*paths)[1], (*paths)[2]);
  const auto distmult = train_and_eval(store, ModelKind::BilinearDiag, Activation::Identity, 300);
  const auto bilinear = train_and_eval(store, ModelKind::Bilinear, Activation::Identity, 300);
  return verdict(distmult.hits(10) >= 88.0 && bilinear.mrr >= 0.80,
                 "DistMult HITS@10 " + fmt(distmult.hits(10)) + " (>= 88), Bilinear MRR " + fmt(bilinear.mrr) +
                     " (>= 0.80)");
}

Outcome fb15k401_reproduction(const Options& o) {
  if (o.fb15k_dir.empty()) return skip("FB15k not supplied (pass --fb15k DIR --long)");
  if (!o.long_runs) return skip("hours-long run; pass --long to enable");
  if (!find_splits(o.fb15k_dir, "freebase_mtr100_mte100")) return skip("no FB15k split files found");
  const auto store = load_fb15k401(o);
  const auto categories = classify_relations(store);
  const auto distmult = train_and_eval(store, ModelKind::BilinearDiag, Activation::Identity, 100, &categories);
  const auto transe = train_and_eval(store, ModelKind::TransE, Activation::Identity, 100, &categories);
  const auto cell = [](const EvalReport& r) {
    return r.by_category.at(0).at(RelationCategory::OneToMany, Side::Object).percent().value_or(0.0);
  };
  const double gap = distmult.hits(10) - transe.hits(10);
  const double gap_1n = cell(distmult) - cell(transe);
  return verdict(gap >= 2.0 && gap_1n >= 15.0,
                 "HITS@10 DistMult " + fmt(distmult.hits(10)) + " vs TransE " + fmt(transe.hits(10)) +
                     "; object-side 1-to-n " + fmt(cell(distmult)) + " vs " + fmt(cell(transe)));
}

Outcome ev_init(const Options& o) {
  if (o.entity_vectors.empty()) return skip("no pre-trained entity vectors supplied (pass --entity-vectors FILE)");
  if (o.fb15k_dir.empty()) return skip("FB15k not supplied (pass --fb15k DIR)");
  if (!o.long_runs) return skip("hours-long run; pass --long to enable");
  if (!find_splits(o.fb15k_dir, "freebase_mtr100_mte100")) return skip("no FB15k split files found");
  const auto store = load_fb15k401(o);
  const auto vectors = load_pretrained_vectors(o.entity_vectors);
  if (vectors.dim != 100) return skip("entity vectors have dimension " + std::to_string(vectors.dim) + ", need 100");
  const auto tokens = o.entity_token_map.empty() ? TokenMap{} : load_token_map(o.entity_token_map);
  std::int32_t initialized = 0;
  const auto plain = train_and_eval(store, ModelKind::BilinearDiag, Activation::Tanh, 100);
  const auto with_ev = train_and_eval(store, ModelKind::BilinearDiag, Activation::Tanh, 100, nullptr,
                                      [&](ModelParams& p) {
                                        initialized = init_from_pretrained_entity_vectors(p, store.vocab().entities,
                                                                                           vectors, tokens);
                                      });
  return verdict(with_ev.hits(10) - plain.hits(10) >= 5.0,
                 "HITS@10 DistMult-tanh-EV-init " + fmt(with_ev.hits(10)) + " vs DistMult-tanh " + fmt(plain.hits(10)) +
                     " (" + std::to_string(initialized) + " entities initialized)");
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 = no runtime bound
  std::function<Outcome(const Options&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Acceptance criteria runner"};
  app.add_option("--fb15k", o.fb15k_dir, "Directory with the FB15k train/valid/test files");
  app.add_option("--wn", o.wn_dir, "Directory with the WN train/valid/test files");
  app.add_option("--entity-vectors", o.entity_vectors, "Pre-trained 100-dimensional entity vectors");
  app.add_option("--entity-token-map", o.entity_token_map, "entity<TAB>token map for the entity vectors");
  app.add_flag("--long", o.long_runs, "Enable the hours-long reproduction criteria");
  app.add_option("--only", o.only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 10, [](const Options&) { return gradient_correctness(); }},
      {2, "algebraic equivalences", 5, [](const Options&) { return algebraic_equivalences(); }},
      {3, "ranking oracle", 30, [](const Options&) { return ranking_oracle(); }},
      {4, "training sanity", 120, [](const Options&) { return training_sanity(); }},
      {5, "invariant suite", 0, [](const Options&) { return invariant_suite(); }},
      {6, "data pipeline reproduction", 30, data_pipeline},
      {7, "WN reproduction", 0, wn_reproduction},
      {8, "FB15k-401 reproduction", 0, fb15k401_reproduction},
      {9, "entity-vector initialization", 0, ev_init},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!o.only.empty() && std::find(o.only.begin(), o.only.end(), c.id) == o.only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(o);
    } catch (const std::exception& e) {
      out = fail(std::string("error: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.status == Status::Pass && c.budget_seconds > 0 && seconds > c.budget_seconds) {
      out = fail(out.detail + "; over the " + fmt(c.budget_seconds) + " s budget");
    }
    const char* tag = out.status == Status::Pass ? "PASS" : out.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << c.id << " [" << tag << "] " << c.name << ": " << out.detail << " (" << std::fixed
              << std::setprecision(2) << seconds << " s)" << std::defaultfloat << std::endl;
    if (out.status == Status::Fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
