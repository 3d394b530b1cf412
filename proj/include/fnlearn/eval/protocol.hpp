#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fnlearn/curves.hpp"
#include "fnlearn/eval/metrics.hpp"
#include "fnlearn/eval/table.hpp"
#include "fnlearn/heads/classifier.hpp"
#include "fnlearn/heads/freeform.hpp"
#include "fnlearn/heads/multiple_choice.hpp"
#include "fnlearn/nn/train.hpp"

namespace fnlearn::eval {

enum class Task { kClassify, kMultipleChoice, kFreeform };

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::kClassify: return "classify";
    case Task::kMultipleChoice: return "mc";
    case Task::kFreeform: return "freeform";
  }
  return "?";
}

inline Task parse_task(std::string_view s) {
  if (s == "classify") return Task::kClassify;
  if (s == "mc") return Task::kMultipleChoice;
  if (s == "freeform") return Task::kFreeform;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected classify, mc or freeform)");
}

struct Protocol {
  int n_seeds = 3;
  int n_redraws = 10;
  std::vector<int> classify_budgets{3, 10, 30, 100, 300};
  std::vector<int> mc_budgets{3, 10, 30, 100, 300};
  std::vector<int> freeform_budgets{1, 3, 10, 30, 100};
  int freeform_classifier_per_class = 300;
  int classify_eval_per_class = 100;
  int mc_eval_problems = 500;
  int freeform_eval_per_class = 50;

  int measurements_per_cell() const { return n_seeds * n_redraws; }

  void validate() const {
    if (n_seeds < 1 || n_redraws < 1) throw ConfigError("protocol needs at least one seed and one redraw");
    for (const auto* b : {&classify_budgets, &mc_budgets, &freeform_budgets}) {
      if (b->empty()) throw ConfigError("empty budget list");
      for (int v : *b)
        if (v < 1) throw ConfigError("budgets must be positive");
    }
    if (freeform_classifier_per_class < 3 || classify_eval_per_class < 1 || mc_eval_problems < 2 ||
        freeform_eval_per_class < 1)
      throw ConfigError("eval-set sizes out of range");
  }
};

/// A named representation; `for_seed(s)` returns the embedder of seed index s.
struct Model {
  std::string name;
  std::function<nn::Embedder(int)> for_seed;
};

/// Completion shown in the report overlays.
struct CompletionExample {
  KernelFamily family = KernelFamily::kLin;
  Vector prompt;
  Vector truth;
  Vector model;
  Vector gpio;
};

struct ProtocolResult {
  std::vector<ResultTable> tables;
  std::vector<CompletionExample> examples;  // freeform only

  const ResultTable& table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw Error("no result table '" + name + "'");
  }
};

/// Per-cell callback for persisting fitted heads: (model, budget, seed index, redraw id).
struct HeadSink {
  std::function<void(const std::string&, int, int, int, const heads::LinearClassifier&)> classifier;
  std::function<void(const std::string&, int, int, int, const heads::MCHead&)> mc;
  std::function<void(const std::string&, int, int, int, const heads::ARModel&)> ar;
};

namespace detail {

inline std::uint64_t u(int v) { return static_cast<std::uint64_t>(v); }

inline int max_of(const std::vector<int>& v) { return *std::max_element(v.begin(), v.end()); }

/// `per_class` curves of every family, class-major, each from its own stream.
inline std::vector<Curve> class_balanced(RedrawSampler& sampler, std::uint64_t master, Stream stream, int seed,
                                         int phase, int per_class) {
  std::vector<Curve> out;
  out.reserve(static_cast<std::size_t>(per_class) * gp::kNumFamilies);
  for (int c = 0; c < gp::kNumFamilies; ++c)
    for (int i = 0; i < per_class; ++i) {
      Rng rng = make_rng(master, {tag(stream), u(seed), u(sampler.redraw().redraw_id), u(phase), u(c), u(i)});
      out.push_back(sampler.sample(gp::family_at(c), rng));
    }
  return out;
}

/// The first `n` curves of each class from a class-major set of `per_class` each.
inline std::vector<Eigen::Index> first_per_class(int per_class, int n) {
  std::vector<Eigen::Index> idx;
  for (int c = 0; c < gp::kNumFamilies; ++c)
    for (int i = 0; i < n; ++i) idx.push_back(static_cast<Eigen::Index>(c) * per_class + i);
  return idx;
}

inline std::vector<Vector> values_of(const std::vector<Curve>& cs) {
  std::vector<Vector> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(c.values);
  return out;
}

inline std::vector<int> labels_of(const std::vector<Curve>& cs) {
  std::vector<int> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(gp::index_of(*c.origin));
  return out;
}

inline std::vector<Vector> upsampled_prompts(const std::vector<Vector>& curves, int prompt_len, int length) {
  std::vector<Vector> out;
  out.reserve(curves.size());
  for (const auto& y : curves) out.push_back(heads::upsample_linear(y.head(prompt_len), length));
  return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& xs, const std::vector<Eigen::Index>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(xs[static_cast<std::size_t>(i)]);
  return out;
}

inline ResultTable make_table(std::string name, std::string caption, int precision, const std::vector<int>& budgets) {
  ResultTable t;
  t.name = std::move(name);
  t.caption = std::move(caption);
  t.precision = precision;
  t.budgets = budgets;
  return t;
}

inline std::uint64_t head_seed(std::uint64_t master, Task task, int seed, int redraw, int budget, int model) {
  return derive_seed(master, {tag(Stream::kHeadFit), static_cast<std::uint64_t>(task), u(seed), u(redraw), u(budget),
                              u(model)});
}

// ---------------------------------------------------------------------------

inline void classify_cell(const std::vector<Model>& models, const std::vector<nn::Embedder>& embedders,
                          const Protocol& p, RedrawSampler& sampler, const Grid&, std::uint64_t master, int seed,
                          ResultTable& acc, const HeadSink& sink) {
  const int rid = sampler.redraw().redraw_id;
  const int max_b = max_of(p.classify_budgets);
  const auto train = class_balanced(sampler, master, Stream::kClassify, seed, 0, max_b);
  const auto test = class_balanced(sampler, master, Stream::kClassify, seed, 1, p.classify_eval_per_class);
  const auto y_train = labels_of(train), y_test = labels_of(test);
  const auto v_train = values_of(train), v_test = values_of(test);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const Eigen::MatrixXd h_train = embedders[m](v_train);
    const Eigen::MatrixXd h_test = embedders[m](v_test);
    for (std::size_t b = 0; b < p.classify_budgets.size(); ++b) {
      const int budget = p.classify_budgets[b];
      const auto idx = first_per_class(max_b, budget);
      Rng rng(head_seed(master, Task::kClassify, seed, rid, budget, static_cast<int>(m)));
      const auto clf = heads::fit_classifier(h_train(idx, Eigen::all), pick(y_train, idx), gp::kNumFamilies,
                                             heads::kDefaultL2Grid, rng);
      acc.record(models[m].name, b, 100.0 * heads::accuracy(clf.predict(h_test), y_test));
      if (sink.classifier) sink.classifier(models[m].name, budget, seed, rid, clf);
    }
  }
}

struct MCSet {
  std::vector<heads::MCProblem> problems;
  heads::MCEmbeddings embed(const nn::Embedder& e, int length) const {
    std::vector<Vector> prompts, c0, c1;
    for (const auto& q : problems) {
      prompts.push_back(heads::upsample_linear(q.prompt, length));
      c0.push_back(q.candidates[0]);
      c1.push_back(q.candidates[1]);
    }
    return {e(prompts), {e(c0), e(c1)}};
  }
  std::vector<int> correct() const {
    std::vector<int> out;
    for (const auto& q : problems) out.push_back(q.correct_index);
    return out;
  }
  std::vector<heads::PromptSource> sources() const {
    std::vector<heads::PromptSource> out;
    for (const auto& q : problems) out.push_back(q.source);
    return out;
  }
};

inline heads::MCEmbeddings rows(const heads::MCEmbeddings& e, const std::vector<Eigen::Index>& idx) {
  return {e.prompt(idx, Eigen::all), {e.candidates[0](idx, Eigen::all), e.candidates[1](idx, Eigen::all)}};
}

inline void mc_cell(const std::vector<Model>& models, const std::vector<nn::Embedder>& embedders, const Protocol& p,
                    heads::CompletionModel& cm, const Grid& grid, std::uint64_t master, int seed, ResultTable& acc,
                    ResultTable& delta, const HeadSink& sink) {
  const int rid = cm.sampler().redraw().redraw_id;
  const int max_b = max_of(p.mc_budgets);
  // Training problems: max_b per prompt source, CG first then SM.
  MCSet train;
  for (int src = 0; src < 2; ++src)
    for (int i = 0; i < max_b; ++i) {
      Rng rng = make_rng(master, {tag(Stream::kMultipleChoice), u(seed), u(rid), 0, u(src), u(i)});
      const KernelFamily f =
          src == 0 ? gp::family_at(std::uniform_int_distribution<int>(0, gp::kNumCompositional - 1)(rng))
                   : KernelFamily::kSpectralMixture;
      train.problems.push_back(cm.build(f, rng));
    }
  MCSet test;
  for (int i = 0; i < p.mc_eval_problems; ++i) {
    Rng rng = make_rng(master, {tag(Stream::kMultipleChoice), u(seed), u(rid), 1, u(i)});
    test.problems.push_back(cm.build(rng));
  }
  const auto y_train = train.correct(), y_test = test.correct();
  const auto s_test = test.sources();
  const int len = static_cast<int>(grid.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto e_train = train.embed(embedders[m], len);
    const auto e_test = test.embed(embedders[m], len);
    for (std::size_t b = 0; b < p.mc_budgets.size(); ++b) {
      const int budget = p.mc_budgets[b];
      std::vector<Eigen::Index> idx;
      for (int src = 0; src < 2; ++src)
        for (int i = 0; i < budget; ++i) idx.push_back(static_cast<Eigen::Index>(src) * max_b + i);
      Rng rng(head_seed(master, Task::kMultipleChoice, seed, rid, budget, static_cast<int>(m)));
      const auto head = heads::fit_mc_head(rows(e_train, idx), pick(y_train, idx), rng);
      const Eigen::MatrixXd probs = head.probabilities(e_test);
      acc.record(models[m].name, b, 100.0 * choice_accuracy(probs, y_test));
      delta.record(models[m].name, b, 100.0 * delta_acc(probs, s_test));
      if (sink.mc) sink.mc(models[m].name, budget, seed, rid, head);
    }
    if (m == 0) {
      // Chance reference: a random projection with no training.
      Rng rng(head_seed(master, Task::kMultipleChoice, seed, rid, 0, -1));
      const auto head = heads::untrained_mc_head(e_train, rng);
      const Eigen::MatrixXd probs = head.probabilities(e_test);
      const double a = 100.0 * choice_accuracy(probs, y_test);
      for (std::size_t b = 0; b < p.mc_budgets.size(); ++b) acc.record("untrained head", b, a);
    }
  }
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline void freeform_cell(const std::vector<Model>& models, const std::vector<nn::Embedder>& embedders,
                          const Protocol& p, RedrawSampler& sampler, const Grid& grid, std::uint64_t master, int seed,
                          ResultTable& corr, ResultTable& l2, std::vector<CompletionExample>* examples,
                          const HeadSink& sink) {
  const int rid = sampler.redraw().redraw_id;
  const int prompt_len = heads::kPromptLength;
  const int horizon = static_cast<int>(grid.size()) - prompt_len;
  const int max_b = max_of(p.freeform_budgets);
  const auto phase1 = class_balanced(sampler, master, Stream::kFreeform, seed, 0, p.freeform_classifier_per_class);
  const auto phase2 = class_balanced(sampler, master, Stream::kFreeform, seed, 1, max_b);
  const auto test = class_balanced(sampler, master, Stream::kFreeform, seed, 2, p.freeform_eval_per_class);
  const auto v1 = values_of(phase1), v2 = values_of(phase2), vt = values_of(test);
  const auto y1 = labels_of(phase1), yt = labels_of(test);
  const auto prompts_up = upsampled_prompts(vt, prompt_len, static_cast<int>(grid.size()));

  std::vector<Vector> truth, prompts;
  for (const auto& y : vt) {
    prompts.push_back(y.head(prompt_len));
    truth.push_back(y.tail(horizon));
  }

  auto score = [&](const std::string& row, std::size_t b, const std::vector<Vector>& preds) {
    std::vector<double> r, d;
    for (std::size_t k = 0; k < preds.size(); ++k) {
      r.push_back(100.0 * pearson_or_zero(preds[k], truth[k]));
      d.push_back(l2_metric(preds[k], truth[k]));
    }
    corr.record(row, b, mean_of(r));
    l2.record(row, b, mean_of(d));
  };

  // Ideal observer: budget-independent, conditioned on the raw-scale prompt.
  std::vector<gp::ObservedBlock> blocks;
  for (int f = 0; f < gp::kNumFamilies; ++f) blocks.emplace_back(sampler.redraw().specs[f], grid, prompt_len);
  std::vector<Vector> gpio;
  for (std::size_t k = 0; k < vt.size(); ++k) {
    const double off = test[k].offset, sc = test[k].scale;
    const Vector raw = prompts[k].array() * sc + off;
    gpio.push_back((blocks[yt[k]].extrapolate(raw).array() - off) / sc);
  }

  const bool want_examples = examples && seed == 0 && examples->empty();
  for (std::size_t m = 0; m < models.size(); ++m) {
    Rng clf_rng(head_seed(master, Task::kFreeform, seed, rid, 0, static_cast<int>(m)));
    const auto clf =
        heads::fit_classifier(embedders[m](v1), y1, gp::kNumFamilies, heads::kDefaultL2Grid, clf_rng);
    if (sink.classifier) sink.classifier(models[m].name, 0, seed, rid, clf);
    const auto c2 = clf.predict(embedders[m](v2));
    const auto ct = clf.predict(embedders[m](prompts_up));
    for (std::size_t b = 0; b < p.freeform_budgets.size(); ++b) {
      const int budget = p.freeform_budgets[b];
      const auto idx = first_per_class(max_b, budget);
      const auto ar = heads::fit_freeform(pick(v2, idx), pick(c2, idx), gp::kNumFamilies);
      if (sink.ar) sink.ar(models[m].name, budget, seed, rid, ar);
      std::vector<Vector> preds;
      for (std::size_t k = 0; k < vt.size(); ++k) preds.push_back(heads::forecast(ar, ct[k], prompts[k], horizon));
      score(models[m].name, b, preds);
      if (want_examples && m == 0 && budget == max_b) {
        // One example per family, the first eval curve of each class.
        const int per = p.freeform_eval_per_class;
        for (int c = 0; c < gp::kNumFamilies; ++c) {
          const auto k = static_cast<std::size_t>(c) * per;
          examples->push_back({gp::family_at(c), prompts[k], truth[k], preds[k], gpio[k]});
        }
      }
    }
  }

  for (std::size_t b = 0; b < p.freeform_budgets.size(); ++b) {
    const int budget = p.freeform_budgets[b];
    std::vector<Vector> pool = v1;
    for (auto i : first_per_class(max_b, budget)) pool.push_back(v2[static_cast<std::size_t>(i)]);
    const auto ar = heads::uncond_ar_fit(pool);
    if (sink.ar) sink.ar("autoregression", budget, seed, rid, ar);
    std::vector<Vector> preds;
    for (const auto& pr : prompts) preds.push_back(heads::uncond_ar_forecast(ar, pr, horizon));
    score("autoregression", b, preds);
    score("GPIO", b, gpio);
  }
}

}  // namespace detail

/// Runs every (seed, redraw) cell of `task` and aggregates one measurement
/// per cell into each table entry. Data for seed s and redraw r come from
/// streams keyed by (task, s, r, phase), so train and eval sets never share
/// a stream.
inline ProtocolResult run_protocol(Task task, const std::vector<Model>& models, const Protocol& p,
                                   const std::vector<HyperparamRedraw>& redraws, std::uint64_t master_seed,
                                   const Grid& grid = gp::default_grid(), const HeadSink& sink = {},
                                   const std::function<void(int, int)>& on_cell = {}) {
  p.validate();
  if (models.empty()) throw ConfigError("no models to evaluate");
  if (static_cast<int>(redraws.size()) < p.n_redraws)
    throw ConfigError("protocol needs " + std::to_string(p.n_redraws) + " redraws, have " +
                      std::to_string(redraws.size()));
  ProtocolResult out;
  switch (task) {
    case Task::kClassify:
      out.tables.push_back(detail::make_table("classify_accuracy", "Kernel classification accuracy (%), examples per class",
                                              2, p.classify_budgets));
      break;
    case Task::kMultipleChoice:
      out.tables.push_back(detail::make_table("mc_accuracy", "Multiple choice accuracy (%), problems per prompt source",
                                              2, p.mc_budgets));
      out.tables.push_back(detail::make_table("mc_delta_acc", "Accuracy difference CG - SM (points)", 2, p.mc_budgets));
      break;
    case Task::kFreeform:
      out.tables.push_back(detail::make_table("freeform_pearson", "Freeform completion, Pearson r x 100, curves per class",
                                              2, p.freeform_budgets));
      out.tables.push_back(detail::make_table("freeform_l2", "Freeform completion, RMSE, curves per class", 4,
                                              p.freeform_budgets));
      break;
  }
  // Fix row order: models first, then baselines.
  for (auto& t : out.tables)
    for (const auto& m : models) t.row(m.name);
  if (task == Task::kMultipleChoice) out.tables[0].row("untrained head");
  if (task == Task::kFreeform)
    for (auto& t : out.tables) {
      t.row("autoregression");
      t.row("GPIO");
    }

  for (int r = 0; r < p.n_redraws; ++r) {
    const auto& redraw = redraws[static_cast<std::size_t>(r)];
    std::optional<heads::CompletionModel> cm;
    std::optional<RedrawSampler> sampler;
    if (task == Task::kMultipleChoice)
      cm.emplace(redraw, grid);
    else
      sampler.emplace(redraw, grid);
    for (int s = 0; s < p.n_seeds; ++s) {
      std::vector<nn::Embedder> embedders;
      for (const auto& m : models) embedders.push_back(m.for_seed(s));
      switch (task) {
        case Task::kClassify:
          detail::classify_cell(models, embedders, p, *sampler, grid, master_seed, s, out.tables[0], sink);
          break;
        case Task::kMultipleChoice:
          detail::mc_cell(models, embedders, p, *cm, grid, master_seed, s, out.tables[0], out.tables[1], sink);
          break;
        case Task::kFreeform:
          detail::freeform_cell(models, embedders, p, *sampler, grid, master_seed, s, out.tables[0], out.tables[1],
                                r == 0 ? &out.examples : nullptr, sink);
          break;
      }
      if (on_cell) on_cell(s, r);
    }
  }
  return out;
}

}  // namespace fnlearn::eval
