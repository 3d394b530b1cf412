#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fnlearn/augment.hpp"
#include "fnlearn/curves.hpp"
#include "fnlearn/eval/protocol.hpp"
#include "fnlearn/nn/checkpoint.hpp"
#include "fnlearn/nn/train.hpp"
#include "fnlearn/pipeline/config.hpp"
#include "fnlearn/pipeline/svg.hpp"

namespace fnlearn::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Artifact names

inline std::string numbered(const char* prefix, int k, const char* suffix) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s%02d%s", prefix, k, suffix);
  return buf;
}

inline fs::path redraw_path(const RunConfig& c, int r) { return c.path("data_dir") / numbered("redraw_", r, ".spec"); }
inline fs::path dataset_path(const RunConfig& c, int r) { return c.path("data_dir") / numbered("redraw_", r, ".curves"); }
inline fs::path encoder_stem(const RunConfig& c, int s) { return c.path("checkpoint_dir") / numbered("encoder_seed", s, ""); }
inline fs::path loss_path(const RunConfig& c, int s) { return c.path("checkpoint_dir") / numbered("loss_seed", s, ".csv"); }

/// Seed value of training copy s.
inline std::uint64_t encoder_seed(std::uint64_t master, int s) {
  return derive_seed(master, {tag(Stream::kInit), static_cast<std::uint64_t>(s)});
}

inline std::string fmt17(double v) { return gp::detail::format_real(v); }

// ---------------------------------------------------------------------------
// gen

/// Writes one hyperparameter manifest and one class-balanced dataset per redraw.
inline void cmd_gen(const RunConfig& cfg, std::ostream& log) {
  const auto master = cfg.get_u64("master_seed");
  const int redraws = static_cast<int>(cfg.positive("redraws"));
  const int per_class = static_cast<int>(cfg.positive("per_class"));
  const auto grid = gp::default_grid();
  fs::create_directories(cfg.path("data_dir"));
  for (const auto& redraw : make_redraws(redraws, master)) {
    const int r = redraw.redraw_id;
    save_redraw(redraw_path(cfg, r), redraw);
    RedrawSampler sampler(redraw, grid);
    CurveDataset ds;
    ds.grid = grid;
    ds.redraw_id = r;
    ds.split = Split::kTrain;
    for (int c = 0; c < gp::kNumFamilies; ++c)
      for (int i = 0; i < per_class; ++i) {
        Rng rng = make_rng(master, {tag(Stream::kDataset), static_cast<std::uint64_t>(r),
                                    static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
        ds.curves.push_back(sampler.sample(gp::family_at(c), rng));
      }
    save_dataset(dataset_path(cfg, r), ds);
    log << "gen: redraw " << r << " -> " << dataset_path(cfg, r).string() << " (" << ds.curves.size() << " curves)\n";
  }
  cfg.write_snapshot(cfg.path("data_dir"));
}

inline std::vector<HyperparamRedraw> load_redraws(const RunConfig& cfg, int count) {
  std::vector<HyperparamRedraw> out;
  for (int r = 0; r < count; ++r) {
    out.push_back(load_redraw(redraw_path(cfg, r)));
    if (out.back().redraw_id != r) throw FormatError(redraw_path(cfg, r).string() + ": redraw id mismatch");
  }
  return out;
}

// ---------------------------------------------------------------------------
// train

inline void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto master = cfg.get_u64("master_seed");
  const int seeds = static_cast<int>(cfg.positive("seeds"));
  auto tc = cfg.train_config();
  const auto aug = cfg.augment_config();
  const auto grid = gp::default_grid();
  fs::create_directories(cfg.path("checkpoint_dir"));
  const std::size_t steps = tc.total_steps();
  for (int s = 0; s < seeds; ++s) {
    tc.seed = encoder_seed(master, s);
    std::ofstream loss(loss_path(cfg, s), std::ios::binary);
    if (!loss) throw Error("cannot write " + loss_path(cfg, s).string());
    loss << "step,loss\n";
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t current = 0;
    try {
      auto result = nn::train_encoder(tc, nn::EncoderConfig{}, aug, nn::fresh_curve_source(grid),
                                      [&](const nn::StepRecord& rec) {
                                        current = rec.step;
                                        if (!std::isfinite(rec.loss))
                                          throw NumericalError("non-finite loss");
                                        loss << rec.step << ',' << fmt17(rec.loss) << '\n';
                                        if (rec.step % 100 == 0 || rec.step + 1 == steps) {
                                          const double secs = std::chrono::duration<double>(
                                                                  std::chrono::steady_clock::now() - t0)
                                                                  .count();
                                          log << "train: seed " << s << " step " << rec.step + 1 << "/" << steps
                                              << " loss " << rec.loss << " (" << static_cast<int>(secs) << " s)\n";
                                        }
                                      },
                                      grid);
      nn::save_encoder(encoder_stem(cfg, s), result.encoder, {tc.seed, static_cast<long>(steps)});
    } catch (const NumericalError& e) {
      throw NumericalError("seed " + std::to_string(s) + " step " + std::to_string(current) + ": " + e.what());
    }
    log << "train: wrote " << encoder_stem(cfg, s).string() << ".manifest\n";
  }
  cfg.write_snapshot(cfg.path("checkpoint_dir"));
}

// ---------------------------------------------------------------------------
// Head persistence

inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

inline std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::size_t sz(Eigen::Index n) { return static_cast<std::size_t>(n); }

inline nn::ArrayBundle classifier_bundle(const heads::LinearClassifier& c, const std::string& task, int budget) {
  nn::ArrayBundle b;
  b.set("kind", "classifier");
  b.set("task", task);
  b.set("budget", std::to_string(budget));
  b.set("l2", fmt17(c.l2));
  b.add("weights", {sz(c.weights.rows()), sz(c.weights.cols())}, row_major(c.weights));
  b.add("bias", {sz(c.bias.size())}, as_vec(c.bias));
  return b;
}

inline nn::ArrayBundle mc_bundle(const heads::MCHead& h, int budget) {
  nn::ArrayBundle b;
  b.set("kind", "mc_head");
  b.set("task", "mc");
  b.set("budget", std::to_string(budget));
  b.add("w", {sz(h.w.rows()), sz(h.w.cols())}, row_major(h.w));
  b.add("scale", {sz(h.scale.size())}, as_vec(h.scale));
  return b;
}

inline nn::ArrayBundle ar_bundle(const heads::ARModel& m, int budget) {
  nn::ArrayBundle b;
  b.set("kind", "ar_model");
  b.set("task", "freeform");
  b.set("budget", std::to_string(budget));
  b.set("lags", std::to_string(m.lags));
  b.set("ridge", fmt17(m.ridge));
  b.add("shared", {sz(m.shared.size())}, as_vec(m.shared));
  b.add("deviations", {sz(m.deviations.rows()), sz(m.deviations.cols())}, row_major(m.deviations));
  return b;
}

/// Persists the heads of redraw 0 (every seed) under checkpoint_dir/heads.
inline eval::HeadSink head_sink(const RunConfig& cfg, eval::Task task) {
  const fs::path dir = cfg.path("checkpoint_dir") / "heads";
  const std::string t(eval::task_name(task));
  auto stem = [dir, t](const std::string& model, int budget, int seed, int redraw) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "_b%d_s%02d_r%02d", budget, seed, redraw);
    std::string m = model;
    for (auto& ch : m)
      if (ch == ' ') ch = '_';
    return dir / (t + "_" + m + buf);
  };
  eval::HeadSink sink;
  sink.classifier = [=](const std::string& m, int b, int s, int r, const heads::LinearClassifier& c) {
    if (r != 0) return;
    fs::create_directories(dir);
    nn::save_bundle(stem(m + (task == eval::Task::kFreeform ? "_classifier" : ""), b, s, r), classifier_bundle(c, t, b));
  };
  sink.mc = [=](const std::string& m, int b, int s, int r, const heads::MCHead& h) {
    if (r != 0) return;
    fs::create_directories(dir);
    nn::save_bundle(stem(m, b, s, r), mc_bundle(h, b));
  };
  sink.ar = [=](const std::string& m, int b, int s, int r, const heads::ARModel& a) {
    if (r != 0) return;
    fs::create_directories(dir);
    nn::save_bundle(stem(m, b, s, r), ar_bundle(a, b));
  };
  return sink;
}

// ---------------------------------------------------------------------------
// eval

inline std::vector<eval::Model> load_models(const RunConfig& cfg, int seeds) {
  const auto master = cfg.get_u64("master_seed");
  std::vector<eval::Model> models;
  for (const auto& name : cfg.get_list("models")) {
    if (name == "raw") {
      models.push_back({"raw", [](int) { return nn::Embedder(nn::raw_embed); }});
    } else if (name == "contrastive") {
      std::vector<std::shared_ptr<nn::Encoder<float>>> encoders;
      for (int s = 0; s < seeds; ++s) {
        nn::CheckpointInfo info;
        auto enc = nn::load_encoder<float>(encoder_stem(cfg, s), &info);
        if (info.seed != encoder_seed(master, s))
          throw ConfigError(encoder_stem(cfg, s).string() + " was trained with a different master_seed");
        encoders.push_back(std::make_shared<nn::Encoder<float>>(std::move(enc)));
      }
      models.push_back({"contrastive", [encoders](int s) { return nn::encoder_embedder(encoders.at(s)); }});
    } else if (name == "random") {
      // Encoder at its initial weights; a reference for how much training adds.
      std::vector<std::shared_ptr<nn::Encoder<float>>> encoders;
      for (int s = 0; s < seeds; ++s)
        encoders.push_back(std::make_shared<nn::Encoder<float>>(nn::EncoderConfig{}, encoder_seed(master, s)));
      models.push_back({"random", [encoders](int s) { return nn::encoder_embedder(encoders.at(s)); }});
    } else {
      throw ConfigError("unknown model '" + name + "' (expected contrastive, raw or random)");
    }
  }
  return models;
}

inline void write_examples(const fs::path& path, const std::vector<eval::CompletionExample>& ex) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << "family,kind,values\n";
  auto row = [&](const eval::CompletionExample& e, const char* kind, const Vector& v) {
    os << gp::tag_of(e.family) << ',' << kind;
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << fmt17(v[i]);
    os << '\n';
  };
  for (const auto& e : ex) {
    row(e, "prompt", e.prompt);
    row(e, "truth", e.truth);
    row(e, "model", e.model);
    row(e, "gpio", e.gpio);
  }
}

inline eval::ProtocolResult cmd_eval(const RunConfig& cfg, eval::Task task, std::ostream& log) {
  const auto master = cfg.get_u64("master_seed");
  const auto protocol = cfg.protocol();
  const auto redraws = load_redraws(cfg, protocol.n_redraws);
  const auto models = load_models(cfg, protocol.n_seeds);
  const fs::path out = cfg.path("eval_dir");
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = eval::run_protocol(task, models, protocol, redraws, master, gp::default_grid(),
                                         head_sink(cfg, task), [&](int s, int r) {
                                           const double secs =
                                               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                                   .count();
                                           log << "eval " << eval::task_name(task) << ": seed " << s << " redraw "
                                               << r << " done (" << static_cast<int>(secs) << " s)\n";
                                         });
  for (const auto& t : result.tables) {
    eval::save_table(out, t);
    log << eval::format_table(t) << '\n';
  }
  if (task == eval::Task::kFreeform) write_examples(out / "freeform_examples.csv", result.examples);
  cfg.write_snapshot(out);
  return result;
}

// ---------------------------------------------------------------------------
// Augmentation preview

/// Source curves and their augmentations, from the preview streams.
inline std::vector<std::vector<Vector>> preview_samples(const RunConfig& cfg) {
  const auto master = cfg.get_u64("master_seed");
  const int n = static_cast<int>(cfg.positive("preview_curves"));
  const int k = static_cast<int>(cfg.positive("preview_augmentations"));
  const auto aug = cfg.augment_config();
  const auto grid = gp::default_grid();
  std::vector<std::vector<Vector>> out;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(master, {tag(Stream::kPreview), static_cast<std::uint64_t>(i), 0});
    std::vector<Vector> row{generate_training_curve(grid, rng).values};
    for (int j = 1; j <= k; ++j) {
      Rng arng = make_rng(master, {tag(Stream::kPreview), static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      row.push_back(augment::augment(row.front(), grid, aug, arng));
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline void cmd_preview(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = cfg.path("report_dir");
  fs::create_directories(out);
  const auto samples = preview_samples(cfg);
  const auto grid = gp::default_grid();
  {
    std::ofstream os(out / "augment_preview.csv", std::ios::binary);
    if (!os) throw Error("cannot write " + (out / "augment_preview.csv").string());
    os << "curve,variant,values\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (std::size_t j = 0; j < samples[i].size(); ++j) {
        os << i << ',' << j;
        for (Eigen::Index t = 0; t < samples[i][j].size(); ++t) os << ',' << fmt17(samples[i][j][t]);
        os << '\n';
      }
  }
  std::vector<svg::Panel> panels;
  const std::vector<double> xs(grid.points().begin(), grid.points().end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    svg::Panel p;
    p.title = "curve " + std::to_string(i);
    for (std::size_t j = 0; j < samples[i].size(); ++j) {
      svg::Series s;
      s.label = j == 0 ? "original" : "augmented " + std::to_string(j);
      s.x = xs;
      s.y.assign(samples[i][j].data(), samples[i][j].data() + samples[i][j].size());
      s.color = j == 0 ? "#000000" : svg::palette()[(j - 1) % svg::palette().size()];
      s.dashed = j != 0;
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
  }
  svg::save(out / "augment_preview.svg", svg::render(panels, 2));
  cfg.write_snapshot(out);
  log << "preview: wrote " << (out / "augment_preview.svg").string() << '\n';
}

// ---------------------------------------------------------------------------
// report

struct CsvRow {
  std::string model;
  int budget = 0;
  double mean = 0.0;
  double ci95 = 0.0;
};

inline std::vector<CsvRow> read_result_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact(path.string());
  std::string line;
  if (!std::getline(is, line) || line != "model,budget,mean,ci95") throw FormatError(path.string() + ": bad header");
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string part;
    while (std::getline(ls, part, ',')) f.push_back(part);
    if (f.size() != 4) throw FormatError(path.string() + ": bad row '" + line + "'");
    rows.push_back({f[0], std::stoi(f[1]), std::stod(f[2]), std::stod(f[3])});
  }
  return rows;
}

inline const std::vector<std::pair<std::string, std::string>>& report_tables() {
  static const std::vector<std::pair<std::string, std::string>> t = {
      {"classify_accuracy", "Kernel classification accuracy (%)"},
      {"mc_accuracy", "Multiple choice accuracy (%)"},
      {"mc_delta_acc", "Accuracy difference CG - SM (points)"},
      {"freeform_pearson", "Freeform Pearson r x 100"},
      {"freeform_l2", "Freeform RMSE"}};
  return t;
}

inline void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const fs::path in = cfg.path("eval_dir");
  const fs::path out = cfg.path("report_dir");
  std::vector<std::string> present;
  for (const auto& [name, title] : report_tables())
    if (fs::exists(in / (name + ".csv"))) present.push_back(name);
  if (present.empty()) throw MissingArtifact((in / "classify_accuracy.csv").string());
  fs::create_directories(out);

  std::vector<svg::Panel> panels;
  std::ostringstream text;
  for (const auto& [name, title] : report_tables()) {
    if (std::find(present.begin(), present.end(), name) == present.end()) continue;
    const auto rows = read_result_csv(in / (name + ".csv"));
    svg::Panel p;
    p.title = title;
    p.log_x = true;
    std::vector<std::string> order;
    for (const auto& r : rows)
      if (std::find(order.begin(), order.end(), r.model) == order.end()) order.push_back(r.model);
    for (std::size_t m = 0; m < order.size(); ++m) {
      svg::Series s;
      s.label = order[m];
      s.color = svg::palette()[m % svg::palette().size()];
      s.markers = true;
      for (const auto& r : rows)
        if (r.model == order[m]) {
          s.x.push_back(r.budget);
          s.y.push_back(r.mean);
          s.err.push_back(r.ci95);
        }
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
    std::ifstream tx(in / (name + ".txt"));
    if (tx) text << tx.rdbuf() << '\n';
  }
  svg::save(out / "results.svg", svg::render(panels, 2));
  {
    std::ofstream os(out / "tables.txt", std::ios::binary);
    if (!os) throw Error("cannot write " + (out / "tables.txt").string());
    os << text.str();
  }

  if (std::ifstream ex(in / "freeform_examples.csv"); ex) {
    std::string line;
    std::getline(ex, line);
    std::vector<svg::Panel> overlays;
    while (std::getline(ex, line)) {
      std::vector<std::string> f;
      std::istringstream ls(line);
      std::string part;
      while (std::getline(ls, part, ',')) f.push_back(part);
      if (f.size() < 3) throw FormatError("freeform_examples.csv: bad row");
      if (f[1] == "prompt") overlays.push_back({f[0], {}, false, 79.5});
      if (overlays.empty()) throw FormatError("freeform_examples.csv: rows out of order");
      svg::Series s;
      s.label = f[1];
      const std::size_t offset = f[1] == "prompt" ? 0 : heads::kPromptLength;
      for (std::size_t i = 2; i < f.size(); ++i) {
        s.x.push_back(static_cast<double>(offset + i - 2));
        s.y.push_back(std::stod(f[i]));
      }
      s.color = f[1] == "prompt" ? "#000000" : f[1] == "truth" ? "#2ca02c" : f[1] == "model" ? "#1f77b4" : "#d62728";
      s.dashed = f[1] == "gpio";
      overlays.back().series.push_back(std::move(s));
    }
    svg::save(out / "freeform_completions.svg", svg::render(overlays, 4, 260, 180));
  }
  cmd_preview(cfg, log);
  cfg.write_snapshot(out);
  log << text.str();
  log << "report: wrote " << (out / "results.svg").string() << '\n';
}

}  // namespace fnlearn::pipeline
