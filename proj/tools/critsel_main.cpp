#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "critsel/analysis.hpp"
#include "critsel/coco_io.hpp"
#include "critsel/errors.hpp"
#include "critsel/importance.hpp"
#include "critsel/log.hpp"
#include "critsel/metrics.hpp"
#include "critsel/semantics.hpp"

namespace {

using critsel::ConceptMap;
using critsel::Dataset;
using critsel::DetectionSet;
using critsel::EvalConfig;
using critsel::ImportanceRecord;
using critsel::InputError;
using critsel::LoadOptions;
using nlohmann::json;
namespace log = critsel::log;

// "start:step:stop", inclusive of stop up to a step-relative epsilon.
std::vector<double> parse_range(const std::string& spec) {
  double start = 0.0, step = 0.0, stop = 0.0;
  char sep1 = 0, sep2 = 0;
  std::istringstream is(spec);
  is >> start >> sep1 >> step >> sep2 >> stop;
  if (is.fail() || sep1 != ':' || sep2 != ':' || !(step > 0.0) || stop < start) {
    throw InputError("range spec must be start:step:stop with step > 0, got \"" + spec + "\"");
  }
  std::vector<double> values;
  for (int i = 0;; ++i) {
    const double v = start + i * step;
    if (v > stop + step * 1e-9) break;
    values.push_back(v);
  }
  return values;
}

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name.erase(dot);
  return name;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os.good()) throw InputError(path + ": cannot open file for writing");
  os << text;
  if (!os.good()) throw InputError(path + ": write failed");
}

ConceptMap make_concept_map(const std::string& path, const Dataset& ds, bool strict) {
  LoadOptions opts{strict};
  if (path.empty()) return ConceptMap::identity(ds.vocabulary());
  return ConceptMap::from_tsv(path, ds.vocabulary(), opts);
}

// A threshold of 1 would select nothing from a unit-sum vector.
void check_threshold(double threshold) {
  if (!(threshold >= 0.0) || threshold >= 1.0) {
    throw InputError("importance threshold must lie in [0, 1), got " +
                     std::to_string(threshold));
  }
}

struct ScoreArgs {
  std::string annotations, captions, concept_map, out;
  double heat_time = 1.0;
  int jobs = 0;
  bool strict = false;
};

int cmd_score(const ScoreArgs& args) {
  LoadOptions opts{args.strict};
  Dataset ds = critsel::load_annotations(args.annotations, opts);
  ds.attach_captions(critsel::load_captions(args.captions));
  const ConceptMap cmap = make_concept_map(args.concept_map, ds, args.strict);

  critsel::SelectionConfig cfg;
  cfg.heat_time = args.heat_time;
  const int jobs = args.jobs > 0 ? args.jobs
                                 : std::max(1u, std::thread::hardware_concurrency());
  log::info("scoring " + std::to_string(ds.images().size()) + " images with " +
            std::to_string(jobs) + " jobs");
  const auto records = critsel::score_dataset(ds, cmap, cfg, jobs);
  critsel::write_importance(records, args.out);

  std::size_t skipped = 0;
  for (const ImportanceRecord& rec : records) {
    if (rec.skipped) ++skipped;
  }
  const std::size_t total = ds.annotations().size();
  std::printf("scored %zu images (%zu skipped); annotations %zu; removal at T=0.075: %.1f%%, T=0.25: %.1f%%, T=0.30: %.1f%%\n",
              records.size(), skipped, total,
              100.0 * critsel::removal_fraction(records, 0.075, total),
              100.0 * critsel::removal_fraction(records, 0.25, total),
              100.0 * critsel::removal_fraction(records, 0.30, total));
  return 0;
}

struct SelectArgs {
  std::string annotations, importance, out;
  double threshold = 0.0;
  bool strict = false;
};

int cmd_select(const SelectArgs& args) {
  check_threshold(args.threshold);
  LoadOptions opts{args.strict};
  const Dataset ds = critsel::load_annotations(args.annotations, opts);
  const auto records = critsel::load_importance(args.importance);

  // Both files must describe the same dataset.
  std::set<std::int64_t> covered;
  std::set<std::int64_t> keep;
  for (const ImportanceRecord& rec : records) {
    covered.insert(rec.image_id);
    for (const auto& entry : rec.entries) {
      if (!ds.find_annotation(entry.annotation_id)) {
        throw InputError(args.importance + ": annotation id " +
                         std::to_string(entry.annotation_id) +
                         " not present in " + args.annotations);
      }
    }
    for (std::int64_t id : critsel::select(rec, args.threshold)) keep.insert(id);
  }
  for (std::int64_t image_id : ds.annotated_image_ids()) {
    if (!covered.count(image_id)) {
      throw InputError(args.importance + ": no importance record for image " +
                       std::to_string(image_id));
    }
  }

  critsel::write_filtered_annotations(ds, keep, args.out);
  const std::size_t total = ds.annotations().size();
  const double removed =
      total == 0 ? 0.0 : 1.0 - static_cast<double>(keep.size()) / static_cast<double>(total);
  std::printf("kept %zu of %zu annotations (removal fraction %.4f)\n", keep.size(), total,
              removed);
  return 0;
}

struct EvaluateArgs {
  std::string annotations, detections, out;
  std::string iou_grid;
  int max_det = 0;
  int jobs = 1;
  bool strict = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
  LoadOptions opts{args.strict};
  const Dataset ds = critsel::load_annotations(args.annotations, opts);
  DetectionSet dets = critsel::load_detections(args.detections, ds.vocabulary(), opts);
  if (args.max_det > 0) dets = critsel::cap_detections(dets, args.max_det);

  EvalConfig cfg;
  if (!args.iou_grid.empty()) cfg.iou_thresholds = parse_range(args.iou_grid);
  cfg.jobs = args.jobs > 0 ? args.jobs : std::max(1u, std::thread::hardware_concurrency());
  const auto report = critsel::evaluate(dets, ds, cfg);

  std::cout << critsel::report_table(report);
  if (!args.out.empty()) {
    json doc = critsel::report_to_json(report, cfg);
    doc["config"]["annotations"] = args.annotations;
    doc["config"]["detections"] = args.detections;
    doc["config"]["max_det"] = args.max_det;
    write_text(args.out, doc.dump() + "\n");
  }
  return 0;
}

struct CompareArgs {
  std::string annotations, importance, out;
  std::vector<std::string> detections;
  std::vector<double> thresholds = {0.0, 0.075, 0.30};
  std::string iou_grid;
  int max_det = 0;
  int jobs = 1;
  bool strict = false;
};

int cmd_compare(const CompareArgs& args) {
  if (args.detections.size() < 2) {
    throw InputError("compare needs at least two --detections files");
  }
  for (double threshold : args.thresholds) check_threshold(threshold);
  LoadOptions opts{args.strict};
  const Dataset ds = critsel::load_annotations(args.annotations, opts);
  const auto records = critsel::load_importance(args.importance);

  EvalConfig cfg;
  if (!args.iou_grid.empty()) cfg.iou_thresholds = parse_range(args.iou_grid);
  cfg.jobs = args.jobs > 0 ? args.jobs : std::max(1u, std::thread::hardware_concurrency());

  std::vector<DetectionSet> loaded;
  std::vector<critsel::NamedDetections> detectors;
  loaded.reserve(args.detections.size());
  for (const std::string& path : args.detections) {
    DetectionSet set = critsel::load_detections(path, ds.vocabulary(), opts);
    if (args.max_det > 0) set = critsel::cap_detections(set, args.max_det);
    loaded.push_back(std::move(set));
  }
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    detectors.push_back({basename_of(args.detections[i]), &loaded[i]});
  }

  json blocks = json::array();
  bool any_flip = false;

  for (double threshold : args.thresholds) {
    json block = json::object();
    block["threshold"] = threshold;

    std::printf("== T = %.3f ==\n", threshold);
    std::printf("  %-24s %8s %8s %8s\n", "detector", "P", "R", "F");
    json rows = json::array();
    for (std::size_t i = 0; i < detectors.size(); ++i) {
      critsel::MetricsReport rep =
          threshold > 0.0
              ? critsel::evaluate_filtered(*detectors[i].detections, ds, records, threshold, cfg)
              : critsel::evaluate(*detectors[i].detections, ds, cfg);
      std::printf("  %-24s %8.4f %8.4f %8.4f\n", detectors[i].name.c_str(), rep.map50,
                  rep.mar1_50, rep.f1);
      rows.push_back({{"detector", detectors[i].name},
                      {"map50", rep.map50},
                      {"mar1_50", rep.mar1_50},
                      {"f1", rep.f1},
                      {"map", rep.map},
                      {"gt_used", rep.gt_used}});
    }
    block["rows"] = std::move(rows);

    if (threshold > 0.0) {
      const auto mis = critsel::misalignment_check(detectors, ds, records, threshold, cfg);
      json jm = json::object();
      json scores = json::array();
      for (const auto& d : mis.detectors) {
        scores.push_back({{"detector", d.name},
                          {"precision_critical", d.precision_critical},
                          {"precision_full", d.precision_full},
                          {"precision_complement", d.precision_complement}});
      }
      jm["scores"] = std::move(scores);
      jm["ranking_critical"] = mis.ranking_critical;
      jm["ranking_full"] = mis.ranking_full;
      json pairs = json::array();
      for (const auto& [a, b] : mis.flipped_pairs) {
        pairs.push_back({detectors[a].name, detectors[b].name});
        std::printf("  flip: %s vs %s (critical order opposes full order)\n",
                    detectors[a].name.c_str(), detectors[b].name.c_str());
      }
      jm["flipped_pairs"] = std::move(pairs);
      jm["flip"] = mis.flip();
      block["misalignment"] = std::move(jm);
      any_flip = any_flip || mis.flip();
    }
    blocks.push_back(std::move(block));
  }

  if (any_flip) {
    std::printf("MISALIGNED: detector rankings on the critical subset disagree with the full set\n");
  } else {
    std::printf("rankings consistent across thresholds\n");
  }

  if (!args.out.empty()) {
    json doc;
    doc["config"] = {{"annotations", args.annotations},
                     {"importance", args.importance},
                     {"detections", args.detections},
                     {"thresholds", args.thresholds},
                     {"max_det", args.max_det},
                     {"iou_thresholds", cfg.iou_thresholds}};
    doc["blocks"] = std::move(blocks);
    doc["misaligned"] = any_flip;
    write_text(args.out, doc.dump() + "\n");
  }
  return 0;
}

struct ConsistencyArgs {
  std::vector<std::string> annotations;  // dataset A, dataset B
  std::vector<std::string> importance;
  double threshold = 0.25;  // fixed on dataset A
  std::string sweep = "0:0.05:0.35";
  std::string out;
  bool strict = false;
};

int cmd_consistency(const ConsistencyArgs& args) {
  if (args.annotations.size() != 2 || args.importance.size() != 2) {
    throw InputError("consistency needs exactly two --annotations and two --importance files");
  }
  check_threshold(args.threshold);
  LoadOptions opts{args.strict};
  const Dataset ds_a = critsel::load_annotations(args.annotations[0], opts);
  const Dataset ds_b = critsel::load_annotations(args.annotations[1], opts);
  const auto recs_a = critsel::load_importance(args.importance[0]);
  const auto recs_b = critsel::load_importance(args.importance[1]);
  const auto sweep = parse_range(args.sweep);

  const auto curve =
      critsel::consistency_curve(ds_a, recs_a, ds_b, recs_b, args.threshold, sweep);
  const std::string csv = critsel::curve_to_csv(curve);
  if (!args.out.empty()) {
    write_text(args.out, csv);
  } else {
    std::cout << csv;
  }

  // Peak and inflection (most negative second difference of mean IOU).
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.mean_iou.size(); ++i) {
    if (!(curve.mean_iou[i] <= curve.mean_iou[best])) best = i;
  }
  std::printf("max mean IOU %.4f at T=%.3f\n", curve.mean_iou[best], curve.thresholds[best]);
  if (curve.mean_iou.size() >= 3) {
    std::size_t knee = 1;
    double sharpest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.mean_iou.size(); ++i) {
      const double dd = curve.mean_iou[i + 1] - 2.0 * curve.mean_iou[i] + curve.mean_iou[i - 1];
      if (dd < sharpest) {
        sharpest = dd;
        knee = i;
      }
    }
    if (std::isfinite(sharpest)) {
      std::printf("inflection estimate (largest second-difference drop) at T=%.3f\n",
                  curve.thresholds[knee]);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caption-grounded annotation importance scoring and detector evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "TOML config file; subcommand options live under [score], "
                 "[evaluate], ... sections");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score annotation importance from captions");
  score->add_option("--annotations", score_args.annotations, "COCO annotation JSON")
      ->required()->check(CLI::ExistingFile);
  score->add_option("--captions", score_args.captions, "COCO captions JSON")
      ->required()->check(CLI::ExistingFile);
  score->add_option("--concept-map", score_args.concept_map,
                    "TSV lemma->category synonyms (identity map when omitted)")
      ->check(CLI::ExistingFile);
  score->add_option("--heat-time", score_args.heat_time, "diffusion time t >= 0")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  score->add_option("--jobs", score_args.jobs, "worker threads (0 = all cores)");
  score->add_option("--out", score_args.out, "importance JSON output")->required();
  score->add_flag("--strict", score_args.strict, "treat skippable input defects as errors");

  SelectArgs select_args;
  CLI::App* select = app.add_subcommand("select", "write annotations above an importance threshold");
  select->add_option("--annotations", select_args.annotations)->required()->check(CLI::ExistingFile);
  select->add_option("--importance", select_args.importance)->required()->check(CLI::ExistingFile);
  select->add_option("-T,--threshold", select_args.threshold, "importance threshold in [0, 1)")
      ->required()->check(CLI::Range(0.0, 1.0));
  select->add_option("--out", select_args.out, "filtered annotation JSON output")->required();
  select->add_flag("--strict", select_args.strict);

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "COCO-protocol metrics for one detector");
  evaluate->add_option("--annotations", eval_args.annotations, "ground truth (possibly filtered)")
      ->required()->check(CLI::ExistingFile);
  evaluate->add_option("--detections", eval_args.detections, "COCO results JSON")
      ->required()->check(CLI::ExistingFile);
  evaluate->add_option("--iou-grid", eval_args.iou_grid, "IOU grid start:step:stop");
  evaluate->add_option("--max-det", eval_args.max_det, "per-image proposal cap (0 = unlimited)");
  evaluate->add_option("--jobs", eval_args.jobs, "worker threads (0 = all cores)");
  evaluate->add_option("--out", eval_args.out, "JSON report output");
  evaluate->add_flag("--strict", eval_args.strict);

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "rank detectors at several importance thresholds");
  compare->add_option("--annotations", compare_args.annotations)->required()->check(CLI::ExistingFile);
  compare->add_option("--importance", compare_args.importance)->required()->check(CLI::ExistingFile);
  compare->add_option("--detections", compare_args.detections, "repeatable; two or more detectors")
      ->required()->check(CLI::ExistingFile);
  compare->add_option("-T,--threshold", compare_args.thresholds, "repeatable threshold list")
      ->check(CLI::Range(0.0, 1.0));
  compare->add_option("--iou-grid", compare_args.iou_grid);
  compare->add_option("--max-det", compare_args.max_det, "per-image proposal cap (0 = unlimited)");
  compare->add_option("--jobs", compare_args.jobs, "worker threads (0 = all cores)");
  compare->add_option("--out", compare_args.out, "JSON report output");
  compare->add_flag("--strict", compare_args.strict);

  ConsistencyArgs cons_args;
  CLI::App* consistency =
      app.add_subcommand("consistency", "cross-dataset selected-region agreement curve");
  consistency->add_option("--annotations", cons_args.annotations,
                          "two files: dataset A, dataset B")
      ->required()->check(CLI::ExistingFile);
  consistency->add_option("--importance", cons_args.importance, "two files: dataset A, dataset B")
      ->required()->check(CLI::ExistingFile);
  consistency->add_option("-T,--threshold", cons_args.threshold, "fixed threshold on dataset A")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  consistency->add_option("--sweep", cons_args.sweep, "dataset B sweep start:step:stop")
      ->capture_default_str();
  consistency->add_option("--out", cons_args.out, "CSV output (stdout when omitted)");
  consistency->add_flag("--strict", cons_args.strict);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (score->parsed()) return cmd_score(score_args);
    if (select->parsed()) return cmd_select(select_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (consistency->parsed()) return cmd_consistency(cons_args);
  } catch (const InputError& e) {
    log::error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log::error(std::string("internal error: ") + e.what());
    return 1;
  }
  return 0;
}
