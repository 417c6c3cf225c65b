#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "critsel/importance.hpp"
#include "fixtures.hpp"

using critsel_tests::coco_doc;
using critsel_tests::scratch_path;
using critsel_tests::write_scratch;
using critsel_tests::write_scratch_json;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string out_path = scratch_path("stdout.txt");
  const std::string err_path = scratch_path("stderr.txt");
  const std::string cmd = env + (env.empty() ? "" : " ") + CRITSEL_BIN_PATH + " " + args +
                          " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// Two scorable images plus one caption-less image, written as files.
struct CliFixture {
  std::string annotations;
  std::string captions;
  std::string detections;  // perfect detector over all annotations
};

CliFixture make_cli_fixture() {
  CliFixture fx;
  const json anns = coco_doc({{1, "dog"}, {2, "cat"}}, {1, 2, 3},
                             {{1, 1, 1, 0, 0, 10, 10},
                              {2, 1, 2, 30, 0, 20, 20},
                              {3, 1, 1, 60, 0, 8, 8},
                              {4, 2, 2, 5, 5, 25, 25},
                              {5, 3, 1, 0, 0, 10, 10}});
  fx.annotations = write_scratch_json("cli_annotations.json", anns);
  fx.captions = write_scratch_json(
      "cli_captions.json",
      critsel_tests::captions_doc({{1, "a dog and a cat"},
                                   {1, "the dog naps"},
                                   {1, "a cat watching"},
                                   {2, "a sleepy cat"},
                                   {2, "cat on a couch"}}));
  fx.detections = write_scratch_json("cli_detections.json",
                                     critsel_tests::detections_doc({{1, 1, 0, 0, 10, 10, 0.9},
                                                                    {1, 2, 30, 0, 20, 20, 0.8},
                                                                    {1, 1, 60, 0, 8, 8, 0.7},
                                                                    {2, 2, 5, 5, 25, 25, 0.95}}));
  return fx;
}

}  // namespace

TEST_CASE("score -> select -> evaluate round trip") {
  const auto fx = make_cli_fixture();
  const std::string importance = scratch_path("importance.json");

  const auto scored = run("score --annotations " + fx.annotations + " --captions " +
                          fx.captions + " --out " + importance);
  CHECK(scored.exit_code == 0);
  CHECK(scored.out.rfind("scored 3 images (1 skipped)", 0) == 0);

  const auto records = critsel::load_importance(importance);
  REQUIRE(records.size() == 3);
  CHECK(!records[0].skipped);
  CHECK(!records[1].skipped);
  CHECK(records[2].skipped);
  CHECK(records[2].reason == "no-category-importance");

  const std::string filtered = scratch_path("filtered.json");
  const auto selected = run("select --annotations " + fx.annotations + " --importance " +
                            importance + " -T 0 --out " + filtered);
  CHECK(selected.exit_code == 0);
  // Threshold zero keeps everything except the skipped image's annotation.
  CHECK(selected.out.find("kept 4 of 5") != std::string::npos);

  const auto evaluated = run("evaluate --annotations " + filtered + " --detections " +
                             fx.detections + " --out " + scratch_path("report.json"));
  CHECK(evaluated.exit_code == 0);
  CHECK(evaluated.out.find("mAP50") != std::string::npos);
  CHECK(evaluated.out.find("1.0000") != std::string::npos);
}

TEST_CASE("selecting near the maximum threshold prunes almost everything") {
  const auto fx = make_cli_fixture();
  const std::string importance = scratch_path("importance.json");
  REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
              " --out " + importance)
              .exit_code == 0);

  // Image 2 holds a single annotation whose propagated score is exactly 1,
  // so any threshold below 1 keeps it and nothing else.
  const std::string filtered = scratch_path("filtered_sparse.json");
  const auto selected = run("select --annotations " + fx.annotations + " --importance " +
                            importance + " -T 0.999 --out " + filtered);
  CHECK(selected.exit_code == 0);
  CHECK(selected.out.find("kept 1 of 5") != std::string::npos);
  CHECK(selected.out.find("0.8000") != std::string::npos);

  const auto parsed = json::parse(slurp(filtered));
  CHECK(parsed["annotations"].size() == 1);
  CHECK(parsed["annotations"][0]["id"] == 4);
  CHECK(parsed["images"].size() == 3);
}

TEST_CASE("score and evaluate are byte-identical across runs and job counts") {
  const auto fx = make_cli_fixture();
  std::vector<std::string> importance_files;
  for (const std::string jobs : {"1", "4", "1", "4"}) {
    const std::string path = scratch_path("imp_j" + jobs + ".json");
    REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
                " --jobs " + jobs + " --out " + path)
                .exit_code == 0);
    importance_files.push_back(path);
  }
  const std::string reference = slurp(importance_files[0]);
  CHECK(!reference.empty());
  for (const auto& p : importance_files) CHECK(slurp(p) == reference);

  std::vector<std::string> reports;
  for (const std::string jobs : {"1", "4", "1", "4"}) {
    const std::string path = scratch_path("rep_j" + jobs + ".json");
    REQUIRE(run("evaluate --annotations " + fx.annotations + " --detections " + fx.detections +
                " --jobs " + jobs + " --out " + path)
                .exit_code == 0);
    reports.push_back(path);
  }
  const std::string report_reference = slurp(reports[0]);
  CHECK(!report_reference.empty());
  for (const auto& p : reports) CHECK(slurp(p) == report_reference);
}

TEST_CASE("score honors a concept map file") {
  const json anns = coco_doc({{1, "dog"}}, {1}, {{1, 1, 1, 0, 0, 10, 10}});
  const std::string ann_path = write_scratch_json("syn_anns.json", anns);
  // Captions only ever say "puppy", which needs the synonym to land.
  const std::string caps = write_scratch_json(
      "syn_caps.json", critsel_tests::captions_doc({{1, "a puppy outside"}}));
  const std::string tsv = write_scratch("syn.tsv", "puppy\tdog\n");

  const std::string with_map = scratch_path("syn_with.json");
  REQUIRE(run("score --annotations " + ann_path + " --captions " + caps + " --concept-map " +
              tsv + " --out " + with_map)
              .exit_code == 0);
  const auto mapped = critsel::load_importance(with_map);
  CHECK(!mapped[0].skipped);

  const std::string without_map = scratch_path("syn_without.json");
  REQUIRE(run("score --annotations " + ann_path + " --captions " + caps + " --out " +
              without_map)
              .exit_code == 0);
  const auto unmapped = critsel::load_importance(without_map);
  CHECK(unmapped[0].skipped);
}

TEST_CASE("exit code 2 on contract errors") {
  const auto fx = make_cli_fixture();

  SUBCASE("missing input file") {
    CHECK(run("score --annotations /nonexistent.json --captions " + fx.captions +
              " --out " + scratch_path("x.json"))
              .exit_code == 2);
  }

  SUBCASE("unknown subcommand") {
    CHECK(run("frobnicate").exit_code == 2);
  }

  SUBCASE("compare needs two detection files") {
    const std::string importance = scratch_path("imp.json");
    REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
                " --out " + importance)
                .exit_code == 0);
    const auto result = run("compare --annotations " + fx.annotations + " --importance " +
                            importance + " --detections " + fx.detections);
    CHECK(result.exit_code == 2);
  }

  SUBCASE("detection score out of range") {
    const std::string bad = write_scratch_json(
        "bad_dets.json", critsel_tests::detections_doc({{1, 1, 0, 0, 10, 10, 1.5}}));
    CHECK(run("evaluate --annotations " + fx.annotations + " --detections " + bad)
              .exit_code == 2);
  }

  SUBCASE("importance file and annotations disagree") {
    const json other = coco_doc({{1, "dog"}}, {9}, {{99, 9, 1, 0, 0, 5, 5}});
    const std::string other_path = write_scratch_json("other.json", other);
    const std::string importance = scratch_path("imp.json");
    REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
                " --out " + importance)
                .exit_code == 0);
    CHECK(run("select --annotations " + other_path + " --importance " + importance +
              " -T 0 --out " + scratch_path("y.json"))
              .exit_code == 2);
  }

  SUBCASE("internal errors are distinguishable from input errors") {
    // Valid parse but heat time rejected by the library contract.
    CHECK(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
              " --heat-time -3 --out " + scratch_path("z.json"))
              .exit_code == 2);
  }
}

TEST_CASE("evaluate with --max-det 1 collapses the recall caps") {
  const auto fx = make_cli_fixture();
  const std::string report = scratch_path("capped.json");
  REQUIRE(run("evaluate --annotations " + fx.annotations + " --detections " + fx.detections +
              " --max-det 1 --out " + report)
              .exit_code == 0);
  const auto doc = json::parse(slurp(report));
  CHECK(doc["metrics"]["mar100"] == doc["metrics"]["mar1"]);
}

TEST_CASE("empty detections file evaluates to zero metrics") {
  const auto fx = make_cli_fixture();
  const std::string empty = write_scratch("empty_dets.json", "[]");
  const auto result = run("evaluate --annotations " + fx.annotations + " --detections " + empty);
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("0.0000") != std::string::npos);
}

TEST_CASE("compare emits one block per threshold and flags the flip fixture") {
  const auto scene = critsel_tests::make_flip_scene();

  // Rebuild the flip fixture as files.
  const json anns = [] {
    std::vector<critsel_tests::AnnRow> rows = {{1, 1, 1, 0, 0, 10, 10}};
    for (int k = 2; k <= 6; ++k) {
      rows.push_back({k, 1, 1, 1000.0 + 200.0 * k, 100.0 * k, 10, 10});
    }
    return coco_doc({{1, "thing"}}, {1}, rows);
  }();
  const std::string ann_path = write_scratch_json("flip_anns.json", anns);

  const std::string importance = scratch_path("flip_imp.json");
  critsel::write_importance(scene.records, importance);

  const std::string d1 = write_scratch_json(
      "critical_only.json", critsel_tests::detections_doc({{1, 1, 0, 0, 10, 10, 0.9}}));
  std::vector<critsel_tests::DetRow> rows;
  for (int k = 2; k <= 6; ++k) {
    rows.push_back({1, 1, 1000.0 + 200.0 * k, 100.0 * k, 10, 10, 0.9});
  }
  const std::string d2 = write_scratch_json("superfluous_only.json",
                                            critsel_tests::detections_doc(rows));

  const std::string report = scratch_path("compare.json");
  const auto result = run("compare --annotations " + ann_path + " --importance " + importance +
                          " --detections " + d1 + " --detections " + d2 +
                          " -T 0 -T 0.075 -T 0.3 --out " + report);
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("MISALIGNED") != std::string::npos);
  CHECK(result.out.find("== T = 0.000 ==") != std::string::npos);
  CHECK(result.out.find("== T = 0.075 ==") != std::string::npos);
  CHECK(result.out.find("== T = 0.300 ==") != std::string::npos);

  const auto doc = json::parse(slurp(report));
  CHECK(doc["blocks"].size() == 3);
  CHECK(doc["misaligned"] == true);
  CHECK(doc["blocks"][2]["misalignment"]["flip"] == true);
}

TEST_CASE("compare with identical detectors reports consistent rankings") {
  const auto fx = make_cli_fixture();
  const std::string importance = scratch_path("imp.json");
  REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
              " --out " + importance)
              .exit_code == 0);
  const auto result = run("compare --annotations " + fx.annotations + " --importance " +
                          importance + " --detections " + fx.detections + " --detections " +
                          fx.detections + " -T 0 -T 0.1");
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("rankings consistent") != std::string::npos);
}

TEST_CASE("consistency subcommand writes the curve CSV") {
  const auto scene = critsel_tests::make_consistency_scene();
  const std::string ann_a = write_scratch_json(
      "cons_a.json", coco_doc({{1, "thing"}}, {1},
                              {{1, 1, 1, 0, 0, 40, 40}, {2, 1, 1, 40, 0, 40, 40}}));
  const std::string ann_b = write_scratch_json(
      "cons_b.json", coco_doc({{1, "thing"}}, {1},
                              {{101, 1, 1, 0, 0, 40, 40},
                               {102, 1, 1, 40, 0, 40, 40},
                               {103, 1, 1, 200, 0, 40, 40},
                               {104, 1, 1, 300, 0, 40, 40},
                               {105, 1, 1, 400, 0, 40, 40}}));
  const std::string imp_a = scratch_path("cons_imp_a.json");
  const std::string imp_b = scratch_path("cons_imp_b.json");
  critsel::write_importance(scene.records_a, imp_a);
  critsel::write_importance(scene.records_b, imp_b);

  const std::string csv_path = scratch_path("curve.csv");
  const auto result = run("consistency --annotations " + ann_a + " --annotations " + ann_b +
                          " --importance " + imp_a + " --importance " + imp_b +
                          " -T 0.25 --sweep 0:0.05:0.35 --out " + csv_path);
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("max mean IOU") != std::string::npos);
  CHECK(result.out.find("inflection estimate") != std::string::npos);

  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("threshold,mean_iou,removal_fraction,images_used\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("0.400000") != std::string::npos);
  CHECK(csv.find("1.000000") != std::string::npos);
}

TEST_CASE("CRITSEL_LOG gates diagnostics on stderr") {
  // A degenerate annotation triggers a load warning.
  const json anns = coco_doc({{1, "dog"}}, {1},
                             {{1, 1, 1, 0, 0, 10, 10}, {2, 1, 1, 0, 0, 0, 10}});
  const std::string ann_path = write_scratch_json("warn_anns.json", anns);
  const std::string caps = write_scratch_json(
      "warn_caps.json", critsel_tests::captions_doc({{1, "a dog"}}));

  const auto loud = run("score --annotations " + ann_path + " --captions " + caps + " --out " +
                            scratch_path("w1.json"),
                        "CRITSEL_LOG=warn");
  CHECK(loud.exit_code == 0);
  CHECK(loud.err.find("degenerate") != std::string::npos);

  const auto quiet = run("score --annotations " + ann_path + " --captions " + caps + " --out " +
                             scratch_path("w2.json"),
                         "CRITSEL_LOG=error");
  CHECK(quiet.exit_code == 0);
  CHECK(quiet.err.empty());

  // Results stay on stdout regardless.
  CHECK(loud.out.rfind("scored", 0) == 0);
}

TEST_CASE("strict mode rejects what default mode skips") {
  const json anns = coco_doc({{1, "dog"}}, {1},
                             {{1, 1, 1, 0, 0, 10, 10}, {2, 1, 1, 0, 0, 0, 10}});
  const std::string ann_path = write_scratch_json("strict_anns.json", anns);
  const std::string caps = write_scratch_json(
      "strict_caps.json", critsel_tests::captions_doc({{1, "a dog"}}));

  CHECK(run("score --annotations " + ann_path + " --captions " + caps + " --out " +
            scratch_path("s1.json"))
            .exit_code == 0);
  CHECK(run("score --annotations " + ann_path + " --captions " + caps + " --strict --out " +
            scratch_path("s2.json"))
            .exit_code == 2);
}

TEST_CASE("config file supplies defaults that flags override") {
  const auto fx = make_cli_fixture();
  const std::string cfg = write_scratch("score.toml", "[score]\nheat-time=2.0\njobs=1\n");
  const std::string out_a = scratch_path("cfg_a.json");
  const std::string out_b = scratch_path("cfg_b.json");

  REQUIRE(run("--config " + cfg + " score --annotations " + fx.annotations + " --captions " +
              fx.captions + " --out " + out_a)
              .exit_code == 0);
  // The same time given as a flag produces the same output.
  REQUIRE(run("--config " + cfg + " score --annotations " + fx.annotations + " --captions " +
              fx.captions + " --heat-time 2.0 --out " + out_b)
              .exit_code == 0);
  CHECK(slurp(out_a) == slurp(out_b));

  // A conflicting flag wins over the config file.
  const std::string out_c = scratch_path("cfg_c.json");
  REQUIRE(run("--config " + cfg + " score --annotations " + fx.annotations + " --captions " +
              fx.captions + " --heat-time 0.5 --out " + out_c)
              .exit_code == 0);
  CHECK(slurp(out_a) != slurp(out_c));

  // And the config-free default (t = 1) differs from the configured run.
  const std::string out_d = scratch_path("cfg_d.json");
  REQUIRE(run("score --annotations " + fx.annotations + " --captions " + fx.captions +
              " --out " + out_d)
              .exit_code == 0);
  CHECK(slurp(out_a) != slurp(out_d));
}
