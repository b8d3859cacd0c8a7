#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <numeric>

#include <json.hpp>

#include "segrobust/core/image_io.hpp"
#include "segrobust/core/manifest.hpp"
#include "segrobust/harness/conditions.hpp"
#include "segrobust/harness/evaluate.hpp"
#include "segrobust/harness/model_select.hpp"
#include "segrobust/harness/overlay.hpp"
#include "segrobust/harness/report.hpp"
#include "segrobust/harness/synth.hpp"
#include "segrobust/model/toy_blob_net.hpp"
#include "test_util.hpp"

using namespace segrobust;
using namespace testutil;

namespace {

ModelSource toy_source() {
  return {"toy", [] { return std::make_unique<ToyBlobNet>(); }, false};
}

ModelSource oracle_source() { return {"oracle", {}, true}; }

// Steps 1-3 written out longhand with the pixel loops made explicit.
struct StraightLine {
  static EvalRecord run(const AnnotatedImage& rec, Segmenter& model, const Condition& cond, std::uint64_t seed) {
    DeterministicRng rng(seed);
    const std::size_t chosen = rng.next_u64() % rec.annotations.size();
    const BinaryMask& truth = rec.annotations[chosen].mask;

    std::vector<PointPrompt> pixels;
    for (Index y = 0; y < truth.rows(); ++y)
      for (Index x = 0; x < truth.cols(); ++x)
        if (truth(y, x)) pixels.push_back({x, y});
    const PointPrompt point = pixels[rng.next_u64() % pixels.size()];
    const std::uint64_t cseed = rng.next_u64();

    ImageTensor input = rec.image;
    if (cond.type == Condition::Type::Corruption) input = apply_corruption(rec.image, {cond.corruption, cond.severity, cseed});
    if (cond.type == Condition::Type::Attack) {
      AttackConfig a = cond.attack;
      a.seed = cseed;
      input = run_attack(rec.image, point, truth, model, a);
    }
    const auto preds = model.predict(input, point);

    EvalRecord out;
    out.image_id = rec.id;
    out.condition = cond.tag();
    double best_pa = -1, best_iou = -1;
    for (std::size_t k = 0; k < preds.size(); ++k) {
      double tp = 0, fp = 0, fn = 0, tn = 0;
      for (Index y = 0; y < truth.rows(); ++y)
        for (Index x = 0; x < truth.cols(); ++x) {
          const bool p = preds[k].mask(y, x), t = truth(y, x);
          tp += p && t;
          fp += p && !t;
          fn += !p && t;
          tn += !p && !t;
        }
      const double pa_fg = tp / (tp + fn), pa_bg = tn / (tn + fp);
      const double iou_fg = tp / (tp + fp + fn), iou_bg = tn / (tn + fn + fp);
      if ((pa_fg + pa_bg) / 2 > best_pa) {
        best_pa = (pa_fg + pa_bg) / 2;
        out.pa_fg = pa_fg;
        out.pa_bg = pa_bg;
        out.mpa = best_pa;
        out.pa_mask_index = long(k);
      }
      if ((iou_fg + iou_bg) / 2 > best_iou) {
        best_iou = (iou_fg + iou_bg) / 2;
        out.iou_fg = iou_fg;
        out.iou_bg = iou_bg;
        out.miou = best_iou;
        out.iou_mask_index = long(k);
      }
    }
    return out;
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEGROBUST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Counts factory calls; not concurrent-safe.
struct CountingToy final : Segmenter {
  static inline std::atomic<int> made{0};
  ToyBlobNet inner;
  CountingToy() { ++made; }
  SegmenterDescriptor descriptor() const override { return {"counting", true, false}; }
  std::vector<MaskPrediction> predict(const ImageTensor& i, const PointPrompt& p) override { return inner.predict(i, p); }
  InputGradient input_gradient(const ImageTensor& i, const PointPrompt& p, const BinaryMask& t, const LossSpec& l,
                               const std::optional<SegPgdStep>& s, std::optional<std::size_t> h) override {
    return inner.input_gradient(i, p, t, l, s, h);
  }
};

struct FailingModel final : Segmenter {
  SegmenterDescriptor descriptor() const override { return {"failing", false, true}; }
  std::vector<MaskPrediction> predict(const ImageTensor&, const PointPrompt&) override {
    throw RemoteError("model exploded");
  }
  InputGradient input_gradient(const ImageTensor&, const PointPrompt&, const BinaryMask&, const LossSpec&,
                               const std::optional<SegPgdStep>&, std::optional<std::size_t>) override {
    throw RemoteError("model exploded");
  }
};

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("split names") {
  CHECK(split_mode_from_string("off") == SplitMode::Off);
  CHECK(split_mode_from_string("big_top_half") == SplitMode::Big);
  CHECK(split_mode_from_string("small") == SplitMode::Small);
  CHECK(split_mode_from_string("small_bottom_half") == SplitMode::Small);
  CHECK_THROWS_AS(split_mode_from_string("medium"), UnknownKind);
}

TEST_CASE("big/small filter examples") {
  using V = std::vector<std::size_t>;
  CHECK(big_small_filter(std::vector<Index>{10, 20, 30, 40}, SplitMode::Big) == V{3, 2});
  CHECK(big_small_filter(std::vector<Index>{10, 20, 30, 40}, SplitMode::Small) == V{1, 0});
  CHECK(big_small_filter(std::vector<Index>{10, 20, 30, 40}, SplitMode::Off) == V{0, 1, 2, 3});
  CHECK(big_small_filter(std::vector<Index>{7}, SplitMode::Big) == V{0});
  CHECK(big_small_filter(std::vector<Index>{7}, SplitMode::Small).empty());
  CHECK(big_small_filter(std::vector<Index>{5, 5, 5}, SplitMode::Big) == V{0, 1});
  CHECK(big_small_filter(std::vector<Index>{5, 5, 5}, SplitMode::Small) == V{2});
}

TEST_CASE("big/small filter is an exact partition") {
  DeterministicRng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    std::vector<Index> areas(n);
    for (auto& a : areas) a = Index(1 + rng.below(6));  // plenty of ties
    auto big = big_small_filter(areas, SplitMode::Big);
    auto small = big_small_filter(areas, SplitMode::Small);
    REQUIRE(big.size() == (n + 1) / 2);
    REQUIRE(small.size() == n / 2);
    std::vector<std::size_t> all = big;
    all.insert(all.end(), small.begin(), small.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    REQUIRE(all == expect);
    // Every big mask beats or ties every small one; ties go to the lower index.
    for (auto b : big)
      for (auto s : small) REQUIRE((areas[b] > areas[s] || (areas[b] == areas[s] && b < s)));
  }
}

TEST_CASE("condition tags") {
  CHECK(Condition::clean().tag() == "clean");
  CHECK(Condition::corrupted(CorruptionKind::Fog, 3).tag() == "corruption:fog:3");
  CHECK(Condition::attacked(AttackConfig::defaults(AttackMethod::Pgd, 8.0 / 255)).tag() == "attack:pgd:8/255:focal_dice");
  CHECK(Condition::attacked(AttackConfig::defaults(AttackMethod::Fgsm, 0.5 / 255), true).tag() ==
        "attack:fgsm:0.5/255:focal_dice:q8");
  auto custom = AttackConfig::defaults(AttackMethod::Bim, 2.0 / 255);
  custom.steps = 5;
  custom.fix_target_head = true;
  CHECK(Condition::attacked(custom).tag() == "attack:bim:2/255:focal_dice:k5:fixed_head");
  CHECK(epsilon_label(1.0 / 255) == "1/255");
  CHECK(epsilon_label(0.5 / 255) == "0.5/255");
  CHECK_THROWS_AS(Condition::corrupted(CorruptionKind::Fog, 7).validate(), SeverityOutOfRange);
}

TEST_CASE("conditions file") {
  const auto cs = conditions_from_json(R"({
    "corruptions": [{"kinds": ["fog", "jpeg"], "severities": [1, 5]}],
    "attacks": [{"methods": ["fgsm", "pgd"], "eps": [2, 8], "quantize": true}]})");
  std::vector<std::string> tags;
  for (const auto& c : cs) tags.push_back(c.tag());
  CHECK(tags == std::vector<std::string>{"clean", "corruption:fog:1", "corruption:fog:5", "corruption:jpeg:1",
                                         "corruption:jpeg:5", "attack:fgsm:2/255:focal_dice:q8",
                                         "attack:fgsm:8/255:focal_dice:q8", "attack:pgd:2/255:focal_dice:q8",
                                         "attack:pgd:8/255:focal_dice:q8"});
  CHECK(cs.back().attack.steps == 10);
  CHECK(cs[5].attack.steps == 1);

  const auto defaults = conditions_from_json(R"({"clean": false, "attacks": [{"methods": ["segpgd"]}]})");
  REQUIRE(defaults.size() == 5);
  CHECK(defaults[0].attack.epsilon == 0.5 / 255);
  CHECK(defaults[4].attack.epsilon == 8.0 / 255);
  CHECK(defaults[0].attack.loss.segpgd_weighting);

  CHECK(conditions_from_json(R"({"corruptions": [{"kinds": "all", "severities": "all"}]})").size() == 76);
  CHECK(full_corruption_grid().size() == 76);
  CHECK_THROWS_AS(conditions_from_json(R"({"clean": false})"), ConfigInvalid);
  CHECK_THROWS_AS(conditions_from_json("{oops"), ParseError);
  CHECK_THROWS_AS(conditions_from_json(R"({"corruptions": [{"kinds": ["rain"], "severities": "all"}]})"), UnknownKind);
  CHECK_THROWS_AS(conditions_from_json(R"({"attacks": [{"methods": ["pgd"], "eps": [0]}]})"), ConfigInvalid);
  CHECK_THROWS_AS(load_conditions("/nonexistent/conditions.json"), MissingFile);
}

TEST_CASE("synthetic images") {
  const auto images = synth_images({5, 40, 32, 32});
  REQUIRE(images.size() == 40);
  for (const auto& rec : images) {
    CAPTURE(rec.id);
    CHECK_NOTHROW(rec.validate());
    CHECK(is_valid_image(rec.image));
    CHECK(rec.annotations.size() >= 2);
    CHECK(rec.annotations.size() <= 5);
    BinaryMask covered = BinaryMask::Constant(32, 32, false);
    for (const auto& a : rec.annotations) {
      CHECK_FALSE((covered && a.mask).any());
      covered = covered || a.mask;
    }
    CHECK_FALSE(covered.all());
    CHECK_FALSE(big_small_filter(rec, SplitMode::Big).empty());
    CHECK_FALSE(big_small_filter(rec, SplitMode::Small).empty());
    CHECK(quantize_8bit(rec.image) == rec.image);
  }
  CHECK(images[3].id == "synth_0003");
  const auto again = synth_images({5, 40, 32, 32});
  for (std::size_t i = 0; i < images.size(); ++i) CHECK(again[i].image == images[i].image);
  CHECK_FALSE(synth_images({6, 1, 32, 32})[0].image == images[0].image);
}

TEST_CASE("synthetic dataset files are deterministic") {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  synth_dataset({11, 3, 24, 20}, a);
  synth_dataset({11, 3, 24, 20}, b);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a);
    CAPTURE(rel.string());
    CHECK(read_text(entry.path().string()) == read_text((b / rel).string()));
  }
  const auto m = load_manifest(a / "manifest.json");
  REQUIRE(m.records.size() == 3);
  const auto rec = load_record(m, 2);
  CHECK(rec.image == synth_images({11, 3, 24, 20})[2].image);
}

TEST_CASE("evaluate_image equals the straight-line protocol") {
  ToyBlobNet model;
  const std::vector<Condition> conds = {Condition::clean(), Condition::corrupted(CorruptionKind::GaussianNoise, 3),
                                        Condition::attacked(AttackConfig::defaults(AttackMethod::Fgsm, 4.0 / 255))};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto rec = synth_image(derive_seed(1000, i), 8, 8, "case");
    const auto& cond = conds[i % conds.size()];
    DeterministicRng rng(i);
    const auto got = evaluate_image(rec, model, cond, rng);
    REQUIRE(got.has_value());
    CAPTURE(i);
    CHECK(*got == StraightLine::run(rec, model, cond, i));
  }
}

TEST_CASE("seeds") {
  DeterministicRng master(77);
  for (std::size_t i = 0; i < 20; ++i) CHECK(image_seed(77, i) == master.next_u64());
  CHECK(condition_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("oracle model scores perfectly under every condition") {
  RunConfig cfg;
  cfg.model = oracle_source();
  cfg.conditions = full_corruption_grid();
  for (auto m : {AttackMethod::Fgsm, AttackMethod::Pgd})
    cfg.conditions.push_back(Condition::attacked(AttackConfig::defaults(m, 8.0 / 255)));
  const auto bundle = evaluate_records(synth_images({9, 3, 48, 48}), cfg);
  CHECK(bundle.rows.size() == 3 * 78);
  for (const auto& r : bundle.aggregates) {
    CAPTURE(r.condition);
    CHECK(r.mpa == 1.0);
    CHECK(r.miou == 1.0);
  }
  CHECK(bundle.provenance.model == "oracle-gt-echo");
  for (const auto& [tag, n] : bundle.point_misses) CHECK(n == 0);
}

TEST_CASE("single image aggregate equals its row") {
  RunConfig cfg;
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean()};
  const auto bundle = evaluate_records(synth_images({1, 1, 24, 24}), cfg);
  REQUIRE(bundle.rows.size() == 1);
  REQUIRE(bundle.aggregates.size() == 1);
  auto agg = bundle.aggregates[0];
  auto row = bundle.rows[0];
  CHECK(agg.mpa == row.mpa);
  CHECK(agg.miou == row.miou);
  CHECK(agg.pa_fg == row.pa_fg);
  CHECK(agg.iou_bg == row.iou_bg);
  CHECK(agg.condition == "clean");
}

TEST_CASE("full corruption grid gives 76 condition rows") {
  RunConfig cfg;
  cfg.model = toy_source();
  cfg.conditions = full_corruption_grid();
  const auto bundle = evaluate_records(synth_images({2, 1, 48, 48}), cfg);
  CHECK(bundle.aggregates.size() == 76);
  CHECK(bundle.rows.size() == 76);
  CHECK_NOTHROW(bundle.verify());
}

TEST_CASE("worker count does not change the report") {
  const auto dir = scratch_dir("workers");
  synth_dataset({31, 12, 24, 24}, dir / "data");
  RunConfig cfg;
  cfg.manifest = dir / "data" / "manifest.json";
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean(), Condition::corrupted(CorruptionKind::ShotNoise, 2),
                    Condition::attacked(AttackConfig::defaults(AttackMethod::Pgd, 4.0 / 255))};
  cfg.master_seed = 99;
  cfg.workers = 1;
  const auto one = to_canonical_json(evaluate_dataset(cfg));
  cfg.workers = 8;
  const auto eight = to_canonical_json(evaluate_dataset(cfg));
  CHECK(one == eight);

  // A model that is not concurrent-safe gets one instance per worker.
  CountingToy::made = 0;
  cfg.model = {"counting", [] { return std::make_unique<CountingToy>(); }, false};
  cfg.workers = 3;
  const auto counted = evaluate_dataset(cfg);
  CHECK(CountingToy::made == 3);
  CHECK(counted.rows == report_from_json(one).rows);
}

TEST_CASE("report round trip and verification") {
  RunConfig cfg;
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean(), Condition::corrupted(CorruptionKind::Contrast, 4)};
  const auto bundle = evaluate_records(synth_images({4, 5, 24, 24}), cfg);
  const auto text = to_canonical_json(bundle);
  const auto back = report_from_json(text);
  CHECK(back == bundle);
  CHECK(to_canonical_json(back) == text);

  auto tampered = nlohmann::json::parse(text);
  tampered["aggregates"][0]["miou"] = tampered["aggregates"][0]["miou"].get<double>() + 1e-9;
  CHECK_THROWS_AS(report_from_json(tampered.dump()), ConfigInvalid);
  CHECK_THROWS_AS(report_from_json("[]"), ParseError);
  CHECK_THROWS_AS(load_report("/nonexistent/report.json"), MissingFile);

  const auto dir = scratch_dir("emit");
  emit_report(bundle, dir, {"json", "csv"});
  CHECK(load_report(dir / "report.json") == bundle);
  CHECK(read_text((dir / "report.csv").string()) == to_csv(bundle));
  CHECK_THROWS_AS(emit_report(bundle, dir, {"xml"}), ConfigInvalid);
}

TEST_CASE("empty bundle gives a header-only csv") {
  CHECK(to_csv(ReportBundle{}) == "condition,mpa,miou,pa_bg,pa_fg,iou_bg,iou_fg\n");
}

TEST_CASE("two-image fixture csv") {
  const auto dir = scratch_dir("fixture");
  synth_dataset({2024, 2, 16, 16}, dir);
  RunConfig cfg;
  cfg.manifest = dir / "manifest.json";
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean(), Condition::corrupted(CorruptionKind::GaussianNoise, 5),
                    Condition::attacked(AttackConfig::defaults(AttackMethod::Pgd, 8.0 / 255))};
  const auto bundle = evaluate_dataset(cfg);
  const auto csv = to_csv(bundle);
  CHECK(golden("two_image_fixture.csv", csv) == csv);
}

TEST_CASE("skips are recorded and excluded from N") {
  AnnotatedImage single{"single", synth_image(1, 16, 16, "x").image, {}};
  single.annotations.push_back({rect_mask(16, 16, 2, 2, 6, 6), 16});
  AnnotatedImage whole{"whole", single.image, {{BinaryMask::Constant(16, 16, true), 256}}};
  const auto normal = synth_image(4, 16, 16, "normal");

  RunConfig cfg;
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean()};
  cfg.split = SplitMode::Small;
  const auto bundle = evaluate_records({single, normal}, cfg);
  REQUIRE(bundle.skips.size() == 1);
  CHECK(bundle.skips[0].image_id == "single");
  CHECK(bundle.rows.size() == 1);
  CHECK(bundle.provenance.split == "small");

  cfg.split = SplitMode::Off;
  const auto b2 = evaluate_records({whole, normal}, cfg);
  REQUIRE(b2.skips.size() == 1);
  CHECK(b2.skips[0].image_id == "whole");

  cfg.split = SplitMode::Small;
  CHECK_THROWS_AS(evaluate_records({single}, cfg), EmptyDataset);
  CHECK_THROWS_AS(evaluate_records({}, cfg), EmptyDataset);
}

TEST_CASE("model errors abort the run") {
  RunConfig cfg;
  cfg.model = {"failing", [] { return std::make_unique<FailingModel>(); }, false};
  cfg.conditions = {Condition::clean()};
  cfg.workers = 4;
  CHECK_THROWS_AS(evaluate_records(synth_images({1, 6, 16, 16}), cfg), RemoteError);
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  cfg.model = toy_source();
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);  // no conditions
  cfg.conditions = {Condition::clean(), Condition::clean()};
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.conditions = {Condition::clean()};
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.workers = 1;
  cfg.report_formats = {"pdf"};
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.report_formats = {"csv"};
  CHECK_NOTHROW(cfg.validate());
  cfg.model = ModelSource{};
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
}

TEST_CASE("overlays are written per image and condition") {
  const auto dir = scratch_dir("overlays");
  RunConfig cfg;
  cfg.model = toy_source();
  cfg.conditions = {Condition::clean(), Condition::corrupted(CorruptionKind::Fog, 1)};
  cfg.output_dir = dir;
  cfg.overlays = true;
  evaluate_records(synth_images({8, 2, 20, 20}), cfg);
  CHECK(std::filesystem::exists(dir / "overlays" / "synth_0001" / "corruption_fog_1.png"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "report.csv"));

  const ImageTensor img(9, 9, 0.5);
  const auto out = render_overlay(img, rect_mask(9, 9, 1, 1, 4, 4), rect_mask(9, 9, 5, 5, 8, 8), {6, 6});
  CHECK(out.same_shape(img));
  CHECK(out(5, 5, 0) == 1.0);  // truth contour in red
  CHECK(out(1, 1, 1) == 1.0);  // prediction contour in green
  CHECK(out(0, 8, 2) == 0.5);  // untouched background
}

TEST_CASE("model selectors") {
  CHECK(model_source_from_selector("toy").name == "toy");
  CHECK(model_source_from_selector("toy:3").factory()->descriptor().name == ToyBlobNet(3).descriptor().name);
  CHECK(model_source_from_selector("oracle").ground_truth_oracle);
  CHECK_THROWS_AS(model_source_from_selector("sam_vit_h"), ConfigInvalid);
  CHECK_THROWS_AS(model_source_from_selector("toy:abc"), ConfigInvalid);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch_dir("cli");
  const auto data = (dir / "data").string();
  CHECK(run_cli("synth --seed 1 --images 2 --size 16x16 --out " + data) == 0);
  CHECK(std::filesystem::exists(dir / "data" / "manifest.json"));
  CHECK(run_cli("evaluate --manifest " + data + "/manifest.json --model toy --out " + (dir / "out").string()) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "report.csv"));
  CHECK(run_cli("corrupt --manifest " + data + "/manifest.json --kinds fog --severities 1 --out " +
                (dir / "c").string()) == 0);
  CHECK(std::filesystem::exists(dir / "c" / "images" / "synth_0000.fog.1.png"));
  CHECK(run_cli("attack --manifest " + data + "/manifest.json --methods fgsm --eps 8 --out " + (dir / "a").string()) == 0);
  CHECK(std::filesystem::exists(dir / "a" / "synth_0001.fgsm.8_255.png"));
  CHECK(run_cli("gradcheck --trials 2") == 0);

  CHECK(run_cli("synth --images") == 1);
  CHECK(run_cli("nosuchcommand") == 1);
  CHECK(run_cli("evaluate --manifest " + data + "/manifest.json --model toy --split medium") == 1);
  CHECK(run_cli("corrupt --manifest " + data + "/manifest.json --kinds rain --out " + (dir / "c").string()) == 1);
  CHECK(run_cli("evaluate --manifest /nonexistent/manifest.json --model toy") == 3);
  CHECK(run_cli("evaluate --manifest " + data + "/manifest.json --model tcp:127.0.0.1:1") == 2);
}

}  // TEST_SUITE
