#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "segrobust/attacks.hpp"
#include "segrobust/harness/evaluate.hpp"
#include "segrobust/harness/synth.hpp"
#include "segrobust/metrics.hpp"
#include "segrobust/model/oracle_segmenter.hpp"
#include "segrobust/model/toy_blob_net.hpp"
#include "test_util.hpp"

using namespace segrobust;
using namespace testutil;

namespace {

struct Fixture {
  ImageTensor image;
  PointPrompt prompt;
  BinaryMask truth;
};

Fixture fixture(std::uint64_t i, Index size = 32) {
  const auto rec = synth_image(derive_seed(7, i), size, size, "f");
  DeterministicRng rng(i);
  const auto sel = select_prompt(rec, SplitMode::Off, rng);
  REQUIRE(sel.has_value());
  return {rec.image, sel->point, rec.annotations[sel->annotation].mask};
}

// Returns a fixed gradient regardless of the input.
class ConstantGradient final : public Segmenter {
 public:
  explicit ConstantGradient(double g) : g_(g) {}
  SegmenterDescriptor descriptor() const override { return {"const", false, true}; }
  std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt&) override {
    return {{BinaryMask::Constant(image.height(), image.width(), false),
             PredictionField::Zero(image.height(), image.width()), 0.0}};
  }
  InputGradient input_gradient(const ImageTensor& image, const PointPrompt&, const BinaryMask&, const LossSpec&,
                               const std::optional<SegPgdStep>&, std::optional<std::size_t>) override {
    return {0.0, ImageTensor(image.height(), image.width(), g_)};
  }

 private:
  double g_;
};

double linf(const ImageTensor& a, const ImageTensor& b) { return (a.pixels() - b.pixels()).abs().maxCoeff(); }

double attack_loss(ToyBlobNet& model, const Fixture& f, const ImageTensor& input) {
  return model.input_gradient(input, f.prompt, f.truth, LossSpec{}, std::nullopt).loss;
}

double iou_fg_best(ToyBlobNet& model, const Fixture& f, const ImageTensor& input) {
  return evaluate_masks(masks_of(model.predict(input, f.prompt)), f.truth).iou_fg;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (double(i) + double(j)) / 2.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("method names") {
  for (auto m : {AttackMethod::Fgsm, AttackMethod::Bim, AttackMethod::Pgd, AttackMethod::SegPgd})
    CHECK(attack_method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(attack_method_from_string("cw"), UnknownKind);
}

TEST_CASE("config defaults and validation") {
  const auto f = AttackConfig::defaults(AttackMethod::Fgsm, 4.0 / 255);
  CHECK(f.steps == 1);
  const auto p = AttackConfig::defaults(AttackMethod::Pgd, 4.0 / 255);
  CHECK(p.steps == 10);
  CHECK(p.step_size == 1.0 / 255);
  CHECK_FALSE(p.loss.segpgd_weighting);
  CHECK(AttackConfig::defaults(AttackMethod::SegPgd, 1.0 / 255).loss.segpgd_weighting);

  auto bad = p;
  bad.epsilon = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigInvalid);
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigInvalid);
  bad = p;
  bad.steps = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigInvalid);
  bad = p;
  bad.step_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigInvalid);
  bad = f;
  bad.steps = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigInvalid);
  CHECK_NOTHROW(AttackConfig::defaults(AttackMethod::Pgd, 1.0).validate());
}

TEST_CASE("project_linf examples") {
  const ImageTensor image(4, 4, 0.5);
  CHECK(project_linf(ImageTensor(4, 4, 0.0), 8.0 / 255, image) == ImageTensor(4, 4, 0.0));
  const auto d = project_linf(ImageTensor(4, 4, 0.1), 8.0 / 255, image);
  CHECK(d.pixels().maxCoeff() == 8.0 / 255);
  CHECK(d.pixels().minCoeff() == 8.0 / 255);
  // Headroom limits the step at the range edge.
  const auto edge = project_linf(ImageTensor(4, 4, 0.1), 8.0 / 255, ImageTensor(4, 4, 0.99));
  CHECK(edge.pixels().maxCoeff() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(project_linf(ImageTensor(4, 5, 0.0), 0.1, image), ShapeMismatch);
}

TEST_CASE("project_linf invariants on random instances") {
  DeterministicRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto image = random_image(16, 16, rng);
    ImageTensor delta(16, 16);
    for (Index i = 0; i < delta.size(); ++i) delta.data()[i] = rng.uniform(-0.5, 0.5);
    const double eps = rng.uniform(0.001, 0.3);
    const auto p = project_linf(delta, eps, image);
    for (Index i = 0; i < p.size(); ++i) {
      const double x = image.data()[i] + p.data()[i];
      REQUIRE(std::abs(p.data()[i]) <= eps + 1e-15);
      REQUIRE(x >= -1e-15);
      REQUIRE(x <= 1 + 1e-15);
      // Nearest feasible value to the requested one.
      const double want = std::clamp(std::clamp(delta.data()[i], -eps, eps) + image.data()[i], 0.0, 1.0);
      REQUIRE(x == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("fgsm with a zero gradient is the identity") {
  const auto f = fixture(0);
  OracleSegmenter oracle({f.truth});
  const auto cfg = AttackConfig::defaults(AttackMethod::Fgsm, 8.0 / 255);
  CHECK(fgsm(f.image, f.prompt, f.truth, oracle, cfg) == f.image);
}

TEST_CASE("fgsm with a positive gradient adds epsilon where there is headroom") {
  ImageTensor image(4, 4, 0.5);
  image(0, 0, 0) = 1.0;
  image(1, 1, 2) = 0.99;
  ConstantGradient model(3.0);
  const auto out = fgsm(image, {0, 0}, BinaryMask::Constant(4, 4, true), model,
                        AttackConfig::defaults(AttackMethod::Fgsm, 8.0 / 255));
  CHECK(out(0, 0, 0) == 1.0);
  CHECK(out(1, 1, 2) == 1.0);
  CHECK(out(2, 2, 1) == 0.5 + 8.0 / 255);
}

TEST_CASE("non-finite gradients are rejected") {
  ConstantGradient model(std::nan(""));
  const ImageTensor image(4, 4, 0.5);
  const BinaryMask truth = BinaryMask::Constant(4, 4, true);
  CHECK_THROWS_AS(fgsm(image, {0, 0}, truth, model, AttackConfig::defaults(AttackMethod::Fgsm, 0.1)),
                  NonFiniteGradient);
  CHECK_THROWS_AS(iterative_attack(image, {0, 0}, truth, model, AttackConfig::defaults(AttackMethod::Pgd, 0.1)),
                  NonFiniteGradient);
}

TEST_CASE("bim with one step of epsilon equals fgsm") {
  ToyBlobNet model;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto f = fixture(i);
    for (double eps : kDefaultEpsilonLadder) {
      auto bim = AttackConfig::defaults(AttackMethod::Bim, eps, i);
      bim.steps = 1;
      bim.step_size = eps;
      CHECK(iterative_attack(f.image, f.prompt, f.truth, model, bim) ==
            fgsm(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Fgsm, eps, i)));
    }
  }
}

TEST_CASE("bim with zero steps returns the input") {
  ToyBlobNet model;
  const auto f = fixture(3);
  auto cfg = AttackConfig::defaults(AttackMethod::Bim, 8.0 / 255);
  cfg.steps = 0;
  CHECK(iterative_attack(f.image, f.prompt, f.truth, model, cfg) == f.image);
  CHECK_THROWS_AS(iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Fgsm, 0.1)),
                  ConfigInvalid);
}

TEST_CASE("every iterate stays feasible") {
  ToyBlobNet model;
  for (auto m : {AttackMethod::Bim, AttackMethod::Pgd, AttackMethod::SegPgd}) {
    const auto f = fixture(5);
    const auto cfg = AttackConfig::defaults(m, 4.0 / 255, 9);
    int seen = 0;
    const auto out = iterative_attack(f.image, f.prompt, f.truth, model, cfg, [&](int step, const ImageTensor& x) {
      CHECK(step == ++seen);
      CHECK(linf(x, f.image) <= cfg.epsilon + 1e-9);
      CHECK(is_valid_image(x));
    });
    CHECK(seen == 10);
    CHECK(linf(out, f.image) <= cfg.epsilon + 1e-9);
  }
}

TEST_CASE("random start depends on the seed, bim does not") {
  ToyBlobNet model;
  const auto f = fixture(2);
  const auto a = iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Pgd, 0.03, 1));
  const auto b = iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Pgd, 0.03, 2));
  CHECK_FALSE(a == b);
  CHECK(a == iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Pgd, 0.03, 1)));
  CHECK(iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Bim, 0.03, 1)) ==
        iterative_attack(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Bim, 0.03, 2)));
}

TEST_CASE("fgsm raises the attack loss") {
  ToyBlobNet model;
  int raised = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto f = fixture(i);
    const auto adv = fgsm(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Fgsm, 8.0 / 255));
    if (attack_loss(model, f, adv) >= attack_loss(model, f, f.image)) ++raised;
  }
  // A single signed step is not guaranteed to ascend, but it does so on average.
  CHECK(raised >= 15);
}

TEST_CASE("pgd degrades foreground iou more than fgsm on average") {
  ToyBlobNet model;
  double clean = 0, pgd = 0, fg = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto f = fixture(i);
    clean += iou_fg_best(model, f, f.image);
    fg += iou_fg_best(model, f,
                      fgsm(f.image, f.prompt, f.truth, model, AttackConfig::defaults(AttackMethod::Fgsm, 8.0 / 255, i)));
    pgd += iou_fg_best(model, f, iterative_attack(f.image, f.prompt, f.truth, model,
                                                  AttackConfig::defaults(AttackMethod::Pgd, 8.0 / 255, i)));
  }
  MESSAGE("mean iou_fg clean " << clean / n << " fgsm " << fg / n << " pgd " << pgd / n);
  CHECK(pgd < clean);
  CHECK(pgd <= fg);
}

TEST_CASE("attack loss grows with the budget") {
  ToyBlobNet model;
  std::vector<double> eps(kDefaultEpsilonLadder.begin(), kDefaultEpsilonLadder.end());
  std::vector<double> loss(eps.size(), 0.0);
  for (int i = 0; i < 100; ++i) {
    const auto f = fixture(i);
    for (std::size_t e = 0; e < eps.size(); ++e)
      loss[e] += attack_loss(model, f, iterative_attack(f.image, f.prompt, f.truth, model,
                                                        AttackConfig::defaults(AttackMethod::Pgd, eps[e], i)));
  }
  CHECK(spearman(eps, loss) > 0.8);
}

TEST_CASE("sweep covers the grid deterministically") {
  ToyBlobNet model;
  const auto f = fixture(4);
  const std::vector<AttackMethod> methods = {AttackMethod::Fgsm, AttackMethod::Bim, AttackMethod::Pgd,
                                             AttackMethod::SegPgd};
  const std::vector<double> eps(kDefaultEpsilonLadder.begin(), kDefaultEpsilonLadder.end());
  AttackConfig base;
  base.seed = 77;
  const auto a = attack_sweep(f.image, f.prompt, f.truth, model, methods, eps, base);
  const auto b = attack_sweep(f.image, f.prompt, f.truth, model, methods, eps, base);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].method == methods[i / 5]);
    CHECK(a[i].epsilon == eps[i % 5]);
    CHECK(a[i].seed == derive_seed(77, i));
    REQUIRE(a[i].adversarial.has_value());
    CHECK(a[i].error.empty());
    CHECK(*a[i].adversarial == *b[i].adversarial);
    CHECK(linf(*a[i].adversarial, f.image) <= a[i].epsilon + 1e-9);
    CHECK(is_valid_image(*a[i].adversarial));
  }

  const auto single = attack_sweep(f.image, f.prompt, f.truth, model, {AttackMethod::Pgd}, {0.01}, base);
  CHECK(single.size() == 1);
}

TEST_CASE("sweep records failing cells and continues") {
  ConstantGradient model(std::nan(""));
  const ImageTensor image(4, 4, 0.5);
  const auto cells = attack_sweep(image, {0, 0}, BinaryMask::Constant(4, 4, true), model,
                                  {AttackMethod::Fgsm, AttackMethod::Pgd}, {0.01, 0.02}, AttackConfig{});
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) {
    CHECK_FALSE(c.adversarial.has_value());
    CHECK_FALSE(c.error.empty());
  }
}

}  // TEST_SUITE
