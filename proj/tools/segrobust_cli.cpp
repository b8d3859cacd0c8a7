// segrobust command line: synthetic data, corruptions, attacks, evaluation,
// gradient checks and a model server for the toy network.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "segrobust/attacks.hpp"
#include "segrobust/core/image_io.hpp"
#include "segrobust/core/log.hpp"
#include "segrobust/core/manifest.hpp"
#include "segrobust/corruptions/corruptions.hpp"
#include "segrobust/harness/evaluate.hpp"
#include "segrobust/harness/model_select.hpp"
#include "segrobust/harness/report.hpp"
#include "segrobust/harness/synth.hpp"
#include "segrobust/model/gradient_check.hpp"
#include "segrobust/model/server.hpp"
#include "segrobust/model/toy_blob_net.hpp"

namespace fs = std::filesystem;
using namespace segrobust;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::pair<Index, Index> parse_size(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) {
      const Index n = std::stol(s);
      return {n, n};
    }
    return {std::stol(s.substr(0, x)), std::stol(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigInvalid("bad size '" + s + "', expected HxW");
  }
}

std::vector<CorruptionKind> parse_kinds(const std::string& s) {
  if (s == "all") return {kAllCorruptions.begin(), kAllCorruptions.end()};
  std::vector<CorruptionKind> out;
  for (const auto& k : split_list(s)) out.push_back(corruption_kind_from_string(k));
  return out;
}

std::vector<int> parse_severities(const std::string& s) {
  if (s == "all") return {1, 2, 3, 4, 5};
  std::vector<int> out;
  for (const auto& k : split_list(s)) {
    try {
      out.push_back(std::stoi(k));
    } catch (const std::exception&) {
      throw ConfigInvalid("bad severity '" + k + "'");
    }
  }
  return out;
}

// Epsilons and step sizes are given in 1/255 units.
std::vector<double> parse_eps(const std::string& s) {
  std::vector<double> out;
  for (const auto& e : split_list(s)) {
    try {
      out.push_back(std::stod(e) / 255.0);
    } catch (const std::exception&) {
      throw ConfigInvalid("bad epsilon '" + e + "'");
    }
  }
  return out;
}

std::string eps_file_label(double eps) {
  std::string l = epsilon_label(eps);
  return l.substr(0, l.find('/')) + "_255";
}

std::unique_ptr<Segmenter> make_model(const std::string& selector) {
  auto src = model_source_from_selector(selector);
  if (src.ground_truth_oracle) throw ConfigInvalid("the oracle model is only available to evaluate");
  return src.factory();
}

int run_synth(std::uint64_t seed, std::size_t images, const std::string& size, const fs::path& out) {
  const auto [h, w] = parse_size(size);
  const auto manifest = synth_dataset({seed, images, h, w}, out);
  std::cout << "wrote " << manifest.records.size() << " images to " << (out / "manifest.json").string() << "\n";
  return 0;
}

int run_corrupt(const fs::path& manifest_path, const std::string& kinds_s, const std::string& sev_s,
                std::uint64_t seed, const fs::path& out) {
  const auto kinds = parse_kinds(kinds_s);
  const auto severities = parse_severities(sev_s);
  for (int s : severities) CorruptionSpec{CorruptionKind::GaussianNoise, s, 0}.validate();
  const auto manifest = load_manifest(manifest_path, ManifestCheck::SchemaOnly);
  fs::create_directories(out);
  std::size_t written = 0;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto rec = load_record(manifest, i);
    const auto base = image_seed(seed, i);
    // Mirror the manifest-relative layout; absolute image paths land flat.
    const fs::path rel = manifest.records[i].image_path;
    const fs::path dir = out / (rel.is_absolute() ? fs::path() : rel.parent_path());
    fs::create_directories(dir);
    for (auto k : kinds)
      for (int s : severities) {
        const auto cell = static_cast<std::size_t>(k) * 5 + static_cast<std::size_t>(s);
        const auto img = apply_corruption(rec.image, {k, s, condition_seed(base, cell)});
        write_png_rgb(dir / (rel.stem().string() + "." + to_string(k) + "." + std::to_string(s) + ".png"), img);
        ++written;
      }
  }
  std::cout << "wrote " << written << " corrupted images to " << out.string() << "\n";
  return 0;
}

struct AttackArgs {
  fs::path manifest;
  std::string model = "toy";
  std::string methods = "fgsm,bim,pgd,segpgd";
  std::string eps = "0.5,1,2,4,8";
  std::string loss = "focal_dice";
  int steps = 10;
  double step_size = 1.0;
  std::uint64_t seed = 0;
  fs::path out;
};

int run_attack_cmd(const AttackArgs& a) {
  std::vector<AttackMethod> methods;
  for (const auto& m : split_list(a.methods)) methods.push_back(attack_method_from_string(m));
  const auto eps = parse_eps(a.eps);
  if (methods.empty() || eps.empty()) throw ConfigInvalid("attack: need at least one method and one epsilon");
  const auto manifest = load_manifest(a.manifest, ManifestCheck::SchemaOnly);
  auto model = make_model(a.model);
  fs::create_directories(a.out);

  nlohmann::json log = nlohmann::json::array();
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto rec = load_record(manifest, i);
    const auto seed = image_seed(a.seed, i);
    DeterministicRng rng(seed);
    const auto sel = select_prompt(rec, SplitMode::Off, rng);
    const auto& truth = rec.annotations[sel->annotation].mask;
    std::size_t cell = 0;
    for (auto m : methods)
      for (double e : eps) {
        AttackConfig c = AttackConfig::defaults(m, e, condition_seed(seed, cell++));
        c.loss.kind = loss_kind_from_string(a.loss);
        if (m != AttackMethod::Fgsm) {
          c.steps = a.steps;
          c.step_size = a.step_size / 255.0;
        }
        const auto adv = run_attack(rec.image, sel->point, truth, *model, c);
        const std::string name = rec.id + "." + to_string(m) + "." + eps_file_label(e) + ".png";
        write_png_rgb(a.out / name, adv);
        log.push_back({{"image_id", rec.id},
                       {"file", name},
                       {"method", to_string(m)},
                       {"epsilon", e},
                       {"seed", c.seed},
                       {"annotation", sel->annotation},
                       {"point", {sel->point.x, sel->point.y}},
                       {"linf", (adv.pixels() - rec.image.pixels()).abs().maxCoeff()}});
      }
  }
  std::ofstream(a.out / "attacks.json") << log.dump(2) << "\n";
  std::cout << "wrote " << log.size() << " adversarial images to " << a.out.string() << "\n";
  return 0;
}

struct EvaluateArgs {
  fs::path manifest;
  std::string model = "toy";
  fs::path conditions;
  std::string split = "off";
  int workers = 1;
  std::uint64_t seed = 0;
  fs::path out;
  std::string report = "json,csv";
  bool overlays = false;
};

int run_evaluate(const EvaluateArgs& a) {
  RunConfig config;
  config.manifest = a.manifest;
  config.model = model_source_from_selector(a.model);
  config.conditions = a.conditions.empty() ? std::vector<Condition>{Condition::clean()} : load_conditions(a.conditions);
  config.master_seed = a.seed;
  config.output_dir = a.out;
  config.workers = a.workers;
  config.split = split_mode_from_string(a.split);
  config.report_formats = split_list(a.report);
  config.overlays = a.overlays;
  const auto bundle = evaluate_dataset(config);
  std::cout << to_csv(bundle);
  if (!bundle.skips.empty()) std::cout << bundle.skips.size() << " image(s) skipped\n";
  return 0;
}

int run_gradcheck(const std::string& selector, int trials, double h, std::uint64_t seed, const std::string& size,
                  double tolerance) {
  if (trials < 1) throw ConfigInvalid("gradcheck: trials must be at least 1");
  const auto [height, width] = parse_size(size);
  auto model = make_model(selector);
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const auto rec = synth_image(derive_seed(seed, static_cast<std::uint64_t>(t)), height, width, "trial");
    DeterministicRng rng(derive_seed(seed ^ 0x5eedULL, static_cast<std::uint64_t>(t)));
    const auto sel = select_prompt(rec, SplitMode::Off, rng);
    GradientCheckOptions opt;
    opt.h = h;
    opt.seed = rng.next_u64();
    for (LossKind kind : {LossKind::FocalDice, LossKind::Mse}) {
      LossSpec loss;
      loss.kind = kind;
      const auto r = gradient_check(*model, rec.image, sel->point, rec.annotations[sel->annotation].mask, loss, opt);
      worst = std::max(worst, r.max_relative_error);
      std::cout << "trial " << t << " " << to_string(kind) << ": rel_err " << r.max_relative_error << " (checked "
                << r.checked << ", skipped " << r.skipped << ")\n";
    }
  }
  const bool ok = worst < tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << " max rel_err " << worst << " tolerance " << tolerance << "\n";
  return ok ? 0 : 2;
}

int run_serve(const std::string& selector, const std::string& listen) {
  auto model = make_model(selector);
  if (listen == "stdio") {
    wire::FrameChannel channel(0, 1, false);
    serve_connection(channel, *model);
    return 0;
  }
  if (listen.rfind("tcp:", 0) == 0) {
    int port = -1;
    try {
      port = std::stoi(listen.substr(4));
    } catch (const std::exception&) {
    }
    if (port < 0 || port > 65535) throw ConfigInvalid("bad listen port in '" + listen + "'");
    serve_tcp(static_cast<std::uint16_t>(port), *model, {}, [](std::uint16_t p) {
      std::cout << "listening on 127.0.0.1:" << p << std::endl;
    });
    return 0;
  }
  throw ConfigInvalid("listen must be stdio or tcp:PORT");
}

}  // namespace

int main(int argc, char** argv) {
  init_logging_from_env();
  CLI::App app{"Robustness evaluation toolkit for promptable segmentation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  fs::path out;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
  std::size_t images = 8;
  std::string size = "64x64";
  synth->add_option("--seed", seed);
  synth->add_option("--images", images)->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "HxW");
  synth->add_option("--out", out)->required();

  auto* corrupt = app.add_subcommand("corrupt", "Write corrupted copies of every image");
  fs::path manifest;
  std::string kinds = "all", severities = "all";
  corrupt->add_option("--manifest", manifest)->required();
  corrupt->add_option("--kinds", kinds, "comma list or all");
  corrupt->add_option("--severities", severities, "comma list or all");
  corrupt->add_option("--seed", seed);
  corrupt->add_option("--out", out)->required();

  auto* attack = app.add_subcommand("attack", "Write adversarial copies of every image");
  AttackArgs aa;
  attack->add_option("--manifest", aa.manifest)->required();
  attack->add_option("--model", aa.model);
  attack->add_option("--methods", aa.methods);
  attack->add_option("--eps", aa.eps, "comma list in 1/255 units");
  attack->add_option("--loss", aa.loss);
  attack->add_option("--steps", aa.steps);
  attack->add_option("--step-size", aa.step_size, "in 1/255 units");
  attack->add_option("--seed", aa.seed);
  attack->add_option("--out", aa.out)->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run the evaluation protocol and write a report");
  EvaluateArgs ea;
  evaluate->add_option("--manifest", ea.manifest)->required();
  evaluate->add_option("--model", ea.model);
  evaluate->add_option("--conditions", ea.conditions, "conditions JSON; clean only if omitted");
  evaluate->add_option("--split", ea.split, "off|big|small");
  evaluate->add_option("--workers", ea.workers);
  evaluate->add_option("--seed", ea.seed);
  evaluate->add_option("--out", ea.out);
  evaluate->add_option("--report", ea.report, "json,csv");
  evaluate->add_option("--overlays", ea.overlays);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare input gradients with finite differences");
  gradcheck->set_help_flag("--help", "Print this help message and exit");
  std::string gc_model = "toy", gc_size = "12x12";
  int trials = 5;
  double h = 1e-4, tolerance = 1e-4;
  gradcheck->add_option("--model", gc_model);
  gradcheck->add_option("--trials", trials);
  gradcheck->add_option("--h", h);
  gradcheck->add_option("--seed", seed);
  gradcheck->add_option("--size", gc_size, "HxW");
  gradcheck->add_option("--tolerance", tolerance);

  auto* serve = app.add_subcommand("serve", "Serve a model over the wire protocol");
  std::string serve_model = "toy", listen = "stdio";
  serve->add_option("--model", serve_model);
  serve->add_option("--listen", listen, "stdio|tcp:PORT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::Config);
  }

  try {
    if (*synth) return run_synth(seed, images, size, out);
    if (*corrupt) return run_corrupt(manifest, kinds, severities, seed, out);
    if (*attack) return run_attack_cmd(aa);
    if (*evaluate) return run_evaluate(ea);
    if (*gradcheck) return run_gradcheck(gc_model, trials, h, seed, gc_size, tolerance);
    if (*serve) return run_serve(serve_model, listen);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Model);
  }
  return 0;
}
