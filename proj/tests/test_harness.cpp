#include "nsca/checkpoint.hpp"
#include "nsca/experiment.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>

using namespace nsca;
namespace fs = std::filesystem;

namespace {

// Small enough for sub-second runs.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset.per_class_source = 40;
  c.dataset.per_class_target = 40;
  c.hidden = {16, 8};
  c.epochs_source = 8;
  c.epochs_adapt = 3;
  c.batch_size = 32;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nsca_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NSCA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Matrix predictions_for(const std::vector<int>& predicted, int classes) {
  Matrix p = Matrix::Constant(static_cast<Eigen::Index>(predicted.size()), classes, 0.1);
  for (std::size_t i = 0; i < predicted.size(); ++i) p(static_cast<Eigen::Index>(i), predicted[i]) = 0.8;
  return p;
}

}  // namespace

TEST_CASE("evaluate: perfect, constant and hand-counted predictors") {
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const auto perfect = evaluate_predictions(predictions_for(labels, 3), labels, 3);
  CHECK(perfect.overall == 100.0);
  CHECK(perfect.class_average == 100.0);
  for (double a : perfect.per_class) CHECK(a == 100.0);

  const std::vector<int> balanced = {0, 1, 2, 3, 0, 1, 2, 3};
  const auto constant = evaluate_predictions(predictions_for(std::vector<int>(8, 2), 4), balanced, 4);
  CHECK(constant.class_average == doctest::Approx(25.0));

  // confusion by hand: class 0 2/3, class 1 3/4, class 2 2/3, overall 7/10
  const std::vector<int> predicted = {0, 1, 0, 1, 1, 2, 1, 2, 0, 2};
  const auto e = evaluate_predictions(predictions_for(predicted, 3), labels, 3);
  CHECK(e.overall == doctest::Approx(70.0));
  CHECK(e.per_class[0] == doctest::Approx(200.0 / 3));
  CHECK(e.per_class[1] == doctest::Approx(75.0));
  CHECK(e.per_class[2] == doctest::Approx(200.0 / 3));
  CHECK(e.class_average == doctest::Approx((200.0 / 3 + 75.0 + 200.0 / 3) / 3));
}

TEST_CASE("config: JSON round trip, overlay, rejection") {
  ExperimentConfig c = small_config();
  c.neighbors = 3;
  c.ablation.disable_inertia = true;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));

  const auto overlaid = config_from_json(nlohmann::json{{"k", 7}}, c);
  CHECK(overlaid.neighbors == 7);
  CHECK(overlaid.hidden == c.hidden);
  CHECK(config_hash(overlaid) != config_hash(c));

  auto moved = c;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"neighbours", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"k", "five"}}), ConfigError);

  auto bad = c;
  bad.neighbors = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.decay_base = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("run_adaptation: zero adaptation epochs reproduce the source-only baseline") {
  auto c = small_config();
  c.epochs_adapt = 0;
  const auto r = run_adaptation(c);
  CHECK(r.epochs.size() == 1);
  CHECK(r.final.overall == r.source_only.overall);
  CHECK(r.final.per_class == r.source_only.per_class);
}

TEST_CASE("run_adaptation is deterministic to the last bit") {
  const auto c = small_config();
  const auto dir = scratch("det");
  write_metrics_csv(dir / "a.csv", {run_adaptation(c)});
  write_metrics_csv(dir / "b.csv", {run_adaptation(c)});
  CHECK(oracle::slurp((dir / "a.csv").string()) == oracle::slurp((dir / "b.csv").string()));
  CHECK(oracle::csv_rows((dir / "a.csv").string()) == c.epochs_adapt + 1);
}

TEST_CASE("ablation suite: five rows, each differing from the full method in one switch") {
  auto c = small_config();
  c.epochs_adapt = 1;
  const auto rows = run_ablation_suite(c);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].name == "full");
  const auto full = to_json(rows[0].config);
  CHECK(full["disable_m2"] == false);
  CHECK(full["disable_inertia"] == false);
  CHECK(full["disable_class_scaling"] == false);
  CHECK(full["disable_adaptive_encoding"] == false);
  std::set<std::string> hashes = {config_hash(rows[0].config)};
  const std::vector<std::string> expected_key = {"disable_m2", "disable_inertia",
                                                 "disable_class_scaling",
                                                 "disable_adaptive_encoding"};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto j = to_json(rows[r].config);
    std::vector<std::string> diff;
    for (const auto& [key, value] : j.items())
      if (full[key] != value) diff.push_back(key);
    CHECK(diff == std::vector<std::string>{expected_key[r - 1]});
    CHECK(rows[r].runs.front().config_hash == config_hash(rows[r].config));
    hashes.insert(config_hash(rows[r].config));
  }
  CHECK(hashes.size() == 5);

  const auto dir = scratch("ablation");
  write_ablation_csv(dir / "ablation.csv", rows);
  CHECK(oracle::csv_rows((dir / "ablation.csv").string()) == 5);
}

TEST_CASE("a single-value sweep equals a plain run with that value") {
  auto c = small_config();
  c.neighbors = 3;
  const auto plain = run_adaptation(c);
  const auto points = run_sweep(c, SweepParameter::K, {3});
  REQUIRE(points.size() == 1);
  REQUIRE(points[0].runs.size() == 1);
  CHECK(points[0].runs[0].final.overall == plain.final.overall);
  CHECK(points[0].runs[0].epochs.back().mean_loss == plain.epochs.back().mean_loss);
  CHECK(points[0].mean_accuracy() == plain.final.overall);
}

TEST_CASE("sweep CSV and SVG are well formed") {
  auto c = small_config();
  c.epochs_adapt = 1;
  c.seeds = 2;
  const auto points = run_sweep(c, SweepParameter::DecayBase, {0.25, 0.5});
  const auto dir = scratch("sweep");
  write_sweep_csv(dir / "sweep.csv", SweepParameter::DecayBase, points);
  CHECK(oracle::csv_rows((dir / "sweep.csv").string()) == 2);

  SvgSeries s{"mean", {}, {}};
  for (const auto& p : points) {
    s.x.push_back(p.value);
    s.y.push_back(p.mean_accuracy());
  }
  const auto svg = render_line_chart_svg("acc <vs> base & more", "decay base", "accuracy", {s});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(oracle::well_formed_xml(svg));
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("&lt;vs&gt;") != std::string::npos);
  CHECK(!oracle::well_formed_xml("<svg><g></svg>"));
}

TEST_CASE("iteration-0 loss with every component disabled equals the hand formula") {
  // One batch covering the whole target set, so the first epoch's mean loss is iteration 0.
  auto c = small_config();
  const auto domains = make_domains(c, c.seed);
  const auto source = source_model(c, domains, c.seed);
  const Matrix x = domains.target.inputs.topRows(32);
  const auto fwd = forward(source, x);
  const Eigen::Index bs = x.rows(), K = c.neighbors;

  Matrix S(bs, fwd.predictions.cols());
  for (Eigen::Index i = 0; i < bs; ++i) {
    S.row(i).setZero();
    for (auto j : oracle::brute_force_knn(fwd.features, i, K)) S.row(i) += fwd.predictions.row(j);
    S.row(i) /= double(K);
  }
  auto hand = [&](double m2_weight) {
    double total = 0;
    for (Eigen::Index i = 0; i < bs; ++i)
      for (Eigen::Index j = 0; j < bs; ++j)
        if (i != j) {
          const double ss = S.row(i).dot(S.row(j));
          total += fwd.predictions.row(i).dot(S.row(j)) * (1 - 2 * ss + m2_weight * ss);
        }
    return total / double(bs * (bs - 1));
  };

  auto run_first_loss = [&](const AblationSwitches& sw) {
    auto cc = c;
    cc.ablation = sw;
    cc.epochs_adapt = 1;
    auto opts = cc.adapt_options(cc.seed);
    auto model = source;
    double loss = NAN;
    adapt(model, UnlabeledView(x), opts, [&](const EpochSummary& e, const auto&) { loss = e.mean_loss; });
    return loss;
  };

  // alpha = 1 at iteration 0
  AblationSwitches three{false, true, true, true};
  CHECK(std::abs(run_first_loss(three) - hand(1.0)) <= 1e-12);
  AblationSwitches all{true, true, true, true};
  CHECK(std::abs(run_first_loss(all) - hand(0.0)) <= 1e-12);
}

TEST_CASE("CLI exit codes and outputs") {
  const auto dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  const std::string small =
      " --per-class-source 30 --per-class-target 30 --hidden 8,4 --epochs-source 3 --epochs-adapt 1";

  CHECK(run_cli("adapt" + small + out) == 0);
  for (const char* f : {"metrics.csv", "final.csv", "config.json", "source_seed0.json", "adapted_seed0.json"})
    CHECK(fs::exists(dir / f));

  CHECK(run_cli("adapt --k 0" + out) == 2);
  CHECK(run_cli("adapt --bogus-flag" + out) == 2);
  CHECK(run_cli("adapt --config " + (dir / "missing.json").string() + out) == 2);
  CHECK(run_cli("eval" + out) == 2);
  CHECK(run_cli("eval --checkpoint " + (dir / "nothing_here.json").string() + out) == 2);
  CHECK(run_cli("eval --checkpoint " + (dir / "config.json").string() + out) == 2);
  CHECK(run_cli("sweep --param neighbours" + out) == 2);

  {
    std::ofstream(dir / "bad.json") << R"({"k": 3, "colour": "red"})";
  }
  CHECK(run_cli("adapt --config " + (dir / "bad.json").string() + out) == 2);

  // Extreme weights overflow the first layer to inf - inf: non-finite logits.
  auto p = init_parameters(Architecture{8, {64, 32}, 6}, 0);
  for (auto& l : p.extractor)
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = i % 2 ? 1e308 : -1e308;
  save_checkpoint(dir / "extreme.json", p, "x");
  CHECK(run_cli("eval --checkpoint " + (dir / "extreme.json").string() + out) == 3);
}
