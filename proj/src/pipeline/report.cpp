/*
 * Copyright 2026 The NeuroLOS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "internal.hpp"
#include "neurolos/csv.hpp"

namespace neurolos::pipeline::detail {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const char* kClassNames[kNumClasses] = {"Short", "Medium", "Long"};

eval::NamedReport report_from_predictions(const fs::path& path, const std::string& label) {
  const auto t = csv::parse(read_text(path));
  const auto yc = t.column("label"), pc = t.column("prediction");
  std::vector<int> y, p;
  for (const auto& r : t.rows) {
    y.push_back(static_cast<int>(parse_int(r[yc])));
    p.push_back(static_cast<int>(parse_int(r[pc])));
  }
  return {label, eval::compute_metrics(y, p)};
}

void copy_text(const fs::path& from, const fs::path& to) { write_text(to, read_text(from)); }

std::string csv_as_markdown(const csv::Table& t, std::size_t max_rows = std::numeric_limits<std::size_t>::max()) {
  std::ostringstream md;
  md << "|";
  for (const auto& h : t.header) md << ' ' << h << " |";
  md << "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) md << "---|";
  md << "\n";
  for (std::size_t r = 0; r < t.rows.size() && r < max_rows; ++r) {
    md << "|";
    for (const auto& v : t.rows[r]) {
      // Long round-trip decimals are shortened for reading; the CSV keeps full precision.
      bool numeric = !v.empty() && v.find_first_not_of("0123456789.-e") == std::string::npos &&
                     v.find('.') != std::string::npos;
      md << ' ' << (numeric ? fixed(parse_double(v)) : v) << " |";
    }
    md << "\n";
  }
  return md.str();
}

}  // namespace

std::string grid_svg(const std::vector<GridPoint>& points) {
  constexpr double kW = 760, kH = 420, kLeft = 60, kRight = 220, kTop = 30, kBottom = 50;
  std::vector<std::size_t> windows;
  for (const auto& p : points) windows.push_back(p.window);
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
  std::map<std::pair<std::string, std::size_t>, std::vector<GridPoint>> series;
  for (const auto& p : points) series[{p.model, p.step}].push_back(p);

  const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto x_of = [&](std::size_t w) {
    const auto i = static_cast<double>(std::lower_bound(windows.begin(), windows.end(), w) - windows.begin());
    return kLeft + (windows.size() <= 1 ? plot_w / 2 : plot_w * i / static_cast<double>(windows.size() - 1));
  };
  auto y_of = [&](double v) { return kTop + plot_h * (1.0 - v); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">Test accuracy by window size and step</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << fixed(y_of(v), 1) << "\" y2=\""
        << fixed(y_of(v), 1) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fixed(y_of(v) + 4, 1) << "\" text-anchor=\"end\">" << fixed(v, 1)
        << "</text>\n";
  }
  for (auto w : windows) {
    svg << "<text x=\"" << fixed(x_of(w), 1) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">" << w
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">window size</text>\n";
  svg << "<text transform=\"translate(16," << kTop + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">accuracy</text>\n";

  std::size_t idx = 0;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](const GridPoint& a, const GridPoint& b) { return a.window < b.window; });
    const char* color = colors[idx % std::size(colors)];
    const char* dash = (idx / std::size(colors)) % 2 ? " stroke-dasharray=\"4 3\"" : "";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (const auto& p : pts) svg << fixed(x_of(p.window), 1) << ',' << fixed(y_of(p.accuracy), 1) << ' ';
    svg << "\"/>\n";
    for (const auto& p : pts) {
      svg << "<circle cx=\"" << fixed(x_of(p.window), 1) << "\" cy=\"" << fixed(y_of(p.accuracy), 1)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(idx);
    svg << "<line x1=\"" << kW - kRight + 15 << "\" x2=\"" << kW - kRight + 40 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << "/>\n";
    svg << "<text x=\"" << kW - kRight + 46 << "\" y=\"" << ly + 4 << "\">" << key.first << ", step " << key.second
        << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

void run_report(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto dir = ctx.dir(Stage::kReport);
  const auto edir = ctx.dir(Stage::kEvaluate);
  std::ostringstream md;
  md << "# " << cfg.name << ": ICU length-of-stay class benchmark\n\n";

  const auto gen = read_json(ctx.dir(Stage::kGenerate) / "summary.json");
  const auto marts = read_json(ctx.dir(Stage::kMarts) / "summary.json");
  const auto feats = read_json(ctx.dir(Stage::kFeatures) / "summary.json");
  md << "## Cohort\n\n";
  md << "- Data source: " << gen.at("source").get<std::string>() << "\n";
  if (gen.contains("n_patients")) md << "- Generated patients: " << gen.at("n_patients").get<std::size_t>() << "\n";
  md << "- Selected admissions: " << marts.at("admissions_selected").get<std::size_t>()
     << ", ICU stays: " << marts.at("stays").get<std::size_t>() << " (" << marts.at("train_stays").get<std::size_t>()
     << " train, " << marts.at("test_stays").get<std::size_t>() << " test)\n";
  const auto counts = marts.at("class_counts").get<std::vector<std::size_t>>();
  md << "- Class counts: Short " << counts[0] << ", Medium " << counts[1] << ", Long " << counts[2] << "\n";
  if (gen.contains("bayes_accuracy")) {
    md << "- Bayes accuracy given the latent severity alone (lab trajectories also track the realised stay, so models can exceed it): "
       << fixed(gen.at("bayes_accuracy").get<double>()) << "\n";
  }
  md << "- Encoded static features: " << feats.at("encoded_features").get<std::size_t>()
     << "; used after selection: " << feats.at("features").size() << "\n";
  const auto dropped = feats.at("dropped_constant").get<std::vector<std::string>>();
  if (!dropped.empty()) {
    md << "- Dropped constant columns:";
    for (const auto& d : dropped) md << ' ' << d;
    md << "\n";
  }
  md << "\n";

  // Model comparison, recomputed from the stored predictions.
  std::vector<eval::NamedReport> rows;
  for (const auto& m : cfg.models) {
    const auto p = edir / "predictions" / (m.name + ".csv");
    if (fs::exists(p)) rows.push_back(report_from_predictions(p, m.label));
  }
  const auto test = read_dataset(ctx.dir(Stage::kFeatures) / "test.csv");
  const auto train_counts = read_dataset(ctx.dir(Stage::kFeatures) / "train.csv").class_counts();
  const int majority = static_cast<int>(std::max_element(train_counts.begin(), train_counts.end()) - train_counts.begin());
  const double majority_acc =
      static_cast<double>(std::count(test.y.begin(), test.y.end(), majority)) / static_cast<double>(test.rows());

  md << "## Model comparison (held-out test split)\n\n";
  md << "Averages below are class-share weighted (\"" << cfg.eval.averaging << "\"); `model_comparison.csv` "
     << "also carries macro and pooled-count micro averages. Sequence models are scored on the test stays' windows "
     << "at their best validation cell.\n\n";
  md << eval::markdown_table(rows, cfg.eval.averaging) << "\n";
  if (cfg.eval.averaging != "macro") md << "Macro averages:\n\n" << eval::markdown_table(rows, "macro") << "\n";
  md << "Majority-class reference accuracy on the static test split: " << fixed(majority_acc) << "\n\n";
  write_text(dir / "model_comparison.csv", eval::metrics_csv(rows));
  write_text(dir / "per_class.csv", eval::per_class_csv(rows));
  write_text(dir / "confusion.csv", eval::confusion_csv(rows));

  md << "## Per-class metrics\n\n| Model | Class | Precision | Recall | F1 | Support |\n|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    for (int c = 0; c < kNumClasses; ++c) {
      md << "| " << r.model << " | " << kClassNames[c] << " | " << fixed(r.report.precision[c]) << " | "
         << fixed(r.report.recall[c]) << " | " << fixed(r.report.f1[c]) << " | " << r.report.confusion.support(c)
         << " |\n";
    }
  }
  md << "\n## Confusion matrices\n\nRows are true classes, columns predictions.\n\n";
  for (const auto& r : rows) {
    md << "**" << r.model << "**\n\n| | Short | Medium | Long |\n|---|---|---|---|\n";
    for (int t = 0; t < kNumClasses; ++t) {
      md << "| " << kClassNames[t];
      for (int p = 0; p < kNumClasses; ++p) md << " | " << r.report.confusion.counts[t][p];
      md << " |\n";
    }
    md << "\n";
  }

  const auto cv = ctx.dir(Stage::kTrain) / "cv.csv";
  if (fs::exists(cv)) {
    copy_text(cv, dir / "cv.csv");
    md << "## Cross-validation on the training split\n\n" << csv_as_markdown(csv::parse(read_text(cv))) << "\n";
  }

  const auto params = read_json(ctx.dir(Stage::kTune) / "params.json");
  bool any_tuned = false;
  for (const auto& m : cfg.models) any_tuned |= m.tuned;
  if (any_tuned) {
    md << "## Hyperparameter search\n\n| Model | Metric | Best CV score | Parameters |\n|---|---|---|---|\n";
    for (const auto& m : cfg.models) {
      if (!m.tuned) continue;
      const auto& e = params.at(m.name);
      md << "| " << m.label << " | " << e.at("search_metric").get<std::string>() << " | "
         << fixed(e.at("search_score").get<double>()) << " | `" << e.at("params").dump() << "` |\n";
      copy_text(ctx.dir(Stage::kTune) / (m.name + "_trials.csv"), dir / ("trials_" + m.name + ".csv"));
    }
    md << "\n";
  }

  const auto grid = edir / "grid.csv";
  if (fs::exists(grid)) {
    const auto t = csv::parse(read_text(grid));
    copy_text(grid, dir / "grid.csv");
    copy_text(ctx.dir(Stage::kTrain) / "windows.csv", dir / "windows.csv");
    std::vector<GridPoint> pts;
    for (const auto& r : t.rows) {
      pts.push_back({r[t.column("model")], static_cast<std::size_t>(parse_int(r[t.column("window")])),
                     static_cast<std::size_t>(parse_int(r[t.column("step")])), parse_double(r[t.column("accuracy")]),
                     parse_double(r[t.column("weighted_f1")])});
    }
    write_text(dir / "grid.svg", grid_svg(pts));
    md << "## Window and step grid (sequence models)\n\n" << csv_as_markdown(t) << "\n![grid](grid.svg)\n\n";
    md << "Window counts per cell:\n\n" << csv_as_markdown(csv::parse(read_text(ctx.dir(Stage::kTrain) / "windows.csv")))
       << "\n";
  }

  if (cfg.eval.importance.enabled) {
    md << "## Permutation importance\n\nMean drop in " << cfg.eval.importance.metric << " over "
       << cfg.eval.importance.n_repeats << " shuffles of each feature on the test split (top 10 shown; full "
       << "tables in `importance_<model>.csv`).\n\n";
    for (const auto& m : cfg.models) {
      const auto p = ctx.dir(Stage::kImportance) / (m.name + ".csv");
      if (!fs::exists(p)) continue;
      copy_text(p, dir / ("importance_" + m.name + ".csv"));
      md << "**" << m.label << "**\n\n" << csv_as_markdown(csv::parse(read_text(p)), 10) << "\n";
    }
  }
  write_text(dir / "report.md", md.str());
}

}  // namespace neurolos::pipeline::detail
