#include "ifdl/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ifdl/plot.hpp"

namespace ifdl::report {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v, int decimals) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << v;
  return os.str();
}

std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> widths(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
  for (const auto& row : rows) {
    if (row.size() != headers.size())
      throw std::invalid_argument("render_table: ragged row");
    for (size_t c = 0; c < row.size() && c < widths.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (size_t c = 0; c < widths.size(); ++c) {
      std::string cell = c < cells.size() ? cells[c] : "";
      out += " " + cell + std::string(widths[c] - cell.size(), ' ') + " |";
    }
    return out + "\n";
  };
  std::string sep = "|";
  for (size_t c = 0; c < widths.size(); ++c)
    sep += std::string(widths[c] + 2, '-') + "|";
  sep += "\n";

  std::string out = line(headers) + sep;
  for (const auto& row : rows) out += line(row);
  return out;
}

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void loss_section(const fs::path& run_dir, const fs::path& out_dir,
                  std::string& text, json& summary) {
  std::ifstream hist(run_dir / "loss_history.jsonl");
  std::vector<double> steps, totals, lrs;
  std::string line;
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    json h = json::parse(line);
    steps.push_back(h.at("step").get<double>());
    totals.push_back(h.at("total").get<double>());
    lrs.push_back(h.at("lr").get<double>());
  }
  if (steps.empty()) return;

  plot::line_chart({{"loss", steps, totals}}, (out_dir / "loss_curve.png").string());
  plot::line_chart({{"lr", steps, lrs}}, (out_dir / "lr_curve.png").string());

  text += "## Training\n";
  text += render_table(
      {"steps", "first loss", "last loss"},
      {{std::to_string(static_cast<long>(steps.back())), fmt(totals.front(), 4),
        fmt(totals.back(), 4)}});
  text += "\nplots: loss_curve.png, lr_curve.png\n\n";
  summary["train"] = {{"steps", steps.back()},
                      {"first_loss", totals.front()},
                      {"last_loss", totals.back()}};
}

void eval_section(const fs::path& run_dir, const fs::path& out_dir,
                  std::string& text, json& summary) {
  json ev = read_json(run_dir / "eval.json");
  text += "## Evaluation (" + ev.value("split", std::string("?")) + ")\n";

  if (ev.contains("detection")) {
    const json& det = ev["detection"];
    std::vector<std::vector<std::string>> rows;
    for (auto it = det["per_class"].begin(); it != det["per_class"].end(); ++it)
      rows.push_back({it.key(), fmt(it.value()["accuracy"].get<double>(), 3),
                      fmt(it.value()["f1"].get<double>(), 3)});
    rows.push_back({"macro", fmt(det["macro_accuracy"].get<double>(), 3),
                    fmt(det["macro_f1"].get<double>(), 3)});
    text += "### Detection\n" + render_table({"class", "accuracy", "f1"}, rows) + "\n";
  }
  if (ev.contains("localization")) {
    const json& loc = ev["localization"];
    std::vector<std::string> row{fmt(loc["iou"].get<double>(), 3),
                                 fmt(loc["f1"].get<double>(), 3)};
    row.push_back(loc.contains("auc") && !loc["auc"].is_null()
                      ? fmt(loc["auc"].get<double>(), 3)
                      : "n/a");
    text += "### Localization\n" + render_table({"iou", "f1", "auc"}, {row}) + "\n";
  }
  auto text_row = [](const json& t) {
    return std::vector<std::string>{
        fmt(t["bleu1"].get<double>(), 3), fmt(t["rouge_l"].get<double>(), 3),
        fmt(t["cider"].get<double>(), 3), fmt(t["css"].get<double>(), 3)};
  };
  if (ev.contains("text")) {
    text += "### Explanations\n" +
            render_table({"bleu1", "rouge_l", "cider", "css"},
                         {text_row(ev["text"])}) + "\n";
    const json& cs = ev["text"]["css_sections"];
    text += render_table(
        {"type", "areas", "tampered", "visual", "summary"},
        {{fmt(cs["type"].get<double>(), 2), fmt(cs["areas"].get<double>(), 2),
          fmt(cs["tampered_content"].get<double>(), 2),
          fmt(cs["visual_inconsistencies"].get<double>(), 2),
          fmt(cs["summary"].get<double>(), 2)}}) + "\n";
  }
  if (ev.contains("perturbed")) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"clean", fmt(ev["text"]["bleu1"].get<double>(), 3),
                    fmt(ev["text"]["rouge_l"].get<double>(), 3),
                    fmt(ev["text"]["cider"].get<double>(), 3),
                    fmt(ev["text"]["css"].get<double>(), 3), "-", "-", "-", "-"});
    for (auto it = ev["perturbed"].begin(); it != ev["perturbed"].end(); ++it) {
      const json& p = it.value();
      auto delta = [&](const char* k) {
        return fmt(p[k].get<double>() - ev["text"][k].get<double>(), 3);
      };
      rows.push_back({it.key(), fmt(p["bleu1"].get<double>(), 3),
                      fmt(p["rouge_l"].get<double>(), 3),
                      fmt(p["cider"].get<double>(), 3),
                      fmt(p["css"].get<double>(), 3), delta("bleu1"),
                      delta("rouge_l"), delta("cider"), delta("css")});
    }
    text += "### Boundary perturbation\n" +
            render_table({"variant", "bleu1", "rouge_l", "cider", "css",
                          "d_bleu1", "d_rouge_l", "d_cider", "d_css"},
                         rows) + "\n";
  }
  if (ev.contains("alpha_sweep")) {
    std::vector<std::vector<std::string>> rows;
    std::vector<double> alphas, csss;
    for (const json& a : ev["alpha_sweep"]) {
      alphas.push_back(a["alpha"].get<double>());
      csss.push_back(a["css"].get<double>());
      rows.push_back({fmt(a["alpha"].get<double>(), 1),
                      fmt(a["css"].get<double>(), 3),
                      fmt(a["slot_accuracy"].get<double>(), 3)});
    }
    plot::line_chart({{"css", alphas, csss}}, (out_dir / "alpha_sweep.png").string());
    text += "### Blend weight sweep\n" +
            render_table({"alpha", "css", "slot_accuracy"}, rows) +
            "\nplot: alpha_sweep.png\n\n";
  }
  summary["eval"] = ev;
}

void judge_section(const fs::path& run_dir, const fs::path&, std::string& text,
                   json& summary) {
  json agg = read_json(run_dir / "judge_aggregate.json");
  const json& d = agg["per_dimension"];
  text += "## Judge scores\n";
  text += render_table(
      {"mask", "type", "areas", "tampered", "visual", "summary",
       "overall_text", "overall"},
      {{fmt(d["mask"].get<double>(), 2), fmt(d["type"].get<double>(), 2),
        fmt(d["areas"].get<double>(), 2), fmt(d["tampered"].get<double>(), 2),
        fmt(d["visual"].get<double>(), 2), fmt(d["summary"].get<double>(), 2),
        fmt(agg["overall_text"].get<double>(), 2),
        fmt(agg["overall"].get<double>(), 2)}});
  if (agg.contains("failed") && !agg["failed"].empty())
    text += "failed samples: " + std::to_string(agg["failed"].size()) + "\n";
  text += "\n";
  summary["judge"] = agg;
}

void votes_section(const fs::path& run_dir, const fs::path& out_dir,
                   std::string& text, json& summary) {
  json v = read_json(run_dir / "votes.json");
  const char* keys[] = {"a", "b", "neither", "tie"};
  std::vector<double> parts;
  double total = 0.0;
  for (const char* k : keys) total += v.at(k).get<double>();
  if (total <= 0) return;
  std::vector<std::vector<std::string>> rows;
  double pct_sum = 0.0;
  for (const char* k : keys) {
    double frac = v.at(k).get<double>() / total;
    parts.push_back(frac);
    pct_sum += frac * 100.0;
    rows.push_back({k, fmt(frac * 100.0, 1)});
  }
  plot::pie_chart(parts, (out_dir / "preference_pie.png").string());
  text += "## User-study preferences\n" + render_table({"choice", "percent"}, rows);
  text += "total: " + fmt(pct_sum, 1) + "%\nplot: preference_pie.png\n\n";
  summary["votes"] = {{"a", parts[0]}, {"b", parts[1]}, {"neither", parts[2]},
                      {"tie", parts[3]}};
}

}  // namespace

void render_run(const std::string& run_dir_s) {
  fs::path run_dir(run_dir_s);
  bool any = fs::exists(run_dir / "loss_history.jsonl") ||
             fs::exists(run_dir / "eval.json") ||
             fs::exists(run_dir / "judge_aggregate.json") ||
             fs::exists(run_dir / "votes.json");
  if (!any) throw std::runtime_error("nothing to report in " + run_dir_s);

  fs::path out_dir = run_dir / "report";
  fs::create_directories(out_dir);

  std::string text = "# Run report: " + run_dir_s + "\n\n";
  json summary;
  if (fs::exists(run_dir / "loss_history.jsonl"))
    loss_section(run_dir, out_dir, text, summary);
  if (fs::exists(run_dir / "eval.json"))
    eval_section(run_dir, out_dir, text, summary);
  if (fs::exists(run_dir / "judge_aggregate.json"))
    judge_section(run_dir, out_dir, text, summary);
  if (fs::exists(run_dir / "votes.json"))
    votes_section(run_dir, out_dir, text, summary);

  std::ofstream(out_dir / "report.txt", std::ios::trunc) << text;
  std::ofstream(out_dir / "report.json", std::ios::trunc) << summary.dump(2) << "\n";
}

}  // namespace ifdl::report
