#include "delaudit/report.hpp"

#include <cmath>
#include <cstdio>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::report {

using nlohmann::json;

namespace {

json opt_to_json(const std::optional<double>& v) {
  return v.has_value() ? json(*v) : json(nullptr);
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

bool method_failed(const AuditRecord& r, const std::string& method_id) {
  if (method_id == kEnsembleId) return !r.belief.ensemble.has_value();
  return r.belief.parse_failed.count(method_from_string(method_id)) != 0;
}

}  // namespace

RunReport aggregate(const std::vector<AuditRecord>& records,
                    const std::vector<calibrate::ThresholdSpec>& specs,
                    const std::string& run_id, const std::string& model_name,
                    const OutcomeOverrides& overrides) {
  RunReport report;
  report.run_id = run_id;
  report.model_name = model_name;
  report.protocol_sections = json::object();

  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string& tag = records[i].item.source;
    if (i == 0) {
      report.dataset_tag = tag;
    } else if (tag != report.dataset_tag) {
      throw ContractError("mixed dataset tags in one aggregation: \"" +
                          report.dataset_tag + "\" vs \"" + tag + "\"");
    }
  }

  for (const auto& spec : specs) {
    // Classification happens on a copy; stored verdicts stay as-is.
    std::vector<AuditRecord> copy = records;
    auto ov_it = overrides.find(spec.method_or_ensemble);
    if (ov_it != overrides.end()) {
      for (auto& r : copy) {
        auto o = ov_it->second.find(r.item.id);
        if (o != ov_it->second.end()) r.verdict.outcome = o->second;
      }
    }
    calibrate::classify(copy, spec);

    MethodMetrics m;
    m.threshold = spec;
    m.n_items = static_cast<int>(copy.size());
    for (const auto& r : copy) {
      switch (r.verdict.outcome) {
        case Outcome::Correct: ++m.n_correct; break;
        case Outcome::Incorrect: ++m.n_incorrect; break;
        case Outcome::Rejected: ++m.n_rejected; break;
      }
      if (r.verdict.classification == Classification::Delusion) ++m.n_delusion;
      if (r.verdict.classification == Classification::Hallucination) {
        ++m.n_hallucination;
      }
      if (method_failed(r, spec.method_or_ensemble)) ++m.n_parse_failed;
    }
    if (m.n_items > 0) {
      double n = m.n_items;
      m.accuracy = m.n_correct / n;
      m.error_rate = m.n_incorrect / n;
      m.reject_rate = m.n_rejected / n;
      m.delusion_rate_overall = m.n_delusion / n;
    }
    if (m.n_incorrect > 0) {
      m.delusion_share_of_errors =
          static_cast<double>(m.n_delusion) / m.n_incorrect;
    }
    report.per_method.emplace(spec.method_or_ensemble, std::move(m));
  }
  return report;
}

namespace {

// Metric accessors in the order reported in CSV and markdown. Direction:
// +1 higher is better, -1 lower is better, 0 neutral.
struct MetricDef {
  const char* name;
  int direction;
  std::optional<double> (*get)(const MethodMetrics&);
};

const MetricDef kMetricDefs[] = {
    {"accuracy", +1, [](const MethodMetrics& m) {
       return std::optional<double>(m.accuracy);
     }},
    {"error_rate", -1, [](const MethodMetrics& m) {
       return std::optional<double>(m.error_rate);
     }},
    {"reject_rate", 0, [](const MethodMetrics& m) {
       return std::optional<double>(m.reject_rate);
     }},
    {"delusion_rate_overall", -1, [](const MethodMetrics& m) {
       return std::optional<double>(m.delusion_rate_overall);
     }},
    {"delusion_share_of_errors", -1, [](const MethodMetrics& m) {
       return m.delusion_share_of_errors;
     }},
    {"threshold", 0, [](const MethodMetrics& m) {
       return std::optional<double>(m.threshold.threshold);
     }},
    {"n_items", 0, [](const MethodMetrics& m) {
       return std::optional<double>(static_cast<double>(m.n_items));
     }},
};

std::string pct1(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

}  // namespace

std::vector<Delta> compare_runs(const RunReport& before,
                                const RunReport& after) {
  if (before.dataset_tag != after.dataset_tag) {
    throw DataError("compare_runs: dataset tags differ: \"" +
                    before.dataset_tag + "\" vs \"" + after.dataset_tag +
                    "\"");
  }
  std::vector<Delta> deltas;
  for (const auto& [method, mb] : before.per_method) {
    auto it = after.per_method.find(method);
    if (it == after.per_method.end()) continue;
    const MethodMetrics& ma = it->second;
    for (const auto& def : kMetricDefs) {
      Delta d;
      d.method = method;
      d.metric = def.name;
      d.before = def.get(mb);
      d.after = def.get(ma);
      if (d.before.has_value() && d.after.has_value()) {
        d.delta = *d.after - *d.before;
        if (def.direction > 0) d.worsened = *d.delta < 0;
        if (def.direction < 0) d.worsened = *d.delta > 0;
      }
      deltas.push_back(std::move(d));
    }
  }
  return deltas;
}

json report_to_json(const RunReport& report) {
  json per_method = json::object();
  for (const auto& [method, m] : report.per_method) {
    per_method[method] = json{
        {"accuracy", m.accuracy},
        {"error_rate", m.error_rate},
        {"reject_rate", m.reject_rate},
        {"delusion_rate_overall", m.delusion_rate_overall},
        {"delusion_share_of_errors", opt_to_json(m.delusion_share_of_errors)},
        {"threshold", json{{"method_or_ensemble", m.threshold.method_or_ensemble},
                           {"threshold", m.threshold.threshold},
                           {"n_correct_used", m.threshold.n_correct_used},
                           {"normalized", m.threshold.normalized}}},
        {"n_items", m.n_items},
        {"n_correct", m.n_correct},
        {"n_incorrect", m.n_incorrect},
        {"n_rejected", m.n_rejected},
        {"n_delusion", m.n_delusion},
        {"n_hallucination", m.n_hallucination},
        {"n_parse_failed", m.n_parse_failed}};
  }
  return json{{"run_id", report.run_id},
              {"model_name", report.model_name},
              {"dataset_tag", report.dataset_tag},
              {"per_method", per_method},
              {"protocol_sections", report.protocol_sections},
              {"warnings", report.warnings}};
}

RunReport report_from_json(const json& j) {
  RunReport report;
  j.at("run_id").get_to(report.run_id);
  j.at("model_name").get_to(report.model_name);
  j.at("dataset_tag").get_to(report.dataset_tag);
  for (const auto& [method, jm] : j.at("per_method").items()) {
    MethodMetrics m;
    jm.at("accuracy").get_to(m.accuracy);
    jm.at("error_rate").get_to(m.error_rate);
    jm.at("reject_rate").get_to(m.reject_rate);
    jm.at("delusion_rate_overall").get_to(m.delusion_rate_overall);
    m.delusion_share_of_errors =
        opt_from_json(jm.at("delusion_share_of_errors"));
    const auto& jt = jm.at("threshold");
    jt.at("method_or_ensemble").get_to(m.threshold.method_or_ensemble);
    jt.at("threshold").get_to(m.threshold.threshold);
    jt.at("n_correct_used").get_to(m.threshold.n_correct_used);
    jt.at("normalized").get_to(m.threshold.normalized);
    jm.at("n_items").get_to(m.n_items);
    jm.at("n_correct").get_to(m.n_correct);
    jm.at("n_incorrect").get_to(m.n_incorrect);
    jm.at("n_rejected").get_to(m.n_rejected);
    jm.at("n_delusion").get_to(m.n_delusion);
    jm.at("n_hallucination").get_to(m.n_hallucination);
    jm.at("n_parse_failed").get_to(m.n_parse_failed);
    report.per_method.emplace(method, std::move(m));
  }
  report.protocol_sections = j.value("protocol_sections", json::object());
  j.at("warnings").get_to(report.warnings);
  return report;
}

RunReport load_report(const std::string& path) {
  try {
    return report_from_json(json::parse(util::read_file(path)));
  } catch (const json::exception& e) {
    throw DataError(path + ": bad report: " + e.what());
  }
}

std::string render_csv(const RunReport& report) {
  std::string out = "method,metric,value\n";
  for (const auto& [method, m] : report.per_method) {
    for (const auto& def : kMetricDefs) {
      auto v = def.get(m);
      out += method;
      out += ',';
      out += def.name;
      out += ',';
      out += v.has_value() ? json(*v).dump() : "";
      out += '\n';
    }
  }
  return out;
}

std::string render_markdown(const RunReport& report) {
  std::string out = "# Run " + report.run_id + "\n\n";
  out += "Model: " + report.model_name + "  \n";
  out += "Dataset: " + report.dataset_tag + "\n\n";

  std::vector<std::string> methods;
  for (const auto& [method, m] : report.per_method) methods.push_back(method);

  out += "| metric |";
  for (const auto& m : methods) out += " " + m + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < methods.size(); ++i) out += "---|";
  out += "\n";

  auto row = [&](const std::string& label,
                 const std::function<std::string(const MethodMetrics&)>& cell) {
    out += "| " + label + " |";
    for (const auto& name : methods) {
      out += " " + cell(report.per_method.at(name)) + " |";
    }
    out += "\n";
  };
  row("accuracy %", [](const MethodMetrics& m) { return pct1(m.accuracy); });
  row("error rate %",
      [](const MethodMetrics& m) { return pct1(m.error_rate); });
  row("reject rate %",
      [](const MethodMetrics& m) { return pct1(m.reject_rate); });
  row("delusion % (overall / in errors)", [](const MethodMetrics& m) {
    std::string cell = pct1(m.delusion_rate_overall);
    cell += " / ";
    cell += m.delusion_share_of_errors.has_value()
                ? pct1(*m.delusion_share_of_errors)
                : std::string("n/a");
    return cell;
  });
  row("threshold", [](const MethodMetrics& m) {
    return json(m.threshold.threshold).dump();
  });
  row("items", [](const MethodMetrics& m) { return std::to_string(m.n_items); });

  if (!report.warnings.empty()) {
    out += "\n## Warnings\n\n";
    for (const auto& w : report.warnings) out += "- " + w + "\n";
  }
  return out;
}

void emit(const RunReport& report, const std::string& dir,
          const std::set<Format>& formats) {
  if (formats.count(Format::Json) != 0) {
    util::write_file(dir + "/report.json", report_to_json(report).dump(2) + "\n");
  }
  if (formats.count(Format::Csv) != 0) {
    util::write_file(dir + "/report.csv", render_csv(report));
  }
  if (formats.count(Format::Markdown) != 0) {
    util::write_file(dir + "/report.md", render_markdown(report));
  }
}

std::string delta_table_markdown(const std::vector<Delta>& deltas) {
  std::string out = "| method | metric | before | after | delta | worsened |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& d : deltas) {
    auto fmt = [](const std::optional<double>& v) {
      return v.has_value() ? json(*v).dump() : std::string("n/a");
    };
    out += "| " + d.method + " | " + d.metric + " | " + fmt(d.before) + " | " +
           fmt(d.after) + " | " + fmt(d.delta) + " | " +
           (d.worsened ? "yes" : "") + " |\n";
  }
  return out;
}

json deltas_to_json(const std::vector<Delta>& deltas) {
  json out = json::array();
  for (const auto& d : deltas) {
    out.push_back(json{{"method", d.method},
                       {"metric", d.metric},
                       {"before", opt_to_json(d.before)},
                       {"after", opt_to_json(d.after)},
                       {"delta", opt_to_json(d.delta)},
                       {"worsened", d.worsened}});
  }
  return out;
}

}  // namespace delaudit::report
