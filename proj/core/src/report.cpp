#include "attnscope/report.hpp"

#include <cstdarg>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace attnscope {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path);
}

ordered_json stats_json(const ClassStats& s) {
  return ordered_json{{"preserved", s.preserved},
                      {"not_preserved", s.not_preserved},
                      {"not_counterfactualizable", s.not_counterfactualizable},
                      {"total", s.total()},
                      {"rate", s.rate()}};
}

struct TableSpec {
  Method method;
  WordClass word_class;
  SortBy sort_by;
  std::size_t limit;
};

// Mirrors the report layout: content tables top 20, function tables top 30,
// plus a short table for the last-encoder-state probe when it was run.
std::vector<TableSpec> table_specs(const PreservationReport& report) {
  Method lead = report.methods.front();
  if (report.stats_for(Method::Aggregate)) lead = Method::Aggregate;
  std::vector<TableSpec> specs = {
      {lead, WordClass::Content, SortBy::Count, 20},
      {lead, WordClass::Content, SortBy::Coverage, 20},
      {lead, WordClass::Function, SortBy::Count, 30},
      {lead, WordClass::Function, SortBy::Coverage, 30},
  };
  if (lead != Method::LastEncoderState && report.stats_for(Method::LastEncoderState)) {
    specs.push_back({Method::LastEncoderState, WordClass::Function, SortBy::Coverage, 10});
  }
  return specs;
}

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buffer[512];
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

}  // namespace

std::string report_json_text(const PreservationReport& report) {
  ordered_json j;
  j["schema"] = "attnscope-report";
  j["schema_version"] = 1;
  j["tool_version"] = report.tool_version;
  j["config_hash"] = report.config_hash;
  j["checkpoint_hash"] = report.checkpoint_hash;
  j["run_seed"] = report.config.run_seed;
  j["keepmax_mode"] = keepmax_mode_name(report.config.keepmax_mode);
  j["min_frequency"] = report.config.min_frequency;
  j["totals"] = ordered_json{{"tokens", report.total_tokens},
                             {"function_words", report.function_tokens},
                             {"content_words", report.content_tokens}};

  ordered_json methods = ordered_json::array();
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    const MethodStats& s = report.stats[i];
    methods.push_back(ordered_json{{"name", method_name(s.method)},
                                   {"function_words", stats_json(s.function_words)},
                                   {"content_words", stats_json(s.content_words)},
                                   {"all_tokens", stats_json(s.all_tokens)}});
  }
  j["methods"] = std::move(methods);

  ordered_json tables = ordered_json::array();
  for (const TableSpec& spec : table_specs(report)) {
    ordered_json rows = ordered_json::array();
    for (const TopTokenRow& row : top_tokens(report, spec.method, spec.word_class, spec.sort_by,
                                             report.config.min_frequency, spec.limit)) {
      rows.push_back(ordered_json{{"token", row.token},
                                  {"preserved", row.preserved},
                                  {"total", row.total},
                                  {"coverage", row.coverage}});
    }
    tables.push_back(ordered_json{
        {"method", method_name(spec.method)},
        {"word_class", spec.word_class == WordClass::Function ? "function" : "content"},
        {"sort", spec.sort_by == SortBy::Count ? "count" : "coverage"},
        {"rows", std::move(rows)}});
  }
  j["top_tokens"] = std::move(tables);

  return j.dump(2) + "\n";
}

void write_report_json(const PreservationReport& report, const std::string& path) {
  write_file(path, report_json_text(report));
}

std::string report_text(const PreservationReport& report) {
  std::string out;
  out += "attnscope preservation report\n";
  out += fmt("tool version %s\n", report.tool_version.c_str());
  out += fmt("config hash %s   checkpoint hash %s\n",
             report.config_hash.empty() ? "-" : report.config_hash.c_str(),
             report.checkpoint_hash.c_str());
  out += fmt("run seed %llu   keepmax mode %s   min frequency %zu\n\n",
             static_cast<unsigned long long>(report.config.run_seed),
             keepmax_mode_name(report.config.keepmax_mode), report.config.min_frequency);

  out += "-- translation statistics ---------------------------------\n";
  out += fmt("%-24s %8zu\n", "tokens (+EOS)", report.total_tokens);
  out += fmt("%-24s %8zu (%d%%)\n", "function words", report.function_tokens,
             rounded_percent(report.total_tokens == 0
                                 ? 0.0
                                 : static_cast<double>(report.function_tokens) /
                                       static_cast<double>(report.total_tokens)));
  out += fmt("%-24s %8zu (%d%%)\n\n", "content words", report.content_tokens,
             rounded_percent(report.total_tokens == 0
                                 ? 0.0
                                 : static_cast<double>(report.content_tokens) /
                                       static_cast<double>(report.total_tokens)));

  out += "-- preservation by method ----------------------------------\n";
  out += fmt("%2s %-34s %8s %8s %8s   %-17s %-17s\n", "#", "method", "FW", "CW", "all",
             "FW p/n/x", "CW p/n/x");
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    const MethodStats& s = report.stats[i];
    const auto counts = [](const ClassStats& c) {
      return std::to_string(c.preserved) + "/" + std::to_string(c.not_preserved) + "/" +
             std::to_string(c.not_counterfactualizable);
    };
    std::string name = method_name(s.method);
    if (s.method == Method::KeepMaxUniformOthers) {
      name += std::string("[") + keepmax_mode_name(report.config.keepmax_mode) + "]";
    }
    out += fmt("%2d %-34s %7d%% %7d%% %7d%%   %-17s %-17s\n", method_id(s.method), name.c_str(),
               rounded_percent(s.function_words.rate()), rounded_percent(s.content_words.rate()),
               rounded_percent(s.all_tokens.rate()), counts(s.function_words).c_str(),
               counts(s.content_words).c_str());
  }
  out += "\n";

  for (const TableSpec& spec : table_specs(report)) {
    const char* cls = spec.word_class == WordClass::Function ? "function" : "content";
    if (spec.sort_by == SortBy::Count) {
      out += fmt("-- top %s words, %s, by preserved count --------\n", cls,
                 method_name(spec.method));
      out += fmt("   %-16s %9s %7s %9s\n", "token", "preserved", "total", "coverage");
      for (const TopTokenRow& row : top_tokens(report, spec.method, spec.word_class, spec.sort_by,
                                               report.config.min_frequency, spec.limit)) {
        out += fmt("   %-16s %9zu %7zu %8d%%\n", row.token.c_str(), row.preserved, row.total,
                   rounded_percent(row.coverage));
      }
    } else {
      out += fmt("-- top %s words, %s, by coverage (total > %zu) --\n", cls,
                 method_name(spec.method), report.config.min_frequency);
      out += fmt("   %-16s %9s %7s\n", "token", "coverage", "total");
      for (const TopTokenRow& row : top_tokens(report, spec.method, spec.word_class, spec.sort_by,
                                               report.config.min_frequency, spec.limit)) {
        out += fmt("   %-16s %8d%% %7zu\n", row.token.c_str(), rounded_percent(row.coverage),
                   row.total);
      }
    }
    out += "\n";
  }
  return out;
}

void write_report_text(const PreservationReport& report, const std::string& path) {
  write_file(path, report_text(report));
}

std::string outcome_dump_text(const PreservationReport& report) {
  std::string out;
  out += "# attnscope outcomes v1\n";
  out += fmt("# tool_version=%s config_hash=%s checkpoint_hash=%s run_seed=%llu\n",
             report.tool_version.c_str(),
             report.config_hash.empty() ? "-" : report.config_hash.c_str(),
             report.checkpoint_hash.c_str(),
             static_cast<unsigned long long>(report.config.run_seed));
  out += "# sentence\tstep\ttoken\tclass";
  for (Method m : report.methods) out += fmt("\t%s", method_name(m));
  out += "\n";
  for (const TokenOutcome& token : report.outcomes) {
    out += fmt("%zu\t%zu\t%s\t%c", token.sentence, token.step, token.token.c_str(),
               class_letter(token.word_class));
    for (const MethodOutcome& mo : token.results) out += fmt("\t%c", outcome_letter(mo.outcome));
    out += "\n";
  }
  return out;
}

void write_outcome_dump(const PreservationReport& report, const std::string& path) {
  write_file(path, outcome_dump_text(report));
}

}  // namespace attnscope
