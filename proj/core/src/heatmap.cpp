#include "attnscope/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>

#include "attnscope/errors.hpp"

namespace attnscope {

namespace {

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buffer[512];
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// white at 0 up to a saturated blue at the row maximum
std::string cell_fill(double weight, double max_weight) {
  const double t = max_weight > 0 ? std::clamp(weight / max_weight, 0.0, 1.0) : 0.0;
  const int r = static_cast<int>(std::lround(255 - t * (255 - 31)));
  const int g = static_cast<int>(std::lround(255 - t * (255 - 119)));
  const int b = static_cast<int>(std::lround(255 - t * (255 - 180)));
  return fmt("rgb(%d,%d,%d)", r, g, b);
}

void check_lengths(const std::vector<std::string>& source_tokens,
                   std::span<const double> original, std::span<const double> substituted) {
  if (source_tokens.empty() || original.size() != source_tokens.size() ||
      substituted.size() != source_tokens.size()) {
    throw ContractError("heatmap: attention rows and source tokens must share one length");
  }
}

}  // namespace

std::string attention_heatmap_svg(const std::vector<std::string>& source_tokens,
                                  const std::string& emitted_token,
                                  std::span<const double> original,
                                  std::span<const double> substituted,
                                  const std::string& method_label,
                                  const std::string& provenance) {
  check_lengths(source_tokens, original, substituted);
  const std::size_t m = source_tokens.size();

  const int cell = 42;
  const int top = 58;
  const int label_band = 64;
  const int panel_gap = 36;
  const int margin = 16;
  const int panel_w = static_cast<int>(m) * cell;
  const int width = 2 * panel_w + panel_gap + 2 * margin;
  const int height = top + cell + label_band + margin;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!provenance.empty()) {
    std::string safe = provenance;
    std::size_t at;
    while ((at = safe.find("--")) != std::string::npos) safe.replace(at, 2, "- -");
    svg += "<!-- " + safe + " -->\n";
  }
  svg += fmt(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
      "viewBox=\"0 0 %d %d\" font-family=\"monospace\" font-size=\"12\">\n",
      width, height, width, height);
  svg += fmt("  <title>attention at the step emitting %s</title>\n",
             xml_escape(emitted_token).c_str());
  svg += fmt("  <text x=\"%d\" y=\"20\" font-size=\"14\">emitted token: %s</text>\n", margin,
             xml_escape(emitted_token).c_str());

  struct Panel {
    const char* title;
    std::span<const double> row;
    int x0;
  };
  const Panel panels[2] = {
      {"original", original, margin},
      {method_label.c_str(), substituted, margin + panel_w + panel_gap},
  };

  for (const Panel& panel : panels) {
    const double max_w = *std::max_element(panel.row.begin(), panel.row.end());
    svg += fmt("  <text x=\"%d\" y=\"%d\">%s</text>\n", panel.x0, top - 10,
               xml_escape(panel.title).c_str());
    for (std::size_t i = 0; i < m; ++i) {
      const int x = panel.x0 + static_cast<int>(i) * cell;
      svg += fmt(
          "  <rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\" "
          "stroke=\"#555\" stroke-width=\"1\"/>\n",
          x, top, cell, cell, cell_fill(panel.row[i], max_w).c_str());
      svg += fmt("  <text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-size=\"10\">%.2f</text>\n",
                 x + cell / 2, top + cell / 2 + 4, panel.row[i]);
      svg += fmt(
          "  <text x=\"%d\" y=\"%d\" text-anchor=\"end\" font-size=\"11\" "
          "transform=\"rotate(-45 %d %d)\">%s</text>\n",
          x + cell / 2, top + cell + 14, x + cell / 2, top + cell + 14,
          xml_escape(source_tokens[i]).c_str());
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_attention_heatmap_svg(const std::string& path,
                                 const std::vector<std::string>& source_tokens,
                                 const std::string& emitted_token,
                                 std::span<const double> original,
                                 std::span<const double> substituted,
                                 const std::string& method_label,
                                 const std::string& provenance) {
  const std::string svg = attention_heatmap_svg(source_tokens, emitted_token, original,
                                                substituted, method_label, provenance);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write heatmap " + path);
  out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
  if (!out) throw IoError("failed writing heatmap " + path);
}

std::string attention_bars_text(const std::vector<std::string>& source_tokens,
                                const std::string& emitted_token,
                                std::span<const double> original,
                                std::span<const double> substituted,
                                const std::string& method_label) {
  check_lengths(source_tokens, original, substituted);
  std::size_t token_width = 6;
  for (const std::string& t : source_tokens) token_width = std::max(token_width, t.size());

  auto bar = [](double w) {
    const int filled = static_cast<int>(std::lround(std::clamp(w, 0.0, 1.0) * 20));
    std::string b(static_cast<std::size_t>(filled), '#');
    b.resize(20, '.');
    return b;
  };

  std::string out = fmt("emitted token: %s (original vs %s)\n", emitted_token.c_str(),
                        method_label.c_str());
  out += fmt("%-*s  %-20s %6s   %-20s %6s\n", static_cast<int>(token_width), "source",
             "original", "", method_label.c_str(), "");
  for (std::size_t i = 0; i < source_tokens.size(); ++i) {
    out += fmt("%-*s  %s %6.3f   %s %6.3f\n", static_cast<int>(token_width),
               source_tokens[i].c_str(), bar(original[i]).c_str(), original[i],
               bar(substituted[i]).c_str(), substituted[i]);
  }
  return out;
}

}  // namespace attnscope
