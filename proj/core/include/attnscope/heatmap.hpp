#pragma once

#include <span>
#include <string>
#include <vector>

namespace attnscope {

// Side-by-side heatmap of an original attention row and a substituted one,
// cells labeled with source tokens, titled with the emitted target token.
// provenance, when nonempty, is embedded as an XML comment (tool version,
// config and checkpoint hashes).
std::string attention_heatmap_svg(const std::vector<std::string>& source_tokens,
                                  const std::string& emitted_token,
                                  std::span<const double> original,
                                  std::span<const double> substituted,
                                  const std::string& method_label,
                                  const std::string& provenance = {});

void write_attention_heatmap_svg(const std::string& path,
                                 const std::vector<std::string>& source_tokens,
                                 const std::string& emitted_token,
                                 std::span<const double> original,
                                 std::span<const double> substituted,
                                 const std::string& method_label,
                                 const std::string& provenance = {});

// Aligned-bars rendering of the same comparison for terminals.
std::string attention_bars_text(const std::vector<std::string>& source_tokens,
                                const std::string& emitted_token,
                                std::span<const double> original,
                                std::span<const double> substituted,
                                const std::string& method_label);

}  // namespace attnscope
