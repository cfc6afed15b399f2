#pragma once

#include <cstdint>
#include <string>

#include "attnscope/corpus.hpp"
#include "attnscope/model.hpp"

namespace attnscope {

// Checkpoint container: magic "ATCF", a u16 format version, the run-config
// snapshot (verbatim JSON text), both vocab tables, then a named tensor
// manifest followed by little-endian 64-bit floats. Round-trips bit-exactly.
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'A', 'T', 'C', 'F'};

struct CheckpointData {
  ModelParams params;
  Vocab src_vocab;
  Vocab tgt_vocab;
  std::string config_text;  // stored verbatim
};

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocab& src_vocab,
                     const Vocab& tgt_vocab, const std::string& config_text);

CheckpointData load_checkpoint(const std::string& path);

}  // namespace attnscope
