#include "attnscope/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "attnscope/hash.hpp"

namespace attnscope {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(bytes_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(path_ + ": truncated checkpoint");
    }
  }

  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void put_vocab(std::string& out, const Vocab& v) {
  put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (const std::string& tok : v.table()) put_string(out, tok);
  put_u64(out, v.max_size());
}

Vocab read_vocab(Reader& r) {
  const std::uint32_t count = r.u32();
  std::vector<std::string> table;
  table.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) table.push_back(r.str());
  const std::uint64_t max_size = r.u64();
  return Vocab::from_table(std::move(table), max_size);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocab& src_vocab,
                     const Vocab& tgt_vocab, const std::string& config_text) {
  const auto names = params.parameter_names();
  const auto tensors = params.parameters();

  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u16(out, kCheckpointVersion);
  put_string(out, config_text);
  put_vocab(out, src_vocab);
  put_vocab(out, tgt_vocab);

  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = 0;  // in doubles, relative to the data block
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    put_string(out, names[i]);
    const auto& shape = tensors[i].shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u64(out, d);
    put_u64(out, offset);
    offset += tensors[i].size();
  }
  put_u64(out, offset);
  for (const Tensor& t : tensors) {
    for (double v : t.values()) put_f64(out, v);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write checkpoint " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing checkpoint " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < 6 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  }
  Reader r(std::move(bytes), path);
  char magic[4];
  r.raw(magic, 4);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  CheckpointData data;
  data.config_text = r.str();
  data.src_vocab = read_vocab(r);
  data.tgt_vocab = read_vocab(r);

  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset;
  };
  const std::uint32_t tensor_count = r.u32();
  std::vector<Entry> manifest;
  manifest.reserve(tensor_count);
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    Entry e;
    e.name = r.str();
    const std::uint32_t rank = r.u32();
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.u64());
    e.offset = r.u64();
    manifest.push_back(std::move(e));
  }
  const std::uint64_t data_len = r.u64();
  std::vector<double> block(data_len);
  for (std::uint64_t i = 0; i < data_len; ++i) block[i] = r.f64();
  if (!r.exhausted()) throw FormatError(path + ": trailing bytes after data block");

  // model geometry is recovered from the manifest itself
  auto find = [&manifest, &path](const std::string& name) -> const Entry& {
    for (const Entry& e : manifest) {
      if (e.name == name) return e;
    }
    throw FormatError(path + ": checkpoint is missing tensor " + name);
  };

  const Entry& src_embed = find("src_embed");
  const Entry& attn = find("attn_w");
  if (src_embed.shape.size() != 2 || attn.shape.size() != 2) {
    throw FormatError(path + ": malformed tensor shapes");
  }
  ModelConfig config;
  config.emb_dim = src_embed.shape[1];
  config.hidden_dim = attn.shape[0];
  config.src_vocab = data.src_vocab.size();
  config.tgt_vocab = data.tgt_vocab.size();
  config.layers = 0;
  for (const Entry& e : manifest) {
    if (e.name.rfind("dec_l", 0) == 0 && e.name.find("_wih") != std::string::npos) {
      ++config.layers;
    }
  }
  if (config.layers == 0) throw FormatError(path + ": no decoder layers in manifest");
  config.validate();

  Rng dummy(0);
  data.params = ModelParams::init(config, dummy);
  const auto names = data.params.parameter_names();
  const auto tensors = data.params.parameters();
  if (names.size() != manifest.size()) {
    throw FormatError(path + ": manifest lists " + std::to_string(manifest.size()) +
                      " tensors, expected " + std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Entry& e = find(names[i]);
    Tensor t = tensors[i];
    if (e.shape != t.shape()) {
      throw FormatError(path + ": tensor " + names[i] + " has shape " + shape_string(e.shape) +
                        ", expected " + shape_string(t.shape()));
    }
    if (e.offset + t.size() > block.size()) {
      throw FormatError(path + ": tensor " + names[i] + " overruns the data block");
    }
    std::copy(block.begin() + static_cast<std::ptrdiff_t>(e.offset),
              block.begin() + static_cast<std::ptrdiff_t>(e.offset + t.size()),
              t.mutable_values().begin());
  }
  return data;
}

}  // namespace attnscope
