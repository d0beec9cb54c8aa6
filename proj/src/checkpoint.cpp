#include "glossalign/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "glossalign/emb_io.hpp"

namespace glossalign {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

void put_tensor(std::string& buf, const std::string& name, const Matrix& m) {
  put_u16(buf, static_cast<std::uint16_t>(name.size()));
  buf.append(name);
  put_u32(buf, static_cast<std::uint32_t>(m.rows()));
  put_u32(buf, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_f32(buf, static_cast<float>(v));
}

Matrix scalar_tensor(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

class Cursor {
 public:
  Cursor(std::string bytes, std::string path) : buf_(std::move(bytes)), path_(std::move(path)) {}

  bool at_end() const { return pos_ == buf_.size(); }
  bool peek_tag(const char tag[4]) const {
    return pos_ + 4 <= buf_.size() && std::memcmp(buf_.data() + pos_, tag, 4) == 0;
  }
  void skip(std::size_t n) { pos_ += n; }

  std::uint16_t u16() { return le<std::uint16_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  float f32() {
    std::uint32_t bits = le<std::uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::pair<std::string, Matrix> tensor() {
    const std::uint16_t len = u16();
    std::string name = str(len);
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = static_cast<double>(f32());
    return {std::move(name), std::move(m)};
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error(Err::TruncatedFile, path_);
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const HeadConfig& cfg = ckpt.params.config;
  std::string buf;
  buf.append("VCBH", 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(cfg.d_h));
  put_u32(buf, static_cast<std::uint32_t>(cfg.d_model));
  put_u32(buf, static_cast<std::uint32_t>(cfg.n_heads));
  put_u32(buf, static_cast<std::uint32_t>(cfg.n_proj_layers));
  std::uint32_t flags = 0;
  if (cfg.attention_bias) flags |= 1u;
  if (cfg.output_projection) flags |= 2u;
  put_u32(buf, flags);
  put_f32(buf, static_cast<float>(cfg.dropout_rate));

  const auto layout = tensor_layout(cfg);
  if (layout.size() != ckpt.params.tensors.size())
    throw Error(Err::DimMismatch, "params do not match config layout");
  for (std::size_t i = 0; i < layout.size(); ++i)
    put_tensor(buf, layout[i].name, ckpt.params.tensors[i]);

  if (ckpt.optimizer) {
    const OptimizerSnapshot& opt = *ckpt.optimizer;
    buf.append("OPT1", 4);
    put_tensor(buf, "step", scalar_tensor(static_cast<double>(opt.adam.step)));
    put_tensor(buf, "lr.base", scalar_tensor(opt.lr_base));
    put_tensor(buf, "lr.custom", scalar_tensor(opt.lr_custom));
    put_tensor(buf, "plateau.best", scalar_tensor(opt.plateau_best));
    put_tensor(buf, "plateau.bad", scalar_tensor(static_cast<double>(opt.plateau_bad_epochs)));
    for (std::size_t i = 0; i < layout.size(); ++i)
      put_tensor(buf, "m." + layout[i].name, opt.adam.m[i]);
    for (std::size_t i = 0; i < layout.size(); ++i)
      put_tensor(buf, "v." + layout[i].name, opt.adam.v[i]);
  }

  atomic_write_file(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Cursor cur(std::move(bytes), path.string());

  if (!cur.peek_tag("VCBH")) throw Error(Err::BadMagic, path.string());
  cur.skip(4);
  const std::uint32_t version = cur.u32();
  if (version != kCheckpointVersion)
    throw Error(Err::ParseError, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  HeadConfig cfg;
  cfg.d_h = cur.u32();
  cfg.d_model = cur.u32();
  cfg.n_heads = cur.u32();
  cfg.n_proj_layers = cur.u32();
  const std::uint32_t flags = cur.u32();
  cfg.attention_bias = (flags & 1u) != 0;
  cfg.output_projection = (flags & 2u) != 0;
  cfg.dropout_rate = static_cast<double>(cur.f32());
  cfg.validate();
  ckpt.params.config = cfg;

  const auto layout = tensor_layout(cfg);
  for (const auto& spec : layout) {
    if (cur.at_end() || cur.peek_tag("OPT1"))
      throw Error(Err::TruncatedFile, path.string() + ": missing tensor " + spec.name);
    auto [name, m] = cur.tensor();
    if (name != spec.name)
      throw Error(Err::ParseError, "expected tensor " + spec.name + ", found " + name);
    if (m.rows() != spec.rows || m.cols() != spec.cols)
      throw Error(Err::DimMismatch, "tensor " + name + " shape");
    ckpt.params.tensors.push_back(std::move(m));
  }

  if (!cur.at_end() && cur.peek_tag("OPT1")) {
    cur.skip(4);
    OptimizerSnapshot opt;
    auto scalar = [&](const char* expect) {
      auto [name, m] = cur.tensor();
      if (name != expect || m.rows() != 1 || m.cols() != 1)
        throw Error(Err::ParseError, std::string("bad optimizer scalar ") + expect);
      return m(0, 0);
    };
    opt.adam.step = static_cast<std::uint64_t>(scalar("step"));
    opt.lr_base = scalar("lr.base");
    opt.lr_custom = scalar("lr.custom");
    opt.plateau_best = scalar("plateau.best");
    opt.plateau_bad_epochs = static_cast<std::uint64_t>(scalar("plateau.bad"));
    for (const auto& spec : layout) {
      auto [name, m] = cur.tensor();
      if (name != "m." + spec.name) throw Error(Err::ParseError, "expected m." + spec.name);
      opt.adam.m.push_back(std::move(m));
    }
    for (const auto& spec : layout) {
      auto [name, m] = cur.tensor();
      if (name != "v." + spec.name) throw Error(Err::ParseError, "expected v." + spec.name);
      opt.adam.v.push_back(std::move(m));
    }
    ckpt.optimizer = std::move(opt);
  }
  if (!cur.at_end()) throw Error(Err::ParseError, path.string() + ": trailing bytes");
  return ckpt;
}

}  // namespace glossalign
