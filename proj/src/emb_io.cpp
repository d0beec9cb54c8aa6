#include "glossalign/emb_io.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

namespace glossalign {

namespace {

// Serialization goes through an in-memory buffer so the on-disk write is a
// single atomic temp-file + rename.
class ByteWriter {
 public:
  void magic(const char tag[4]) { buf_.append(tag, 4); }
  void u16(std::uint16_t v) { raw_le(v); }
  void u32(std::uint32_t v) { raw_le(v); }
  void u64(std::uint64_t v) { raw_le(v); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    raw_le(bits);
  }
  void str(const std::string& s) { buf_.append(s); }
  const std::string& bytes() const { return buf_; }

 private:
  template <typename T>
  void raw_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Err::IoError, "cannot open " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::string magic() {
    need(4);
    std::string m = buf_.substr(pos_, 4);
    pos_ += 4;
    return m;
  }
  std::uint16_t u16() { return raw_le<std::uint16_t>(); }
  std::uint32_t u32() { return raw_le<std::uint32_t>(); }
  std::uint64_t u64() { return raw_le<std::uint64_t>(); }
  float f32() {
    std::uint32_t bits = raw_le<std::uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t len) {
    need(len);
    std::string s = buf_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw Error(Err::TruncatedFile, path_);
  }
  template <typename T>
  T raw_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

void check_id(const std::string& id) {
  if (id.empty() || id.size() > 0xffff) throw Error(Err::ParseError, "bad id length");
}

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Err::IoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(Err::IoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_vector_table(const std::filesystem::path& path, const VectorTable& table) {
  ByteWriter w;
  w.magic("GEM1");
  w.u32(kEmbFormatVersion);
  w.u64(table.entries.size());
  w.u32(table.dim);
  for (const auto& [id, vec] : table.entries) {
    check_id(id);
    if (vec.size() != table.dim) throw Error(Err::DimMismatch, "vector dim for id " + id);
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.str(id);
    for (double v : vec) w.f32(static_cast<float>(v));
  }
  atomic_write_file(path, w.bytes());
}

VectorTable read_vector_table(const std::filesystem::path& path) {
  ByteReader r(path);
  if (r.magic() != "GEM1") throw Error(Err::BadMagic, path.string());
  r.u32();  // version
  const std::uint64_t count = r.u64();
  VectorTable table;
  table.dim = r.u32();
  std::unordered_set<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string id = r.str(len);
    if (!ids.insert(id).second) throw Error(Err::DuplicateId, id);
    Vec vec(table.dim);
    for (auto& v : vec) v = static_cast<double>(r.f32());
    table.entries.emplace_back(std::move(id), std::move(vec));
  }
  return table;
}

void write_matrix_table(const std::filesystem::path& path, const MatrixTable& table) {
  ByteWriter w;
  w.magic("CEM1");
  w.u32(kEmbFormatVersion);
  w.u64(table.entries.size());
  w.u32(table.dim);
  for (const auto& [id, m] : table.entries) {
    check_id(id);
    if (m.cols() != table.dim) throw Error(Err::DimMismatch, "matrix dim for id " + id);
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.str(id);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    for (double v : m.data()) w.f32(static_cast<float>(v));
  }
  atomic_write_file(path, w.bytes());
}

MatrixTable read_matrix_table(const std::filesystem::path& path) {
  ByteReader r(path);
  if (r.magic() != "CEM1") throw Error(Err::BadMagic, path.string());
  r.u32();  // version
  const std::uint64_t count = r.u64();
  MatrixTable table;
  table.dim = r.u32();
  std::unordered_set<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string id = r.str(len);
    if (!ids.insert(id).second) throw Error(Err::DuplicateId, id);
    const std::uint32_t rows = r.u32();
    Matrix m(rows, table.dim);
    for (auto& v : m.data()) v = static_cast<double>(r.f32());
    table.entries.emplace_back(std::move(id), std::move(m));
  }
  return table;
}

std::string sniff_magic(const std::filesystem::path& path) {
  ByteReader r(path);
  std::string m = r.magic();
  if (m != "GEM1" && m != "CEM1") throw Error(Err::BadMagic, path.string());
  return m;
}

}  // namespace glossalign
