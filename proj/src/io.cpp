#include "coldmri/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace coldmri {
namespace {

namespace fs = std::filesystem;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;
  const fs::path& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw IoError(path.string() + ": truncated file");
    }
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    }
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void expect_magic(const char* magic) {
    if (bytes(4) != magic) {
      throw IoError(path.string() + ": bad magic, expected " + magic);
    }
  }
  void expect_end() const {
    if (pos != buf.size()) {
      throw IoError(path.string() + ": trailing bytes after payload");
    }
  }
};

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return std::move(ss).str();
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

constexpr std::size_t kMaxDim = 1u << 20;

}  // namespace

void write_cim(const fs::path& path, const ComplexImage& img) {
  require_finite(img, "write_cim");
  std::string out;
  out.reserve(12 + img.size() * 8);
  out += "CIM1";
  put_u32(out, static_cast<std::uint32_t>(img.height()));
  put_u32(out, static_cast<std::uint32_t>(img.width()));
  for (const Complex& z : img.data()) {
    put_f32(out, static_cast<float>(z.real()));
    put_f32(out, static_cast<float>(z.imag()));
  }
  write_file(path, out);
}

ComplexImage read_cim(const fs::path& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf, 0, path};
  cur.expect_magic("CIM1");
  const std::uint32_t h = cur.u32();
  const std::uint32_t w = cur.u32();
  if (h == 0 || w == 0 || h > kMaxDim || w > kMaxDim) {
    throw IoError(path.string() + ": implausible dimensions " + std::to_string(h) +
                  "x" + std::to_string(w));
  }
  std::vector<Complex> data(static_cast<std::size_t>(h) * w);
  for (Complex& z : data) {
    const float re = cur.f32();
    const float im = cur.f32();
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw IoError(path.string() + ": non-finite sample");
    }
    z = Complex{static_cast<double>(re), static_cast<double>(im)};
  }
  cur.expect_end();
  return ComplexImage(static_cast<int>(h), static_cast<int>(w), std::move(data));
}

namespace {

/// Longest fully selected centre-out prefix; the centre fraction recovered
/// from raw mask bytes.
int selected_center_block(const std::vector<std::uint8_t>& sel, int width) {
  const std::vector<int> order = center_out_order(width);
  int k = 0;
  while (k < width && sel[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]) {
    ++k;
  }
  return k;
}

std::vector<std::uint8_t> read_mask_bytes(Cursor& cur, int width,
                                          const fs::path& path) {
  std::vector<std::uint8_t> sel(static_cast<std::size_t>(width));
  for (std::uint8_t& b : sel) {
    b = cur.u8();
    if (b > 1) throw IoError(path.string() + ": mask byte must be 0 or 1");
  }
  return sel;
}

}  // namespace

void write_mask(const fs::path& path, const ColumnMask& mask) {
  std::string out;
  out += "KMS1";
  put_u32(out, static_cast<std::uint32_t>(mask.width()));
  out.append(mask.selected().begin(), mask.selected().end());
  write_file(path, out);
}

ColumnMask read_mask(const fs::path& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf, 0, path};
  cur.expect_magic("KMS1");
  const std::uint32_t w = cur.u32();
  if (w == 0 || w > kMaxDim) {
    throw IoError(path.string() + ": implausible width " + std::to_string(w));
  }
  const int width = static_cast<int>(w);
  std::vector<std::uint8_t> sel = read_mask_bytes(cur, width, path);
  cur.expect_end();
  const int block = selected_center_block(sel, width);
  if (block == 0) {
    throw IoError(path.string() + ": DC column is not selected");
  }
  int count = 0;
  for (std::uint8_t b : sel) count += b;
  try {
    return ColumnMask(width, std::move(sel),
                      static_cast<double>(block) / width,
                      static_cast<double>(width) / count);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_family(const fs::path& path, const MaskFamily& family) {
  std::string out;
  out += "KFM1";
  put_u32(out, static_cast<std::uint32_t>(family.width()));
  put_u32(out, static_cast<std::uint32_t>(family.total_steps()));
  out.push_back(family.schedule().kind() == ScheduleKind::kLinear ? '\0' : '\1');
  put_f64(out, family.schedule().sr_min());
  put_u64(out, family.seed());
  for (int t = 0; t <= family.total_steps(); ++t) {
    const auto sel = family.mask(t).selected();
    out.append(sel.begin(), sel.end());
  }
  write_file(path, out);
}

MaskFamily read_family(const fs::path& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf, 0, path};
  cur.expect_magic("KFM1");
  const std::uint32_t w = cur.u32();
  const std::uint32_t steps = cur.u32();
  if (w == 0 || w > kMaxDim) {
    throw IoError(path.string() + ": implausible width " + std::to_string(w));
  }
  if (steps == 0 || steps > kMaxDim) {
    throw IoError(path.string() + ": implausible step count " + std::to_string(steps));
  }
  const std::uint8_t kind_byte = cur.u8();
  if (kind_byte > 1) {
    throw IoError(path.string() + ": unknown schedule kind " +
                  std::to_string(kind_byte));
  }
  const double sr_min = cur.f64();
  const std::uint64_t seed = cur.u64();
  const int width = static_cast<int>(w);
  const int total = static_cast<int>(steps);

  std::vector<std::vector<std::uint8_t>> stored;
  stored.reserve(static_cast<std::size_t>(total) + 1);
  for (int t = 0; t <= total; ++t) {
    stored.push_back(read_mask_bytes(cur, width, path));
  }
  cur.expect_end();

  // Reconstruct the priority permutation: a column outranks another when it
  // survives to a later step; ties resolve by centre-out rank, which puts the
  // centre block first.
  std::vector<int> rank(static_cast<std::size_t>(width));
  {
    const std::vector<int> order = center_out_order(width);
    for (int i = 0; i < width; ++i) rank[static_cast<std::size_t>(order[i])] = i;
  }
  std::vector<int> death(static_cast<std::size_t>(width), -1);
  for (int t = 0; t <= total; ++t) {
    for (int c = 0; c < width; ++c) {
      if (stored[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)]) {
        death[static_cast<std::size_t>(c)] = t;
      }
    }
  }
  std::vector<int> priority(static_cast<std::size_t>(width));
  for (int c = 0; c < width; ++c) priority[static_cast<std::size_t>(c)] = c;
  std::sort(priority.begin(), priority.end(), [&](int a, int b) {
    const int da = death[static_cast<std::size_t>(a)];
    const int db = death[static_cast<std::size_t>(b)];
    if (da != db) return da > db;
    return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
  });

  const int block = selected_center_block(stored.back(), width);
  if (block == 0) {
    throw IoError(path.string() + ": DC column is not selected at the final step");
  }

  try {
    const ScheduleSpec spec(kind_byte == 0 ? ScheduleKind::kLinear : ScheduleKind::kLog,
                            total, sr_min);
    MaskFamily family(spec, width, static_cast<double>(block) / width, seed,
                      std::move(priority));
    for (int t = 0; t <= total; ++t) {
      const auto sel = family.mask(t).selected();
      if (!std::equal(sel.begin(), sel.end(), stored[static_cast<std::size_t>(t)].begin())) {
        throw IoError(path.string() +
                      ": masks do not form a schedule-consistent nested family");
      }
    }
    return family;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const fs::path& path, const ModelCheckpoint& ckpt) {
  if (ckpt.params.size() != param_count(ckpt.arch)) {
    throw ConfigError("checkpoint parameter count does not match architecture");
  }
  if (ckpt.total_steps < 1) {
    throw ConfigError("checkpoint total_steps must be >= 1");
  }
  std::string out;
  out += "CKP1";
  put_u32(out, 1);  // format version
  put_u32(out, static_cast<std::uint32_t>(ckpt.arch.channels));
  put_u32(out, static_cast<std::uint32_t>(ckpt.arch.depth));
  put_u64(out, ckpt.params.size());
  for (float p : ckpt.params) put_f32(out, p);

  std::vector<std::string> entries;
  entries.push_back("total_steps=" + std::to_string(ckpt.total_steps));
  for (const auto& [k, v] : ckpt.metadata) {
    if (k == "total_steps") continue;  // the field above is authoritative
    entries.push_back(k + "=" + v);
  }
  put_u64(out, entries.size());
  for (const std::string& e : entries) {
    put_u64(out, e.size());
    out += e;
  }
  write_file(path, out);
}

ModelCheckpoint load_checkpoint(const fs::path& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf, 0, path};
  cur.expect_magic("CKP1");
  const std::uint32_t version = cur.u32();
  if (version != 1) {
    throw IoError(path.string() + ": unsupported checkpoint version " +
                  std::to_string(version));
  }
  ModelCheckpoint ckpt;
  ckpt.arch.channels = static_cast<int>(cur.u32());
  ckpt.arch.depth = static_cast<int>(cur.u32());
  if (ckpt.arch.channels < 1 || ckpt.arch.channels > (1 << 16) ||
      ckpt.arch.depth < 1 || ckpt.arch.depth > (1 << 16)) {
    throw IoError(path.string() + ": implausible architecture");
  }
  const std::uint64_t count = cur.u64();
  if (count != param_count(ckpt.arch)) {
    throw IoError(path.string() + ": parameter count " + std::to_string(count) +
                  " does not match the declared architecture");
  }
  ckpt.params.resize(count);
  for (float& p : ckpt.params) {
    p = cur.f32();
    if (!std::isfinite(p)) throw IoError(path.string() + ": non-finite parameter");
  }
  const std::uint64_t n_meta = cur.u64();
  if (n_meta > (1u << 20)) {
    throw IoError(path.string() + ": implausible metadata entry count");
  }
  ckpt.total_steps = 0;
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    const std::uint64_t len = cur.u64();
    const std::string entry = cur.bytes(len);
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ": metadata entry lacks '='");
    }
    const std::string key = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);
    if (key == "total_steps") {
      try {
        ckpt.total_steps = std::stoi(value);
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad total_steps value");
      }
    } else {
      ckpt.metadata.emplace_back(key, value);
    }
  }
  cur.expect_end();
  if (ckpt.total_steps < 1) {
    throw IoError(path.string() + ": checkpoint lacks a valid total_steps entry");
  }
  return ckpt;
}

void write_pgm(const fs::path& path, const ComplexImage& img) {
  require_finite(img, "write_pgm");
  double peak = 0.0;
  for (const Complex& z : img.data()) peak = std::max(peak, std::abs(z));
  std::string out = "P5\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (const Complex& z : img.data()) {
    const double v = peak > 0.0 ? std::abs(z) / peak : 0.0;
    const long byte = std::lround(255.0 * v);
    out.push_back(static_cast<char>(std::clamp(byte, 0L, 255L)));
  }
  write_file(path, out);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::string out = header + "\n";
  for (const std::string& row : rows) {
    out += row;
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::pair<std::string, std::string>> read_kv_file(const fs::path& path) {
  const std::string buf = read_file(path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(buf);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected key=value");
    }
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return entries;
}

void write_manifest(const fs::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries,
                    const std::vector<std::string>& comments) {
  std::string out;
  for (const std::string& c : comments) out += "# " + c + "\n";
  for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  write_file(path, out);
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.txt";
  const std::string buf = read_file(manifest);
  Dataset ds;
  std::istringstream in(buf);
  std::string line;
  while (std::getline(in, line)) {
    const std::string name = trim(line);
    if (name.empty() || name[0] == '#') continue;
    const fs::path file = dir / name;
    ds.images.push_back(read_cim(file));
    ds.ids.push_back(file.stem().string());
  }
  if (ds.images.empty()) {
    throw IoError(manifest.string() + ": dataset manifest lists no slices");
  }
  return ds;
}

void save_dataset(const fs::path& dir, const std::vector<ComplexImage>& images) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
  std::vector<std::string> names;
  names.reserve(images.size());
  int digits = 3;
  for (std::size_t n = images.size(); n > 1000; n /= 10) ++digits;
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%0*zu.cim", digits, i);
    write_cim(dir / name, images[i]);
    names.emplace_back(name);
  }
  std::string manifest;
  for (const std::string& n : names) manifest += n + "\n";
  write_file(dir / "manifest.txt", manifest);
}

}  // namespace coldmri
