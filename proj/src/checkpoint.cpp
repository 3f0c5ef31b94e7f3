// checkpoint.cpp -- little-endian restart records.

#include "chbs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "chbs/errors.hpp"

namespace chbs {

namespace {

constexpr char kMagic[4] = {'C', 'H', 'B', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u8(std::vector<unsigned char>& b, std::uint8_t v) { b.push_back(v); }

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& b, double v) {
  put_u64(b, std::bit_cast<std::uint64_t>(v));
}

void put_i32(std::vector<unsigned char>& b, std::int32_t v) {
  put_u32(b, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
  const std::vector<unsigned char>& b;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > b.size())
      throw CheckpointError("restart record truncated at byte " +
                            std::to_string(pos));
  }
  std::uint8_t u8() {
    need(1);
    return b[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[pos + i]} << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[pos + i]} << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::int32_t i32() { return std::bit_cast<std::int32_t>(u32()); }
};

void put_pair(std::vector<unsigned char>& b, const BulkSurfacePair& p) {
  put_u8(b, p.linkage == Linkage::Independent ? 1 : 0);
  for (double v : p.bulk) put_f64(b, v);
  for (double v : p.surf) put_f64(b, v);
}

BulkSurfacePair get_pair(Reader& r, int n_bulk, int n_surf) {
  BulkSurfacePair p;
  const std::uint8_t lk = r.u8();
  if (lk > 1) throw CheckpointError("unknown linkage tag in restart record");
  p.linkage = lk == 1 ? Linkage::Independent : Linkage::TraceLinked;
  p.bulk.resize(static_cast<std::size_t>(n_bulk));
  for (double& v : p.bulk) v = r.f64();
  p.surf.resize(static_cast<std::size_t>(n_surf));
  for (double& v : p.surf) v = r.f64();
  return p;
}

}  // namespace

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::size_t nb = static_cast<std::size_t>(c.nx) * c.ny;
  const std::size_t ns = 2u * static_cast<std::size_t>(c.nx);
  if (c.phi.bulk.size() != nb || c.phi.surf.size() != ns ||
      c.mu.bulk.size() != nb || c.mu.surf.size() != ns ||
      c.theta.size() != ns)
    throw CheckpointError("restart record fields do not match its extents");

  std::vector<unsigned char> b;
  b.reserve(64 + 8 * (2 * (nb + ns) + ns));
  b.insert(b.end(), kMagic, kMagic + 4);
  put_u32(b, kVersion);
  put_f64(b, c.lx);
  put_i32(b, c.nx);
  put_i32(b, c.ny);
  put_u64(b, c.params_hash);
  put_f64(b, c.t);
  put_u64(b, c.step);
  put_u8(b, c.stationary ? 1 : 0);
  put_f64(b, c.mu_infty);
  put_f64(b, c.mean_target);
  put_pair(b, c.phi);
  put_pair(b, c.mu);
  for (double v : c.theta) put_f64(b, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw CheckpointError("short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
  Reader r{b};

  r.need(4);
  if (std::memcmp(b.data(), kMagic, 4) != 0)
    throw CheckpointError("'" + path + "' is not a restart record");
  r.pos = 4;
  const std::uint32_t ver = r.u32();
  if (ver != kVersion)
    throw CheckpointError("restart record version " + std::to_string(ver) +
                          " unsupported (expected " + std::to_string(kVersion) +
                          ")");

  Checkpoint c;
  c.lx = r.f64();
  c.nx = r.i32();
  c.ny = r.i32();
  if (c.nx < 4 || c.ny < 3 || c.nx > (1 << 20) || c.ny > (1 << 20))
    throw CheckpointError("restart record has implausible extents");
  c.params_hash = r.u64();
  c.t = r.f64();
  c.step = r.u64();
  c.stationary = r.u8() != 0;
  c.mu_infty = r.f64();
  c.mean_target = r.f64();
  const int nb = c.nx * c.ny;
  const int ns = 2 * c.nx;
  c.phi = get_pair(r, nb, ns);
  c.mu = get_pair(r, nb, ns);
  c.theta.resize(static_cast<std::size_t>(ns));
  for (double& v : c.theta) v = r.f64();
  if (r.pos != b.size())
    throw CheckpointError("restart record has " +
                          std::to_string(b.size() - r.pos) +
                          " trailing bytes");
  return c;
}

void require_compatible(const Checkpoint& c, const SlabGrid& g,
                        std::uint64_t params_hash) {
  std::ostringstream os;
  if (c.nx != g.nx || c.ny != g.ny || c.lx != g.lx) {
    os << "restart record grid (lx=" << c.lx << ", " << c.nx << "x" << c.ny
       << ") does not match the configured grid (lx=" << g.lx << ", " << g.nx
       << "x" << g.ny << ")";
    throw CheckpointError(os.str());
  }
  if (c.params_hash != params_hash)
    throw CheckpointError(
        "restart record was produced under different model parameters");
}

}  // namespace chbs
