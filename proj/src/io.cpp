#include "ddcrec/io.h"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ddcrec {

namespace fs = std::filesystem;

namespace {

void put_f32_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing artifact " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_embeddings(const fs::path& path, const EmbeddingHeader& header, const Matrix& users,
                      const Matrix& items) {
  if (users.rows() != header.num_users || items.rows() != header.num_items ||
      users.cols() != header.dim || items.cols() != header.dim) {
    throw std::invalid_argument("embedding header does not match tables");
  }
  nlohmann::json h = {{"num_users", header.num_users},
                      {"num_items", header.num_items},
                      {"d", header.dim},
                      {"backbone", header.backbone},
                      {"seed", header.seed}};
  std::string out = h.dump() + "\n";
  out.reserve(out.size() + 4 * header.dim * (header.num_users + header.num_items));
  for (double v : users.values()) put_f32_le(out, v);
  for (double v : items.values()) put_f32_le(out, v);
  write_file_atomic(path, out);
}

EmbeddingDump read_embeddings(const fs::path& path) {
  const std::string raw = read_file(path);
  const auto nl = raw.find('\n');
  if (nl == std::string::npos) throw DataError(path.string() + ": missing embedding header");
  EmbeddingDump dump;
  try {
    const auto h = nlohmann::json::parse(raw.substr(0, nl));
    dump.header.num_users = h.at("num_users").get<std::size_t>();
    dump.header.num_items = h.at("num_items").get<std::size_t>();
    dump.header.dim = h.at("d").get<std::size_t>();
    dump.header.backbone = h.at("backbone").get<std::string>();
    dump.header.seed = h.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad embedding header: " + e.what());
  }
  const auto& hd = dump.header;
  const std::size_t expected = 4 * hd.dim * (hd.num_users + hd.num_items);
  const std::size_t payload = raw.size() - nl - 1;
  if (payload != expected) {
    throw DataError(path.string() + ": payload has " + std::to_string(payload) +
                    " bytes, header implies " + std::to_string(expected));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data() + nl + 1);
  dump.users = Matrix(hd.num_users, hd.dim);
  dump.items = Matrix(hd.num_items, hd.dim);
  for (double& v : dump.users.values()) {
    v = get_f32_le(p);
    p += 4;
  }
  for (double& v : dump.items.values()) {
    v = get_f32_le(p);
    p += 4;
  }
  return dump;
}

std::string format_split_tsv(const std::vector<Interaction>& xs) {
  std::string out;
  out.reserve(xs.size() * 12);
  for (const auto& x : xs) {
    out += std::to_string(x.user);
    out += '\t';
    out += std::to_string(x.item);
    out += '\n';
  }
  return out;
}

std::vector<Interaction> parse_split_tsv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    Interaction x;
    const char* end = line.data() + line.size();
    const auto r1 = std::from_chars(line.data(), line.data() + tab, x.user);
    const auto r2 = tab == std::string::npos
                        ? std::from_chars_result{end, std::errc::invalid_argument}
                        : std::from_chars(line.data() + tab + 1, end, x.item);
    if (tab == std::string::npos || r1.ec != std::errc{} || r2.ec != std::errc{}) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed split line");
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace ddcrec
