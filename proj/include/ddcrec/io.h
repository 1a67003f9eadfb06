#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"

namespace ddcrec {

// A required artifact of an earlier pipeline stage is missing.
class DependencyError : public DataError {
 public:
  using DataError::DataError;
};

struct EmbeddingHeader {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 0;
  std::string backbone;
  std::uint64_t seed = 0;
};

struct EmbeddingDump {
  EmbeddingHeader header;
  Matrix users;
  Matrix items;
};

// One line of JSON header, then little-endian float32 rows: users, then items.
void write_embeddings(const std::filesystem::path& path, const EmbeddingHeader& header,
                      const Matrix& users, const Matrix& items);
EmbeddingDump read_embeddings(const std::filesystem::path& path);

// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// `user<TAB>item` with dense integer ids.
std::string format_split_tsv(const std::vector<Interaction>& xs);
std::vector<Interaction> parse_split_tsv(const std::filesystem::path& path);

}  // namespace ddcrec
