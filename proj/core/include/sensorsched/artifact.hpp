#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensorsched/mesh.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched {

/// I/O failure, an existing output without --force, or an artifact that does
/// not belong to the current configuration.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes through a temporary file and renames it into place. Throws
/// ArtifactError if `path` exists and `force` is false.
void SaveMesh(const std::filesystem::path& path, const Mesh& mesh,
              std::uint64_t source_hash, bool force);
MeshArtifact LoadMesh(const std::filesystem::path& path);

void SaveValueTable(const std::filesystem::path& path, const ValueTable& table,
                    const SynthesisConfig& config, std::uint64_t source_hash,
                    bool force);
ValueTableArtifact LoadValueTable(const std::filesystem::path& path,
                                  std::shared_ptr<const Mesh> mesh);

/// Exclusive lock on an output directory, held for the object's lifetime.
/// The directory is created if needed. Throws ArtifactError when another
/// process holds the lock.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& directory);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

/// CSV with a versioned schema line:
///   # schema=<name> version=<v> hash=<16 hex digits>
/// where the hash covers the name, version and column names, so it changes
/// exactly when the columns do.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string schema, int version,
            std::vector<std::string> columns, bool force);

  static std::uint64_t SchemaHash(const std::string& schema, int version,
                                  const std::vector<std::string>& columns);

  /// Fields are quoted when they contain a comma or a quote.
  void Row(const std::vector<std::string>& fields);
  void Close();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_path_;
  std::ofstream out_;
  std::size_t width_;
};

/// Fixed-point formatting with `digits` decimals; "inf" for +inf.
std::string FormatFixed(double x, int digits);
/// Shortest round-trip representation.
std::string FormatExact(double x);

}  // namespace sensorsched
