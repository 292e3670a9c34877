#include "sensorsched/artifact.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "sensorsched/config.hpp"

namespace sensorsched {

namespace fs = std::filesystem;

namespace {

void RefuseExisting(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw ArtifactError(path.string() + " exists (use --force to overwrite)");
  }
}

fs::path TempPath(const fs::path& path) {
  return fs::path(path.string() + ".tmp");
}

void Commit(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ArtifactError("cannot move " + tmp.string() + " to " + path.string() +
                        ": " + ec.message());
  }
}

void EnsureParent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

template <typename Writer>
void WriteAtomically(const fs::path& path, bool force, Writer&& write) {
  RefuseExisting(path, force);
  EnsureParent(path);
  const fs::path tmp = TempPath(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot open " + tmp.string() + " for writing");
    write(out);
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw ArtifactError("write failed: " + tmp.string());
    }
  }
  Commit(tmp, path);
}

std::ifstream OpenForReading(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  return in;
}

}  // namespace

void SaveMesh(const fs::path& path, const Mesh& mesh, std::uint64_t source_hash,
              bool force) {
  WriteAtomically(path, force,
                  [&](std::ostream& out) { WriteMesh(out, mesh, source_hash); });
}

MeshArtifact LoadMesh(const fs::path& path) {
  auto in = OpenForReading(path);
  try {
    return ReadMesh(in);
  } catch (const std::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

void SaveValueTable(const fs::path& path, const ValueTable& table,
                    const SynthesisConfig& config, std::uint64_t source_hash,
                    bool force) {
  WriteAtomically(path, force, [&](std::ostream& out) {
    WriteValueTable(out, table, config, source_hash);
  });
}

ValueTableArtifact LoadValueTable(const fs::path& path,
                                  std::shared_ptr<const Mesh> mesh) {
  auto in = OpenForReading(path);
  try {
    return ReadValueTable(in, std::move(mesh));
  } catch (const std::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

DirectoryLock::DirectoryLock(const fs::path& directory)
    : lock_path_(directory / ".sensorsched.lock") {
  fs::create_directories(directory);
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw ArtifactError(directory.string() +
                          " is locked by another run (remove " +
                          lock_path_.string() + " if stale)");
    }
    throw ArtifactError("cannot create " + lock_path_.string() + ": " +
                        std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(lock_path_, ec);
}

std::uint64_t CsvWriter::SchemaHash(const std::string& schema, int version,
                                    const std::vector<std::string>& columns) {
  std::string text = schema + "\n" + std::to_string(version);
  for (const auto& c : columns) text += "\n" + c;
  return Fnv1a(text);
}

CsvWriter::CsvWriter(const fs::path& path, std::string schema, int version,
                     std::vector<std::string> columns, bool force)
    : path_(path), tmp_path_(TempPath(path)), width_(columns.size()) {
  RefuseExisting(path, force);
  EnsureParent(path);
  out_.open(tmp_path_, std::ios::trunc);
  if (!out_) throw ArtifactError("cannot open " + tmp_path_.string());
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(SchemaHash(schema, version, columns)));
  out_ << "# schema=" << schema << " version=" << version << " hash=" << hash
       << "\n";
  Row(columns);
}

void CsvWriter::Row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) {
    throw std::invalid_argument("CsvWriter: row has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out_ << f;
      continue;
    }
    out_ << '"';
    for (char ch : f) {
      if (ch == '"') out_ << '"';
      out_ << ch;
    }
    out_ << '"';
  }
  out_ << '\n';
}

void CsvWriter::Close() {
  out_.close();
  if (!out_) throw ArtifactError("write failed: " + tmp_path_.string());
  Commit(tmp_path_, path_);
}

std::string FormatFixed(double x, int digits) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::string FormatExact(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace sensorsched
