#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sensorsched/psd.hpp"

namespace sensorsched {

using IntegerMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridAlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Resolution `epsilon` and trace budget `gamma` of the covariance mesh.
struct MeshConfig {
  int n = 1;
  double epsilon = 1.0;
  double gamma = 1.0;

  /// Largest admissible integer trace, floor(gamma / epsilon + 1e-12).
  int TraceBudget() const;
  /// Throws std::invalid_argument for n < 1, epsilon <= 0 or gamma <= 0.
  void Validate() const;

  friend bool operator==(const MeshConfig&, const MeshConfig&) = default;
};

/// Order-preserving packing of the upper triangle of an integer symmetric
/// matrix (row-major: z00, z01, .., z0n, z11, ..) into one 64-bit word. Each
/// entry is stored biased by the trace budget, most significant first, so the
/// numeric order of keys is the lexicographic order of the integer tuples.
class KeyCodec {
 public:
  KeyCodec() = default;
  /// Throws CapacityError when n(n+1)/2 fields of the required width do not
  /// fit in 64 bits.
  KeyCodec(int n, int budget);

  int n() const { return n_; }
  int budget() const { return budget_; }
  int bits_per_entry() const { return bits_; }

  /// Key of an integer symmetric matrix, or nullopt if some entry is outside
  /// [-budget, budget].
  std::optional<std::uint64_t> Encode(
      const Eigen::Ref<const IntegerMatrix>& z) const;
  IntegerMatrix Decode(std::uint64_t key) const;

 private:
  int n_ = 0;
  int budget_ = 0;
  int bits_ = 0;
};

struct EnumerationOptions {
  /// Refuse meshes with more points than this.
  std::uint64_t max_points = 200'000'000;
  int threads = 1;
};

/// The finite set {εZ : Z integer symmetric, Z ⪰ 0, Tr(εZ) ≤ γ}, ordered by
/// integer key. Immutable once built.
class Mesh {
 public:
  /// Brute-force enumeration. Diagonals are enumerated first, then
  /// off-diagonal entries bounded by z_ij² ≤ z_ii z_jj, with exact integer
  /// principal-minor checks as each column is completed. A counting pass
  /// runs before any allocation so that oversize meshes raise CapacityError
  /// early.
  static Mesh Enumerate(const MeshConfig& config,
                        const EnumerationOptions& options = {});

  /// Exact count without materializing the mesh.
  static std::uint64_t Count(const MeshConfig& config,
                             const EnumerationOptions& options = {});

  /// Rebuilds a mesh from sorted keys (e.g. read from an artifact). Throws
  /// std::invalid_argument unless keys are strictly increasing and every key
  /// decodes to an admissible point.
  static Mesh FromKeys(const MeshConfig& config, std::vector<std::uint64_t> keys);

  const MeshConfig& config() const { return config_; }
  const KeyCodec& codec() const { return codec_; }
  std::size_t size() const { return keys_.size(); }
  std::span<const std::uint64_t> keys() const { return keys_; }

  IntegerMatrix IntegerPoint(std::size_t index) const;
  /// ε · IntegerPoint(index).
  Eigen::MatrixXd Point(std::size_t index) const;
  CovarianceMatrix CovariancePoint(std::size_t index) const;

  std::optional<std::size_t> Find(std::uint64_t key) const;
  /// Index of the integer point `z`, or nullopt when z is not in the mesh.
  std::optional<std::size_t> FindInteger(
      const Eigen::Ref<const IntegerMatrix>& z) const;
  /// Index of the mesh point equal to `p`. Throws GridAlignmentError when
  /// some entry is farther than 1e-9·ε from a multiple of ε; returns nullopt
  /// for aligned matrices outside the mesh (e.g. trace above γ).
  std::optional<std::size_t> Lookup(const Eigen::Ref<const Eigen::MatrixXd>& p) const;
  std::optional<std::size_t> Lookup(const CovarianceMatrix& p) const {
    return Lookup(p.matrix());
  }

  /// FNV-1a digest over the configuration and all keys.
  std::uint64_t IdentityHash() const { return identity_hash_; }

 private:
  Mesh(MeshConfig config, KeyCodec codec, std::vector<std::uint64_t> keys);

  MeshConfig config_;
  KeyCodec codec_;
  std::vector<std::uint64_t> keys_;
  std::uint64_t identity_hash_ = 0;
};

/// True iff the integer symmetric matrix is PSD, decided exactly by
/// nonnegativity of every principal minor.
bool IsIntegerPsd(const Eigen::Ref<const IntegerMatrix>& z);

/// Entrywise round(P / ε), half away from zero.
IntegerMatrix RoundToGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                          double epsilon);

/// Θ(P) = ε·round(P/ε) + εnI as an integer matrix (divide by ε).
IntegerMatrix ThetaGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                        double epsilon);

/// Θ″(P) = ε·round(P/ε + t*I) as an integer matrix, where t* is the smallest
/// shift in [0, n] whose rounded matrix dominates P. Only shifts at which some
/// rounded diagonal entry changes are candidates, so the search is exact.
IntegerMatrix ThetaPPGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                          double epsilon);

CovarianceMatrix QuantizeTheta(const CovarianceMatrix& p, const MeshConfig& config);
CovarianceMatrix QuantizeThetaPP(const CovarianceMatrix& p,
                                 const MeshConfig& config);
/// Ω(P) = P + 2εnI.
CovarianceMatrix InflateOmega(const CovarianceMatrix& p, const MeshConfig& config);

struct MeshArtifact {
  Mesh mesh;
  std::uint64_t source_hash = 0;
};

/// Binary format, little-endian:
///   "SSMESH\0\0" | u32 version | u32 n | f64 epsilon | f64 gamma |
///   u32 budget | u32 bits_per_entry | u64 source_hash | u64 cardinality |
///   u64 key[cardinality] | u64 identity_hash
void WriteMesh(std::ostream& out, const Mesh& mesh, std::uint64_t source_hash = 0);
/// Throws std::runtime_error on malformed input or a digest mismatch.
MeshArtifact ReadMesh(std::istream& in);

}  // namespace sensorsched
