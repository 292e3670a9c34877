#include "sensorsched/mesh.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "kernels.hpp"

namespace sensorsched {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t FnvMix(std::uint64_t h, std::uint64_t word) {
  for (int b = 0; b < 8; ++b) {
    h ^= (word >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t MeshDigest(const MeshConfig& config,
                         std::span<const std::uint64_t> keys) {
  std::uint64_t h = kFnvOffset;
  h = FnvMix(h, static_cast<std::uint64_t>(config.n));
  h = FnvMix(h, std::bit_cast<std::uint64_t>(config.epsilon));
  h = FnvMix(h, std::bit_cast<std::uint64_t>(config.gamma));
  h = FnvMix(h, keys.size());
  for (auto k : keys) h = FnvMix(h, k);
  return h;
}

// Keys hold n(n+1)/2 fields of at least one bit, so n <= 10.
constexpr int kMaxDim = 10;
using MinorBuffer = std::array<__int128, kMaxDim * kMaxDim>;

// Determinant of a small integer matrix by fraction-free Gaussian
// elimination (Bareiss). Every intermediate is itself a minor, so 128-bit
// arithmetic is ample for mesh-sized entries.
__int128 IntegerDeterminant(MinorBuffer& a, int k) {
  if (k == 0) return 1;
  __int128 prev = 1;
  int sign = 1;
  for (int p = 0; p < k - 1; ++p) {
    if (a[p * k + p] == 0) {
      int swap = -1;
      for (int r = p + 1; r < k; ++r) {
        if (a[r * k + p] != 0) {
          swap = r;
          break;
        }
      }
      if (swap < 0) return 0;
      for (int c = 0; c < k; ++c) std::swap(a[p * k + c], a[swap * k + c]);
      sign = -sign;
    }
    for (int r = p + 1; r < k; ++r) {
      for (int c = p + 1; c < k; ++c) {
        a[r * k + c] =
            (a[r * k + c] * a[p * k + p] - a[r * k + p] * a[p * k + c]) / prev;
      }
    }
    prev = a[p * k + p];
  }
  return sign * a[(k - 1) * k + (k - 1)];
}

__int128 PrincipalMinor(const std::vector<std::int64_t>& z, int n,
                        const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  MinorBuffer a;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) a[r * k + c] = z[idx[r] * n + idx[c]];
  }
  return IntegerDeterminant(a, k);
}

// Enumerates admissible off-diagonal completions for fixed diagonals.
class OffDiagonalSearch {
 public:
  OffDiagonalSearch(int n, const KeyCodec& codec) : n_(n), codec_(codec) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < j; ++i) slots_.emplace_back(i, j);
    }
    // Principal index sets of size >= 3 whose largest element is j; these
    // are checked once column j is complete.
    minors_by_column_.resize(n);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      if (std::popcount(mask) < 3) continue;
      std::vector<int> idx;
      for (int b = 0; b < n; ++b) {
        if (mask & (1u << b)) idx.push_back(b);
      }
      minors_by_column_[idx.back()].push_back(std::move(idx));
    }
    z_.assign(static_cast<std::size_t>(n) * n, 0);
  }

  template <typename Emit>
  void Run(const std::vector<int>& diagonal, Emit&& emit) {
    for (int i = 0; i < n_; ++i) {
      std::fill(z_.begin() + i * n_, z_.begin() + (i + 1) * n_, 0);
      z_[i * n_ + i] = diagonal[i];
    }
    Recurse(0, emit);
  }

 private:
  template <typename Emit>
  void Recurse(std::size_t slot, Emit& emit) {
    if (slot == slots_.size()) {
      emit(z_);
      return;
    }
    const auto [i, j] = slots_[slot];
    const std::int64_t dii = z_[i * n_ + i];
    const std::int64_t djj = z_[j * n_ + j];
    auto bound = static_cast<std::int64_t>(
        std::sqrt(static_cast<double>(dii * djj)));
    while (bound * bound > dii * djj) --bound;
    while ((bound + 1) * (bound + 1) <= dii * djj) ++bound;
    const bool closes_column = (i == j - 1);
    for (std::int64_t v = -bound; v <= bound; ++v) {
      z_[i * n_ + j] = v;
      z_[j * n_ + i] = v;
      if (closes_column && !ColumnMinorsOk(j)) continue;
      Recurse(slot + 1, emit);
    }
    z_[i * n_ + j] = 0;
    z_[j * n_ + i] = 0;
  }

  bool ColumnMinorsOk(int j) const {
    for (const auto& idx : minors_by_column_[j]) {
      if (PrincipalMinor(z_, n_, idx) < 0) return false;
    }
    return true;
  }

  int n_;
  const KeyCodec& codec_;
  std::vector<std::pair<int, int>> slots_;
  std::vector<std::vector<std::vector<int>>> minors_by_column_;
  std::vector<std::int64_t> z_;
};

void DiagonalTuples(int n, int budget, std::vector<int>& current, int remaining,
                    std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == n) {
    out.push_back(current);
    return;
  }
  for (int d = 0; d <= remaining; ++d) {
    current.push_back(d);
    DiagonalTuples(n, budget, current, remaining - d, out);
    current.pop_back();
  }
}

std::uint64_t EncodeFlat(const std::vector<std::int64_t>& z, int n,
                         const KeyCodec& codec) {
  const int bits = codec.bits_per_entry();
  std::uint64_t key = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      key = (key << bits) |
            static_cast<std::uint64_t>(z[i * n + j] + codec.budget());
    }
  }
  return key;
}

// Runs `body(worker, diagonal)` over all diagonal tuples, partitioned
// round-robin across `threads` workers.
template <typename Body>
void ForEachDiagonal(const std::vector<std::vector<int>>& diagonals,
                     int threads, Body&& body) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (const auto& d : diagonals) body(0, d);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < diagonals.size(); k += threads) {
        body(w, diagonals[k]);
      }
    });
  }
}

std::vector<std::vector<int>> AllDiagonals(const MeshConfig& config) {
  std::vector<std::vector<int>> diagonals;
  std::vector<int> current;
  DiagonalTuples(config.n, config.TraceBudget(), current, config.TraceBudget(),
                 diagonals);
  return diagonals;
}

}  // namespace

int MeshConfig::TraceBudget() const {
  return static_cast<int>(std::floor(gamma / epsilon + 1e-12));
}

void MeshConfig::Validate() const {
  if (n < 1) throw std::invalid_argument("MeshConfig: n must be >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("MeshConfig: epsilon must be positive");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("MeshConfig: gamma must be positive");
  }
  if (gamma / epsilon > 1e6) {
    throw CapacityError("MeshConfig: gamma / epsilon is unreasonably large");
  }
}

KeyCodec::KeyCodec(int n, int budget) : n_(n), budget_(budget) {
  bits_ = std::max(1, static_cast<int>(std::bit_width(
                          static_cast<std::uint64_t>(2 * budget))));
  const int fields = n * (n + 1) / 2;
  if (fields * bits_ > 64) {
    throw CapacityError("KeyCodec: " + std::to_string(fields) + " entries of " +
                        std::to_string(bits_) +
                        " bits do not fit in a 64-bit key");
  }
}

std::optional<std::uint64_t> KeyCodec::Encode(
    const Eigen::Ref<const IntegerMatrix>& z) const {
  if (z.rows() != n_ || z.cols() != n_) {
    throw DimensionError("KeyCodec::Encode: dimension mismatch");
  }
  std::uint64_t key = 0;
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) {
      const std::int64_t v = z(i, j);
      if (v < -budget_ || v > budget_) return std::nullopt;
      key = (key << bits_) | static_cast<std::uint64_t>(v + budget_);
    }
  }
  return key;
}

IntegerMatrix KeyCodec::Decode(std::uint64_t key) const {
  IntegerMatrix z(n_, n_);
  const std::uint64_t field_mask = (bits_ == 64) ? ~0ULL : ((1ULL << bits_) - 1);
  for (int i = n_ - 1; i >= 0; --i) {
    for (int j = n_ - 1; j >= i; --j) {
      const auto v = static_cast<std::int64_t>(key & field_mask) - budget_;
      z(i, j) = v;
      z(j, i) = v;
      key = (bits_ == 64) ? 0 : (key >> bits_);
    }
  }
  return z;
}

Mesh::Mesh(MeshConfig config, KeyCodec codec, std::vector<std::uint64_t> keys)
    : config_(config), codec_(codec), keys_(std::move(keys)) {
  identity_hash_ = MeshDigest(config_, keys_);
}

std::uint64_t Mesh::Count(const MeshConfig& config,
                          const EnumerationOptions& options) {
  config.Validate();
  const KeyCodec codec(config.n, config.TraceBudget());
  const auto diagonals = AllDiagonals(config);
  const int threads = std::max(1, options.threads);
  std::atomic<std::uint64_t> total{0};
  std::atomic<bool> over{false};
  ForEachDiagonal(diagonals, threads, [&](int, const std::vector<int>& d) {
    if (over.load(std::memory_order_relaxed)) return;
    OffDiagonalSearch search(config.n, codec);
    std::uint64_t local = 0;
    search.Run(d, [&](const std::vector<std::int64_t>&) { ++local; });
    if (total.fetch_add(local) + local > options.max_points) over = true;
  });
  if (over) {
    throw CapacityError("mesh cardinality exceeds the cap of " +
                        std::to_string(options.max_points) + " points");
  }
  return total;
}

Mesh Mesh::Enumerate(const MeshConfig& config,
                     const EnumerationOptions& options) {
  const std::uint64_t count = Count(config, options);
  const KeyCodec codec(config.n, config.TraceBudget());
  const auto diagonals = AllDiagonals(config);
  const int threads = std::max(1, options.threads);

  std::vector<std::vector<std::uint64_t>> buffers(threads);
  if (threads == 1) buffers[0].reserve(count);
  ForEachDiagonal(diagonals, threads, [&](int w, const std::vector<int>& d) {
    OffDiagonalSearch search(config.n, codec);
    search.Run(d, [&](const std::vector<std::int64_t>& z) {
      buffers[w].push_back(EncodeFlat(z, config.n, codec));
    });
  });

  std::vector<std::uint64_t> keys;
  if (threads == 1) {
    keys = std::move(buffers[0]);
  } else {
    keys.reserve(count);
    for (auto& b : buffers) {
      keys.insert(keys.end(), b.begin(), b.end());
      std::vector<std::uint64_t>().swap(b);
    }
  }
  std::sort(keys.begin(), keys.end());
  return Mesh(config, codec, std::move(keys));
}

Mesh Mesh::FromKeys(const MeshConfig& config, std::vector<std::uint64_t> keys) {
  config.Validate();
  const KeyCodec codec(config.n, config.TraceBudget());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && keys[i] <= keys[i - 1]) {
      throw std::invalid_argument("Mesh::FromKeys: keys not strictly increasing");
    }
    const IntegerMatrix z = codec.Decode(keys[i]);
    if (z.trace() > codec.budget() || (z.diagonal().array() < 0).any() ||
        codec.Encode(z) != keys[i]) {
      throw std::invalid_argument("Mesh::FromKeys: key outside the mesh");
    }
  }
  return Mesh(config, codec, std::move(keys));
}

IntegerMatrix Mesh::IntegerPoint(std::size_t index) const {
  return codec_.Decode(keys_.at(index));
}

Eigen::MatrixXd Mesh::Point(std::size_t index) const {
  return config_.epsilon * IntegerPoint(index).cast<double>();
}

CovarianceMatrix Mesh::CovariancePoint(std::size_t index) const {
  return CovarianceMatrix(Point(index));
}

std::optional<std::size_t> Mesh::Find(std::uint64_t key) const {
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

std::optional<std::size_t> Mesh::FindInteger(
    const Eigen::Ref<const IntegerMatrix>& z) const {
  if (z.rows() != config_.n || z.cols() != config_.n) {
    throw DimensionError("Mesh::FindInteger: dimension mismatch");
  }
  if (z.trace() > codec_.budget()) return std::nullopt;
  const auto key = codec_.Encode(z);
  if (!key) return std::nullopt;
  return Find(*key);
}

std::optional<std::size_t> Mesh::Lookup(
    const Eigen::Ref<const Eigen::MatrixXd>& p) const {
  if (p.rows() != config_.n || p.cols() != config_.n) {
    throw DimensionError("Mesh::Lookup: dimension mismatch");
  }
  const IntegerMatrix z = RoundToGrid(p, config_.epsilon);
  const double eps = config_.epsilon;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (std::abs(p(i, j) - eps * static_cast<double>(z(i, j))) > 1e-9 * eps) {
        throw GridAlignmentError("Mesh::Lookup: entry (" + std::to_string(i) +
                                 "," + std::to_string(j) +
                                 ") is not a multiple of epsilon");
      }
    }
  }
  if (z != z.transpose()) {
    throw GridAlignmentError("Mesh::Lookup: matrix is not symmetric");
  }
  return FindInteger(z);
}

bool IsIntegerPsd(const Eigen::Ref<const IntegerMatrix>& z) {
  const int n = static_cast<int>(z.rows());
  if (z.cols() != n) throw DimensionError("IsIntegerPsd: non-square input");
  if (z != z.transpose()) return false;
  std::vector<std::int64_t> flat(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) flat[i * n + j] = z(i, j);
  }
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> idx;
    for (int b = 0; b < n; ++b) {
      if (mask & (1u << b)) idx.push_back(b);
    }
    if (PrincipalMinor(flat, n, idx) < 0) return false;
  }
  return true;
}

IntegerMatrix RoundToGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                          double epsilon) {
  return detail::RoundScaled<Eigen::Dynamic>(p, epsilon);
}

IntegerMatrix ThetaGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                        double epsilon) {
  return detail::ThetaGrid<Eigen::Dynamic>(p, epsilon);
}

IntegerMatrix ThetaPPGrid(const Eigen::Ref<const Eigen::MatrixXd>& p,
                          double epsilon) {
  return detail::DispatchDim(
      static_cast<int>(p.rows()), [&](auto dim) -> IntegerMatrix {
        constexpr int N = decltype(dim)::value;
        return detail::ThetaPPGrid<N>(detail::Fixed<N>(p), epsilon);
      });
}

CovarianceMatrix QuantizeTheta(const CovarianceMatrix& p,
                               const MeshConfig& config) {
  return CovarianceMatrix(config.epsilon *
                          ThetaGrid(p.matrix(), config.epsilon).cast<double>());
}

CovarianceMatrix QuantizeThetaPP(const CovarianceMatrix& p,
                                 const MeshConfig& config) {
  return CovarianceMatrix(config.epsilon *
                          ThetaPPGrid(p.matrix(), config.epsilon).cast<double>());
}

CovarianceMatrix InflateOmega(const CovarianceMatrix& p,
                              const MeshConfig& config) {
  const int n = p.dim();
  return CovarianceMatrix(p.matrix() + 2.0 * config.epsilon * n *
                                           Eigen::MatrixXd::Identity(n, n));
}

namespace {

constexpr char kMeshMagic[8] = {'S', 'S', 'M', 'E', 'S', 'H', 0, 0};
constexpr std::uint32_t kMeshVersion = 1;

template <typename T>
void Put(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("mesh artifact: unexpected end of input");
  }
  return value;
}

}  // namespace

void WriteMesh(std::ostream& out, const Mesh& mesh, std::uint64_t source_hash) {
  out.write(kMeshMagic, sizeof(kMeshMagic));
  Put<std::uint32_t>(out, kMeshVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.config().n));
  Put<double>(out, mesh.config().epsilon);
  Put<double>(out, mesh.config().gamma);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.codec().budget()));
  Put<std::uint32_t>(out,
                     static_cast<std::uint32_t>(mesh.codec().bits_per_entry()));
  Put<std::uint64_t>(out, source_hash);
  Put<std::uint64_t>(out, mesh.size());
  out.write(reinterpret_cast<const char*>(mesh.keys().data()),
            static_cast<std::streamsize>(mesh.size() * sizeof(std::uint64_t)));
  Put<std::uint64_t>(out, mesh.IdentityHash());
  if (!out) throw std::runtime_error("mesh artifact: write failed");
}

MeshArtifact ReadMesh(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMeshMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("mesh artifact: bad magic");
  }
  if (Get<std::uint32_t>(in) != kMeshVersion) {
    throw std::runtime_error("mesh artifact: unsupported version");
  }
  MeshConfig config;
  config.n = static_cast<int>(Get<std::uint32_t>(in));
  config.epsilon = Get<double>(in);
  config.gamma = Get<double>(in);
  const auto budget = Get<std::uint32_t>(in);
  const auto bits = Get<std::uint32_t>(in);
  const auto source_hash = Get<std::uint64_t>(in);
  const auto count = Get<std::uint64_t>(in);
  config.Validate();
  const KeyCodec codec(config.n, config.TraceBudget());
  if (static_cast<int>(budget) != codec.budget() ||
      static_cast<int>(bits) != codec.bits_per_entry()) {
    throw std::runtime_error("mesh artifact: header inconsistent with config");
  }
  std::vector<std::uint64_t> keys(count);
  if (!in.read(reinterpret_cast<char*>(keys.data()),
               static_cast<std::streamsize>(count * sizeof(std::uint64_t)))) {
    throw std::runtime_error("mesh artifact: truncated key block");
  }
  const auto digest = Get<std::uint64_t>(in);
  std::optional<Mesh> rebuilt;
  try {
    rebuilt.emplace(Mesh::FromKeys(config, std::move(keys)));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("mesh artifact: ") + e.what());
  }
  Mesh& mesh = *rebuilt;
  if (mesh.IdentityHash() != digest) {
    throw std::runtime_error("mesh artifact: digest mismatch");
  }
  return MeshArtifact{std::move(mesh), source_hash};
}

}  // namespace sensorsched
