#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "flsim/errors.hpp"
#include "flsim/mathutil.hpp"
#include "flsim/mlp.hpp"

namespace flsim::nn {

// Parameter checkpoint, version 1. Little-endian binary:
//   magic "FLSIMNN1" | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rows | u32 cols |
//               rows*cols f64 row-major
//   trailing u64 FNV-1a checksum over all f64 payload bytes in file order
struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

inline constexpr char kCheckpointMagic[8] = {'F', 'L', 'S', 'I', 'M', 'N', 'N', '1'};

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ValidationError("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("checkpoint: cannot open for writing: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t checksum = 1469598103934665603ull;
  for (const auto& t : tensors) {
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rows()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        const double v = t.value(r, c);
        checksum = fnv1a64(&v, sizeof(v), checksum);
        detail::write_pod<double>(os, v);
      }
  }
  detail::write_pod<std::uint64_t>(os, checksum);
  if (!os) throw ValidationError("checkpoint: write failed: " + path);
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("checkpoint: cannot open: " + path);
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw ValidationError("checkpoint: bad magic in " + path);
  const auto count = detail::read_pod<std::uint32_t>(is);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  std::uint64_t checksum = 1469598103934665603ull;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ValidationError("checkpoint: truncated name");
    const auto rows = detail::read_pod<std::uint32_t>(is);
    const auto cols = detail::read_pod<std::uint32_t>(is);
    Eigen::MatrixXd value(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        const double v = detail::read_pod<double>(is);
        checksum = fnv1a64(&v, sizeof(v), checksum);
        value(r, c) = v;
      }
    tensors.push_back({std::move(name), std::move(value)});
  }
  const auto stored = detail::read_pod<std::uint64_t>(is);
  if (stored != checksum) throw ValidationError("checkpoint: checksum mismatch in " + path);
  return tensors;
}

// Flatten/restore an Mlp under a name prefix ("policy.l0.W", "policy.l0.b", ...).
inline void append_mlp_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                               const Mlp& net) {
  for (int l = 0; l < net.num_layers(); ++l) {
    out.push_back({prefix + ".l" + std::to_string(l) + ".W", net.weights[l]});
    out.push_back({prefix + ".l" + std::to_string(l) + ".b", net.biases[l]});
  }
}

inline void restore_mlp_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix,
                                Mlp& net) {
  for (int l = 0; l < net.num_layers(); ++l) {
    const std::string wname = prefix + ".l" + std::to_string(l) + ".W";
    const std::string bname = prefix + ".l" + std::to_string(l) + ".b";
    bool found_w = false, found_b = false;
    for (const auto& t : tensors) {
      if (t.name == wname) {
        if (t.value.rows() != net.weights[l].rows() || t.value.cols() != net.weights[l].cols())
          throw ValidationError("checkpoint: shape mismatch for " + wname);
        net.weights[l] = t.value;
        found_w = true;
      } else if (t.name == bname) {
        if (t.value.rows() != net.biases[l].size() || t.value.cols() != 1)
          throw ValidationError("checkpoint: shape mismatch for " + bname);
        net.biases[l] = t.value.col(0);
        found_b = true;
      }
    }
    if (!found_w || !found_b) throw ValidationError("checkpoint: missing tensors for " + prefix);
  }
}

}  // namespace flsim::nn
