#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace plcr {

// FNV-1a, 64-bit. Used for parameter checksums (freeze contract) and config
// fingerprints.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(const Eigen::MatrixXd& m) {
    // Row-major traversal so the digest is independent of Eigen's storage
    // order.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v = m(r, c);
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        update(&bits, sizeof bits);
      }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace plcr
