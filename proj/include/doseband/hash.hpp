#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace doseband {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the k-th independent stream under a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
  return splitmix64(splitmix64(root) ^ (k + 0x632be59bd9b4e019ULL));
}

class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::span<const double> values) {
    update(values.data(), values.size_bytes());
  }
  void update(double v) { update(&v, sizeof v); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace doseband
