#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ntg {

// Deterministic splitmix64 generator. Everything random in the repo goes
// through this type so that runs are reproducible bit-for-bit across
// platforms; std:: distributions are implementation-defined and not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (no cached spare, keeps state linear)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // uniform index in [0, n); modulo bias is irrelevant at desk scale
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }

 private:
  std::uint64_t state_;
};

// Deterministic per-component seed expansion: hash a label into the root seed
// (FNV-1a) so that e.g. "interpreter" and "gcn" streams never collide.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ root;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= root >> 17;
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t salt) {
  return derive_seed(derive_seed(root, label) + 0x9e3779b97f4a7c15ULL * (salt + 1), label);
}

}  // namespace ntg
