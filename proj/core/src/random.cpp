#include "able/random.hpp"

#include <cstring>

namespace able {

std::uint64_t hash_vector(const Vector& v) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    const double value = v(i) == 0.0 ? 0.0 : v(i);  // fold -0.0 into +0.0
    std::memcpy(&bits, &value, sizeof(bits));
    h = mix64(h ^ bits);
  }
  return h;
}

Vector gaussian_vector(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace able
