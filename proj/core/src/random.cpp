#include "dtwin/random.hpp"

namespace dtwin {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = splitmix64(master);
  for (auto part : {a, b, c, d}) h = splitmix64(h ^ splitmix64(part + 0x632BE59BD9B4E019ULL));
  return h;
}

double RandomStream::normal(double mean, double stddev) {
  return mean + stddev * normal_(engine_);
}

}  // namespace dtwin
