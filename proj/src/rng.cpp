#include "rotdiff/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rotdiff {

namespace {
uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

RngState RngState::derive(uint64_t seed, uint64_t stream) {
  return RngState(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51ed270b7a4fc1e5ull)));
}

double RngState::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RngState::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1ull;
  return lo + static_cast<int>(next_u64() % span);
}

std::string RngState::state_string() const {
  std::ostringstream ss;
  ss << gen_;
  return ss.str();
}

void RngState::set_state_string(const std::string& s) {
  std::istringstream ss(s);
  ss >> gen_;
  if (ss.fail()) throw std::invalid_argument("RngState: malformed state string");
}

}  // namespace rotdiff
