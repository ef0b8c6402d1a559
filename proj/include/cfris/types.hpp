#pragma once

#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace cfris {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// RNG stream key: (seed, stream index) pairs feed a std::seed_seq.
struct Seed {
    std::uint64_t value = 0;
    std::uint64_t stream = 0;
    Seed child(std::uint64_t index) const { return Seed{value, stream * 1000003ULL + index + 1}; }
};

inline std::mt19937_64 make_engine(const Seed& seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                      static_cast<std::uint32_t>(seed.stream), static_cast<std::uint32_t>(seed.stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace cfris
