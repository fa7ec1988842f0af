#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace slr {

// Thin wrapper around mt19937_64 so every randomized path is seeded explicitly.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(gen);
    }
    double normal(double mean, double sigma) {
        if (sigma == 0.0) return mean;
        return std::normal_distribution<double>(mean, sigma)(gen);
    }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen);
    }
    bool bernoulli(double p) {
        return std::bernoulli_distribution(p)(gen);
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen);
    }
    // Derive an independent stream (for per-epoch / per-component seeding).
    std::uint64_t fork() { return gen(); }
};

}  // namespace slr
