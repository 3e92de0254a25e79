#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace skillos {

using Embedding = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scales `v` to unit length in place. Zero vectors are left untouched.
void normalize(Embedding& v);

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace skillos
