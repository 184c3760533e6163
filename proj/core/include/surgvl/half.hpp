// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// IEEE 754 binary16 conversion. Narrowing rounds to nearest, ties to even;
// widening to double is exact.

#pragma once

#include <cstdint>

namespace surgvl {

std::uint16_t double_to_half(double x);
double half_to_double(std::uint16_t bits);

/// Round-trip through binary16.
inline double round_to_half(double x) { return half_to_double(double_to_half(x)); }

}  // namespace surgvl
