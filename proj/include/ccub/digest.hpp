// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ccub {

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// `n_bytes` of cryptographically secure randomness, hex encoded.
std::string random_token_hex(std::size_t n_bytes);

/// 64-bit FNV-1a, used where a stable non-cryptographic hash of text is needed.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// SplitMix64 finalizer; derives independent seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace ccub
